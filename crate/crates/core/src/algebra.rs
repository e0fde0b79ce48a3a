//! Finite-dimensional C*-algebras `M_{n_1} ⊕ … ⊕ M_{n_K}` carrying a
//! faithful trace `τ(a) = Σ c_k Tr(a_k)`.
//!
//! Elements have a canonical coordinate vector in the matrix-unit basis,
//! ordered block by block and row-major inside each block. Every linear
//! structure in the crate (module actions, pairings, superoperators) is
//! indexed by this basis.

use std::ops::{Add, Mul, Neg, Sub};

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Result, StarError};
use crate::linalg::{self, c, CMat, CVec, ONE, ZERO};

pub const DEFAULT_TOL: f64 = 1e-9;

/// Index of a matrix unit `e^k_{ij}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct UnitIndex {
    pub block: usize,
    pub row: usize,
    pub col: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlgebraSpec {
    pub blocks: Vec<usize>,
    pub trace_weights: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CStarAlgebra {
    block_dims: Vec<usize>,
    trace_weights: Vec<f64>,
    offsets: Vec<usize>,
    units: Vec<UnitIndex>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AlgElement {
    blocks: Vec<CMat>,
}

impl CStarAlgebra {
    pub fn new(block_dims: &[usize], trace_weights: &[f64]) -> Result<Self> {
        if block_dims.len() != trace_weights.len() {
            return Err(StarError::ShapeMismatch(format!(
                "{} blocks but {} trace weights",
                block_dims.len(),
                trace_weights.len()
            )));
        }
        if block_dims.is_empty() {
            return Err(StarError::ShapeMismatch("algebra needs at least one block".into()));
        }
        if let Some(k) = block_dims.iter().position(|&n| n == 0) {
            return Err(StarError::NonPositiveDimension(k));
        }
        if let Some(k) = trace_weights.iter().position(|&w| !(w > 0.0 && w.is_finite())) {
            return Err(StarError::NonPositiveWeight { block: k, weight: trace_weights[k] });
        }
        let mut offsets = Vec::with_capacity(block_dims.len());
        let mut units = Vec::new();
        let mut at = 0;
        for (k, &n) in block_dims.iter().enumerate() {
            offsets.push(at);
            for row in 0..n {
                for col in 0..n {
                    units.push(UnitIndex { block: k, row, col });
                }
            }
            at += n * n;
        }
        Ok(Self {
            block_dims: block_dims.to_vec(),
            trace_weights: trace_weights.to_vec(),
            offsets,
            units,
        })
    }

    /// `M_n` with the standard trace.
    pub fn full_matrix(n: usize) -> Result<Self> {
        Self::new(&[n], &[1.0])
    }

    /// `ℂ^n` with the counting trace.
    pub fn commutative(n: usize) -> Result<Self> {
        Self::new(&vec![1; n], &vec![1.0; n])
    }

    pub fn from_spec(spec: &AlgebraSpec) -> Result<Self> {
        Self::new(&spec.blocks, &spec.trace_weights)
    }

    pub fn spec(&self) -> AlgebraSpec {
        AlgebraSpec { blocks: self.block_dims.clone(), trace_weights: self.trace_weights.clone() }
    }

    pub fn block_dims(&self) -> &[usize] {
        &self.block_dims
    }

    pub fn trace_weights(&self) -> &[f64] {
        &self.trace_weights
    }

    pub fn num_blocks(&self) -> usize {
        self.block_dims.len()
    }

    /// Complex dimension `Σ n_k²`.
    pub fn dim(&self) -> usize {
        self.units.len()
    }

    pub fn is_commutative(&self) -> bool {
        self.block_dims.iter().all(|&n| n == 1)
    }

    pub fn unit_index(&self, alpha: usize) -> UnitIndex {
        self.units[alpha]
    }

    pub fn index_of(&self, block: usize, row: usize, col: usize) -> usize {
        self.offsets[block] + row * self.block_dims[block] + col
    }

    /// Basis index of `u_alpha*`.
    pub fn star_index(&self, alpha: usize) -> usize {
        let u = self.units[alpha];
        self.index_of(u.block, u.col, u.row)
    }

    /// Basis index of `u_alpha u_beta`, or `None` when the product vanishes.
    pub fn unit_product(&self, alpha: usize, beta: usize) -> Option<usize> {
        let a = self.units[alpha];
        let b = self.units[beta];
        (a.block == b.block && a.col == b.row).then(|| self.index_of(a.block, a.row, b.col))
    }

    /// `τ(u_alpha)`.
    pub fn unit_trace(&self, alpha: usize) -> f64 {
        let u = self.units[alpha];
        if u.row == u.col {
            self.trace_weights[u.block]
        } else {
            0.0
        }
    }

    /// Basis indices of a generating set of the algebra: `e^k_{11}` and the
    /// nearest-neighbour off-diagonal units of every block. A property of
    /// linear maps that is closed under products and linear combinations
    /// holds for all elements once it holds on these.
    pub fn generators(&self) -> Vec<usize> {
        let mut out = Vec::new();
        for (k, &n) in self.block_dims.iter().enumerate() {
            out.push(self.index_of(k, 0, 0));
            for j in 0..n.saturating_sub(1) {
                out.push(self.index_of(k, j, j + 1));
                out.push(self.index_of(k, j + 1, j));
            }
        }
        out
    }

    pub fn zero(&self) -> AlgElement {
        AlgElement { blocks: self.block_dims.iter().map(|&n| CMat::zeros(n, n)).collect() }
    }

    pub fn identity(&self) -> AlgElement {
        AlgElement { blocks: self.block_dims.iter().map(|&n| CMat::identity(n, n)).collect() }
    }

    pub fn unit(&self, alpha: usize) -> AlgElement {
        let u = self.units[alpha];
        let mut e = self.zero();
        e.blocks[u.block][(u.row, u.col)] = ONE;
        e
    }

    pub fn element(&self, blocks: Vec<CMat>) -> Result<AlgElement> {
        let e = AlgElement { blocks };
        self.check(&e)?;
        Ok(e)
    }

    /// Block-diagonal element with `blocks[k] = λ_k · I`.
    pub fn central(&self, scalars: &[Complex64]) -> AlgElement {
        AlgElement {
            blocks: self
                .block_dims
                .iter()
                .zip(scalars)
                .map(|(&n, &s)| CMat::identity(n, n) * s)
                .collect(),
        }
    }

    pub fn check(&self, a: &AlgElement) -> Result<()> {
        let ok = a.blocks.len() == self.block_dims.len()
            && a.blocks
                .iter()
                .zip(&self.block_dims)
                .all(|(b, &n)| b.nrows() == n && b.ncols() == n);
        if ok {
            Ok(())
        } else {
            Err(StarError::ShapeMismatch(format!(
                "element shapes {:?} do not match algebra blocks {:?}",
                a.blocks.iter().map(|b| b.shape()).collect::<Vec<_>>(),
                self.block_dims
            )))
        }
    }

    pub fn to_coords(&self, a: &AlgElement) -> CVec {
        let mut v = CVec::zeros(self.dim());
        for (alpha, u) in self.units.iter().enumerate() {
            v[alpha] = a.blocks[u.block][(u.row, u.col)];
        }
        v
    }

    pub fn from_coords(&self, v: &CVec) -> AlgElement {
        let mut e = self.zero();
        for (alpha, u) in self.units.iter().enumerate() {
            e.blocks[u.block][(u.row, u.col)] = v[alpha];
        }
        e
    }

    pub fn trace(&self, a: &AlgElement) -> Complex64 {
        a.blocks
            .iter()
            .zip(&self.trace_weights)
            .map(|(b, &w)| b.trace() * w)
            .sum()
    }

    /// C*-norm: the largest singular value over all blocks.
    pub fn op_norm(&self, a: &AlgElement) -> Result<f64> {
        self.check(a)?;
        Ok(a.norm())
    }

    pub fn is_positive(&self, a: &AlgElement, tol: f64) -> bool {
        if self.check(a).is_err() {
            return false;
        }
        let norm = a.norm();
        let scale = tol * (1.0 + norm);
        if a.clone().sub(&a.adjoint()).norm() > scale {
            return false;
        }
        a.blocks.iter().all(|b| linalg::min_eigenvalue(b) >= -scale)
    }

    /// Positive square root, computed blockwise with negative eigenvalues
    /// clamped to zero.
    pub fn sqrt_positive(&self, a: &AlgElement, tol: f64) -> Result<AlgElement> {
        self.check(a)?;
        if !self.is_positive(a, tol) {
            return Err(StarError::NotPositive);
        }
        Ok(a.map_hermitian(|l| l.max(0.0).sqrt()))
    }

    /// Moore–Penrose inverse of a positive element.
    pub fn pinv_positive(&self, a: &AlgElement, tol: f64) -> Result<AlgElement> {
        self.check(a)?;
        if !self.is_positive(a, tol) {
            return Err(StarError::NotPositive);
        }
        let cut = tol * (1.0 + a.norm());
        Ok(a.map_hermitian(|l| if l > cut { 1.0 / l } else { 0.0 }))
    }

    /// Block indicators `q_k`; they span the center.
    pub fn center_basis(&self) -> Vec<AlgElement> {
        (0..self.num_blocks())
            .map(|k| {
                let mut s = vec![ZERO; self.num_blocks()];
                s[k] = ONE;
                self.central(&s)
            })
            .collect()
    }

    /// Block scalars of a central element (`Tr(a_k)/n_k`), with the
    /// off-center residual `max_k |a_k - λ_k I|`.
    pub fn central_coords(&self, a: &AlgElement) -> (Vec<Complex64>, f64) {
        let mut residual: f64 = 0.0;
        let scalars = a
            .blocks
            .iter()
            .map(|b| {
                let n = b.nrows();
                let lam = b.trace() / n as f64;
                residual = residual.max(linalg::max_abs(&(b - CMat::identity(n, n) * lam)));
                lam
            })
            .collect();
        (scalars, residual)
    }

    /// Matrix of `b -> a b` on coordinates.
    pub fn left_mult_matrix(&self, a: &AlgElement) -> CMat {
        let d = self.dim();
        let mut m = CMat::zeros(d, d);
        for beta in 0..d {
            let col = self.to_coords(&(a * &self.unit(beta)));
            m.set_column(beta, &col);
        }
        m
    }

    /// Matrix of `b -> b a` on coordinates.
    pub fn right_mult_matrix(&self, a: &AlgElement) -> CMat {
        let d = self.dim();
        let mut m = CMat::zeros(d, d);
        for beta in 0..d {
            let col = self.to_coords(&(&self.unit(beta) * a));
            m.set_column(beta, &col);
        }
        m
    }

    /// Hermitian matrix of the scalar form `τ(b* c)` on coordinates.
    pub fn trace_gram(&self) -> CMat {
        let d = self.dim();
        CMat::from_fn(d, d, |i, j| {
            if i == j {
                c(self.trace_weights[self.units[i].block], 0.0)
            } else {
                ZERO
            }
        })
    }

    /// Matrix-unit witnesses `x = e_12`, `y = e_22` in the first block of
    /// size at least two, for which `‖xx* + yy*‖ = 1` and `‖x*x + y*y‖ = 2`.
    pub fn akemann_witness(&self) -> Result<(AlgElement, AlgElement)> {
        let k = self
            .block_dims
            .iter()
            .position(|&n| n >= 2)
            .ok_or(StarError::CommutativeAlgebra)?;
        Ok((self.unit(self.index_of(k, 0, 1)), self.unit(self.index_of(k, 1, 1))))
    }

    pub fn conditional_expectation(&self, partition: &BlockPartition) -> Result<ConditionalExpectation> {
        ConditionalExpectation::new(self, partition)
    }

    pub fn random_element<R: Rng + ?Sized>(&self, rng: &mut R) -> AlgElement {
        AlgElement {
            blocks: self
                .block_dims
                .iter()
                .map(|&n| {
                    CMat::from_fn(n, n, |_, _| {
                        c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
                    })
                })
                .collect(),
        }
    }

    pub fn random_positive<R: Rng + ?Sized>(&self, rng: &mut R) -> AlgElement {
        let b = self.random_element(rng);
        &b.adjoint() * &b
    }

    /// Unitary from the polar part of a random element.
    pub fn random_unitary<R: Rng + ?Sized>(&self, rng: &mut R) -> AlgElement {
        let b = self.random_element(rng);
        AlgElement {
            blocks: b
                .blocks
                .into_iter()
                .map(|m| {
                    let svd = m.svd(true, true);
                    svd.u.expect("u") * svd.v_t.expect("v_t")
                })
                .collect(),
        }
    }
}

impl AlgElement {
    pub fn blocks(&self) -> &[CMat] {
        &self.blocks
    }

    pub fn block(&self, k: usize) -> &CMat {
        &self.blocks[k]
    }

    pub fn into_blocks(self) -> Vec<CMat> {
        self.blocks
    }

    pub fn adjoint(&self) -> AlgElement {
        AlgElement { blocks: self.blocks.iter().map(|b| b.adjoint()).collect() }
    }

    pub fn scale(&self, s: Complex64) -> AlgElement {
        AlgElement { blocks: self.blocks.iter().map(|b| b * s).collect() }
    }

    /// C*-norm (max over blocks of the spectral norm).
    pub fn norm(&self) -> f64 {
        self.blocks.iter().fold(0.0, |acc, b| acc.max(linalg::spectral_norm(b)))
    }

    /// Largest absolute entry.
    pub fn max_abs(&self) -> f64 {
        self.blocks.iter().fold(0.0, |acc, b| acc.max(linalg::max_abs(b)))
    }

    fn map_hermitian(&self, f: impl Fn(f64) -> f64) -> AlgElement {
        AlgElement {
            blocks: self
                .blocks
                .iter()
                .map(|b| {
                    let (vals, vecs) = linalg::eigh(b);
                    let n = vals.len();
                    let diag = CMat::from_fn(n, n, |i, j| if i == j { c(f(vals[i]), 0.0) } else { ZERO });
                    &vecs * diag * vecs.adjoint()
                })
                .collect(),
        }
    }
}

impl Add for &AlgElement {
    type Output = AlgElement;
    fn add(self, rhs: &AlgElement) -> AlgElement {
        AlgElement { blocks: self.blocks.iter().zip(&rhs.blocks).map(|(a, b)| a + b).collect() }
    }
}

impl Sub<&AlgElement> for AlgElement {
    type Output = AlgElement;
    fn sub(self, rhs: &AlgElement) -> AlgElement {
        &self - rhs
    }
}

impl Sub for &AlgElement {
    type Output = AlgElement;
    fn sub(self, rhs: &AlgElement) -> AlgElement {
        AlgElement { blocks: self.blocks.iter().zip(&rhs.blocks).map(|(a, b)| a - b).collect() }
    }
}

impl Mul for &AlgElement {
    type Output = AlgElement;
    fn mul(self, rhs: &AlgElement) -> AlgElement {
        assert_eq!(self.blocks.len(), rhs.blocks.len(), "block count mismatch");
        AlgElement { blocks: self.blocks.iter().zip(&rhs.blocks).map(|(a, b)| a * b).collect() }
    }
}

impl Neg for &AlgElement {
    type Output = AlgElement;
    fn neg(self) -> AlgElement {
        AlgElement { blocks: self.blocks.iter().map(|b| -b).collect() }
    }
}

/// Normalized density `ρ ≥ 0` with `τ(ρ) = 1`; evaluates `φ(a) = τ(ρ a)`.
#[derive(Debug, Clone)]
pub struct StateFunctional {
    algebra: CStarAlgebra,
    density: AlgElement,
}

impl StateFunctional {
    pub fn new(algebra: &CStarAlgebra, density: AlgElement, tol: f64) -> Result<Self> {
        algebra.check(&density).map_err(|e| StarError::NotAState(e.to_string()))?;
        if !algebra.is_positive(&density, tol) {
            return Err(StarError::NotAState("density is not positive".into()));
        }
        let t = algebra.trace(&density);
        if (t - ONE).norm() > tol.max(1e-12) * 10.0 {
            return Err(StarError::NotAState(format!("τ(density) = {t}, expected 1")));
        }
        Ok(Self { algebra: algebra.clone(), density })
    }

    /// The tracial state `τ(a)/τ(1)`.
    pub fn normalized_trace(algebra: &CStarAlgebra) -> Self {
        let total = algebra.trace(&algebra.identity()).re;
        Self { algebra: algebra.clone(), density: algebra.identity().scale(c(1.0 / total, 0.0)) }
    }

    pub fn density(&self) -> &AlgElement {
        &self.density
    }

    pub fn algebra(&self) -> &CStarAlgebra {
        &self.algebra
    }

    pub fn eval(&self, a: &AlgElement) -> Complex64 {
        self.algebra.trace(&(&self.density * a))
    }

    /// A state `τ(ρ ·)` is tracial exactly when its density is central.
    pub fn is_tracial(&self, tol: f64) -> bool {
        self.algebra.central_coords(&self.density).1 <= tol
    }
}

/// Unital subalgebra `B ⊆ A` given as a pinching pattern.
///
/// `B = ⊕_l M_{m_l}` and block `k` of `A` contains the diagonal sequence of
/// `B` blocks `placement[k]`, so `b` embeds as `diag(b_{l_1}, b_{l_2}, …)` in
/// block `k`. Repeating a `B` block inside `A` identifies sub-blocks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockPartition {
    pub sub_dims: Vec<usize>,
    pub placement: Vec<Vec<usize>>,
}

impl BlockPartition {
    /// `B = A`.
    pub fn identity(algebra: &CStarAlgebra) -> Self {
        Self {
            sub_dims: algebra.block_dims().to_vec(),
            placement: (0..algebra.num_blocks()).map(|k| vec![k]).collect(),
        }
    }

    /// Diagonal subalgebra: every block of `A` split into `1×1` blocks.
    pub fn diagonal(algebra: &CStarAlgebra) -> Self {
        let mut sub_dims = Vec::new();
        let mut placement = Vec::new();
        for &n in algebra.block_dims() {
            placement.push((sub_dims.len()..sub_dims.len() + n).collect());
            sub_dims.extend(std::iter::repeat_n(1, n));
        }
        Self { sub_dims, placement }
    }
}

/// The τ-preserving conditional expectation onto a pinching subalgebra.
#[derive(Debug, Clone)]
pub struct ConditionalExpectation {
    source: CStarAlgebra,
    target: CStarAlgebra,
    partition: BlockPartition,
}

impl ConditionalExpectation {
    fn new(source: &CStarAlgebra, partition: &BlockPartition) -> Result<Self> {
        let bad = |m: String| Err(StarError::InvalidPartition(m));
        if partition.placement.len() != source.num_blocks() {
            return bad(format!(
                "placement has {} entries for {} blocks",
                partition.placement.len(),
                source.num_blocks()
            ));
        }
        if partition.sub_dims.is_empty() || partition.sub_dims.contains(&0) {
            return bad("subalgebra block dimensions must be positive".into());
        }
        let mut weights = vec![0.0; partition.sub_dims.len()];
        for (k, seq) in partition.placement.iter().enumerate() {
            let mut total = 0;
            for &l in seq {
                if l >= partition.sub_dims.len() {
                    return bad(format!("block {k} references unknown sub-block {l}"));
                }
                total += partition.sub_dims[l];
                weights[l] += source.trace_weights()[k];
            }
            if total != source.block_dims()[k] {
                return bad(format!(
                    "block {k} has size {} but its pattern covers {total}",
                    source.block_dims()[k]
                ));
            }
        }
        if let Some(l) = weights.iter().position(|&w| w == 0.0) {
            return bad(format!("sub-block {l} is never placed (subalgebra would not be unital)"));
        }
        let target = CStarAlgebra::new(&partition.sub_dims, &weights)?;
        Ok(Self { source: source.clone(), target, partition: partition.clone() })
    }

    pub fn source(&self) -> &CStarAlgebra {
        &self.source
    }

    /// `B`, with the trace weights that make `τ_A|_B = τ_B`.
    pub fn target(&self) -> &CStarAlgebra {
        &self.target
    }

    pub fn partition(&self) -> &BlockPartition {
        &self.partition
    }

    pub fn embed(&self, b: &AlgElement) -> AlgElement {
        let mut out = self.source.zero();
        for (k, seq) in self.partition.placement.iter().enumerate() {
            let mut at = 0;
            for &l in seq {
                let m = self.partition.sub_dims[l];
                out.blocks[k].view_mut((at, at), (m, m)).copy_from(&b.blocks[l]);
                at += m;
            }
        }
        out
    }

    /// `φ(a)` as an element of `B`: weighted average of the diagonal
    /// sub-blocks identified with each block of `B`.
    pub fn project(&self, a: &AlgElement) -> AlgElement {
        let mut out = self.target.zero();
        for (k, seq) in self.partition.placement.iter().enumerate() {
            let w = self.source.trace_weights()[k];
            let mut at = 0;
            for &l in seq {
                let m = self.partition.sub_dims[l];
                out.blocks[l] += a.blocks[k].view((at, at), (m, m)) * c(w, 0.0);
                at += m;
            }
        }
        for (l, b) in out.blocks.iter_mut().enumerate() {
            *b /= c(self.target.trace_weights()[l], 0.0);
        }
        out
    }

    /// `φ` as a map `A → A`.
    pub fn apply(&self, a: &AlgElement) -> AlgElement {
        self.embed(&self.project(a))
    }

    /// Matrix of `project` in coordinates (`dim B × dim A`).
    pub fn projection_matrix(&self) -> CMat {
        let (db, da) = (self.target.dim(), self.source.dim());
        let mut m = CMat::zeros(db, da);
        for alpha in 0..da {
            m.set_column(alpha, &self.target.to_coords(&self.project(&self.source.unit(alpha))));
        }
        m
    }
}

/// Embeds a real matrix as an `M_n` element.
pub fn real_block(m: &DMatrix<f64>) -> CMat {
    linalg::real_to_complex(m)
}
