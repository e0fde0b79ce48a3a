//! Factories for the standard families of `*`-bimodules, and the
//! decomposition of a bimodule over `ℂ^n` into a bundle of real Hilbert
//! spaces over `n` points.

use std::ops::Range;

use crate::algebra::{AlgElement, CStarAlgebra, ConditionalExpectation, StateFunctional, DEFAULT_TOL};
use crate::bimodule::{check_isomorphism, BimoduleTensors, IsomorphismCheck, StarBimodule};
use crate::error::{Result, StarError};
use crate::linalg::{self, c, CMat, CVec, RMat, ONE};

/// A bundle of real Hilbert spaces over the finite set `{0, …, n-1}`,
/// one positive definite Gram matrix per point (possibly `0×0`).
#[derive(Debug, Clone, PartialEq)]
pub struct FellBundleFinite {
    pub base_points: usize,
    pub fiber_dims: Vec<usize>,
    pub fiber_grams: Vec<RMat>,
}

impl FellBundleFinite {
    pub fn new(fiber_grams: Vec<RMat>) -> Result<Self> {
        let b = Self {
            base_points: fiber_grams.len(),
            fiber_dims: fiber_grams.iter().map(|g| g.nrows()).collect(),
            fiber_grams,
        };
        b.validate()?;
        Ok(b)
    }

    /// Orthonormal fibers of the given dimensions.
    pub fn standard(fiber_dims: &[usize]) -> Result<Self> {
        Self::new(fiber_dims.iter().map(|&m| RMat::identity(m, m)).collect())
    }

    pub fn validate(&self) -> Result<()> {
        if self.base_points == 0 {
            return Err(StarError::ShapeMismatch("a bundle needs at least one base point".into()));
        }
        if self.fiber_dims.len() != self.base_points || self.fiber_grams.len() != self.base_points {
            return Err(StarError::ShapeMismatch("fiber data does not match the number of base points".into()));
        }
        for (g, &m) in self.fiber_grams.iter().zip(&self.fiber_dims) {
            if g.shape() != (m, m) {
                return Err(StarError::ShapeMismatch(format!("fiber Gram of shape {:?} for dimension {m}", g.shape())));
            }
            if !linalg::is_real_symmetric_pd(g) {
                return Err(StarError::NotPositiveDefinite);
            }
        }
        Ok(())
    }

    pub fn total_dim(&self) -> usize {
        self.fiber_dims.iter().sum()
    }

    fn offsets(&self) -> Vec<usize> {
        let mut at = 0;
        self.fiber_dims
            .iter()
            .map(|&m| {
                let o = at;
                at += m;
                o
            })
            .collect()
    }
}

/// Result of [`fell_decompose`]: the bundle, the bimodule built from it and
/// the coordinate matrix of the isomorphism `E → fell_bundle_module(bundle)`.
#[derive(Debug, Clone)]
pub struct FellDecomposition {
    pub bundle: FellBundleFinite,
    pub target: StarBimodule,
    pub iso: CMat,
    pub check: IsomorphismCheck,
}

fn scalar_algebra() -> CStarAlgebra {
    CStarAlgebra::commutative(1).expect("ℂ is a valid algebra")
}

/// `S` with `(x*)_β = conj(x_{β*})` on the matrix-unit basis.
fn star_permutation(alg: &CStarAlgebra) -> CMat {
    let d = alg.dim();
    let mut s = CMat::zeros(d, d);
    for beta in 0..d {
        s[(beta, alg.star_index(beta))] = ONE;
    }
    s
}

fn check_gram(g: &RMat) -> Result<()> {
    if linalg::is_real_symmetric_pd(g) {
        Ok(())
    } else {
        Err(StarError::NotPositiveDefinite)
    }
}

/// `A` as a bimodule over `ℂ` with pairing `φ(xy)` and involution `x ↦ x*`.
pub fn gns_bimodule(algebra: &CStarAlgebra, state: &StateFunctional) -> Result<StarBimodule> {
    if state.algebra() != algebra {
        return Err(StarError::NotAState("state is defined on a different algebra".into()));
    }
    let d = algebra.dim();
    let mut p = CMat::zeros(d, d);
    for a in 0..d {
        for b in 0..d {
            if let Some(g) = algebra.unit_product(a, b) {
                p[(a, b)] = state.eval(&algebra.unit(g));
            }
        }
    }
    let tensors = BimoduleTensors {
        left: vec![CMat::identity(d, d)],
        right: vec![CMat::identity(d, d)],
        pairing: vec![p],
        involution: star_permutation(algebra),
    };
    StarBimodule::new(&scalar_algebra(), d, tensors, DEFAULT_TOL)
}

/// `ℂ^n = H + iH` for the real Hilbert space `(ℝ^n, G)`, over `ℂ`.
pub fn complexified_real_hilbert(gram: &RMat) -> Result<StarBimodule> {
    check_gram(gram)?;
    let n = gram.nrows();
    let tensors = BimoduleTensors {
        left: vec![CMat::identity(n, n)],
        right: vec![CMat::identity(n, n)],
        pairing: vec![linalg::real_to_complex(gram)],
        involution: CMat::identity(n, n),
    };
    StarBimodule::new(&scalar_algebra(), n, tensors, DEFAULT_TOL)
}

/// `ℂ^n ⊕ (ℂ^n)*` over `ℂ` with `(v₁⊕δ₁, v₂⊕δ₂) = δ₂(v₁)` and
/// `(v ⊕ δ_w)* = w ⊕ δ_v`. Coordinates: `v` first, then `δ`.
pub fn hyperbolic_pair(n: usize) -> Result<StarBimodule> {
    if n == 0 {
        return Err(StarError::NonPositiveDimension(0));
    }
    let d = 2 * n;
    let mut p = CMat::zeros(d, d);
    let mut s = CMat::zeros(d, d);
    for i in 0..n {
        p[(i, n + i)] = ONE;
        s[(i, n + i)] = ONE;
        s[(n + i, i)] = ONE;
    }
    let tensors = BimoduleTensors {
        left: vec![CMat::identity(d, d)],
        right: vec![CMat::identity(d, d)],
        pairing: vec![p],
        involution: s,
    };
    StarBimodule::new(&scalar_algebra(), d, tensors, DEFAULT_TOL)
}

/// Matrix-unit indices of the ideal spanned by the given blocks.
fn ideal_units(alg: &CStarAlgebra, blocks: &[usize]) -> Vec<usize> {
    (0..alg.dim()).filter(|&a| blocks.contains(&alg.unit_index(a).block)).collect()
}

/// `I ⊗ ℝ^k` over `A`, `I` the ideal of the selected blocks, with pairing
/// `⟨a⊗v, b⊗w⟩ = G(v,w) ab` and `(a⊗v)* = a*⊗v`.
///
/// Coordinates are ordered `(q, j)` ↦ `q·dim(I) + j` for `q < k` and `j`
/// running over the matrix units of `I`.
pub fn tensor_bimodule(algebra: &CStarAlgebra, ideal_blocks: &[usize], gram: &RMat) -> Result<StarBimodule> {
    if ideal_blocks.is_empty() {
        return Err(StarError::EmptyIdeal);
    }
    if let Some(&b) = ideal_blocks.iter().find(|&&b| b >= algebra.num_blocks()) {
        return Err(StarError::ShapeMismatch(format!("ideal block {b} out of range")));
    }
    check_gram(gram)?;
    let units = ideal_units(algebra, ideal_blocks);
    let m = units.len();
    let k = gram.nrows();
    let d = k * m;
    let pos = |alpha: usize| units.iter().position(|&u| u == alpha);
    let da = algebra.dim();
    let mut left = vec![CMat::zeros(d, d); da];
    let mut right = vec![CMat::zeros(d, d); da];
    let mut pairing = vec![CMat::zeros(d, d); da];
    let mut s = CMat::zeros(d, d);
    for q in 0..k {
        for (j, &uj) in units.iter().enumerate() {
            let col = q * m + j;
            let sj = pos(algebra.star_index(uj)).expect("ideal is *-closed");
            s[(q * m + sj, col)] = ONE;
            for alpha in 0..da {
                if let Some(g) = algebra.unit_product(alpha, uj) {
                    left[alpha][(q * m + pos(g).expect("ideal"), col)] = ONE;
                }
                if let Some(g) = algebra.unit_product(uj, alpha) {
                    right[alpha][(q * m + pos(g).expect("ideal"), col)] = ONE;
                }
            }
            for r in 0..k {
                for (l, &ul) in units.iter().enumerate() {
                    if let Some(g) = algebra.unit_product(uj, ul) {
                        pairing[g][(col, r * m + l)] = c(gram[(q, r)], 0.0);
                    }
                }
            }
        }
    }
    StarBimodule::new(algebra, d, BimoduleTensors { left, right, pairing, involution: s }, DEFAULT_TOL)
}

/// `A` as a bimodule over `B` with pairing `φ(xy)`, `φ` the conditional
/// expectation onto `B`, and actions by multiplication with `B ⊂ A`.
pub fn expectation_bimodule(expectation: &ConditionalExpectation) -> Result<StarBimodule> {
    let a = expectation.source();
    let b = expectation.target();
    let d = a.dim();
    let proj = expectation.projection_matrix();
    let mut pairing = vec![CMat::zeros(d, d); b.dim()];
    for x in 0..d {
        for y in 0..d {
            if let Some(g) = a.unit_product(x, y) {
                for (beta, p) in pairing.iter_mut().enumerate() {
                    p[(x, y)] = proj[(beta, g)];
                }
            }
        }
    }
    let mut left = Vec::with_capacity(b.dim());
    let mut right = Vec::with_capacity(b.dim());
    for beta in 0..b.dim() {
        let e = expectation.embed(&b.unit(beta));
        left.push(a.left_mult_matrix(&e));
        right.push(a.right_mult_matrix(&e));
    }
    let tensors = BimoduleTensors { left, right, pairing, involution: star_permutation(a) };
    StarBimodule::new(b, d, tensors, DEFAULT_TOL)
}

/// `E = A` over itself with `⟨x, y⟩ = xy` and `x* = x^*`.
pub fn multiplication_module(algebra: &CStarAlgebra) -> Result<StarBimodule> {
    let blocks: Vec<usize> = (0..algebra.num_blocks()).collect();
    tensor_bimodule(algebra, &blocks, &RMat::identity(1, 1))
}

/// `⊕_p (H_p + iH_p)` over `ℂ^n` with pointwise actions and the fiberwise
/// bilinear pairing. Coordinates are fiber-by-fiber.
pub fn fell_bundle_module(bundle: &FellBundleFinite) -> Result<StarBimodule> {
    bundle.validate()?;
    let n = bundle.base_points;
    let alg = CStarAlgebra::commutative(n)?;
    let d = bundle.total_dim();
    if d == 0 {
        return Ok(StarBimodule::zero(&alg));
    }
    let offsets = bundle.offsets();
    let mut pairing = vec![CMat::zeros(d, d); n];
    let mut act = vec![CMat::zeros(d, d); n];
    for p in 0..n {
        let (o, m) = (offsets[p], bundle.fiber_dims[p]);
        for i in 0..m {
            act[p][(o + i, o + i)] = ONE;
            for j in 0..m {
                pairing[p][(o + i, o + j)] = c(bundle.fiber_grams[p][(i, j)], 0.0);
            }
        }
    }
    let tensors = BimoduleTensors { left: act.clone(), right: act, pairing, involution: CMat::identity(d, d) };
    StarBimodule::new(&alg, d, tensors, DEFAULT_TOL)
}

/// Largest imaginary part of `⟨x, y⟩` over a real basis of `E_sa`,
/// relative to the size of the pairing.
pub fn reality_residual(module: &StarBimodule) -> f64 {
    let basis = module.selfadjoint_basis();
    let alg = module.algebra();
    let mut worst: f64 = 0.0;
    let mut scale: f64 = 0.0;
    for x in &basis {
        for y in &basis {
            let v = module.pair_vec(x.coords(), y.coords());
            // ⟨x, y⟩ self-adjoint ⇔ ⟨x, y⟩ − ⟨x, y⟩* = 0
            let skew = &v - &v.adjoint();
            worst = worst.max(alg.to_coords(&skew).iter().fold(0.0, |a: f64, z| a.max(z.norm())));
            scale = scale.max(v.max_abs());
        }
    }
    0.5 * worst / (1.0 + scale)
}

/// Recovers the bundle of real Hilbert spaces underlying a bimodule over a
/// commutative algebra whose self-adjoint part pairs into self-adjoint
/// elements, together with the isomorphism onto its bundle model.
pub fn fell_decompose(module: &StarBimodule) -> Result<FellDecomposition> {
    let alg = module.algebra();
    if !alg.is_commutative() {
        return Err(StarError::NotCommutativeBase);
    }
    let tol = module.tol();
    let reality = reality_residual(module);
    if reality > tol {
        return Err(StarError::RealityConditionFails(reality));
    }
    let n = alg.dim();
    let diff = (0..n)
        .map(|p| linalg::rel_residual(&module.left_tensor()[p], &module.right_tensor()[p]))
        .fold(0.0, f64::max);
    if diff > tol {
        return Err(StarError::ActionsDiffer(diff));
    }
    let d = module.dim();
    let sa: Vec<CVec> = module.selfadjoint_basis().into_iter().map(|x| x.into_coords()).collect();

    let mut grams = Vec::with_capacity(n);
    let mut rows: Vec<CVec> = Vec::with_capacity(d);
    for p in 0..n {
        let act = &module.left_tensor()[p];
        // real span of δ_p E_sa, as real 2d-vectors [Re; Im]
        let images: Vec<CVec> = sa.iter().map(|x| act * x).collect();
        let mut realified = RMat::zeros(2 * d, images.len());
        for (j, v) in images.iter().enumerate() {
            for i in 0..d {
                realified[(i, j)] = v[i].re;
                realified[(d + i, j)] = v[i].im;
            }
        }
        let span = real_range(&realified, tol);
        let basis: Vec<CVec> = (0..span.ncols())
            .map(|j| CVec::from_fn(d, |i, _| c(span[(i, j)], span[(d + i, j)])))
            .collect();
        let pm = &module.pairing_tensor()[p];
        let g = RMat::from_fn(basis.len(), basis.len(), |i, j| (basis[i].transpose() * pm * &basis[j])[(0, 0)].re);
        let g = (&g + g.transpose()) * 0.5;
        let (vals, vecs) = if g.nrows() == 0 {
            (Vec::new(), RMat::zeros(0, 0))
        } else {
            let e = g.clone().symmetric_eigen();
            (e.eigenvalues.iter().copied().collect::<Vec<f64>>(), e.eigenvectors)
        };
        let lmax = vals.iter().fold(0.0_f64, |a, &b| a.max(b.abs()));
        let mut keep: Vec<usize> = (0..vals.len()).filter(|&i| vals[i] > tol * lmax.max(1.0)).collect();
        keep.sort_by(|&i, &j| vals[j].total_cmp(&vals[i]));
        let lambdas: Vec<f64> = keep.iter().map(|&i| vals[i]).collect();
        for (&i, &lam) in keep.iter().zip(&lambdas) {
            let mut f = CVec::zeros(d);
            for (b, v) in basis.iter().enumerate() {
                f += v * c(vecs[(b, i)], 0.0);
            }
            // Φ(x)_{p,m} = ⟨x, f_{p,m}⟩(p) / λ_{p,m}
            rows.push((pm * f) / c(lam, 0.0));
        }
        grams.push(RMat::from_diagonal(&nalgebra::DVector::from_vec(lambdas)));
    }
    let bundle = FellBundleFinite::new(grams)?;
    let target = fell_bundle_module(&bundle)?;
    let mut iso = CMat::zeros(rows.len(), d);
    for (r, row) in rows.iter().enumerate() {
        for i in 0..d {
            iso[(r, i)] = row[i];
        }
    }
    let check = check_isomorphism(module, &target, &iso)?;
    Ok(FellDecomposition { bundle, target, iso, check })
}

fn real_range(m: &RMat, tol: f64) -> RMat {
    let (r, n) = m.shape();
    if r == 0 || n == 0 {
        return RMat::zeros(r, 0);
    }
    let svd = m.clone().svd(true, false);
    let u = svd.u.expect("u requested");
    let smax = svd.singular_values.iter().fold(0.0_f64, |a, &b| a.max(b));
    let cols: Vec<usize> =
        (0..svd.singular_values.len()).filter(|&i| svd.singular_values[i] > tol * smax.max(1.0)).collect();
    RMat::from_fn(r, cols.len(), |i, j| u[(i, cols[j])])
}

/// Fiber Grams agree up to orthogonal change of basis iff their spectra do.
pub fn grams_congruent(a: &RMat, b: &RMat, tol: f64) -> bool {
    if a.shape() != b.shape() {
        return false;
    }
    if a.nrows() == 0 {
        return true;
    }
    let spec = |m: &RMat| {
        let mut v: Vec<f64> = m.clone().symmetric_eigen().eigenvalues.iter().copied().collect();
        v.sort_by(f64::total_cmp);
        v
    };
    let (sa, sb) = (spec(a), spec(b));
    let scale = sa.iter().chain(&sb).fold(1.0_f64, |m, x| m.max(x.abs()));
    sa.iter().zip(&sb).all(|(x, y)| (x - y).abs() <= tol * scale)
}

/// Per-block 0/1 pattern of a central projection.
pub fn projection_pattern(algebra: &CStarAlgebra, p: &AlgElement, tol: f64) -> Result<Vec<bool>> {
    algebra.check(p).map_err(|_| StarError::NotCentralProjection("wrong block shapes".into()))?;
    let (scalars, residual) = algebra.central_coords(p);
    if residual > tol {
        return Err(StarError::NotCentralProjection(format!("not central (residual {residual:e})")));
    }
    scalars
        .iter()
        .enumerate()
        .map(|(k, z)| {
            if (z - ONE).norm() <= tol {
                Ok(true)
            } else if z.norm() <= tol {
                Ok(false)
            } else {
                Err(StarError::NotCentralProjection(format!("block {k} has scalar {z}, not 0 or 1")))
            }
        })
        .collect()
}

/// Central projection with the given per-block 0/1 pattern.
pub fn projection_from_pattern(algebra: &CStarAlgebra, pattern: &[bool]) -> AlgElement {
    let scalars: Vec<_> = pattern.iter().map(|&b| if b { ONE } else { linalg::ZERO }).collect();
    algebra.central(&scalars)
}

/// Coordinate ranges of the summands `p_i M` inside
/// `direct_sum_module(M, projections)`.
pub fn direct_sum_summands(algebra: &CStarAlgebra, projections: &[AlgElement]) -> Result<Vec<Range<usize>>> {
    let mut at = 0;
    projections
        .iter()
        .map(|p| {
            let pattern = projection_pattern(algebra, p, DEFAULT_TOL)?;
            let len = ideal_units(algebra, &true_blocks(&pattern)).len();
            let r = at..at + len;
            at += len;
            Ok(r)
        })
        .collect()
}

fn true_blocks(pattern: &[bool]) -> Vec<usize> {
    pattern.iter().enumerate().filter(|(_, &b)| b).map(|(k, _)| k).collect()
}

/// `⊕ p_i M` over `M` with `⟨⊕a_i, ⊕b_i⟩ = Σ a_i b_i`, `(⊕a_i)* = ⊕a_i*`
/// and diagonal actions.
pub fn direct_sum_module(algebra: &CStarAlgebra, projections: &[AlgElement]) -> Result<StarBimodule> {
    let supports: Vec<Vec<usize>> = projections
        .iter()
        .map(|p| Ok(ideal_units(algebra, &true_blocks(&projection_pattern(algebra, p, DEFAULT_TOL)?))))
        .collect::<Result<_>>()?;
    let d: usize = supports.iter().map(|s| s.len()).sum();
    if d == 0 {
        return Ok(StarBimodule::zero(algebra));
    }
    let da = algebra.dim();
    let mut left = vec![CMat::zeros(d, d); da];
    let mut right = vec![CMat::zeros(d, d); da];
    let mut pairing = vec![CMat::zeros(d, d); da];
    let mut s = CMat::zeros(d, d);
    let mut off = 0;
    for units in &supports {
        let pos = |alpha: usize| off + units.iter().position(|&u| u == alpha).expect("ideal");
        for (j, &uj) in units.iter().enumerate() {
            let col = off + j;
            s[(pos(algebra.star_index(uj)), col)] = ONE;
            for alpha in 0..da {
                if let Some(g) = algebra.unit_product(alpha, uj) {
                    left[alpha][(pos(g), col)] = ONE;
                }
                if let Some(g) = algebra.unit_product(uj, alpha) {
                    right[alpha][(pos(g), col)] = ONE;
                }
            }
            for (l, &ul) in units.iter().enumerate() {
                if let Some(g) = algebra.unit_product(uj, ul) {
                    pairing[g][(col, off + l)] = ONE;
                }
            }
        }
        off += units.len();
    }
    StarBimodule::new(algebra, d, BimoduleTensors { left, right, pairing, involution: s }, DEFAULT_TOL)
}
