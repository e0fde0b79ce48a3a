//! Finite-dimensional Hilbert `*`-bimodules.
//!
//! A bimodule over `A` with complex basis `e_1..e_d` is stored as structure
//! tensors indexed by the matrix-unit basis `u_α` of `A`:
//!
//! * `left[α]`, `right[α]`: `d×d` matrices of `x ↦ u_α x` and `x ↦ x u_α`;
//! * `pairing[α]`: `d×d` matrix with `⟨x, y⟩_α = xᵀ P_α y`. The pairing is
//!   **bilinear**; the sesquilinear products `⟨x,y⟩_l = ⟨x, y*⟩` and
//!   `⟨x,y⟩_r = ⟨x*, y⟩` are derived from it;
//! * `involution`: `S` with `x* = S · conj(x)`.

use std::collections::BTreeMap;
use std::sync::atomic::{AtomicU64, Ordering};

use rand::Rng;

use crate::algebra::{AlgElement, CStarAlgebra, DEFAULT_TOL};
use crate::error::{Axiom, Result, StarError};
use crate::linalg::{self, c, CMat, CVec, ZERO};

static NEXT_ID: AtomicU64 = AtomicU64::new(1);

fn fresh_id() -> u64 {
    NEXT_ID.fetch_add(1, Ordering::Relaxed)
}

#[derive(Debug, Clone)]
pub struct StarBimodule {
    id: u64,
    algebra: CStarAlgebra,
    dim: usize,
    left: Vec<CMat>,
    right: Vec<CMat>,
    pairing: Vec<CMat>,
    involution: CMat,
    tol: f64,
}

/// Raw structure tensors, as accepted by [`StarBimodule::new`].
#[derive(Debug, Clone)]
pub struct BimoduleTensors {
    pub left: Vec<CMat>,
    pub right: Vec<CMat>,
    pub pairing: Vec<CMat>,
    pub involution: CMat,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModuleElement {
    coords: CVec,
    owner: u64,
}

impl ModuleElement {
    pub fn coords(&self) -> &CVec {
        &self.coords
    }

    pub fn into_coords(self) -> CVec {
        self.coords
    }
}

/// Residuals of every structural check, plus the minimum eigenvalues of the
/// left and right block Gram matrices.
#[derive(Debug, Clone)]
pub struct AxiomReport {
    pub residuals: BTreeMap<Axiom, f64>,
    /// Smallest eigenvalue of `[⟨e_i, e_j⟩_l]` over all blocks.
    pub positivity_margin_l: f64,
    /// Smallest eigenvalue of `[⟨e_i, e_j⟩_r]` over all blocks.
    pub positivity_margin_r: f64,
    pub tol: f64,
}

impl AxiomReport {
    pub fn positivity_margin(&self) -> f64 {
        self.positivity_margin_l.min(self.positivity_margin_r)
    }

    pub fn first_violation(&self) -> Option<(Axiom, f64)> {
        self.residuals
            .iter()
            .find(|(_, &r)| !(r <= self.tol))
            .map(|(&a, &r)| (a, r))
    }

    pub fn max_residual(&self) -> f64 {
        self.residuals.values().fold(0.0, |a: f64, &b| a.max(b))
    }

    pub fn passed(&self) -> bool {
        self.first_violation().is_none()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    /// `T(ax) = aT(x)`; adjoint taken for `⟨·,·⟩_l`.
    LeftLinear,
    /// `T(xa) = T(x)a`; adjoint taken for `⟨·,·⟩_r`.
    RightLinear,
}

impl Side {
    pub fn flip(self) -> Side {
        match self {
            Side::LeftLinear => Side::RightLinear,
            Side::RightLinear => Side::LeftLinear,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ModuleOperator {
    pub matrix: CMat,
    pub side: Side,
    pub adjoint_matrix: CMat,
}

/// A surjection `E → E/N` together with a linear section.
#[derive(Debug, Clone)]
pub struct QuotientMap {
    /// `dim(E/N) × dim E`.
    pub project: CMat,
    /// `dim E × dim(E/N)`, orthonormal columns spanning `N^⊥`.
    pub lift: CMat,
}

impl StarBimodule {
    /// Builds a bimodule and runs the full axiom suite, rejecting any
    /// violation beyond `tol`.
    pub fn new(algebra: &CStarAlgebra, dim: usize, tensors: BimoduleTensors, tol: f64) -> Result<Self> {
        let m = Self::assemble(algebra, dim, tensors, tol)?;
        let report = m.check_axioms();
        if let Some((axiom, residual)) = report.first_violation() {
            return Err(StarError::AxiomViolation { axiom, residual });
        }
        Ok(m)
    }

    /// Shape-checked construction without the axiom suite.
    pub fn assemble(algebra: &CStarAlgebra, dim: usize, tensors: BimoduleTensors, tol: f64) -> Result<Self> {
        let da = algebra.dim();
        let square = |m: &CMat| m.nrows() == dim && m.ncols() == dim;
        let shape_ok = tensors.left.len() == da
            && tensors.right.len() == da
            && tensors.pairing.len() == da
            && tensors.left.iter().all(square)
            && tensors.right.iter().all(square)
            && tensors.pairing.iter().all(square)
            && square(&tensors.involution);
        if !shape_ok {
            return Err(StarError::ShapeMismatch(format!(
                "bimodule tensors do not match algebra dimension {da} and module dimension {dim}"
            )));
        }
        let finite = |m: &CMat| m.iter().all(|z| z.re.is_finite() && z.im.is_finite());
        if !(tensors.left.iter().chain(&tensors.right).chain(&tensors.pairing).all(finite)
            && finite(&tensors.involution))
        {
            return Err(StarError::ShapeMismatch("non-finite tensor entry".into()));
        }
        Ok(Self {
            id: fresh_id(),
            algebra: algebra.clone(),
            dim,
            left: tensors.left,
            right: tensors.right,
            pairing: tensors.pairing,
            involution: tensors.involution,
            tol,
        })
    }

    /// The zero module over `algebra`.
    pub fn zero(algebra: &CStarAlgebra) -> Self {
        let da = algebra.dim();
        let empty = || vec![CMat::zeros(0, 0); da];
        Self {
            id: fresh_id(),
            algebra: algebra.clone(),
            dim: 0,
            left: empty(),
            right: empty(),
            pairing: empty(),
            involution: CMat::zeros(0, 0),
            tol: DEFAULT_TOL,
        }
    }

    pub fn algebra(&self) -> &CStarAlgebra {
        &self.algebra
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn tol(&self) -> f64 {
        self.tol
    }

    pub fn with_tol(mut self, tol: f64) -> Self {
        self.tol = tol;
        self
    }

    pub fn tensors(&self) -> BimoduleTensors {
        BimoduleTensors {
            left: self.left.clone(),
            right: self.right.clone(),
            pairing: self.pairing.clone(),
            involution: self.involution.clone(),
        }
    }

    pub fn left_tensor(&self) -> &[CMat] {
        &self.left
    }

    pub fn right_tensor(&self) -> &[CMat] {
        &self.right
    }

    pub fn pairing_tensor(&self) -> &[CMat] {
        &self.pairing
    }

    pub fn involution_matrix(&self) -> &CMat {
        &self.involution
    }

    // ---- elements ----------------------------------------------------------

    pub fn element(&self, coords: CVec) -> Result<ModuleElement> {
        if coords.len() != self.dim {
            return Err(StarError::ShapeMismatch(format!(
                "coordinate vector of length {} for module of dimension {}",
                coords.len(),
                self.dim
            )));
        }
        Ok(ModuleElement { coords, owner: self.id })
    }

    pub fn basis_element(&self, i: usize) -> ModuleElement {
        let mut v = CVec::zeros(self.dim);
        v[i] = c(1.0, 0.0);
        ModuleElement { coords: v, owner: self.id }
    }

    pub fn zero_element(&self) -> ModuleElement {
        ModuleElement { coords: CVec::zeros(self.dim), owner: self.id }
    }

    pub fn random_element<R: Rng + ?Sized>(&self, rng: &mut R) -> ModuleElement {
        let coords = CVec::from_fn(self.dim, |_, _| {
            c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
        });
        ModuleElement { coords, owner: self.id }
    }

    fn own(&self, x: &ModuleElement) -> Result<()> {
        if x.owner == self.id {
            Ok(())
        } else {
            Err(StarError::OwnerMismatch)
        }
    }

    // ---- raw coordinate operations ------------------------------------------

    pub fn star_vec(&self, x: &CVec) -> CVec {
        &self.involution * x.conjugate()
    }

    /// Bilinear pairing on coordinates.
    pub fn pair_vec(&self, x: &CVec, y: &CVec) -> AlgElement {
        let coords = CVec::from_iterator(
            self.algebra.dim(),
            self.pairing.iter().map(|p| (x.transpose() * p * y)[(0, 0)]),
        );
        self.algebra.from_coords(&coords)
    }

    pub fn inner_l_vec(&self, x: &CVec, y: &CVec) -> AlgElement {
        self.pair_vec(x, &self.star_vec(y))
    }

    pub fn inner_r_vec(&self, x: &CVec, y: &CVec) -> AlgElement {
        self.pair_vec(&self.star_vec(x), y)
    }

    /// Matrix of `x ↦ a x`.
    pub fn left_matrix(&self, a: &AlgElement) -> CMat {
        combine(&self.left, &self.algebra.to_coords(a), self.dim)
    }

    /// Matrix of `x ↦ x a`.
    pub fn right_matrix(&self, a: &AlgElement) -> CMat {
        combine(&self.right, &self.algebra.to_coords(a), self.dim)
    }

    // ---- element-level API --------------------------------------------------

    pub fn star(&self, x: &ModuleElement) -> Result<ModuleElement> {
        self.own(x)?;
        Ok(ModuleElement { coords: self.star_vec(&x.coords), owner: self.id })
    }

    pub fn act_left(&self, a: &AlgElement, x: &ModuleElement) -> Result<ModuleElement> {
        self.own(x)?;
        self.algebra.check(a)?;
        Ok(ModuleElement { coords: self.left_matrix(a) * &x.coords, owner: self.id })
    }

    pub fn act_right(&self, x: &ModuleElement, a: &AlgElement) -> Result<ModuleElement> {
        self.own(x)?;
        self.algebra.check(a)?;
        Ok(ModuleElement { coords: self.right_matrix(a) * &x.coords, owner: self.id })
    }

    pub fn pair(&self, x: &ModuleElement, y: &ModuleElement) -> Result<AlgElement> {
        self.own(x)?;
        self.own(y)?;
        Ok(self.pair_vec(&x.coords, &y.coords))
    }

    pub fn inner_l(&self, x: &ModuleElement, y: &ModuleElement) -> Result<AlgElement> {
        self.own(x)?;
        self.own(y)?;
        Ok(self.inner_l_vec(&x.coords, &y.coords))
    }

    pub fn inner_r(&self, x: &ModuleElement, y: &ModuleElement) -> Result<AlgElement> {
        self.own(x)?;
        self.own(y)?;
        Ok(self.inner_r_vec(&x.coords, &y.coords))
    }

    pub fn seminorm_l_vec(&self, x: &CVec) -> f64 {
        self.inner_l_vec(x, x).norm().sqrt()
    }

    pub fn seminorm_r_vec(&self, x: &CVec) -> f64 {
        self.inner_r_vec(x, x).norm().sqrt()
    }

    pub fn norm_m_vec(&self, x: &CVec) -> f64 {
        self.seminorm_l_vec(x).max(self.seminorm_r_vec(x))
    }

    pub fn seminorm_l(&self, x: &ModuleElement) -> f64 {
        self.seminorm_l_vec(&x.coords)
    }

    pub fn seminorm_r(&self, x: &ModuleElement) -> f64 {
        self.seminorm_r_vec(&x.coords)
    }

    pub fn norm_m(&self, x: &ModuleElement) -> f64 {
        self.norm_m_vec(&x.coords)
    }

    // ---- derived tensors ---------------------------------------------------

    /// `H^l_α` with `⟨x, y⟩_l = Σ x_i conj(y_j) (H^l_α)_{ij}` (component α).
    pub fn left_gram_tensor(&self) -> Vec<CMat> {
        self.pairing.iter().map(|p| p * &self.involution).collect()
    }

    /// `H^r_α` with `⟨x, y⟩_r = Σ conj(x_i) y_j (H^r_α)_{ij}` (component α).
    pub fn right_gram_tensor(&self) -> Vec<CMat> {
        self.pairing.iter().map(|p| self.involution.transpose() * p).collect()
    }

    fn tau_weighted(&self, tensor: &[CMat]) -> CMat {
        let mut out = CMat::zeros(self.dim, self.dim);
        for (alpha, h) in tensor.iter().enumerate() {
            let t = self.algebra.unit_trace(alpha);
            if t != 0.0 {
                out += h * c(t, 0.0);
            }
        }
        out
    }

    /// Hermitian `G_l` with `τ(⟨x, x⟩_l) = x* G_l x`.
    pub fn tau_gram_l(&self) -> CMat {
        self.tau_weighted(&self.left_gram_tensor()).transpose()
    }

    /// Hermitian `G_r` with `τ(⟨x, x⟩_r) = x* G_r x`.
    pub fn tau_gram_r(&self) -> CMat {
        self.tau_weighted(&self.right_gram_tensor())
    }

    // ---- axiom suite -------------------------------------------------------

    pub fn check_axioms(&self) -> AxiomReport {
        let alg = &self.algebra;
        let d = self.dim;
        let mut res = BTreeMap::new();
        let gens = alg.generators();

        let id = CMat::identity(d, d);
        res.insert(Axiom::Involutive, linalg::rel_residual(&(&self.involution * self.involution.conjugate()), &id));

        // (a) conj(P_{α*}) = Sᵀ P_αᵀ S
        let mut ra: f64 = 0.0;
        for alpha in 0..alg.dim() {
            let lhs = self.pairing[alg.star_index(alpha)].conjugate();
            let rhs = self.involution.transpose() * self.pairing[alpha].transpose() * &self.involution;
            ra = ra.max(linalg::rel_residual(&lhs, &rhs));
        }
        res.insert(Axiom::PairingAdjoint, ra);

        // (b) on generators: S conj(L_g) = R_{g*} S
        let mut rb: f64 = 0.0;
        for &g in &gens {
            let lhs = &self.involution * self.left[g].conjugate();
            let rhs = &self.right[alg.star_index(g)] * &self.involution;
            rb = rb.max(linalg::rel_residual(&lhs, &rhs));
        }
        res.insert(Axiom::ActionInvolution, rb);

        res.insert(Axiom::Bilinearity, self.bilinearity_residual(&gens));
        res.insert(Axiom::Actions, self.action_residual(&gens));

        let (ml, sl) = self.block_gram_margin(&self.left_gram_tensor());
        let (mr, sr) = self.block_gram_margin(&self.right_gram_tensor());
        let pos = [(ml, sl), (mr, sr)]
            .iter()
            .map(|&(m, s)| if m >= 0.0 { 0.0 } else { -m / (1.0 + s) })
            .fold(0.0, f64::max);
        res.insert(Axiom::Positivity, pos);

        AxiomReport { residuals: res, positivity_margin_l: ml, positivity_margin_r: mr, tol: self.tol }
    }

    /// Minimum eigenvalue and spectral scale of the block Gram matrices
    /// `[(H_{α(k,r,s)})_{ij}]_{(i,r),(j,s)}`, one per algebra block.
    /// Non-Hermitian parts count as negative margin.
    fn block_gram_margin(&self, tensor: &[CMat]) -> (f64, f64) {
        let alg = &self.algebra;
        let d = self.dim;
        let mut min_eig = f64::INFINITY;
        let mut scale: f64 = 0.0;
        if d == 0 {
            return (0.0, 0.0);
        }
        for (k, &n) in alg.block_dims().iter().enumerate() {
            let size = d * n;
            let mut g = CMat::zeros(size, size);
            for r in 0..n {
                for s in 0..n {
                    let h = &tensor[alg.index_of(k, r, s)];
                    for i in 0..d {
                        for j in 0..d {
                            g[(i * n + r, j * n + s)] = h[(i, j)];
                        }
                    }
                }
            }
            let herm = linalg::max_abs(&(&g - g.adjoint()));
            let (vals, _) = linalg::eigh(&g);
            let lo = vals.first().copied().unwrap_or(0.0);
            let hi = vals.iter().fold(0.0_f64, |a, &b| a.max(b.abs()));
            min_eig = min_eig.min(lo - herm);
            scale = scale.max(hi);
        }
        (min_eig, scale)
    }

    fn bilinearity_residual(&self, gens: &[usize]) -> f64 {
        let alg = &self.algebra;
        let mut r: f64 = 0.0;
        for &g in gens {
            for alpha in 0..alg.dim() {
                // Σ P_β over β with u_g u_β = u_α, resp. u_β u_g = u_α
                let mut left_prod = CMat::zeros(self.dim, self.dim);
                let mut right_prod = CMat::zeros(self.dim, self.dim);
                for beta in 0..alg.dim() {
                    if alg.unit_product(g, beta) == Some(alpha) {
                        left_prod += &self.pairing[beta];
                    }
                    if alg.unit_product(beta, g) == Some(alpha) {
                        right_prod += &self.pairing[beta];
                    }
                }
                let p = &self.pairing[alpha];
                r = r.max(linalg::rel_residual(&(self.left[g].transpose() * p), &left_prod));
                r = r.max(linalg::rel_residual(&(self.right[g].transpose() * p), &(p * &self.left[g])));
                r = r.max(linalg::rel_residual(&(p * &self.right[g]), &right_prod));
            }
        }
        r
    }

    /// Unital homomorphism `L`, unital anti-homomorphism `R`, `[L_a, R_b] = 0`.
    ///
    /// With `P_i = L(e_ii)` orthogonal idempotents summing to `I` and
    /// `L(e_ij) = P_i L(e_ij) P_j`, all products `L(e_ij) L(e_lm)` with
    /// `j ≠ l` vanish; the remaining `L(e_ij) L(e_jm) = L(e_im)` are
    /// checked directly.
    fn action_residual(&self, gens: &[usize]) -> f64 {
        let alg = &self.algebra;
        let d = self.dim;
        let id = CMat::identity(d, d);
        let mut r: f64 = 0.0;
        let diag: Vec<usize> = (0..alg.dim())
            .filter(|&a| {
                let u = alg.unit_index(a);
                u.row == u.col
            })
            .collect();
        for (act, anti) in [(&self.left, false), (&self.right, true)] {
            let mut sum = CMat::zeros(d, d);
            for &p in &diag {
                sum += &act[p];
            }
            r = r.max(linalg::rel_residual(&sum, &id));
            for &p in &diag {
                for &q in &diag {
                    let expect = if p == q { act[p].clone() } else { CMat::zeros(d, d) };
                    r = r.max(linalg::rel_residual(&(&act[p] * &act[q]), &expect));
                }
            }
            for alpha in 0..alg.dim() {
                let u = alg.unit_index(alpha);
                let pi = &act[alg.index_of(u.block, u.row, u.row)];
                let pj = &act[alg.index_of(u.block, u.col, u.col)];
                let sandwiched = if anti { pj * &act[alpha] * pi } else { pi * &act[alpha] * pj };
                r = r.max(linalg::rel_residual(&sandwiched, &act[alpha]));
            }
            for (k, &n) in alg.block_dims().iter().enumerate() {
                for i in 0..n {
                    for j in 0..n {
                        for m in 0..n {
                            let a = &act[alg.index_of(k, i, j)];
                            let b = &act[alg.index_of(k, j, m)];
                            let prod = if anti { b * a } else { a * b };
                            r = r.max(linalg::rel_residual(&prod, &act[alg.index_of(k, i, m)]));
                        }
                    }
                }
            }
        }
        for &g in gens {
            for &h in gens {
                let lr = &self.left[g] * &self.right[h];
                let rl = &self.right[h] * &self.left[g];
                r = r.max(linalg::rel_residual(&lr, &rl));
            }
        }
        r
    }

    // ---- null space and quotient ---------------------------------------------

    fn psd_kernel(&self, h: &CMat) -> CMat {
        let (vals, vecs) = linalg::eigh(h);
        let lmax = vals.iter().fold(0.0_f64, |a, &b| a.max(b.abs()));
        let cut = linalg::cutoff(lmax, self.tol);
        let cols: Vec<usize> = (0..vals.len()).filter(|&i| vals[i] <= cut).collect();
        linalg::select_columns(&vecs, &cols)
    }

    fn psd_support(&self, h: &CMat) -> CMat {
        let (vals, vecs) = linalg::eigh(h);
        let lmax = vals.iter().fold(0.0_f64, |a, &b| a.max(b.abs()));
        let cut = linalg::cutoff(lmax, self.tol);
        let cols: Vec<usize> = (0..vals.len()).filter(|&i| vals[i] > cut).collect();
        linalg::select_columns(&vecs, &cols)
    }

    /// Orthonormal basis of `N = {x : ‖x‖_m = 0}`, the kernel of the
    /// positive form `τ(⟨x,x⟩_l) + τ(⟨x,x⟩_r)`; τ is faithful, so the kernel
    /// is exactly where both A-valued products vanish.
    pub fn null_space(&self) -> CMat {
        self.psd_kernel(&(self.tau_gram_l() + self.tau_gram_r()))
    }

    /// Orthonormal basis of `N_l = {x : ‖x‖_l = 0}`.
    pub fn null_space_l(&self) -> CMat {
        self.psd_kernel(&self.tau_gram_l())
    }

    /// Orthonormal basis of `N_r = {x : ‖x‖_r = 0}`.
    pub fn null_space_r(&self) -> CMat {
        self.psd_kernel(&self.tau_gram_r())
    }

    /// Orthonormal basis of `N_r^⊥` (coordinate inner product).
    pub fn support_r(&self) -> CMat {
        self.psd_support(&self.tau_gram_r())
    }

    /// `E/N` with the induced structure. The section lifts onto `N^⊥`.
    pub fn quotient_by_null(&self) -> Result<(StarBimodule, QuotientMap)> {
        let lift = self.psd_support(&(self.tau_gram_l() + self.tau_gram_r()));
        let project = lift.adjoint();
        let q = self.compress(&lift, &project)?;
        Ok((q, QuotientMap { project, lift }))
    }

    /// Structure induced on an invariant subspace or quotient, given a
    /// section `lift` and a left inverse `project`.
    pub(crate) fn compress(&self, lift: &CMat, project: &CMat) -> Result<StarBimodule> {
        let dq = lift.ncols();
        let tensors = BimoduleTensors {
            left: self.left.iter().map(|l| project * l * lift).collect(),
            right: self.right.iter().map(|r| project * r * lift).collect(),
            pairing: self.pairing.iter().map(|p| lift.transpose() * p * lift).collect(),
            involution: project * &self.involution * lift.conjugate(),
        };
        if dq == 0 {
            return Ok(StarBimodule::zero(&self.algebra).with_tol(self.tol));
        }
        StarBimodule::new(&self.algebra, dq, tensors, self.tol)
    }

    /// Real basis of `E_sa = {x = x*}`.
    pub fn selfadjoint_basis(&self) -> Vec<ModuleElement> {
        linalg::antilinear_fixed_basis(&self.involution, self.tol)
            .into_iter()
            .map(|v| ModuleElement { coords: v, owner: self.id })
            .collect()
    }

    // ---- module operators ----------------------------------------------------

    /// Residual of module-linearity on the algebra generators.
    pub fn linearity_residual(&self, t: &CMat, side: Side) -> f64 {
        let act = match side {
            Side::LeftLinear => &self.left,
            Side::RightLinear => &self.right,
        };
        self.algebra
            .generators()
            .iter()
            .map(|&g| linalg::rel_residual(&(t * &act[g]), &(&act[g] * t)))
            .fold(0.0, f64::max)
    }

    /// Solves for the module adjoint of `t` with respect to `⟨·,·⟩_l`
    /// (left-linear) or `⟨·,·⟩_r` (right-linear). Returns the minimum-norm
    /// solution and the residual of the defining identity.
    pub fn module_adjoint(&self, t: &CMat, side: Side) -> (CMat, f64) {
        let d = self.dim;
        if d == 0 {
            return (CMat::zeros(0, 0), 0.0);
        }
        let (tensor, rhs_parts): (Vec<CMat>, Vec<CMat>) = match side {
            // Tᵀ H_α = H_α conj(X)
            Side::LeftLinear => {
                let h = self.left_gram_tensor();
                let rhs = h.iter().map(|m| t.transpose() * m).collect();
                (h, rhs)
            }
            // H_α X = T* H_α
            Side::RightLinear => {
                let h = self.right_gram_tensor();
                let rhs = h.iter().map(|m| t.adjoint() * m).collect();
                (h, rhs)
            }
        };
        let a = linalg::vstack(&tensor, d);
        let b = linalg::vstack(&rhs_parts, d);
        let y = linalg::lstsq(&a, &b, 1e-12);
        let residual = linalg::rel_residual(&(&a * &y), &b);
        let x = match side {
            Side::LeftLinear => y.conjugate(),
            Side::RightLinear => y,
        };
        (x, residual)
    }

    pub fn operator(&self, matrix: CMat, side: Side) -> Result<ModuleOperator> {
        if matrix.shape() != (self.dim, self.dim) {
            return Err(StarError::ShapeMismatch("operator matrix must be dim × dim".into()));
        }
        let lin = self.linearity_residual(&matrix, side);
        if lin > self.tol {
            return Err(StarError::NotAdjointable(lin));
        }
        let (adjoint_matrix, residual) = self.module_adjoint(&matrix, side);
        if residual > self.tol {
            return Err(StarError::NotAdjointable(residual));
        }
        Ok(ModuleOperator { matrix, side, adjoint_matrix })
    }

    /// `T̂(x) = (T x*)*`, i.e. `T̂ = S conj(T) conj(S)`. Maps left-linear
    /// adjointable operators to right-linear ones and back; the adjoint of
    /// `T̂` is the hat of `T*`.
    pub fn op_hat(&self, t: &ModuleOperator) -> Result<ModuleOperator> {
        let (_, residual) = self.module_adjoint(&t.matrix, t.side);
        if residual > self.tol || self.linearity_residual(&t.matrix, t.side) > self.tol {
            return Err(StarError::NotAdjointable(residual));
        }
        Ok(ModuleOperator {
            matrix: self.hat_matrix(&t.matrix),
            side: t.side.flip(),
            adjoint_matrix: self.hat_matrix(&t.adjoint_matrix),
        })
    }

    pub fn hat_matrix(&self, t: &CMat) -> CMat {
        &self.involution * t.conjugate() * self.involution.conjugate()
    }

    /// `sup_x max(‖Tx‖_l/‖x‖_l, ‖Tx‖_r/‖x‖_r)` with `0/0 = 0`; returns
    /// `f64::INFINITY` when `T` maps a null vector of either seminorm out
    /// of that null space.
    pub fn op_norm_def4(&self, t: &CMat) -> f64 {
        let l = ratio_sup(t, &self.tau_gram_l(), self.tol);
        let r = ratio_sup(t, &self.tau_gram_r(), self.tol);
        l.max(r)
    }

    /// `L_a`: right-linear, adjoint `L_{a*}` for `⟨·,·⟩_r`.
    pub fn left_rep(&self, a: &AlgElement) -> ModuleOperator {
        ModuleOperator {
            matrix: self.left_matrix(a),
            side: Side::RightLinear,
            adjoint_matrix: self.left_matrix(&a.adjoint()),
        }
    }

    /// `R_a`: left-linear, adjoint `R_{a*}` for `⟨·,·⟩_l`.
    pub fn right_rep(&self, a: &AlgElement) -> ModuleOperator {
        ModuleOperator {
            matrix: self.right_matrix(a),
            side: Side::LeftLinear,
            adjoint_matrix: self.right_matrix(&a.adjoint()),
        }
    }
}

fn combine(tensor: &[CMat], coeffs: &CVec, d: usize) -> CMat {
    let mut out = CMat::zeros(d, d);
    for (m, &a) in tensor.iter().zip(coeffs.iter()) {
        if a != ZERO {
            out += m * a;
        }
    }
    out
}

/// `sup_v ‖T v‖_H / ‖v‖_H` for the seminorm `‖v‖_H² = v* H v`.
///
/// This is the spectral norm of `T` in the Hilbert space obtained from the
/// τ-scalarized form; for operators that are module-linear on the side of
/// `H` it equals the C*-module operator norm (faithful representation).
pub(crate) fn ratio_sup(t: &CMat, h: &CMat, tol: f64) -> f64 {
    let n = h.nrows();
    if n == 0 {
        return 0.0;
    }
    let (vals, vecs) = linalg::eigh(h);
    let lmax = vals.iter().fold(0.0_f64, |a, &b| a.max(b.abs()));
    let cut = linalg::cutoff(lmax, tol);
    let tnorm = linalg::spectral_norm(t);
    for i in (0..n).filter(|&i| vals[i] <= cut) {
        let image = t * vecs.column(i);
        let q = (image.adjoint() * h * &image)[(0, 0)].re;
        if q > cut * (1.0 + tnorm * tnorm) {
            return f64::INFINITY;
        }
    }
    let pos: Vec<usize> = (0..n).filter(|&i| vals[i] > cut).collect();
    if pos.is_empty() {
        return 0.0;
    }
    let mut w = linalg::select_columns(&vecs, &pos);
    for (col, &i) in pos.iter().enumerate() {
        w.column_mut(col).scale_mut(1.0 / vals[i].sqrt());
    }
    let m = w.adjoint() * t.adjoint() * h * t * &w;
    let top = linalg::eigh(&m).0.last().copied().unwrap_or(0.0);
    top.max(0.0).sqrt()
}

/// Residuals of a linear map `Φ: E → F` between bimodules over the same
/// algebra, checked on bases: pairing, involution, both actions, and
/// bijectivity (`Φ` square of full rank).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IsomorphismCheck {
    pub pairing: f64,
    pub involution: f64,
    pub actions: f64,
    pub bijective: bool,
}

impl IsomorphismCheck {
    pub fn residual(&self) -> f64 {
        self.pairing.max(self.involution).max(self.actions)
    }

    pub fn passed(&self, tol: f64) -> bool {
        self.bijective && self.residual() <= tol
    }
}

pub fn check_isomorphism(source: &StarBimodule, target: &StarBimodule, phi: &CMat) -> Result<IsomorphismCheck> {
    if source.algebra != target.algebra {
        return Err(StarError::ShapeMismatch("isomorphism between modules over different algebras".into()));
    }
    if phi.shape() != (target.dim, source.dim) {
        return Err(StarError::ShapeMismatch(format!(
            "map of shape {:?} between modules of dimension {} and {}",
            phi.shape(),
            source.dim,
            target.dim
        )));
    }
    let mut pairing: f64 = 0.0;
    let mut actions: f64 = 0.0;
    for alpha in 0..source.algebra.dim() {
        let pulled = phi.transpose() * &target.pairing[alpha] * phi;
        pairing = pairing.max(linalg::rel_residual(&pulled, &source.pairing[alpha]));
        actions = actions.max(linalg::rel_residual(&(phi * &source.left[alpha]), &(&target.left[alpha] * phi)));
        actions = actions.max(linalg::rel_residual(&(phi * &source.right[alpha]), &(&target.right[alpha] * phi)));
    }
    let involution = linalg::rel_residual(&(phi * &source.involution), &(&target.involution * phi.conjugate()));
    let bijective = source.dim == target.dim && (source.dim == 0 || linalg::rank(phi, 1e-10) == source.dim);
    Ok(IsomorphismCheck { pairing, involution, actions, bijective })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constructions::{gns_bimodule, hyperbolic_pair, multiplication_module};
    use crate::linalg::{ONE, I};
    use crate::StateFunctional;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn m2() -> CStarAlgebra {
        CStarAlgebra::full_matrix(2).unwrap()
    }

    fn line_tensors(sign: f64) -> BimoduleTensors {
        let one = CMat::identity(1, 1);
        BimoduleTensors {
            left: vec![one.clone()],
            right: vec![one.clone()],
            pairing: vec![one.clone() * c(sign, 0.0)],
            involution: one,
        }
    }

    #[test]
    fn line_module_and_its_negation() {
        let pt = CStarAlgebra::commutative(1).unwrap();
        assert!(StarBimodule::new(&pt, 1, line_tensors(1.0), DEFAULT_TOL).is_ok());
        match StarBimodule::new(&pt, 1, line_tensors(-1.0), DEFAULT_TOL) {
            Err(StarError::AxiomViolation { axiom: Axiom::Positivity, .. }) => {}
            other => panic!("expected positivity violation, got {other:?}"),
        }
    }

    #[test]
    fn shape_mismatch_rejected() {
        let pt = CStarAlgebra::commutative(1).unwrap();
        assert!(matches!(StarBimodule::new(&pt, 2, line_tensors(1.0), DEFAULT_TOL), Err(StarError::ShapeMismatch(_))));
    }

    #[test]
    fn multiplication_module_products() {
        let a = m2();
        let e = multiplication_module(&a).unwrap();
        let x = e.basis_element(a.index_of(0, 0, 1));
        assert_eq!(e.inner_l(&x, &x).unwrap(), a.unit(a.index_of(0, 0, 0)));
        assert_eq!(e.inner_r(&x, &x).unwrap(), a.unit(a.index_of(0, 1, 1)));
        assert!((e.seminorm_l(&x) - 1.0).abs() < 1e-12 && (e.seminorm_r(&x) - 1.0).abs() < 1e-12);
        let y = e.basis_element(2);
        assert_eq!(e.inner_l(&e.zero_element(), &y).unwrap(), a.zero());
        let h = e.element(CVec::from_vec(vec![ONE, c(0.0, 2.0), c(0.0, -2.0), c(3.0, 0.0)])).unwrap();
        assert!(e.inner_l(&h, &h).unwrap().max_abs() > 0.0);
        assert!((&e.inner_l(&h, &h).unwrap() - &e.pair(&h, &h).unwrap()).max_abs() < 1e-12);
        assert_eq!(e.null_space().ncols(), 0);
        assert_eq!(e.selfadjoint_basis().len(), 4);
    }

    #[test]
    fn owner_mismatch() {
        let e = multiplication_module(&m2()).unwrap();
        let f = multiplication_module(&m2()).unwrap();
        assert!(matches!(e.inner_l(&e.basis_element(0), &f.basis_element(0)), Err(StarError::OwnerMismatch)));
        assert!(matches!(e.star(&f.basis_element(0)), Err(StarError::OwnerMismatch)));
    }

    #[test]
    fn zero_pairing_is_all_null() {
        let a = m2();
        let mut t = multiplication_module(&a).unwrap().tensors();
        for p in &mut t.pairing {
            p.fill(ZERO);
        }
        let e = StarBimodule::new(&a, 4, t, DEFAULT_TOL).unwrap();
        assert_eq!(e.null_space().ncols(), 4);
        let (q, map) = e.quotient_by_null().unwrap();
        assert_eq!(q.dim(), 0);
        assert_eq!(map.project.nrows(), 0);
    }

    #[test]
    fn quotient_pairing_constant_on_cosets() {
        let a = m2();
        let rho = a.element(vec![CMat::from_row_slice(2, 2, &[ONE, ZERO, ZERO, ZERO])]).unwrap();
        let e = gns_bimodule(&a, &StateFunctional::new(&a, rho, 1e-12).unwrap()).unwrap();
        let n = e.null_space();
        assert_eq!(n.ncols(), 1);
        let (q, map) = e.quotient_by_null().unwrap();
        assert_eq!(q.dim(), 3);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..20 {
            let x = e.random_element(&mut rng).into_coords();
            let y = e.random_element(&mut rng).into_coords();
            let shift = n.column(0) * c(0.7, -1.3);
            let moved = &x + &shift;
            assert!((&e.pair_vec(&moved, &y) - &e.pair_vec(&x, &y)).max_abs() < 1e-9);
            let (qx, qy) = (&map.project * &x, &map.project * &y);
            assert!((&q.pair_vec(&qx, &qy) - &e.pair_vec(&x, &y)).max_abs() < 1e-9);
            assert!((map.project.clone() * &shift).norm() < 1e-9);
        }
    }

    #[test]
    fn hyperbolic_selfadjoint_part() {
        let e = hyperbolic_pair(1).unwrap();
        let basis = e.selfadjoint_basis();
        assert_eq!(basis.len(), 2);
        for x in &basis {
            let v = x.coords();
            assert!((v[1] - v[0].conj()).norm() < 1e-12);
        }
        let zero = StarBimodule::zero(&CStarAlgebra::commutative(1).unwrap());
        assert!(zero.selfadjoint_basis().is_empty());
    }

    #[test]
    fn hat_examples() {
        let a = m2();
        let e = multiplication_module(&a).unwrap();
        let id = e.operator(CMat::identity(4, 4), Side::LeftLinear).unwrap();
        let hat = e.op_hat(&id).unwrap();
        assert!(linalg::max_abs(&(hat.matrix - CMat::identity(4, 4))) < 1e-12);
        assert_eq!(hat.side, Side::RightLinear);

        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..50 {
            let g = a.random_element(&mut rng);
            let r = e.right_rep(&g);
            let h = e.op_hat(&r).unwrap();
            assert!(linalg::rel_residual(&h.matrix, &e.left_matrix(&g.adjoint())) < 1e-12);
            let back = e.op_hat(&h).unwrap();
            assert!(linalg::rel_residual(&back.matrix, &r.matrix) < 1e-12);
            assert!(linalg::rel_residual(&back.adjoint_matrix, &r.adjoint_matrix) < 1e-12);
            assert!((e.op_norm_def4(&h.matrix) - e.op_norm_def4(&r.matrix)).abs() < 1e-8);
            let s = e.right_rep(&a.random_element(&mut rng));
            let st = &s.matrix * &r.matrix;
            let lhs = e.hat_matrix(&st);
            let rhs = e.hat_matrix(&s.matrix) * e.hat_matrix(&r.matrix);
            assert!(linalg::rel_residual(&lhs, &rhs) < 1e-12);
        }
    }

    #[test]
    fn non_linear_operator_rejected() {
        let e = multiplication_module(&m2()).unwrap();
        // transpose of coordinates is not left-linear
        let mut t = CMat::zeros(4, 4);
        for (i, j) in [(0, 0), (1, 2), (2, 1), (3, 3)] {
            t[(i, j)] = ONE;
        }
        assert!(matches!(e.operator(t, Side::LeftLinear), Err(StarError::NotAdjointable(_))));
    }

    #[test]
    fn def4_norm_examples() {
        let a = m2();
        let e = multiplication_module(&a).unwrap();
        assert!((e.op_norm_def4(&CMat::identity(4, 4)) - 1.0).abs() < 1e-12);
        let two = e.left_matrix(&a.identity().scale(c(2.0, 0.0)));
        assert!((e.op_norm_def4(&two) - 2.0).abs() < 1e-12);
        let e11 = e.left_rep(&a.unit(0));
        assert!(e.op_norm_def4(&e11.matrix) <= 1.0 + 1e-12);

        // swap v ⊕ δ ↦ δ ⊕ v sends the l-null vector 0 ⊕ δ to v ⊕ 0
        let h = hyperbolic_pair(1).unwrap();
        let swap = h.involution_matrix().clone();
        assert!(h.op_norm_def4(&swap).is_infinite());
    }

    #[test]
    fn representations() {
        let a = m2();
        let e = multiplication_module(&a).unwrap();
        assert!(linalg::max_abs(&(e.left_rep(&a.identity()).matrix - CMat::identity(4, 4))) < 1e-15);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..50 {
            let x = a.random_element(&mut rng);
            let y = a.random_element(&mut rng);
            let l = e.left_rep(&x);
            let (adj, res) = e.module_adjoint(&l.matrix, Side::RightLinear);
            assert!(res < 1e-10);
            assert!(linalg::rel_residual(&adj, &l.adjoint_matrix) < 1e-9);
            let r = e.right_rep(&x);
            let (adj, res) = e.module_adjoint(&r.matrix, Side::LeftLinear);
            assert!(res < 1e-10);
            assert!(linalg::rel_residual(&adj, &r.adjoint_matrix) < 1e-9);
            let xy = &x * &y;
            assert!(linalg::rel_residual(&e.left_matrix(&xy), &(e.left_matrix(&x) * e.left_matrix(&y))) < 1e-12);
            assert!(linalg::rel_residual(&e.right_matrix(&xy), &(e.right_matrix(&y) * e.right_matrix(&x))) < 1e-12);
        }
    }

    fn sample_modules() -> Vec<StarBimodule> {
        let a = CStarAlgebra::new(&[2, 1], &[1.0, 2.0]).unwrap();
        let rho = a.central(&[c(0.2, 0.0), c(0.3, 0.0)]);
        vec![
            multiplication_module(&a).unwrap(),
            crate::constructions::tensor_bimodule(&m2(), &[0], &nalgebra::DMatrix::identity(2, 2)).unwrap(),
            hyperbolic_pair(2).unwrap(),
            gns_bimodule(&a, &StateFunctional::new(&a, rho, 1e-9).unwrap()).unwrap(),
        ]
    }

    #[test]
    fn seminorm_inequalities_on_samples() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for e in sample_modules() {
            let alg = e.algebra().clone();
            for _ in 0..200 {
                let a = alg.random_element(&mut rng);
                let x = e.random_element(&mut rng);
                let y = e.random_element(&mut rng);
                let na = alg.op_norm(&a).unwrap();
                let ax = e.act_left(&a, &x).unwrap();
                let xa = e.act_right(&x, &a).unwrap();
                for (l, r) in [(e.seminorm_l(&ax), e.seminorm_r(&ax)), (e.seminorm_l(&xa), e.seminorm_r(&xa))] {
                    assert!(l <= na * e.seminorm_l(&x) + 1e-9);
                    assert!(r <= na * e.seminorm_r(&x) + 1e-9);
                }
                let il = alg.op_norm(&e.inner_l(&x, &y).unwrap()).unwrap();
                assert!(il <= e.seminorm_l(&x) * e.seminorm_l(&y) + 1e-9);
                let ir = alg.op_norm(&e.inner_r(&x, &y).unwrap()).unwrap();
                assert!(ir <= e.seminorm_r(&x) * e.seminorm_r(&y) + 1e-9);
                let xs = e.star(&x).unwrap();
                assert!((e.seminorm_r(&xs) - e.seminorm_l(&x)).abs() < 1e-12);
            }
            for s in e.selfadjoint_basis() {
                let (l, r, m) = (e.seminorm_l(&s), e.seminorm_r(&s), e.norm_m(&s));
                assert!((l - r).abs() < 1e-12 && (l - m).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn block_gram_criterion_matches_sampling() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        for e in sample_modules() {
            assert!(e.check_axioms().passed());
            for _ in 0..500 {
                let x = e.random_element(&mut rng);
                let v = e.pair(&x, &e.star(&x).unwrap()).unwrap();
                assert!(e.algebra().is_positive(&v, 1e-9));
            }
        }
    }

    #[test]
    fn isomorphism_check_on_identity_and_scaling() {
        let e = multiplication_module(&m2()).unwrap();
        assert!(check_isomorphism(&e, &e, &CMat::identity(4, 4)).unwrap().passed(1e-12));
        let bad = CMat::identity(4, 4) * I;
        assert!(!check_isomorphism(&e, &e, &bad).unwrap().passed(1e-6));
    }
}
