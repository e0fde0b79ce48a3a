//! Representation of a `*`-bimodule inside the adjointable operators on the
//! right Hilbert module `F = A ⊕ E_r`, where `E_r = E / N_r`.
//!
//! Operator norms on `F` are spectral norms in the Hilbert space
//! `(F, τ∘⟨·,·⟩)`. Because `τ` is faithful this is a faithful
//! `*`-representation of the C*-algebra of adjointable operators, hence
//! isometric, so no separate C*-module norm computation is needed.

use rand::Rng;

use crate::algebra::{AlgElement, CStarAlgebra};
use crate::bimodule::StarBimodule;
use crate::error::{Result, StarError};
use crate::linalg::{self, c, CMat, CVec, ONE};

#[derive(Debug, Clone)]
pub struct LinkingSpace {
    module: StarBimodule,
    /// `d × er`, orthonormal coordinates of `N_r^⊥`; column `j` represents
    /// the `j`-th basis vector of `E_r`.
    support: CMat,
    /// `⟨u, v⟩_γ = u* W_γ v` (A-valued right inner product on `F`).
    inner_tensor: Vec<CMat>,
    tau_gram: CMat,
    sqrt_gram: CMat,
    inv_sqrt_gram: CMat,
    /// Right action of each matrix unit on `F`.
    right_action: Vec<CMat>,
}

/// An operator on `F` together with its adjoint for the A-valued inner
/// product.
#[derive(Debug, Clone)]
pub struct LinkingOperator {
    pub matrix: CMat,
    pub a_adjoint: CMat,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReportItem {
    pub name: String,
    pub max_residual: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Theorem12Report {
    pub items: Vec<ReportItem>,
    pub tol: f64,
}

impl Theorem12Report {
    pub fn passed(&self) -> bool {
        self.items.iter().all(|i| i.pass)
    }

    pub fn max_residual(&self) -> f64 {
        self.items.iter().fold(0.0, |a, i| a.max(i.max_residual))
    }
}

impl LinkingSpace {
    pub fn build(module: &StarBimodule) -> Self {
        let alg = module.algebra();
        let da = alg.dim();
        let q = module.support_r();
        let er = q.ncols();
        let n = da + er;
        let hr = module.right_gram_tensor();
        let mut inner_tensor = Vec::with_capacity(da);
        for gamma in 0..da {
            let mut w = CMat::zeros(n, n);
            for a in 0..da {
                for b in 0..da {
                    if alg.unit_product(alg.star_index(a), b) == Some(gamma) {
                        w[(a, b)] = ONE;
                    }
                }
            }
            if er > 0 {
                w.view_mut((da, da), (er, er)).copy_from(&(q.adjoint() * &hr[gamma] * &q));
            }
            inner_tensor.push(w);
        }
        let mut tau_gram = CMat::zeros(n, n);
        for (gamma, w) in inner_tensor.iter().enumerate() {
            let t = alg.unit_trace(gamma);
            if t != 0.0 {
                tau_gram += w * c(t, 0.0);
            }
        }
        let tau_gram = (&tau_gram + tau_gram.adjoint()).scale(0.5);
        let (sqrt_gram, inv_sqrt_gram) = linalg::psd_sqrt_pair(&tau_gram, 1e-13);
        let right_action = (0..da)
            .map(|g| {
                let u = alg.unit(g);
                let mut m = CMat::zeros(n, n);
                m.view_mut((0, 0), (da, da)).copy_from(&alg.right_mult_matrix(&u));
                if er > 0 {
                    m.view_mut((da, da), (er, er)).copy_from(&(q.adjoint() * module.right_matrix(&u) * &q));
                }
                m
            })
            .collect();
        Self { module: module.clone(), support: q, inner_tensor, tau_gram, sqrt_gram, inv_sqrt_gram, right_action }
    }

    pub fn algebra(&self) -> &CStarAlgebra {
        self.module.algebra()
    }

    pub fn module(&self) -> &StarBimodule {
        &self.module
    }

    pub fn er_dim(&self) -> usize {
        self.support.ncols()
    }

    pub fn dim(&self) -> usize {
        self.algebra().dim() + self.er_dim()
    }

    /// Section `E_r → E` onto `N_r^⊥`.
    pub fn support(&self) -> &CMat {
        &self.support
    }

    pub fn tau_gram(&self) -> &CMat {
        &self.tau_gram
    }

    /// `⟨(b,y),(c,z)⟩ = b*c + ⟨y,z⟩_r`.
    pub fn a_inner(&self, u: &CVec, v: &CVec) -> AlgElement {
        let alg = self.algebra();
        let coords =
            CVec::from_iterator(alg.dim(), self.inner_tensor.iter().map(|w| (u.adjoint() * w * v)[(0, 0)]));
        alg.from_coords(&coords)
    }

    /// Norm in the C*-algebra of adjointable operators on `F`.
    pub fn op_norm(&self, t: &CMat) -> f64 {
        linalg::spectral_norm(&(&self.sqrt_gram * t * &self.inv_sqrt_gram))
    }

    /// Attaches the adjoint `K⁻¹ T* K` (Hilbert adjoint for `τ∘⟨·,·⟩`) and
    /// verifies it against the A-valued inner product.
    pub fn operator(&self, matrix: CMat, tol: f64) -> Result<LinkingOperator> {
        let kinv = &self.inv_sqrt_gram * &self.inv_sqrt_gram;
        let a_adjoint = kinv * matrix.adjoint() * &self.tau_gram;
        let res = self.adjoint_residual(&matrix, &a_adjoint).max(self.right_linearity_residual(&matrix));
        if res > tol {
            return Err(StarError::NotAdjointable(res));
        }
        Ok(LinkingOperator { matrix, a_adjoint })
    }

    /// Residual of `⟨T u, v⟩ = ⟨u, T† v⟩` over all basis pairs, i.e. of
    /// `T* W_γ = W_γ T†` for every coordinate `γ`.
    pub fn adjoint_residual(&self, t: &CMat, t_dag: &CMat) -> f64 {
        self.inner_tensor
            .iter()
            .map(|w| linalg::rel_residual(&(t.adjoint() * w), &(w * t_dag)))
            .fold(0.0, f64::max)
    }

    /// Residual of `T(u a) = T(u) a` over all matrix units `a`.
    pub fn right_linearity_residual(&self, t: &CMat) -> f64 {
        self.right_action
            .iter()
            .map(|r| linalg::rel_residual(&(t * r), &(r * t)))
            .fold(0.0, f64::max)
    }

    /// `φ(a)(b ⊕ y) = ab ⊕ ay`.
    pub fn phi_matrix(&self, a: &AlgElement) -> CMat {
        let alg = self.algebra();
        let (da, er) = (alg.dim(), self.er_dim());
        let mut m = CMat::zeros(da + er, da + er);
        m.view_mut((0, 0), (da, da)).copy_from(&alg.left_mult_matrix(a));
        if er > 0 {
            let q = &self.support;
            m.view_mut((da, da), (er, er)).copy_from(&(q.adjoint() * self.module.left_matrix(a) * q));
        }
        m
    }

    pub fn phi(&self, a: &AlgElement) -> LinkingOperator {
        LinkingOperator { matrix: self.phi_matrix(a), a_adjoint: self.phi_matrix(&a.adjoint()) }
    }

    /// `ψ(x)(b ⊕ y) = ⟨x*, y⟩_r ⊕ xb`; `⟨x*, y⟩_r` is the bilinear `⟨x, y⟩`.
    pub fn psi_matrix(&self, x: &CVec) -> CMat {
        let alg = self.algebra();
        let (da, er) = (alg.dim(), self.er_dim());
        let q = &self.support;
        let mut m = CMat::zeros(da + er, da + er);
        for j in 0..er {
            let col = alg.to_coords(&self.module.pair_vec(x, &q.column(j).into_owned()));
            m.view_mut((0, da + j), (da, 1)).copy_from(&col);
        }
        if er > 0 {
            for alpha in 0..da {
                let xb = self.module.right_tensor()[alpha].clone() * x;
                m.view_mut((da, alpha), (er, 1)).copy_from(&(q.adjoint() * xb));
            }
        }
        m
    }

    pub fn psi(&self, x: &CVec) -> LinkingOperator {
        LinkingOperator { matrix: self.psi_matrix(x), a_adjoint: self.psi_matrix(&self.module.star_vec(x)) }
    }

    /// `1 ⊕ 0 ∈ F`.
    pub fn unit_vector(&self) -> CVec {
        let alg = self.algebra();
        let mut v = CVec::zeros(self.dim());
        v.rows_mut(0, alg.dim()).copy_from(&alg.to_coords(&alg.identity()));
        v
    }
}

struct Tracker {
    items: Vec<(&'static str, f64)>,
}

impl Tracker {
    fn update(&mut self, name: &'static str, r: f64) {
        match self.items.iter_mut().find(|(n, _)| *n == name) {
            Some((_, v)) => *v = v.max(r),
            None => self.items.push((name, r)),
        }
    }
}

fn vec_residual(a: &CVec, b: &CVec) -> f64 {
    let diff = linalg::max_abs_vec(&(a - b));
    diff / (1.0 + linalg::max_abs_vec(a).max(linalg::max_abs_vec(b)))
}

/// Checks that `φ` is an isometric `*`-homomorphism, that `ψ` is an isometric
/// embedding compatible with the involution and both actions, and the
/// identity `φ(⟨x,y⟩)(1⊕0) = ψ(x)ψ(y)(1⊕0)`, on `samples` random inputs
/// plus the basis of `E`.
pub fn verify_theorem12<R: Rng + ?Sized>(
    module: &StarBimodule,
    samples: usize,
    tol: f64,
    rng: &mut R,
) -> Theorem12Report {
    let space = LinkingSpace::build(module);
    let alg = module.algebra();
    let n = space.dim();
    let mut t = Tracker { items: Vec::new() };
    for name in [
        "phi_isometry",
        "phi_homomorphism",
        "phi_adjoint",
        "psi_isometry",
        "psi_adjoint",
        "module_covariance",
        "unital_identity",
        "right_linearity",
        "c_star_identity",
    ] {
        t.update(name, 0.0);
    }

    let id = space.phi_matrix(&alg.identity());
    t.update("phi_homomorphism", linalg::rel_residual(&id, &CMat::identity(n, n)));

    let mut xs: Vec<CVec> = (0..module.dim()).map(|i| module.basis_element(i).into_coords()).collect();
    xs.extend((0..samples).map(|_| module.random_element(rng).into_coords()));

    for (k, x) in xs.iter().enumerate() {
        let a = alg.random_element(rng);
        let b = alg.random_element(rng);
        let y = &xs[(k * 7 + 3) % xs.len()];

        let pa = space.phi(&a);
        let pb = space.phi_matrix(&b);
        let na = a.norm();
        t.update("phi_isometry", (space.op_norm(&pa.matrix) - na).abs() / (1.0 + na));
        t.update("phi_homomorphism", linalg::rel_residual(&space.phi_matrix(&(&a * &b)), &(&pa.matrix * &pb)));
        t.update("phi_adjoint", space.adjoint_residual(&pa.matrix, &pa.a_adjoint));

        let px = space.psi(x);
        let nm = module.norm_m_vec(x);
        t.update("psi_isometry", (space.op_norm(&px.matrix) - nm).abs() / (1.0 + nm));
        t.update("psi_adjoint", space.adjoint_residual(&px.matrix, &px.a_adjoint));

        let ax = module.left_matrix(&a) * x;
        let xa = module.right_matrix(&a) * x;
        t.update("module_covariance", linalg::rel_residual(&(&pa.matrix * &px.matrix), &space.psi_matrix(&ax)));
        t.update("module_covariance", linalg::rel_residual(&(&px.matrix * &pa.matrix), &space.psi_matrix(&xa)));

        let one = space.unit_vector();
        let lhs = space.phi_matrix(&module.pair_vec(x, y)) * &one;
        let rhs = &px.matrix * (space.psi_matrix(y) * &one);
        t.update("unital_identity", vec_residual(&lhs, &rhs));

        t.update("right_linearity", space.right_linearity_residual(&pa.matrix));
        t.update("right_linearity", space.right_linearity_residual(&px.matrix));

        let op = &px.matrix + &pa.matrix;
        let dag = &px.a_adjoint + &pa.a_adjoint;
        let nt = space.op_norm(&op);
        t.update("c_star_identity", (space.op_norm(&(&dag * &op)) - nt * nt).abs() / (1.0 + nt * nt));
    }

    let items = t
        .items
        .into_iter()
        .map(|(name, r)| ReportItem { name: name.to_string(), max_residual: r, pass: r <= tol })
        .collect();
    Theorem12Report { items, tol }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constructions::{hyperbolic_pair, multiplication_module};
    use crate::linalg::ZERO;
    use crate::BimoduleTensors;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn dimensions() {
        let m2 = CStarAlgebra::full_matrix(2).unwrap();
        assert_eq!(LinkingSpace::build(&multiplication_module(&m2).unwrap()).dim(), 8);
        let h = LinkingSpace::build(&hyperbolic_pair(1).unwrap());
        assert_eq!(h.er_dim(), 1);
        assert_eq!(h.dim(), 2);
        let z = LinkingSpace::build(&StarBimodule::zero(&m2));
        assert_eq!(z.dim(), 4);
    }

    #[test]
    fn phi_and_psi_norms() {
        let m2 = CStarAlgebra::full_matrix(2).unwrap();
        let e = multiplication_module(&m2).unwrap();
        let s = LinkingSpace::build(&e);
        assert!(linalg::max_abs(&(s.phi_matrix(&m2.identity()) - CMat::identity(8, 8))) < 1e-14);
        let e12 = m2.unit(m2.index_of(0, 0, 1));
        assert!((s.op_norm(&s.phi_matrix(&e12)) - 1.0).abs() < 1e-10);
        let x = m2.to_coords(&e12);
        assert!((s.op_norm(&s.psi_matrix(&x)) - 1.0).abs() < 1e-10);
        assert!(linalg::max_abs(&s.psi_matrix(&CVec::zeros(4))) == 0.0);

        let h = hyperbolic_pair(1).unwrap();
        let sh = LinkingSpace::build(&h);
        let v = CVec::from_vec(vec![ONE, ZERO]);
        assert!((sh.op_norm(&sh.psi_matrix(&v)) - 1.0).abs() < 1e-10);
    }

    #[test]
    fn phi_is_multiplicative() {
        let alg = CStarAlgebra::new(&[2, 1], &[1.0, 3.0]).unwrap();
        let s = LinkingSpace::build(&multiplication_module(&alg).unwrap());
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..100 {
            let a = alg.random_element(&mut rng);
            let b = alg.random_element(&mut rng);
            let lhs = s.phi_matrix(&(&a * &b));
            assert!(linalg::rel_residual(&lhs, &(s.phi_matrix(&a) * s.phi_matrix(&b))) <= 1e-10);
        }
    }

    #[test]
    fn report_passes_on_factories() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let m2 = CStarAlgebra::full_matrix(2).unwrap();
        for e in [multiplication_module(&m2).unwrap(), hyperbolic_pair(2).unwrap()] {
            let r = verify_theorem12(&e, 50, 1e-8, &mut rng);
            assert!(r.passed(), "{r:?}");
        }
    }

    #[test]
    fn zero_pairing_gives_zero_psi() {
        let m2 = CStarAlgebra::full_matrix(2).unwrap();
        let mut t: BimoduleTensors = multiplication_module(&m2).unwrap().tensors();
        for p in &mut t.pairing {
            p.fill(ZERO);
        }
        let e = StarBimodule::new(&m2, 4, t, 1e-9).unwrap();
        let s = LinkingSpace::build(&e);
        assert_eq!(s.er_dim(), 0);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = e.random_element(&mut rng).into_coords();
        assert_eq!(s.op_norm(&s.psi_matrix(&x)), 0.0);
        assert!(verify_theorem12(&e, 20, 1e-8, &mut rng).passed());
    }

    #[test]
    fn operator_rejects_non_adjointable() {
        let m2 = CStarAlgebra::full_matrix(2).unwrap();
        let s = LinkingSpace::build(&multiplication_module(&m2).unwrap());
        // a coordinate permutation that ignores the right action
        let mut t = CMat::zeros(8, 8);
        for i in 0..8 {
            t[(i, (i + 1) % 8)] = ONE;
        }
        assert!(matches!(s.operator(t, 1e-9), Err(StarError::NotAdjointable(_))));
        assert!(s.operator(s.phi_matrix(&m2.unit(1)), 1e-9).is_ok());
    }
}
