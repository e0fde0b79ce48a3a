//! Tangent bimodule of a trace-symmetric Markov generator.
//!
//! Given `Δ` generating a unital completely positive semigroup
//! `φ_t = exp(tΔ)` that is symmetric for the trace, `A ⊗ A` carries the
//! pairing `⟨a⊗b, c⊗d⟩ = a Δ(bc) d` and involution `(a⊗b)* = b*⊗a*`. The
//! pairing is positive only on `E₀ = ker(m)`, `m(a⊗b) = ab`; the tangent
//! bimodule is `E₀` modulo its null space, and `d₀(a) = i(1⊗a − a⊗1)` is a
//! self-adjoint derivation into it.

use std::collections::BTreeMap;

use crate::algebra::{AlgElement, CStarAlgebra};
use crate::bimodule::{BimoduleTensors, ModuleElement, QuotientMap, StarBimodule};
use crate::error::{Axiom, Result, StarError};
use crate::linalg::{self, c, CMat, CVec, RMat, I, ONE};

pub const DEFAULT_T_GRID: [f64; 3] = [0.01, 0.1, 1.0];

#[derive(Debug, Clone)]
pub struct MarkovGenerator {
    algebra: CStarAlgebra,
    /// Matrix of `Δ` on algebra coordinates.
    delta: CMat,
}

impl MarkovGenerator {
    /// An arbitrary superoperator; nothing is checked beyond shape.
    pub fn raw(algebra: &CStarAlgebra, delta: CMat) -> Result<Self> {
        let d = algebra.dim();
        if delta.shape() != (d, d) {
            return Err(StarError::ShapeMismatch(format!(
                "generator of shape {:?} for algebra of dimension {d}",
                delta.shape()
            )));
        }
        if delta.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(StarError::ShapeMismatch("non-finite generator entry".into()));
        }
        Ok(Self { algebra: algebra.clone(), delta })
    }

    pub fn algebra(&self) -> &CStarAlgebra {
        &self.algebra
    }

    pub fn matrix(&self) -> &CMat {
        &self.delta
    }

    pub fn apply(&self, a: &AlgElement) -> AlgElement {
        self.algebra.from_coords(&(&self.delta * self.algebra.to_coords(a)))
    }

    pub fn negated(&self) -> Self {
        Self { algebra: self.algebra.clone(), delta: -&self.delta }
    }
}

/// `Δf(x) = Σ_y W_{xy} (f(y) − f(x))` on `ℂ^n` with the counting trace.
pub fn graph_laplacian_generator(weights: &RMat) -> Result<MarkovGenerator> {
    let n = weights.nrows();
    if weights.ncols() != n || n == 0 {
        return Err(StarError::ShapeMismatch("weight matrix must be square and nonempty".into()));
    }
    if weights.iter().any(|w| !w.is_finite()) {
        return Err(StarError::ShapeMismatch("non-finite weight".into()));
    }
    if (weights - weights.transpose()).amax() > 0.0 {
        return Err(StarError::AsymmetricWeights);
    }
    if weights.iter().any(|&w| w < 0.0) || (0..n).any(|i| weights[(i, i)] != 0.0) {
        return Err(StarError::NegativeWeight);
    }
    let algebra = CStarAlgebra::commutative(n)?;
    let mut delta = linalg::real_to_complex(weights);
    for x in 0..n {
        let degree: f64 = weights.row(x).sum();
        delta[(x, x)] -= c(degree, 0.0);
    }
    MarkovGenerator::raw(&algebra, delta)
}

/// `Δ(a) = ½(u a u* + u* a u) − a`.
pub fn conjugation_generator(algebra: &CStarAlgebra, u: &AlgElement) -> Result<MarkovGenerator> {
    algebra.check(u)?;
    let residual = (&(&u.adjoint() * u) - &algebra.identity())
        .max_abs()
        .max((&(u * &u.adjoint()) - &algebra.identity()).max_abs());
    if residual > 1e-9 {
        return Err(StarError::NotUnitary(residual));
    }
    let ua = u.adjoint();
    let d = algebra.dim();
    let mut delta = CMat::zeros(d, d);
    for beta in 0..d {
        let a = algebra.unit(beta);
        let conj = &(&(u * &a) * &ua) + &(&(&ua * &a) * u);
        let img = conj.scale(c(0.5, 0.0)) - &a;
        delta.set_column(beta, &algebra.to_coords(&img));
    }
    MarkovGenerator::raw(algebra, delta)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChoiCheck {
    pub t: f64,
    pub min_eigenvalue: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorReport {
    /// `‖Δ(1)‖`, relative.
    pub unital: f64,
    /// `max ‖Δ(u*) − Δ(u)*‖` over matrix units, relative.
    pub reality: f64,
    /// `max |τ(u Δ(v)) − τ(Δ(u) v)|` over matrix units, relative.
    pub symmetry: f64,
    pub choi: Vec<ChoiCheck>,
    /// Smoothness domain is the whole algebra in finite dimensions.
    pub domain_is_algebra: bool,
    /// `τ(a*a) < ∞` for every `a` in finite dimensions.
    pub finite_trace: bool,
    pub tol: f64,
}

impl GeneratorReport {
    pub fn choi_passed(&self) -> bool {
        self.choi.iter().all(|c| c.pass)
    }

    pub fn passed(&self) -> bool {
        self.unital <= self.tol && self.reality <= self.tol && self.symmetry <= self.tol && self.choi_passed()
    }

    pub fn first_failure(&self) -> Option<String> {
        if self.unital > self.tol {
            return Some(format!("Δ(1) ≠ 0 (residual {:e})", self.unital));
        }
        if self.reality > self.tol {
            return Some(format!("Δ does not commute with * (residual {:e})", self.reality));
        }
        if self.symmetry > self.tol {
            return Some(format!("Δ is not τ-symmetric (residual {:e})", self.symmetry));
        }
        self.choi
            .iter()
            .find(|c| !c.pass)
            .map(|c| format!("exp({}Δ) is not completely positive (Choi eigenvalue {:e})", c.t, c.min_eigenvalue))
    }
}

/// Minimum eigenvalue over the Choi matrices of every block component
/// `M_{n_k} → M_{n_l}` of the superoperator `phi`, and the spectral scale.
fn choi_margin(algebra: &CStarAlgebra, phi: &CMat) -> (f64, f64) {
    let dims = algebra.block_dims();
    let mut lo = f64::INFINITY;
    let mut scale: f64 = 0.0;
    for (k, &nk) in dims.iter().enumerate() {
        for (l, &nl) in dims.iter().enumerate() {
            let size = nk * nl;
            let mut choi = CMat::zeros(size, size);
            for i in 0..nk {
                for j in 0..nk {
                    let col = phi.column(algebra.index_of(k, i, j));
                    for r in 0..nl {
                        for s in 0..nl {
                            choi[(i * nl + r, j * nl + s)] = col[algebra.index_of(l, r, s)];
                        }
                    }
                }
            }
            let herm = linalg::max_abs(&(&choi - choi.adjoint()));
            let (vals, _) = linalg::eigh(&choi);
            lo = lo.min(vals.first().copied().unwrap_or(0.0) - herm);
            scale = scale.max(vals.iter().fold(0.0_f64, |a, &b| a.max(b.abs())));
        }
    }
    (lo, scale)
}

pub fn validate_generator(g: &MarkovGenerator, tol: f64) -> GeneratorReport {
    validate_generator_on(g, &DEFAULT_T_GRID, tol)
}

pub fn validate_generator_on(g: &MarkovGenerator, t_grid: &[f64], tol: f64) -> GeneratorReport {
    let alg = &g.algebra;
    let d = alg.dim();
    let scale = 1.0 + linalg::max_abs(&g.delta);
    let unital = g.apply(&alg.identity()).max_abs() / scale;
    let mut reality: f64 = 0.0;
    let mut symmetry: f64 = 0.0;
    let images: Vec<AlgElement> = (0..d).map(|b| g.apply(&alg.unit(b))).collect();
    for beta in 0..d {
        let lhs = &images[alg.star_index(beta)];
        reality = reality.max((lhs - &images[beta].adjoint()).max_abs() / scale);
        for alpha in 0..d {
            let u = alg.unit(alpha);
            let v = alg.unit(beta);
            let a = alg.trace(&(&u * &images[beta]));
            let b = alg.trace(&(&images[alpha] * &v));
            symmetry = symmetry.max((a - b).norm() / scale);
        }
    }
    let choi = t_grid
        .iter()
        .map(|&t| {
            let phi = (&g.delta * c(t, 0.0)).exp();
            let (lo, s) = choi_margin(alg, &phi);
            ChoiCheck { t, min_eigenvalue: lo, pass: lo >= -tol * (1.0 + s) }
        })
        .collect();
    GeneratorReport { unital, reality, symmetry, choi, domain_is_algebra: true, finite_trace: true, tol }
}

/// `A ⊗ A` with the pairing `⟨a⊗b, c⊗d⟩ = a Δ(bc) d`, the involution
/// `(a⊗b)* = b*⊗a*` and the outer actions. Coordinates `(α, β) ↦ α·d + β`.
/// Positivity does not hold on the whole space, so no axiom check is run.
pub fn full_tensor_square(g: &MarkovGenerator, tol: f64) -> Result<StarBimodule> {
    let alg = &g.algebra;
    let da = alg.dim();
    let n = da * da;
    let idx = |a: usize, b: usize| a * da + b;
    let images: Vec<AlgElement> = (0..da).map(|b| g.apply(&alg.unit(b))).collect();
    let mut pairing = vec![CMat::zeros(n, n); da];
    for alpha in 0..da {
        let ua = alg.unit_index(alpha);
        for beta in 0..da {
            for gamma in 0..da {
                let Some(bg) = alg.unit_product(beta, gamma) else { continue };
                let x = &images[bg];
                for delta in 0..da {
                    let ud = alg.unit_index(delta);
                    if ud.block != ua.block {
                        continue;
                    }
                    // e_{ij} X e_{lm} = X_{jl} e_{im}
                    let v = x.block(ua.block)[(ua.col, ud.row)];
                    if v != linalg::ZERO {
                        pairing[alg.index_of(ua.block, ua.row, ud.col)][(idx(alpha, beta), idx(gamma, delta))] += v;
                    }
                }
            }
        }
    }
    let mut left = vec![CMat::zeros(n, n); da];
    let mut right = vec![CMat::zeros(n, n); da];
    let mut s = CMat::zeros(n, n);
    for alpha in 0..da {
        for beta in 0..da {
            s[(idx(alg.star_index(beta), alg.star_index(alpha)), idx(alpha, beta))] = ONE;
            for gidx in 0..da {
                if let Some(p) = alg.unit_product(gidx, alpha) {
                    left[gidx][(idx(p, beta), idx(alpha, beta))] = ONE;
                }
                if let Some(p) = alg.unit_product(beta, gidx) {
                    right[gidx][(idx(alpha, p), idx(alpha, beta))] = ONE;
                }
            }
        }
    }
    StarBimodule::assemble(alg, n, BimoduleTensors { left, right, pairing, involution: s }, tol)
}

/// Matrix of `m(a⊗b) = ab` (`dim A × dim A²`).
fn multiplication_map(alg: &CStarAlgebra) -> CMat {
    let da = alg.dim();
    let mut m = CMat::zeros(da, da * da);
    for a in 0..da {
        for b in 0..da {
            if let Some(p) = alg.unit_product(a, b) {
                m[(p, a * da + b)] = ONE;
            }
        }
    }
    m
}

#[derive(Debug, Clone)]
pub struct TangentBimodule {
    generator: MarkovGenerator,
    /// Orthonormal basis of `E₀ = ker(m)` in `A ⊗ A` coordinates.
    pub e0_basis: CMat,
    /// `E₀` with the restricted structure.
    pub e0: StarBimodule,
    /// `E = E₀ / N`.
    pub module: StarBimodule,
    pub quotient: QuotientMap,
    /// Smallest eigenvalue of the block Gram matrices on `E₀`.
    pub positivity_margin: f64,
    /// `span{a⊗bc − ab⊗c}` equals `ker(m)` (double inclusion).
    pub span_identity: bool,
}

fn span_identity_holds(alg: &CStarAlgebra, kernel: &CMat, tol: f64) -> bool {
    let da = alg.dim();
    let mut vecs: Vec<CMat> = Vec::new();
    for a in 0..da {
        for b in 0..da {
            for cc in 0..da {
                let mut v = CMat::zeros(da * da, 1);
                if let Some(bc) = alg.unit_product(b, cc) {
                    v[(a * da + bc, 0)] += ONE;
                }
                if let Some(ab) = alg.unit_product(a, b) {
                    v[(ab * da + cc, 0)] -= ONE;
                }
                if linalg::max_abs(&v) > 0.0 {
                    vecs.push(v);
                }
            }
        }
    }
    let span = linalg::hstack(&vecs, da * da);
    let inside = linalg::max_abs(&(multiplication_map(alg) * &span)) <= tol;
    inside && linalg::rank(&span, tol) == kernel.ncols()
}

/// Builds `E₀`, checks positivity on it and passes to the quotient by the
/// null space. With `forced`, generator validation is skipped so that a
/// non-positive `E₀` surfaces as [`StarError::PositivityFails`].
pub fn build_tangent(g: &MarkovGenerator, tol: f64, forced: bool) -> Result<TangentBimodule> {
    if !forced {
        let report = validate_generator(g, tol);
        if let Some(reason) = report.first_failure() {
            return Err(StarError::GeneratorInvalid(reason));
        }
    }
    let alg = &g.algebra;
    let full = full_tensor_square(g, tol)?;
    let kernel = linalg::kernel(&multiplication_map(alg), 1e-12);
    let span_identity = span_identity_holds(alg, &kernel, 1e-10);
    let project = kernel.adjoint();
    let tensors = BimoduleTensors {
        left: full.left_tensor().iter().map(|l| &project * l * &kernel).collect(),
        right: full.right_tensor().iter().map(|r| &project * r * &kernel).collect(),
        pairing: full.pairing_tensor().iter().map(|p| kernel.transpose() * p * &kernel).collect(),
        involution: &project * full.involution_matrix() * kernel.conjugate(),
    };
    let e0 = StarBimodule::assemble(alg, kernel.ncols(), tensors, tol)?;
    let report = e0.check_axioms();
    let margin = report.positivity_margin();
    if let Some((axiom, residual)) = report.first_violation() {
        return Err(match axiom {
            Axiom::Positivity => StarError::PositivityFails(margin),
            _ => StarError::AxiomViolation { axiom, residual },
        });
    }
    let (module, quotient) = e0.quotient_by_null()?;
    // eigenvalues within tolerance of zero come from the null space
    let margin = if margin >= -tol { margin.max(0.0) } else { margin };
    Ok(TangentBimodule {
        generator: g.clone(),
        e0_basis: kernel,
        e0,
        module,
        quotient,
        positivity_margin: margin,
        span_identity,
    })
}

impl TangentBimodule {
    pub fn generator(&self) -> &MarkovGenerator {
        &self.generator
    }

    pub fn e0_dim(&self) -> usize {
        self.e0_basis.ncols()
    }

    /// `i(1⊗a − a⊗1)` in `A ⊗ A` coordinates.
    pub fn d0_tensor(&self, a: &AlgElement) -> CVec {
        let alg = &self.generator.algebra;
        let da = alg.dim();
        let one = alg.to_coords(&alg.identity());
        let av = alg.to_coords(a);
        CVec::from_fn(da * da, |k, _| {
            let (x, y) = (k / da, k % da);
            I * (one[x] * av[y] - av[x] * one[y])
        })
    }

    /// `d₀(a)` in coordinates of `E₀`.
    pub fn d0_e0(&self, a: &AlgElement) -> CVec {
        self.e0_basis.adjoint() * self.d0_tensor(a)
    }

    /// `d₀(a)` in coordinates of the quotient `E`.
    pub fn d0_vec(&self, a: &AlgElement) -> CVec {
        &self.quotient.project * self.d0_e0(a)
    }

    pub fn exterior_derivative(&self, a: &AlgElement) -> Result<ModuleElement> {
        self.generator.algebra.check(a)?;
        self.module.element(self.d0_vec(a))
    }

    /// `Γ(a, b) = ⟨d₀a, d₀b⟩_l`.
    pub fn carre_du_champ(&self, a: &AlgElement, b: &AlgElement) -> AlgElement {
        self.module.inner_l_vec(&self.d0_vec(a), &self.d0_vec(b))
    }

    /// `Δ(ab*) − Δ(a)b* − aΔ(b*)`.
    pub fn carre_du_champ_closed(&self, a: &AlgElement, b: &AlgElement) -> AlgElement {
        let g = &self.generator;
        let bs = b.adjoint();
        g.apply(&(a * &bs)) - &(&g.apply(a) * &bs) - &(a * &g.apply(&bs))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DerivationReport {
    pub leibniz: f64,
    pub self_adjoint: f64,
    pub carre_du_champ: f64,
    pub positivity_margin: f64,
    pub tol: f64,
}

impl DerivationReport {
    pub fn passed(&self) -> bool {
        self.leibniz <= self.tol
            && self.self_adjoint <= self.tol
            && self.carre_du_champ <= self.tol
            && self.positivity_margin >= -self.tol
    }

    pub fn residuals(&self) -> BTreeMap<&'static str, f64> {
        BTreeMap::from([
            ("leibniz", self.leibniz),
            ("self_adjoint", self.self_adjoint),
            ("carre_du_champ", self.carre_du_champ),
            ("positivity_margin", self.positivity_margin),
        ])
    }
}

/// Leibniz rule and `d₀(a*) = d₀(a)*` over all pairs of matrix units, and
/// agreement of `⟨d₀a, d₀b⟩_l` with the closed form of the carré du champ.
pub fn verify_derivation(t: &TangentBimodule, tol: f64) -> DerivationReport {
    let alg = &t.generator.algebra;
    let e = &t.module;
    let da = alg.dim();
    let mut leibniz: f64 = 0.0;
    let mut self_adjoint: f64 = 0.0;
    let mut gamma: f64 = 0.0;
    let d0: Vec<CVec> = (0..da).map(|a| t.d0_vec(&alg.unit(a))).collect();
    let rel = |a: &CVec, b: &CVec| {
        linalg::max_abs_vec(&(a - b)) / (1.0 + linalg::max_abs_vec(a).max(linalg::max_abs_vec(b)))
    };
    for a in 0..da {
        let ua = alg.unit(a);
        self_adjoint = self_adjoint.max(rel(&d0[alg.star_index(a)], &e.star_vec(&d0[a])));
        for b in 0..da {
            let ub = alg.unit(b);
            let lhs = t.d0_vec(&(&ua * &ub));
            let rhs = e.left_matrix(&ua) * &d0[b] + e.right_matrix(&ub) * &d0[a];
            leibniz = leibniz.max(rel(&lhs, &rhs));
            let g1 = t.carre_du_champ(&ua, &ub);
            let g2 = t.carre_du_champ_closed(&ua, &ub);
            gamma = gamma.max((&g1 - &g2).max_abs() / (1.0 + g2.max_abs()));
        }
    }
    DerivationReport { leibniz, self_adjoint, carre_du_champ: gamma, positivity_margin: t.positivity_margin, tol }
}
