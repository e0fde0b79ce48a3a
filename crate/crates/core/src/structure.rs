//! Center of a bimodule, centered and local bimodules, complements of
//! centered sub-bimodules, and the decomposition of a local bimodule into
//! a direct sum of ideals `p_i M`.
//!
//! Weak-* density and cluster-point arguments become linear spans and
//! exact solves in finite dimensions. Quotients in `Z(M) ≅ ℂ^K` are taken
//! pointwise on block coordinates, with coordinates whose denominator is
//! below tolerance set to zero.

use num_complex::Complex64;

use crate::algebra::{AlgElement, CStarAlgebra};
use crate::bimodule::{check_isomorphism, IsomorphismCheck, StarBimodule};
use crate::constructions::{direct_sum_module, projection_from_pattern, projection_pattern};
use crate::error::{Result, StarError};
use crate::linalg::{self, c, CMat, CVec, ZERO};

#[derive(Debug, Clone)]
pub struct CenterData {
    /// Orthonormal coordinate basis of `Z(E)` (columns).
    pub z_basis: CMat,
    /// Real basis of `Z(E)_sa`.
    pub z_sa_basis: Vec<CVec>,
    /// Number of blocks `K` of `M`; `Z(M) ≅ ℂ^K` through block scalars.
    pub center_dim: usize,
    /// Largest off-center residual of `⟨z, w⟩` over basis pairs of `Z(E)`.
    pub pairing_center_residual: f64,
}

/// Block coordinates of a central element.
pub fn zm_coords(algebra: &CStarAlgebra, a: &AlgElement) -> Vec<Complex64> {
    algebra.central_coords(a).0
}

fn pairing_scale(module: &StarBimodule) -> f64 {
    module.pairing_tensor().iter().fold(0.0, |a, p| a.max(linalg::max_abs(p)))
}

/// Orthonormal basis of `{x : L_g x = R_g x}` restricted to `range(basis)`.
fn commutant_in(module: &StarBimodule, basis: &CMat) -> CMat {
    let gens = module.algebra().generators();
    let parts: Vec<CMat> = gens
        .iter()
        .map(|&g| (&module.left_tensor()[g] - &module.right_tensor()[g]) * basis)
        .collect();
    let stacked = linalg::vstack(&parts, basis.ncols());
    basis * linalg::kernel(&stacked, module.tol())
}

/// Real basis of the self-adjoint part of a `*`-invariant subspace.
fn selfadjoint_in(module: &StarBimodule, basis: &CMat) -> Vec<CVec> {
    let restricted = basis.adjoint() * module.involution_matrix() * basis.conjugate();
    linalg::antilinear_fixed_basis(&restricted, module.tol()).into_iter().map(|v| basis * v).collect()
}

pub fn bimodule_center(module: &StarBimodule) -> CenterData {
    let d = module.dim();
    let alg = module.algebra();
    let z_basis = commutant_in(module, &CMat::identity(d, d));
    let z_sa_basis = selfadjoint_in(module, &z_basis);
    let mut residual: f64 = 0.0;
    let scale = 1.0 + pairing_scale(module);
    for i in 0..z_basis.ncols() {
        for j in 0..z_basis.ncols() {
            let v = module.pair_vec(&z_basis.column(i).into_owned(), &z_basis.column(j).into_owned());
            residual = residual.max(alg.central_coords(&v).1 / scale);
        }
    }
    CenterData { z_basis, z_sa_basis, center_dim: alg.num_blocks(), pairing_center_residual: residual }
}

/// Orthonormal basis of `span{a z : a ∈ M, z ∈ Z}`.
fn orbit_span(module: &StarBimodule, z: &[CVec]) -> CMat {
    let d = module.dim();
    let cols: Vec<CMat> = module
        .left_tensor()
        .iter()
        .flat_map(|l| z.iter().map(move |v| CMat::from_column_slice(d, 1, (l * v).as_slice())))
        .collect();
    if cols.is_empty() {
        return CMat::zeros(d, 0);
    }
    linalg::range(&linalg::hstack(&cols, d), module.tol())
}

pub fn is_centered(module: &StarBimodule) -> bool {
    let center = bimodule_center(module);
    let z: Vec<CVec> = (0..center.z_basis.ncols()).map(|i| center.z_basis.column(i).into_owned()).collect();
    orbit_span(module, &z).ncols() == module.dim()
}

/// Largest skew part of `⟨x, y⟩` over `x, y` in a real basis of `Z(E)_sa`.
fn center_reality_residual(module: &StarBimodule, center: &CenterData) -> f64 {
    let scale = 1.0 + pairing_scale(module);
    let mut worst: f64 = 0.0;
    for x in &center.z_sa_basis {
        for y in &center.z_sa_basis {
            let v = module.pair_vec(x, y);
            worst = worst.max((&v - &v.adjoint()).max_abs() / scale);
        }
    }
    worst
}

pub fn is_local(module: &StarBimodule) -> bool {
    is_centered(module) && center_reality_residual(module, &bimodule_center(module)) <= module.tol()
}

fn require_local(module: &StarBimodule) -> Result<CenterData> {
    let center = bimodule_center(module);
    if !is_centered(module) || center_reality_residual(module, &center) > module.tol() {
        return Err(StarError::NotLocal);
    }
    Ok(center)
}

/// Central element `Σ_k (num_k / den_k) q_k`, zero where `|den_k|` is
/// negligible.
fn central_quotient(module: &StarBimodule, num: &AlgElement, den: &AlgElement) -> AlgElement {
    let alg = module.algebra();
    let n = zm_coords(alg, num);
    let d = zm_coords(alg, den);
    let scale = d.iter().fold(0.0_f64, |a, z| a.max(z.norm()));
    let cut = module.tol() * (1.0 + scale);
    let q: Vec<Complex64> = n.iter().zip(&d).map(|(a, b)| if b.norm() <= cut { ZERO } else { a / b }).collect();
    alg.central(&q)
}

fn is_negligible(module: &StarBimodule, x: &CVec) -> bool {
    module.norm_m_vec(x) <= module.tol() * (1.0 + linalg::max_abs_vec(x))
}

/// Gram–Schmidt over `Z(M)`: `y = x_n − Σ_i (⟨x_n,x_i⟩/⟨x_i,x_i⟩) x_i`.
/// Vectors that vanish are dropped.
pub fn orthogonalize_center(module: &StarBimodule, family: &[CVec]) -> Result<Vec<CVec>> {
    require_local(module)?;
    Ok(orthogonalize_unchecked(module, family))
}

fn orthogonalize_unchecked(module: &StarBimodule, family: &[CVec]) -> Vec<CVec> {
    let mut out: Vec<CVec> = Vec::new();
    for x in family {
        let mut y = x.clone();
        for xi in &out {
            let coef = central_quotient(module, &module.pair_vec(x, xi), &module.pair_vec(xi, xi));
            y -= module.left_matrix(&coef) * xi;
        }
        if !is_negligible(module, &y) {
            out.push(y);
        }
    }
    out
}

/// The map `T(y) = Σ (⟨y,x_i⟩/⟨x_i,x_i⟩) x_i` onto `Z(F)_sa`, for an
/// orthogonal family `x_i` generating `Z(F)_sa` over `Z(M)_sa`.
#[derive(Debug, Clone)]
pub struct CentralProjection {
    pub generators: Vec<CVec>,
    module: StarBimodule,
}

impl CentralProjection {
    pub fn apply(&self, y: &CVec) -> CVec {
        let m = &self.module;
        let mut out = CVec::zeros(m.dim());
        for xi in &self.generators {
            let coef = central_quotient(m, &m.pair_vec(y, xi), &m.pair_vec(xi, xi));
            out += m.left_matrix(&coef) * xi;
        }
        out
    }
}

/// Orthonormal basis of a sub-bimodule given by spanning columns, after
/// checking invariance under both actions and the involution.
fn submodule_basis(module: &StarBimodule, sub: &CMat) -> Result<CMat> {
    let d = module.dim();
    if sub.nrows() != d {
        return Err(StarError::ShapeMismatch(format!("subspace vectors of length {} in dimension {d}", sub.nrows())));
    }
    let basis = if sub.ncols() == 0 { CMat::zeros(d, 0) } else { linalg::range(sub, module.tol()) };
    let outside = CMat::identity(d, d) - &basis * basis.adjoint();
    let mut r: f64 = 0.0;
    let scale = |m: &CMat| 1.0 + linalg::max_abs(m);
    for g in module.algebra().generators() {
        for act in [&module.left_tensor()[g], &module.right_tensor()[g]] {
            r = r.max(linalg::max_abs(&(&outside * act * &basis)) / scale(act));
        }
    }
    let s = module.involution_matrix();
    r = r.max(linalg::max_abs(&(&outside * s * basis.conjugate())) / scale(s));
    if r > module.tol() {
        return Err(StarError::NotSubmodule);
    }
    Ok(basis)
}

pub fn central_projection(module: &StarBimodule, sub: &CMat) -> Result<CentralProjection> {
    require_local(module)?;
    let basis = submodule_basis(module, sub)?;
    let zf = commutant_in(module, &basis);
    let zcols: Vec<CVec> = (0..zf.ncols()).map(|i| zf.column(i).into_owned()).collect();
    if orbit_span(module, &zcols).ncols() != basis.ncols() {
        return Err(StarError::NotCentered);
    }
    let zf_sa = selfadjoint_in(module, &zf);
    Ok(CentralProjection { generators: orthogonalize_unchecked(module, &zf_sa), module: module.clone() })
}

#[derive(Debug, Clone)]
pub struct Complement {
    /// Orthonormal basis of `F'` (columns).
    pub basis: CMat,
    /// Largest `|⟨x, y⟩|`, `|⟨y, x⟩|` over basis vectors `x ∈ F`, `y ∈ F'`,
    /// relative to the pairing scale.
    pub orthogonality_residual: f64,
    /// `rank(F + F') = dim E`.
    pub spans: bool,
}

/// `F' = span M·ker(T)` for the central projection `T` onto `Z(F)_sa`.
pub fn complement(module: &StarBimodule, sub: &CMat) -> Result<Complement> {
    let t = central_projection(module, sub)?;
    let d = module.dim();
    let f = submodule_basis(module, sub)?;
    let center = bimodule_center(module);
    let kernel_part: Vec<CVec> = center.z_sa_basis.iter().map(|z| z - t.apply(z)).collect();
    let basis = orbit_span(module, &kernel_part);
    let scale = 1.0 + pairing_scale(module);
    let mut worst: f64 = 0.0;
    for i in 0..f.ncols() {
        let x = f.column(i).into_owned();
        for j in 0..basis.ncols() {
            let y = basis.column(j).into_owned();
            worst = worst.max(module.pair_vec(&x, &y).max_abs() / scale);
            worst = worst.max(module.pair_vec(&y, &x).max_abs() / scale);
        }
    }
    let both = linalg::hstack(&[f, basis.clone()], d);
    let spans = d == 0 || linalg::rank(&both, module.tol()) == d;
    Ok(Complement { basis, orthogonality_residual: worst, spans })
}

#[derive(Debug, Clone)]
pub struct LocalDecomposition {
    pub projections: Vec<AlgElement>,
    /// Orthogonal generators `x_i ∈ Z(E)_sa` with `⟨x_i, x_i⟩ = p_i`.
    pub generators: Vec<CVec>,
    /// `Φ(y) = ⊕ ⟨y, x_i⟩`, onto `direct_sum_module(M, projections)`.
    pub iso: CMat,
    pub target: StarBimodule,
    pub check: IsomorphismCheck,
}

#[derive(Debug, Clone)]
pub struct DecompositionReport {
    pub projections: Vec<AlgElement>,
    pub iso_residual: f64,
    pub pass: bool,
}

/// Number of projections containing each block.
pub fn block_multiplicities(algebra: &CStarAlgebra, projections: &[AlgElement], tol: f64) -> Result<Vec<usize>> {
    let mut m = vec![0; algebra.num_blocks()];
    for p in projections {
        for (k, b) in projection_pattern(algebra, p, tol)?.into_iter().enumerate() {
            m[k] += usize::from(b);
        }
    }
    Ok(m)
}

/// Splits `E` into `⊕ p_i M`.
///
/// Each round picks, for every block `k` independently, the residual
/// self-adjoint central vector with the largest `⟨y, y⟩_k` (first index on
/// ties), keeps its `k`-th component, and sums the components into one
/// generator. The generator is normalized by `⟨x,x⟩^{-1/2}` (pseudo-inverse
/// on the support), which makes `p = ⟨x,x⟩` a central projection, and all
/// residuals are then orthogonalized against it. The result is the
/// staircase `p_j = Σ {q_k : multiplicity_k ≥ j}`.
pub fn decompose_local(module: &StarBimodule) -> Result<LocalDecomposition> {
    let null = module.null_space().ncols();
    if null > 0 {
        return Err(StarError::NullSpacePresent(null));
    }
    let center = require_local(module)?;
    let alg = module.algebra().clone();
    let tol = module.tol();
    let nblocks = alg.num_blocks();
    let mut residuals = center.z_sa_basis.clone();
    let mut generators: Vec<CVec> = Vec::new();
    let mut patterns: Vec<Vec<bool>> = Vec::new();
    let scale = 1.0 + pairing_scale(module);

    for _ in 0..=module.dim() {
        let mut x = CVec::zeros(module.dim());
        for k in 0..nblocks {
            let mut best: Option<(usize, f64)> = None;
            for (i, y) in residuals.iter().enumerate() {
                let v = zm_coords(&alg, &module.pair_vec(y, y))[k].re;
                if v > tol * scale && best.is_none_or(|(_, b)| v > b) {
                    best = Some((i, v));
                }
            }
            if let Some((i, _)) = best {
                let mut q = vec![ZERO; nblocks];
                q[k] = c(1.0, 0.0);
                x += module.left_matrix(&alg.central(&q)) * &residuals[i];
            }
        }
        if is_negligible(module, &x) {
            break;
        }
        let norm2 = module.pair_vec(&x, &x);
        let inv_sqrt = alg.pinv_positive(&alg.sqrt_positive(&norm2, tol)?, tol)?;
        let x = module.left_matrix(&inv_sqrt) * x;
        let p = module.pair_vec(&x, &x);
        let pattern = projection_pattern(&alg, &p, 1e-6)?;
        for y in residuals.iter_mut() {
            let coef = central_quotient(module, &module.pair_vec(y, &x), &p);
            *y -= module.left_matrix(&coef) * &x;
        }
        generators.push(x);
        patterns.push(pattern);
    }
    if residuals.iter().any(|y| !is_negligible(module, y)) {
        return Err(StarError::NotLocal);
    }

    let projections: Vec<AlgElement> = patterns.iter().map(|p| projection_from_pattern(&alg, p)).collect();
    let target = direct_sum_module(&alg, &projections)?;
    let mut rows: Vec<CVec> = Vec::new();
    for (x, pattern) in generators.iter().zip(&patterns) {
        for gamma in 0..alg.dim() {
            if pattern[alg.unit_index(gamma).block] {
                rows.push(&module.pairing_tensor()[gamma] * x);
            }
        }
    }
    let mut iso = CMat::zeros(rows.len(), module.dim());
    for (r, row) in rows.iter().enumerate() {
        iso.set_row(r, &row.transpose());
    }
    let check = check_isomorphism(module, &target, &iso)?;
    Ok(LocalDecomposition { projections, generators, iso, target, check })
}

/// Checks that `iso` is a bimodule isomorphism `E → ⊕ p_i M`.
pub fn verify_decomposition(
    module: &StarBimodule,
    projections: &[AlgElement],
    iso: &CMat,
    tol: f64,
) -> Result<DecompositionReport> {
    let target = direct_sum_module(module.algebra(), projections)?;
    let check = check_isomorphism(module, &target, iso)?;
    Ok(DecompositionReport {
        projections: projections.to_vec(),
        iso_residual: check.residual(),
        pass: check.passed(tol),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constructions::{
        direct_sum_summands, expectation_bimodule, fell_bundle_module, multiplication_module, FellBundleFinite,
    };
    use crate::BlockPartition;

    fn m2() -> CStarAlgebra {
        CStarAlgebra::full_matrix(2).unwrap()
    }

    fn mm(alg: &CStarAlgebra) -> StarBimodule {
        direct_sum_module(alg, &[alg.identity(), alg.identity()]).unwrap()
    }

    #[test]
    fn center_dimensions() {
        assert_eq!(bimodule_center(&mm(&m2())).z_basis.ncols(), 2);
        let c3 = CStarAlgebra::commutative(3).unwrap();
        assert_eq!(bimodule_center(&multiplication_module(&c3).unwrap()).z_basis.ncols(), 3);
        let phi = m2().conditional_expectation(&BlockPartition::diagonal(&m2())).unwrap();
        let e = expectation_bimodule(&phi).unwrap();
        let center = bimodule_center(&e);
        assert_eq!(center.z_basis.ncols(), 2);
        assert!(center.pairing_center_residual < 1e-12);
        assert!(!is_centered(&e));
    }

    #[test]
    fn locality_of_models() {
        let alg = CStarAlgebra::new(&[2, 1], &[1.0, 1.0]).unwrap();
        let ps = [projection_from_pattern(&alg, &[false, true]), projection_from_pattern(&alg, &[true, false])];
        assert!(is_local(&direct_sum_module(&alg, &ps).unwrap()));
        assert!(is_local(&mm(&m2())));
        let b = FellBundleFinite::standard(&[1, 0, 2]).unwrap();
        assert!(is_local(&fell_bundle_module(&b).unwrap()));
    }

    fn pair_of(alg: &CStarAlgebra, a: f64, b: f64) -> CVec {
        let one = alg.to_coords(&alg.identity());
        let n = one.len();
        let mut v = CVec::zeros(2 * n);
        v.rows_mut(0, n).copy_from(&(&one * c(a, 0.0)));
        v.rows_mut(n, n).copy_from(&(&one * c(b, 0.0)));
        v
    }

    #[test]
    fn orthogonalization() {
        let alg = m2();
        let e = mm(&alg);
        let s = vec![pair_of(&alg, 1.0, 1.0), pair_of(&alg, 1.0, -1.0)];
        let out = orthogonalize_center(&e, &s).unwrap();
        assert_eq!(out.len(), 2);
        assert!(linalg::max_abs_vec(&(&out[1] - &s[1])) < 1e-12);

        let perturbed = vec![pair_of(&alg, 1.0, 1.0), pair_of(&alg, 1.0, 0.0), CVec::zeros(8)];
        let out = orthogonalize_center(&e, &perturbed).unwrap();
        assert_eq!(out.len(), 2);
        assert!(linalg::max_abs_vec(&(&out[1] - pair_of(&alg, 0.5, -0.5))) < 1e-12);
        assert!(e.pair_vec(&out[0], &out[1]).max_abs() < 1e-12);
    }

    #[test]
    fn orthogonalize_requires_local() {
        let phi = m2().conditional_expectation(&BlockPartition::diagonal(&m2())).unwrap();
        let e = expectation_bimodule(&phi).unwrap();
        assert!(matches!(orthogonalize_center(&e, &[]), Err(StarError::NotLocal)));
    }

    #[test]
    fn projections_and_complements() {
        let alg = m2();
        let e = mm(&alg);
        let full = CMat::identity(8, 8);
        let t = central_projection(&e, &full).unwrap();
        let y = pair_of(&alg, 0.3, -2.0);
        assert!(linalg::max_abs_vec(&(t.apply(&y) - &y)) < 1e-12);
        let t0 = central_projection(&e, &CMat::zeros(8, 0)).unwrap();
        assert!(linalg::max_abs_vec(&t0.apply(&y)) < 1e-12);

        let first = linalg::select_columns(&full, &[0, 1, 2, 3]);
        let t1 = central_projection(&e, &first).unwrap();
        assert!(linalg::max_abs_vec(&(t1.apply(&y) - pair_of(&alg, 0.3, 0.0))) < 1e-12);

        let comp = complement(&e, &first).unwrap();
        assert_eq!(comp.basis.ncols(), 4);
        assert!(comp.spans && comp.orthogonality_residual < 1e-12);
        let second = linalg::select_columns(&full, &[4, 5, 6, 7]);
        assert_eq!(linalg::rank(&linalg::hstack(&[second, comp.basis.clone()], 8), 1e-9), 4);

        let whole = complement(&e, &full).unwrap();
        assert_eq!(whole.basis.ncols(), 0);
    }

    #[test]
    fn non_submodule_rejected() {
        let alg = m2();
        let e = mm(&alg);
        let line = linalg::select_columns(&CMat::identity(8, 8), &[0]);
        assert!(matches!(central_projection(&e, &line), Err(StarError::NotSubmodule)));
        // the diagonal copy {(a, a)} is a centered sub-bimodule
        let diag = CMat::from_fn(8, 4, |i, j| if i % 4 == j { c(1.0, 0.0) } else { ZERO });
        let t = central_projection(&e, &diag).unwrap();
        assert_eq!(t.generators.len(), 1);
        let comp = complement(&e, &diag).unwrap();
        assert!(comp.spans && comp.orthogonality_residual < 1e-12);
    }

    #[test]
    fn decompose_examples() {
        let alg = m2();
        let d = decompose_local(&multiplication_module(&alg).unwrap()).unwrap();
        assert_eq!(d.projections, vec![alg.identity()]);
        assert!(d.check.passed(1e-8));

        let c3 = CStarAlgebra::commutative(3).unwrap();
        let b = FellBundleFinite::standard(&[1, 0, 2]).unwrap();
        let d = decompose_local(&fell_bundle_module(&b).unwrap()).unwrap();
        let pats: Vec<Vec<bool>> = d.projections.iter().map(|p| projection_pattern(&c3, p, 1e-9).unwrap()).collect();
        assert_eq!(pats, vec![vec![true, false, true], vec![false, false, true]]);
        assert!(d.check.passed(1e-8));
        for x in &d.generators {
            let p = fell_bundle_module(&b).unwrap().pair_vec(x, x);
            assert!((&(&p * &p) - &p).max_abs() < 1e-8);
        }
    }

    #[test]
    fn decompose_direct_sum_round_trip() {
        let alg = CStarAlgebra::new(&[2, 1], &[1.0, 1.0]).unwrap();
        let ps = vec![projection_from_pattern(&alg, &[false, true]), projection_from_pattern(&alg, &[true, false])];
        let e = direct_sum_module(&alg, &ps).unwrap();
        let d = decompose_local(&e).unwrap();
        assert!(d.check.passed(1e-8));
        assert_eq!(block_multiplicities(&alg, &d.projections, 1e-9).unwrap(), block_multiplicities(&alg, &ps, 1e-9).unwrap());
        let r = verify_decomposition(&e, &d.projections, &d.iso, 1e-8).unwrap();
        assert!(r.pass);

        let mut bad = d.iso.clone();
        bad.row_mut(0).neg_mut();
        let r = verify_decomposition(&e, &d.projections, &bad, 1e-8).unwrap();
        assert!(!r.pass && r.iso_residual >= 0.1);
        assert_eq!(direct_sum_summands(&alg, &ps).unwrap().len(), 2);
    }

    #[test]
    fn decompose_zero_module_and_null_space() {
        let alg = m2();
        let z = StarBimodule::zero(&alg);
        let d = decompose_local(&z).unwrap();
        assert!(d.projections.is_empty() && d.check.passed(1e-12));
        let mut t = multiplication_module(&alg).unwrap().tensors();
        for p in &mut t.pairing {
            p.fill(ZERO);
        }
        let e = StarBimodule::new(&alg, 4, t, 1e-9).unwrap();
        assert!(matches!(decompose_local(&e), Err(StarError::NullSpacePresent(4))));
    }
}
