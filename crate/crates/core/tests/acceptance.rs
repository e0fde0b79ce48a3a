//! Acceptance criteria. Runs as a plain binary so each criterion prints one
//! PASS/FAIL line; the process fails if any criterion fails.
//!
//! Expected values are computed here from first principles (SVDs of blocks,
//! direct evaluation of formulas) rather than read back from the library.

use std::process::{Command, ExitCode};
use std::time::Instant;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use starmod::constructions::{self, FellBundleFinite};
use starmod::linking::LinkingSpace;
use starmod::sauvageot::{self, MarkovGenerator};
use starmod::{structure, AlgElement, CStarAlgebra, StarBimodule, StarError, StateFunctional};

type CMat = DMatrix<Complex64>;
type RMat = DMatrix<f64>;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

// ---- independent oracles ----

fn block_norm(m: &CMat) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.clone().svd(false, false).singular_values.max()
}

fn opnorm(a: &AlgElement) -> f64 {
    a.blocks().iter().map(block_norm).fold(0.0, f64::max)
}

fn min_eig(a: &AlgElement) -> f64 {
    a.blocks()
        .iter()
        .filter(|b| !b.is_empty())
        .map(|b| {
            let h = (b + b.adjoint()).scale(0.5);
            h.symmetric_eigenvalues().min()
        })
        .fold(f64::INFINITY, f64::min)
}

fn diff(a: &AlgElement, b: &AlgElement) -> f64 {
    a.blocks()
        .iter()
        .zip(b.blocks())
        .map(|(x, y)| (x - y).iter().map(|z| z.norm()).fold(0.0, f64::max))
        .fold(0.0, f64::max)
}

fn rel(a: &AlgElement, b: &AlgElement) -> f64 {
    diff(a, b) / (1.0 + opnorm(a).max(opnorm(b)))
}

fn mat_rel(a: &CMat, b: &CMat) -> f64 {
    let scale = a.iter().chain(b.iter()).map(|z| z.norm()).fold(0.0, f64::max);
    (a - b).iter().map(|z| z.norm()).fold(0.0, f64::max) / (1.0 + scale)
}

/// `‖x‖_l = ‖⟨x, x*⟩‖^{1/2}`.
fn sem_l(e: &StarBimodule, x: &starmod::ModuleElement) -> f64 {
    opnorm(&e.pair(x, &e.star(x).unwrap()).unwrap()).sqrt()
}

/// `‖x‖_r = ‖⟨x*, x⟩‖^{1/2}`.
fn sem_r(e: &StarBimodule, x: &starmod::ModuleElement) -> f64 {
    opnorm(&e.pair(&e.star(x).unwrap(), x).unwrap()).sqrt()
}

fn random_pd(rng: &mut ChaCha8Rng, n: usize) -> RMat {
    let b = RMat::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
    &b * b.transpose() + RMat::identity(n, n) * 0.3
}

fn random_density(rng: &mut ChaCha8Rng, alg: &CStarAlgebra) -> AlgElement {
    let b = alg.random_element(rng);
    let p = &(&b * &b.adjoint()) + &alg.identity().scale(c(0.2, 0.0));
    let t = alg.trace(&p);
    p.scale(c(1.0 / t.re, 0.0))
}

// ---- test matrix ----

fn test_algebras() -> Vec<(&'static str, CStarAlgebra)> {
    vec![
        ("C", CStarAlgebra::commutative(1).unwrap()),
        ("C2", CStarAlgebra::commutative(2).unwrap()),
        ("C3", CStarAlgebra::new(&[1, 1, 1], &[1.0, 2.0, 0.5]).unwrap()),
        ("M2", CStarAlgebra::full_matrix(2).unwrap()),
        ("M2+C", CStarAlgebra::new(&[2, 1], &[1.0, 0.7]).unwrap()),
        ("M3", CStarAlgebra::full_matrix(3).unwrap()),
    ]
}

/// Every factory applied to every algebra it accepts.
fn test_matrix(rng: &mut ChaCha8Rng) -> Vec<(String, starmod::Result<StarBimodule>)> {
    let mut out = Vec::new();
    for (name, alg) in test_algebras() {
        let k = alg.num_blocks();
        out.push((format!("gns[trace]/{name}"), constructions::gns_bimodule(&alg, &StateFunctional::normalized_trace(&alg))));
        let dens = random_density(rng, &alg);
        out.push((
            format!("gns[random]/{name}"),
            StateFunctional::new(&alg, dens, 1e-9).and_then(|s| constructions::gns_bimodule(&alg, &s)),
        ));
        let all: Vec<usize> = (0..k).collect();
        out.push((format!("tensor[all,2]/{name}"), constructions::tensor_bimodule(&alg, &all, &random_pd(rng, 2))));
        out.push((format!("tensor[last,1]/{name}"), constructions::tensor_bimodule(&alg, &[k - 1], &RMat::identity(1, 1))));
        out.push((
            format!("expectation[diagonal]/{name}"),
            alg.conditional_expectation(&starmod::BlockPartition::diagonal(&alg))
                .and_then(|ce| constructions::expectation_bimodule(&ce)),
        ));
        out.push((
            format!("expectation[identity]/{name}"),
            alg.conditional_expectation(&starmod::BlockPartition::identity(&alg))
                .and_then(|ce| constructions::expectation_bimodule(&ce)),
        ));
        let mut pats: Vec<Vec<bool>> = Vec::new();
        for _ in 0..rng.random_range(1..=3) {
            let mut p: Vec<bool> = (0..k).map(|_| rng.random_bool(0.6)).collect();
            if !p.iter().any(|&b| b) {
                p[rng.random_range(0..k)] = true;
            }
            pats.push(p);
        }
        let projs: Vec<AlgElement> = pats.iter().map(|p| constructions::projection_from_pattern(&alg, p)).collect();
        out.push((format!("direct_sum{pats:?}/{name}"), constructions::direct_sum_module(&alg, &projs)));
        if alg.is_commutative() {
            let grams: Vec<RMat> = (0..k).map(|_| { let d = rng.random_range(0..=2); random_pd(rng, d) }).collect();
            out.push((format!("fell/{name}"), FellBundleFinite::new(grams).and_then(|b| constructions::fell_bundle_module(&b))));
        }
    }
    out.push(("complexified[3]/C".into(), constructions::complexified_real_hilbert(&random_pd(rng, 3))));
    out.push(("hyperbolic[1]/C".into(), constructions::hyperbolic_pair(1)));
    out.push(("hyperbolic[2]/C".into(), constructions::hyperbolic_pair(2)));
    out
}

fn matrix_modules(rng: &mut ChaCha8Rng) -> Vec<(String, StarBimodule)> {
    test_matrix(rng).into_iter().filter_map(|(n, m)| m.ok().map(|m| (n, m))).collect()
}

// ---- criteria ----

type Outcome = (bool, String);

fn crit1_axioms() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst: f64 = 0.0;
    let mut failures = Vec::new();
    let matrix = test_matrix(&mut rng);
    let count = matrix.len();
    for (name, m) in matrix {
        let e = match m {
            Ok(e) => e,
            Err(err) => {
                failures.push(format!("{name}: {err}"));
                continue;
            }
        };
        let report = e.check_axioms();
        let mut w = report.max_residual();
        let alg = e.algebra().clone();
        for _ in 0..20 {
            let (x, y) = (e.random_element(&mut rng), e.random_element(&mut rng));
            let a = alg.random_element(&mut rng);
            let b = alg.random_element(&mut rng);
            let xs = e.star(&x).unwrap();
            let ys = e.star(&y).unwrap();
            let pxy = e.pair(&x, &y).unwrap();
            // (a) ⟨x,y⟩* = ⟨y*,x*⟩
            w = w.max(rel(&pxy.adjoint(), &e.pair(&ys, &xs).unwrap()));
            // (b) (a x b)* = b* x* a*
            let axb = e.act_right(&e.act_left(&a, &x).unwrap(), &b).unwrap();
            let rhs = e.act_right(&e.act_left(&b.adjoint(), &xs).unwrap(), &a.adjoint()).unwrap();
            let lhs = e.star(&axb).unwrap();
            let dv = (lhs.coords() - rhs.coords()).iter().map(|z| z.norm()).fold(0.0, f64::max);
            w = w.max(dv / (1.0 + lhs.coords().iter().map(|z| z.norm()).fold(0.0, f64::max)));
            // (c) ⟨x,x*⟩ ≥ 0 and ⟨x*,x⟩ ≥ 0
            for g in [e.pair(&x, &xs).unwrap(), e.pair(&xs, &x).unwrap()] {
                w = w.max((-min_eig(&g) / (1.0 + opnorm(&g))).max(0.0));
            }
            // bilinearity
            let ax = e.act_left(&a, &x).unwrap();
            let xa = e.act_right(&x, &a).unwrap();
            let ay = e.act_left(&a, &y).unwrap();
            let ya = e.act_right(&y, &a).unwrap();
            w = w.max(rel(&e.pair(&ax, &y).unwrap(), &(&a * &pxy)));
            w = w.max(rel(&e.pair(&xa, &y).unwrap(), &e.pair(&x, &ay).unwrap()));
            w = w.max(rel(&e.pair(&x, &ya).unwrap(), &(&pxy * &a)));
        }
        if w > 1e-9 {
            failures.push(format!("{name}: residual {w:.3e}"));
        }
        worst = worst.max(w);
    }
    let secs = start.elapsed().as_secs_f64();
    let ok = failures.is_empty() && secs <= 10.0;
    (ok, format!("{count} modules, max residual {worst:.2e}, {secs:.2}s {failures:?}"))
}

fn crit2_lemma2() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut slack = f64::INFINITY;
    let modules = matrix_modules(&mut rng);
    for (_, e) in &modules {
        let alg = e.algebra();
        for _ in 0..200 {
            let a = alg.random_element(&mut rng);
            let x = e.random_element(&mut rng);
            let na = opnorm(&a);
            let (xl, xr) = (sem_l(e, &x), sem_r(e, &x));
            let ax = e.act_left(&a, &x).unwrap();
            let xa = e.act_right(&x, &a).unwrap();
            slack = slack
                .min(na * xl - sem_l(e, &ax))
                .min(na * xl - sem_l(e, &xa))
                .min(na * xr - sem_r(e, &ax))
                .min(na * xr - sem_r(e, &xa));
        }
    }
    (slack >= -1e-9, format!("{} modules x 200 samples, min slack {slack:.3e}", modules.len()))
}

fn crit3_akemann() -> Outcome {
    let mut notes = Vec::new();
    let mut ok = true;
    for alg in [CStarAlgebra::full_matrix(2).unwrap(), CStarAlgebra::new(&[1, 2], &[1.0, 1.0]).unwrap()] {
        match alg.akemann_witness() {
            Ok((x, y)) => {
                let l = opnorm(&(&(&x * &x.adjoint()) + &(&y * &y.adjoint())));
                let r = opnorm(&(&(&x.adjoint() * &x) + &(&y.adjoint() * &y)));
                ok &= (l - 1.0).abs() <= 1e-12 && (r - 2.0).abs() <= 1e-12;
                notes.push(format!("blocks {:?}: {l} vs {r}", alg.block_dims()));
            }
            Err(e) => {
                ok = false;
                notes.push(e.to_string());
            }
        }
    }
    for n in 1..=4 {
        let hit = matches!(CStarAlgebra::commutative(n).unwrap().akemann_witness(), Err(StarError::CommutativeAlgebra));
        ok &= hit;
    }
    notes.push("C^1..C^4 rejected".into());
    (ok, notes.join("; "))
}

fn crit4_linking() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let (mut iso, mut adj, mut cov) = (0.0f64, 0.0f64, 0.0f64);
    let modules = matrix_modules(&mut rng);
    for (_, e) in &modules {
        let ls = LinkingSpace::build(e);
        let alg = e.algebra();
        for _ in 0..200 {
            let x = e.random_element(&mut rng);
            let xv = x.coords().clone();
            let nm = sem_l(e, &x).max(sem_r(e, &x));
            let psi = ls.psi_matrix(&xv);
            iso = iso.max((ls.op_norm(&psi) - nm).abs() / (1.0 + nm));
            adj = adj.max(ls.adjoint_residual(&psi, &ls.psi_matrix(&e.star_vec(&xv))));
            let a = alg.random_element(&mut rng);
            let b = alg.random_element(&mut rng);
            let axb = e.act_right(&e.act_left(&a, &x).unwrap(), &b).unwrap();
            let lhs = ls.psi_matrix(axb.coords());
            let rhs = ls.phi_matrix(&a) * &psi * ls.phi_matrix(&b);
            cov = cov.max(mat_rel(&lhs, &rhs));
        }
    }
    let ok = iso <= 1e-8 && adj <= 1e-10 && cov <= 1e-10;
    (ok, format!("{} modules x 200: isometry {iso:.2e}, adjoint {adj:.2e}, covariance {cov:.2e}", modules.len()))
}

fn crit5_seminorms() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let h = constructions::hyperbolic_pair(1).unwrap();
    let v = c(rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0));
    let x = h.element(nalgebra::DVector::from_vec(vec![v, c(0.0, 0.0)])).unwrap();
    let (l, r) = (h.seminorm_l(&x), h.seminorm_r(&x));
    let hyp_ok = (l - v.norm()).abs() <= 1e-12 * (1.0 + v.norm()) && r == 0.0;

    let m2 = CStarAlgebra::full_matrix(2).unwrap();
    let dens = m2
        .element(vec![CMat::from_row_slice(2, 2, &[c(0.9, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(0.1, 0.0)])])
        .unwrap();
    let g = constructions::gns_bimodule(&m2, &StateFunctional::new(&m2, dens, 1e-12).unwrap()).unwrap();
    let e12 = g.basis_element(m2.index_of(0, 0, 1));
    let (gl, gr) = (g.seminorm_l(&e12), g.seminorm_r(&e12));
    let gns_ok = (gl - 0.9f64.sqrt()).abs() <= 1e-12 && (gr - 0.1f64.sqrt()).abs() <= 1e-12;
    (hyp_ok && gns_ok, format!("hyperbolic |v|={:.6} -> ({l:.6}, {r:e}); gns e12 -> ({gl:.12}, {gr:.12})", v.norm()))
}

fn crit6_fell() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut worst: f64 = 0.0;
    let mut mismatches = 0;
    for _ in 0..50 {
        let n = rng.random_range(1..=5);
        let dims: Vec<usize> = (0..n).map(|_| rng.random_range(0..=3)).collect();
        let grams: Vec<RMat> = dims.iter().map(|&d| random_pd(&mut rng, d)).collect();
        let bundle = FellBundleFinite::new(grams).unwrap();
        let e = constructions::fell_bundle_module(&bundle).unwrap();
        match constructions::fell_decompose(&e) {
            Ok(d) => {
                if d.bundle.fiber_dims != dims {
                    mismatches += 1;
                }
                worst = worst.max(d.check.residual());
            }
            Err(_) => mismatches += 1,
        }
    }
    let rejects = [1, 2, 3]
        .iter()
        .all(|&n| matches!(constructions::fell_decompose(&constructions::hyperbolic_pair(n).unwrap()), Err(StarError::RealityConditionFails(_))));
    let ok = mismatches == 0 && worst <= 1e-8 && rejects;
    (ok, format!("50 bundles: {mismatches} dim mismatches, iso residual {worst:.2e}; hyperbolic rejected: {rejects}"))
}

/// Per-block multiplicity of a projection list, from block ranks.
fn multiplicities(alg: &CStarAlgebra, ps: &[AlgElement]) -> Vec<usize> {
    (0..alg.num_blocks())
        .map(|k| {
            let n = alg.block_dims()[k];
            let total: usize = ps
                .iter()
                .map(|p| p.block(k).clone().svd(false, false).singular_values.iter().filter(|&&s| s > 1e-6).count())
                .sum();
            assert_eq!(total % n, 0, "block rank not a multiple of block size");
            total / n
        })
        .collect()
}

fn crit7_decompose() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let algebras = [CStarAlgebra::new(&[2, 1], &[1.0, 0.7]).unwrap(), CStarAlgebra::commutative(3).unwrap()];
    let (mut mism, mut orth, mut rank_fail, mut errors) = (0, 0.0f64, 0, Vec::new());
    for i in 0..30 {
        let alg = &algebras[i % 2];
        let k = alg.num_blocks();
        let m = rng.random_range(1..=3);
        let pats: Vec<Vec<bool>> = (0..m)
            .map(|_| {
                let mut p: Vec<bool> = (0..k).map(|_| rng.random_bool(0.5)).collect();
                if !p.iter().any(|&b| b) {
                    p[rng.random_range(0..k)] = true;
                }
                p
            })
            .collect();
        let expected: Vec<usize> = (0..k).map(|b| pats.iter().filter(|p| p[b]).count()).collect();
        let projs: Vec<AlgElement> = pats.iter().map(|p| constructions::projection_from_pattern(alg, p)).collect();
        let e = constructions::direct_sum_module(alg, &projs).unwrap();
        match structure::decompose_local(&e) {
            Ok(d) => {
                if multiplicities(alg, &d.projections) != expected {
                    mism += 1;
                }
            }
            Err(err) => errors.push(err.to_string()),
        }
        // F = a random nonempty subset of the summands
        let ranges = constructions::direct_sum_summands(alg, &projs).unwrap();
        let keep: Vec<_> = ranges.iter().filter(|_| rng.random_bool(0.5)).cloned().collect();
        let cols: Vec<usize> = keep.iter().flat_map(|r| r.clone()).collect();
        let mut f = CMat::zeros(e.dim(), cols.len());
        for (j, &i) in cols.iter().enumerate() {
            f[(i, j)] = c(1.0, 0.0);
        }
        match structure::complement(&e, &f) {
            Ok(comp) => {
                orth = orth.max(comp.orthogonality_residual);
                let both = {
                    let mut m = CMat::zeros(e.dim(), f.ncols() + comp.basis.ncols());
                    m.view_mut((0, 0), (e.dim(), f.ncols())).copy_from(&f);
                    m.view_mut((0, f.ncols()), (e.dim(), comp.basis.ncols())).copy_from(&comp.basis);
                    m
                };
                let rank = if both.ncols() == 0 {
                    0
                } else {
                    both.svd(false, false).singular_values.iter().filter(|&&s| s > 1e-8).count()
                };
                if rank != e.dim() {
                    rank_fail += 1;
                }
            }
            Err(err) => errors.push(err.to_string()),
        }
    }
    let ok = mism == 0 && orth <= 1e-9 && rank_fail == 0 && errors.is_empty();
    (ok, format!("30 inputs: {mism} multiset mismatches, orthogonality {orth:.2e}, {rank_fail} rank failures {errors:?}"))
}

fn crit8_sauvageot() -> Outcome {
    let w = RMat::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]);
    let g = sauvageot::graph_laplacian_generator(&w).unwrap();
    let t = sauvageot::build_tangent(&g, 1e-9, false).unwrap();
    let alg = g.algebra().clone();
    let d1 = alg.unit(0);
    let mut notes = Vec::new();
    let mut ok = t.e0_dim() == 2 && t.e0.null_space().ncols() == 0;
    notes.push(format!("dim E0 {}, null {}", t.e0_dim(), t.e0.null_space().ncols()));

    // v1 = δ1⊗δ2 in A⊗A coordinates (index 0·2 + 1), expressed in E0
    let mut v1 = nalgebra::DVector::<Complex64>::zeros(4);
    v1[1] = c(1.0, 0.0);
    let v1e = t.e0_basis.adjoint() * &v1;
    let back = &t.e0_basis * &v1e;
    ok &= (&back - &v1).norm() <= 1e-12;
    let p = t.e0.pair_vec(&v1e, &t.e0.star_vec(&v1e));
    // ⟨δ1⊗δ2, δ2⊗δ1⟩ = δ1 Δ(δ2) δ1 = δ1 (δ1 − δ2) δ1 = δ1
    ok &= diff(&p, &d1) <= 1e-12;
    notes.push(format!("<v1,v1*> err {:.1e}", diff(&p, &d1)));

    let dx = t.exterior_derivative(&d1).unwrap();
    let nm = sem_l(&t.module, &dx).max(sem_r(&t.module, &dx));
    ok &= (nm - 1.0).abs() <= 1e-10;
    let gam = t.carre_du_champ(&d1, &d1);
    ok &= diff(&gam, &alg.identity()) <= 1e-10;
    let r = sauvageot::verify_derivation(&t, 1e-10);
    ok &= r.leibniz <= 1e-10 && r.self_adjoint <= 1e-10;
    notes.push(format!("|d0 d1|_m {nm:.12}, Gamma err {:.1e}, leibniz {:.1e}, self-adj {:.1e}", diff(&gam, &alg.identity()), r.leibniz, r.self_adjoint));

    let m2 = CStarAlgebra::full_matrix(2).unwrap();
    let (o, l) = (c(0.0, 0.0), c(1.0, 0.0));
    let u = m2.element(vec![CMat::from_row_slice(2, 2, &[o, l, l, o])]).unwrap();
    let gc = sauvageot::conjugation_generator(&m2, &u).unwrap();
    let tc = sauvageot::build_tangent(&gc, 1e-9, false).unwrap();
    let e11 = m2.unit(m2.index_of(0, 0, 0));
    // closed form Δ(aa*) − Δ(a)a* − aΔ(a*) with Δ(a) = ½(uau* + u*au) − a
    let delta = |a: &AlgElement| &(&(&(&u * a) * &u.adjoint()) + &(&(&u.adjoint() * a) * &u)).scale(c(0.5, 0.0)) - a;
    let closed = &(&delta(&(&e11 * &e11.adjoint())) - &(&delta(&e11) * &e11.adjoint())) - &(&e11 * &delta(&e11.adjoint()));
    let gm = tc.carre_du_champ(&e11, &e11);
    let errc = diff(&gm, &m2.identity()).max(diff(&closed, &m2.identity()));
    ok &= errc <= 1e-10;
    let rc = sauvageot::verify_derivation(&tc, 1e-10);
    ok &= rc.leibniz <= 1e-10 && rc.self_adjoint <= 1e-10;
    notes.push(format!("M2 Gamma(e11,e11) err {errc:.1e}"));
    (ok, notes.join("; "))
}

fn crit9_sign() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut gens: Vec<(String, MarkovGenerator)> = Vec::new();
    let tri = RMat::from_row_slice(3, 3, &[0.0, 1.0, 1.0, 1.0, 0.0, 1.0, 1.0, 1.0, 0.0]);
    gens.push(("P2".into(), sauvageot::graph_laplacian_generator(&RMat::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0])).unwrap()));
    gens.push(("triangle".into(), sauvageot::graph_laplacian_generator(&tri).unwrap()));
    for i in 0..3 {
        let n = rng.random_range(2..=4);
        let mut w = RMat::zeros(n, n);
        for a in 0..n {
            for b in (a + 1)..n {
                let x = rng.random_range(0.1..2.0);
                w[(a, b)] = x;
                w[(b, a)] = x;
            }
        }
        gens.push((format!("random{i}"), sauvageot::graph_laplacian_generator(&w).unwrap()));
    }
    let m2 = CStarAlgebra::full_matrix(2).unwrap();
    gens.push(("M2 conj".into(), sauvageot::conjugation_generator(&m2, &m2.random_unitary(&mut rng)).unwrap()));
    let mut ok = true;
    let mut notes = Vec::new();
    for (name, g) in gens {
        let pos_ok = sauvageot::validate_generator(&g, 1e-9).choi_passed() && sauvageot::build_tangent(&g, 1e-9, true).is_ok();
        let neg = g.negated();
        let choi_fails = !sauvageot::validate_generator(&neg, 1e-9).choi_passed();
        let tangent_fails = matches!(sauvageot::build_tangent(&neg, 1e-9, true), Err(StarError::PositivityFails(_)));
        ok &= pos_ok && choi_fails && tangent_fails;
        notes.push(format!("{name}: +ok {pos_ok}, -choi fails {choi_fails}, -positivity fails {tangent_fails}"));
    }
    (ok, notes.join("; "))
}

fn crit10_determinism() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let scenario = dir.path().join("s.json");
    std::fs::write(
        &scenario,
        r#"{"version":"starmod-scenario/1","algebra":{"blocks":[2,1]},
            "construction":{"name":"direct_sum","params":{"projections":[[1,1],[1,0]]}},
            "tasks":["verify_axioms","theorem12","decompose","complement","akemann"],"seed":17}"#,
    )
    .unwrap();
    let run = |out: &str| {
        let o = Command::new(env!("CARGO_BIN_EXE_starmod"))
            .arg("run")
            .arg(&scenario)
            .args(["--seed", "12345", "--out"])
            .arg(dir.path().join(out))
            .output()
            .unwrap();
        (o.status.code(), std::fs::read(dir.path().join(out)).unwrap_or_default())
    };
    let (c1, r1) = run("a.json");
    let (c2, r2) = run("b.json");
    let ok = c1 == Some(0) && c1 == c2 && !r1.is_empty() && r1 == r2;
    (ok, format!("exit codes {c1:?}/{c2:?}, {} bytes, identical: {}", r1.len(), r1 == r2))
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("axiom suite over the factory matrix", crit1_axioms),
        ("seminorm inequalities for module actions", crit2_lemma2),
        ("norm-asymmetry witness", crit3_akemann),
        ("linking algebra isometry", crit4_linking),
        ("seminorm asymmetry examples", crit5_seminorms),
        ("Fell bundle round trip", crit6_fell),
        ("local decomposition and complements", crit7_decompose),
        ("tangent bimodule on P2 and M2", crit8_sauvageot),
        ("generator sign sanity", crit9_sign),
        ("report determinism", crit10_determinism),
    ];
    let mut all = true;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let (ok, detail) = match std::panic::catch_unwind(f) {
            Ok(r) => r,
            Err(_) => (false, "panicked".to_string()),
        };
        all &= ok;
        println!("criterion {:>2} {}: {name} ({detail})", i + 1, if ok { "PASS" } else { "FAIL" });
    }
    if all {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
