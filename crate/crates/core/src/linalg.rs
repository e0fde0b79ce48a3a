//! Dense complex linear algebra shared by every module.
//!
//! Rank decisions use a singular-value cutoff of `tol * max(1, sigma_max)`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

pub type CMat = DMatrix<Complex64>;
pub type CVec = DVector<Complex64>;
pub type RMat = DMatrix<f64>;

pub const ZERO: Complex64 = Complex64::new(0.0, 0.0);
pub const ONE: Complex64 = Complex64::new(1.0, 0.0);
pub const I: Complex64 = Complex64::new(0.0, 1.0);

pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

pub(crate) fn cutoff(sigma_max: f64, tol: f64) -> f64 {
    tol * sigma_max.max(1.0)
}

/// Largest absolute entry.
pub fn max_abs(m: &CMat) -> f64 {
    m.iter().fold(0.0, |acc, z| acc.max(z.norm()))
}

pub fn max_abs_vec(v: &CVec) -> f64 {
    v.iter().fold(0.0, |acc, z| acc.max(z.norm()))
}

/// `|a - b|_max / (1 + max(|a|_max, |b|_max))`.
pub fn rel_residual(a: &CMat, b: &CMat) -> f64 {
    max_abs(&(a - b)) / (1.0 + max_abs(a).max(max_abs(b)))
}

/// Eigen-decomposition of the Hermitian part of `m`, eigenvalues ascending.
pub fn eigh(m: &CMat) -> (Vec<f64>, CMat) {
    let n = m.nrows();
    if n == 0 {
        return (Vec::new(), CMat::zeros(0, 0));
    }
    let h = (m + m.adjoint()).scale(0.5);
    let eig = h.symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vectors = CMat::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    (values, vectors)
}

pub fn min_eigenvalue(m: &CMat) -> f64 {
    eigh(m).0.first().copied().unwrap_or(0.0)
}

/// Full SVD of `m` padded with zero rows so that right singular vectors span
/// the whole domain. Returns (singular values, V) with V unitary `ncols x ncols`.
fn right_svd(m: &CMat) -> (Vec<f64>, CMat) {
    let (r, n) = m.shape();
    if n == 0 {
        return (Vec::new(), CMat::zeros(0, 0));
    }
    let padded = if r < n {
        let mut p = CMat::zeros(n, n);
        p.view_mut((0, 0), (r, n)).copy_from(m);
        p
    } else {
        m.clone()
    };
    let svd = padded.svd(false, true);
    let v_t = svd.v_t.expect("v_t requested");
    (svd.singular_values.iter().copied().collect(), v_t.adjoint())
}

pub fn spectral_norm(m: &CMat) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.clone()
        .svd(false, false)
        .singular_values
        .iter()
        .fold(0.0, |a: f64, &s| a.max(s))
}

/// Orthonormal basis (columns) of the kernel of `m`.
pub fn kernel(m: &CMat, tol: f64) -> CMat {
    let n = m.ncols();
    if m.nrows() == 0 {
        return CMat::identity(n, n);
    }
    let (s, v) = right_svd(m);
    let smax = s.iter().fold(0.0_f64, |a, &b| a.max(b));
    let cut = cutoff(smax, tol);
    let cols: Vec<usize> = (0..n).filter(|&i| s[i] <= cut).collect();
    select_columns(&v, &cols)
}

/// Orthonormal basis (columns) of the column space of `m`.
pub fn range(m: &CMat, tol: f64) -> CMat {
    let (r, n) = m.shape();
    if n == 0 || r == 0 {
        return CMat::zeros(r, 0);
    }
    let svd = m.clone().svd(true, false);
    let u = svd.u.expect("u requested");
    let smax = svd.singular_values.iter().fold(0.0_f64, |a, &b| a.max(b));
    let cut = cutoff(smax, tol);
    let cols: Vec<usize> = (0..svd.singular_values.len())
        .filter(|&i| svd.singular_values[i] > cut)
        .collect();
    select_columns(&u, &cols)
}

pub fn rank(m: &CMat, tol: f64) -> usize {
    if m.is_empty() {
        return 0;
    }
    let s = m.clone().svd(false, false).singular_values;
    let smax = s.iter().fold(0.0_f64, |a, &b| a.max(b));
    let cut = cutoff(smax, tol);
    s.iter().filter(|&&x| x > cut).count()
}

pub fn select_columns(m: &CMat, cols: &[usize]) -> CMat {
    let mut out = CMat::zeros(m.nrows(), cols.len());
    for (dst, &src) in cols.iter().enumerate() {
        out.set_column(dst, &m.column(src));
    }
    out
}

pub fn hstack(parts: &[CMat], rows: usize) -> CMat {
    let total: usize = parts.iter().map(|p| p.ncols()).sum();
    let mut out = CMat::zeros(rows, total);
    let mut at = 0;
    for p in parts {
        out.view_mut((0, at), (rows, p.ncols())).copy_from(p);
        at += p.ncols();
    }
    out
}

pub fn vstack(parts: &[CMat], cols: usize) -> CMat {
    let total: usize = parts.iter().map(|p| p.nrows()).sum();
    let mut out = CMat::zeros(total, cols);
    let mut at = 0;
    for p in parts {
        out.view_mut((at, 0), (p.nrows(), cols)).copy_from(p);
        at += p.nrows();
    }
    out
}

/// Minimum-norm least-squares solution of `a x = b`.
pub fn lstsq(a: &CMat, b: &CMat, tol: f64) -> CMat {
    let n = a.ncols();
    if a.nrows() == 0 || n == 0 {
        return CMat::zeros(n, b.ncols());
    }
    let svd = a.clone().svd(true, true);
    let smax = svd.singular_values.iter().fold(0.0_f64, |x, &y| x.max(y));
    let cut = cutoff(smax, tol);
    let u = svd.u.as_ref().expect("u");
    let v_t = svd.v_t.as_ref().expect("v_t");
    let mut inner = u.adjoint() * b;
    for (i, s) in svd.singular_values.iter().enumerate() {
        let f = if *s > cut { 1.0 / s } else { 0.0 };
        for j in 0..inner.ncols() {
            inner[(i, j)] *= f;
        }
    }
    v_t.adjoint() * inner
}

/// Orthonormal basis of the fixed space of the antilinear involution
/// `x -> s * conj(x)`, as complex vectors. The returned vectors are linearly
/// independent over the reals and span the fixed space.
pub fn antilinear_fixed_basis(s: &CMat, tol: f64) -> Vec<CVec> {
    let d = s.nrows();
    if d == 0 {
        return Vec::new();
    }
    // x = u + iv; s conj(x) = (A u + B v) + i (B u - A v) with s = A + iB.
    let mut j = RMat::zeros(2 * d, 2 * d);
    for r in 0..d {
        for col in 0..d {
            let z = s[(r, col)];
            j[(r, col)] = z.re;
            j[(r, d + col)] = z.im;
            j[(d + r, col)] = z.im;
            j[(d + r, d + col)] = -z.re;
        }
    }
    let m = j - RMat::identity(2 * d, 2 * d);
    let svd = m.svd(false, true);
    let v_t = svd.v_t.expect("v_t");
    let smax = svd.singular_values.iter().fold(0.0_f64, |a, &b| a.max(b));
    let cut = cutoff(smax, tol);
    (0..2 * d)
        .filter(|&i| svd.singular_values[i] <= cut)
        .map(|i| CVec::from_fn(d, |r, _| c(v_t[(i, r)], v_t[(i, d + r)])))
        .collect()
}

/// `H^{1/2}` and its pseudo-inverse for a Hermitian positive semidefinite
/// matrix, with eigenvalues below the cutoff treated as zero.
pub fn psd_sqrt_pair(h: &CMat, tol: f64) -> (CMat, CMat) {
    let (vals, vecs) = eigh(h);
    let lmax = vals.iter().fold(0.0_f64, |a, &b| a.max(b.abs()));
    let cut = cutoff(lmax, tol);
    let n = vals.len();
    let mut sq = CMat::zeros(n, n);
    let mut isq = CMat::zeros(n, n);
    for (i, &l) in vals.iter().enumerate() {
        if l > cut {
            sq[(i, i)] = c(l.sqrt(), 0.0);
            isq[(i, i)] = c(1.0 / l.sqrt(), 0.0);
        }
    }
    let va = vecs.adjoint();
    (&vecs * sq * &va, &vecs * isq * va)
}

pub fn real_to_complex(m: &RMat) -> CMat {
    m.map(|x| c(x, 0.0))
}

pub fn is_real_symmetric_pd(g: &RMat) -> bool {
    let n = g.nrows();
    if g.ncols() != n || g.iter().any(|x| !x.is_finite()) {
        return false;
    }
    if n == 0 {
        return true;
    }
    let asym = (g - g.transpose()).amax();
    if asym > 1e-10 * (1.0 + g.amax()) {
        return false;
    }
    let e = g.clone().symmetric_eigen();
    e.eigenvalues.iter().all(|&l| l > 1e-12 * (1.0 + g.amax()))
}
