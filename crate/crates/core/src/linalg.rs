//! Small complex linear-algebra helpers on top of `nalgebra`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type CVec = DVector<C64>;
pub type CMat = DMatrix<C64>;

/// Draws a circularly-symmetric complex Gaussian vector with unit-variance entries.
pub fn crandn<R: Rng + ?Sized>(rng: &mut R, n: usize) -> CVec {
    CVec::from_fn(n, |_, _| crandn_scalar(rng))
}

pub fn crandn_mat<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize) -> CMat {
    CMat::from_fn(rows, cols, |_, _| crandn_scalar(rng))
}

pub fn crandn_scalar<R: Rng + ?Sized>(rng: &mut R) -> C64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    C64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

/// `a^H b`
pub fn inner(a: &CVec, b: &CVec) -> C64 {
    a.dotc(b)
}

/// `Re{x^H Q x}`
pub fn quad_form(q: &CMat, x: &CVec) -> f64 {
    x.dotc(&(q * x)).re
}

pub fn max_asymmetry(q: &CMat) -> f64 {
    let mut worst: f64 = 0.0;
    for i in 0..q.nrows() {
        for j in 0..q.ncols() {
            worst = worst.max((q[(i, j)] - q[(j, i)].conj()).norm());
        }
    }
    worst
}

pub fn check_hermitian(q: &CMat) -> Result<()> {
    if q.nrows() != q.ncols() {
        return Err(Error::LinAlg(format!(
            "expected a square matrix, got {}x{}",
            q.nrows(),
            q.ncols()
        )));
    }
    let scale = q.iter().map(|z| z.norm()).fold(0.0, f64::max).max(1.0);
    let asym = max_asymmetry(q);
    if asym > 1e-10 * scale {
        return Err(Error::NotHermitian(asym));
    }
    Ok(())
}

/// Eigenvalues of a Hermitian matrix, ascending.
pub fn hermitian_eigenvalues(q: &CMat) -> Vec<f64> {
    let sym = (q + q.adjoint()) * C64::new(0.5, 0.0);
    let mut ev: Vec<f64> = sym.symmetric_eigenvalues().iter().copied().collect();
    ev.sort_by(|a, b| a.total_cmp(b));
    ev
}

/// Returns `R` with `R^H R = Q` for a Hermitian PSD `Q`. Rows belonging to
/// eigenvalues at or below `1e-14 * max_eig` are dropped, so `R` may be wide.
pub fn hermitian_factor(q: &CMat) -> Result<CMat> {
    check_hermitian(q)?;
    let n = q.nrows();
    if n == 0 {
        return Ok(CMat::zeros(0, 0));
    }
    let sym = (q + q.adjoint()) * C64::new(0.5, 0.0);
    let eig = sym.symmetric_eigen();
    let max_ev = eig.eigenvalues.iter().copied().fold(0.0, f64::max);
    if let Some(min_ev) = eig.eigenvalues.iter().copied().reduce(f64::min) {
        if min_ev < -1e-9 * max_ev.max(1e-300) {
            return Err(Error::LinAlg(format!(
                "matrix is not positive semidefinite (min eigenvalue {min_ev:.3e})"
            )));
        }
    }
    let keep: Vec<usize> = (0..n)
        .filter(|&i| eig.eigenvalues[i] > 1e-14 * max_ev)
        .collect();
    let mut r = CMat::zeros(keep.len(), n);
    for (row, &i) in keep.iter().enumerate() {
        let s = eig.eigenvalues[i].sqrt();
        for c in 0..n {
            r[(row, c)] = eig.eigenvectors[(c, i)].conj() * s;
        }
    }
    Ok(r)
}

/// Inverse of a Hermitian positive-definite matrix via Cholesky.
pub fn hpd_inverse(m: &CMat) -> Result<CMat> {
    let chol = m
        .clone()
        .cholesky()
        .ok_or_else(|| Error::LinAlg("matrix is not positive definite".into()))?;
    Ok(chol.inverse())
}

/// `ln det M` of a Hermitian positive-definite matrix.
pub fn log_det_hpd(m: &CMat) -> Result<f64> {
    let chol = m
        .clone()
        .cholesky()
        .ok_or_else(|| Error::LinAlg("matrix is not positive definite".into()))?;
    let l = chol.l();
    Ok((0..l.nrows()).map(|i| 2.0 * l[(i, i)].re.ln()).sum())
}

/// Solves `M x = b` for a Hermitian positive-definite `M`.
pub fn hpd_solve(m: &CMat, b: &CVec) -> Result<CVec> {
    let chol = m
        .clone()
        .cholesky()
        .ok_or_else(|| Error::LinAlg("matrix is not positive definite".into()))?;
    Ok(chol.solve(b))
}

pub fn outer(a: &CVec) -> CMat {
    a * a.adjoint()
}

pub fn frobenius_sq(m: &CMat) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum()
}
