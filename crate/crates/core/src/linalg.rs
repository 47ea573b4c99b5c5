//! Small dense linear-algebra helpers on top of nalgebra.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn, SymmetricEigen};

use crate::error::{Error, Result};

const LN_2PI: f64 = 1.837_877_066_409_345_5;

pub fn symmetrize(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let v = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
}

pub fn symmetrized(mut m: DMatrix<f64>) -> DMatrix<f64> {
    symmetrize(&mut m);
    m
}

pub fn max_asymmetry(m: &DMatrix<f64>) -> f64 {
    let n = m.nrows().min(m.ncols());
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in (i + 1)..n {
            worst = worst.max((m[(i, j)] - m[(j, i)]).abs());
        }
    }
    worst
}

/// Smallest eigenvalue of the symmetric part of `m`.
pub fn min_eigenvalue(m: &DMatrix<f64>) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    let s = symmetrized(m.clone());
    SymmetricEigen::new(s).eigenvalues.min()
}

fn mean_diag(m: &DMatrix<f64>) -> f64 {
    let d = m.nrows().max(1) as f64;
    let t = m.trace() / d;
    if t.is_finite() && t > 0.0 {
        t
    } else {
        1.0
    }
}

/// Cholesky factor of a symmetric positive-definite matrix. On failure the
/// diagonal is loaded with `rel_jitter · trace/d` and the factorization is
/// retried once.
pub fn cholesky_with_jitter(
    m: &DMatrix<f64>,
    rel_jitter: f64,
    step: usize,
    what: &str,
) -> Result<Cholesky<f64, Dyn>> {
    if let Some(c) = Cholesky::new(m.clone()) {
        return Ok(c);
    }
    let n = m.nrows();
    let jitter = rel_jitter * mean_diag(m);
    let loaded = m + DMatrix::identity(n, n) * jitter;
    Cholesky::new(loaded).ok_or_else(|| Error::Singular {
        step,
        what: format!("{what} is not positive definite"),
    })
}

/// Lower bound on the 2-norm condition number from a Cholesky factor.
pub fn cholesky_condition_estimate(c: &Cholesky<f64, Dyn>) -> f64 {
    let l = c.l_dirty();
    let diag = l.diagonal();
    let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
    for &v in diag.iter() {
        lo = lo.min(v.abs());
        hi = hi.max(v.abs());
    }
    if lo == 0.0 {
        f64::INFINITY
    } else {
        (hi / lo).powi(2)
    }
}

pub fn log_det_cholesky(c: &Cholesky<f64, Dyn>) -> f64 {
    2.0 * c.l_dirty().diagonal().iter().map(|v| v.ln()).sum::<f64>()
}

/// `log N(resid; 0, S)` given the Cholesky factor of `S`.
pub fn gaussian_log_density(resid: &DVector<f64>, chol: &Cholesky<f64, Dyn>) -> f64 {
    let d = resid.len() as f64;
    let sol = chol.solve(resid);
    -0.5 * (d * LN_2PI + log_det_cholesky(chol) + resid.dot(&sol))
}

/// Solves `X · B = Y` for `X`, with `B` symmetric positive definite, i.e.
/// returns `Y · B⁻¹`.
pub fn right_solve_spd(
    y: &DMatrix<f64>,
    b: &DMatrix<f64>,
    rel_jitter: f64,
    step: usize,
    what: &str,
) -> Result<DMatrix<f64>> {
    let chol = cholesky_with_jitter(b, rel_jitter, step, what)?;
    // X B = Y  <=>  B Xᵀ = Yᵀ
    Ok(chol.solve(&y.transpose()).transpose())
}

/// Outer product `a bᵀ`.
pub fn outer(a: &DVector<f64>, b: &DVector<f64>) -> DMatrix<f64> {
    a * b.transpose()
}
