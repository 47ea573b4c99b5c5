//! Rank tests, multiplicity correction and logistic regression.

use nalgebra::{DMatrix, DVector};
use statrs::function::erf::erfc;

use crate::error::{Error, Result};

/// Largest combined sample size accepted by [`mann_whitney_exact`].
pub const EXACT_MWU_CAP: usize = 16;

/// Two-sided standard normal tail probability `P(|Z| ≥ |z|)`.
pub fn two_sided_normal_p(z: f64) -> f64 {
    erfc(z.abs() / std::f64::consts::SQRT_2).min(1.0)
}

/// Midranks (1-based) of `values`, ties sharing the average rank.
pub fn midranks(values: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && values[idx[j + 1]] == values[idx[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            ranks[k] = r;
        }
        i = j + 1;
    }
    ranks
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MannWhitney {
    pub u_x: f64,
    pub u_y: f64,
    pub z: f64,
    pub p_two_sided: f64,
}

fn check_samples(x: &[f64], y: &[f64]) -> Result<()> {
    if x.is_empty() || y.is_empty() {
        return Err(Error::Empty("Mann-Whitney sample"));
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("Mann-Whitney sample"));
    }
    Ok(())
}

/// Mann–Whitney U with midranks, tie-corrected normal approximation and a
/// 0.5 continuity correction.
pub fn mann_whitney_u(x: &[f64], y: &[f64]) -> Result<MannWhitney> {
    check_samples(x, y)?;
    let (nx, ny) = (x.len() as f64, y.len() as f64);
    let n = nx + ny;
    let pooled: Vec<f64> = x.iter().chain(y).copied().collect();
    let ranks = midranks(&pooled);
    let r_x: f64 = ranks[..x.len()].iter().sum();
    let u_x = r_x - nx * (nx + 1.0) / 2.0;
    let u_y = nx * ny - u_x;

    let mut sorted = pooled.clone();
    sorted.sort_by(f64::total_cmp);
    let mut tie_term = 0.0;
    let mut i = 0;
    while i < sorted.len() {
        let mut j = i;
        while j + 1 < sorted.len() && sorted[j + 1] == sorted[i] {
            j += 1;
        }
        let t = (j - i + 1) as f64;
        tie_term += t * t * t - t;
        i = j + 1;
    }
    let var = nx * ny / 12.0 * ((n + 1.0) - tie_term / (n * (n - 1.0)).max(1.0));
    let diff = u_x - nx * ny / 2.0;
    let (z, p) = if !(var > 0.0) {
        (0.0, 1.0)
    } else {
        let corrected = (diff.abs() - 0.5).max(0.0);
        let z = corrected.copysign(diff) / var.sqrt();
        (z, two_sided_normal_p(z))
    };
    Ok(MannWhitney {
        u_x,
        u_y,
        z,
        p_two_sided: p,
    })
}

/// Exact two-sided p-value of U by enumerating every assignment of group
/// labels to the pooled midranks: `min(1, 2·min(P(U ≤ u), P(U ≥ u)))`.
pub fn mann_whitney_exact(x: &[f64], y: &[f64]) -> Result<f64> {
    check_samples(x, y)?;
    let n = x.len() + y.len();
    if n > EXACT_MWU_CAP {
        return Err(Error::SizeCap {
            size: n,
            cap: EXACT_MWU_CAP,
        });
    }
    let pooled: Vec<f64> = x.iter().chain(y).copied().collect();
    // doubled midranks are integers, so sums compare exactly
    let ranks2: Vec<i64> = midranks(&pooled).iter().map(|r| (2.0 * r) as i64).collect();
    let observed: i64 = ranks2[..x.len()].iter().sum();
    let nx = x.len() as u32;
    let (mut total, mut le, mut ge) = (0u64, 0u64, 0u64);
    for mask in 0u32..(1u32 << n) {
        if mask.count_ones() != nx {
            continue;
        }
        let s: i64 = (0..n).filter(|&i| mask >> i & 1 == 1).map(|i| ranks2[i]).sum();
        total += 1;
        if s <= observed {
            le += 1;
        }
        if s >= observed {
            ge += 1;
        }
    }
    let tail = le.min(ge) as f64 / total as f64;
    Ok((2.0 * tail).min(1.0))
}

/// `min(1, m·p)` with `m` the number of tests.
pub fn bonferroni(p_values: &[f64]) -> Result<Vec<f64>> {
    let m = p_values.len() as f64;
    p_values
        .iter()
        .map(|&p| {
            if (0.0..=1.0).contains(&p) {
                Ok((m * p).min(1.0))
            } else {
                Err(Error::InvalidProbability(p))
            }
        })
        .collect()
}

/// Coefficient magnitude beyond which a fit is flagged as separated.
pub const SEPARATION_THRESHOLD: f64 = 15.0;
pub const SCORE_TOL: f64 = 1e-8;
pub const DEVIANCE_REL_TOL: f64 = 1e-10;
pub const MAX_IRLS_ITERS: usize = 100;
pub const WALD_Z: f64 = 1.96;

#[derive(Debug, Clone, PartialEq)]
pub struct LogisticFit {
    pub names: Vec<String>,
    pub estimates: Vec<f64>,
    pub std_errors: Vec<f64>,
    pub odds_ratios: Vec<f64>,
    /// Wald 95% interval on the odds-ratio scale; `None` for coefficients
    /// that diverged.
    pub ci: Vec<Option<(f64, f64)>>,
    pub p_values: Vec<f64>,
    pub n: usize,
    pub iterations: usize,
    pub converged: bool,
    pub separated: bool,
    pub deviance_trace: Vec<f64>,
}

fn log1p_exp(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

fn deviance(x: &DMatrix<f64>, y: &[f64], beta: &DVector<f64>) -> f64 {
    let eta = x * beta;
    2.0 * eta
        .iter()
        .zip(y)
        .map(|(&e, &yi)| log1p_exp(e) - yi * e)
        .sum::<f64>()
}

fn sigmoid(e: f64) -> f64 {
    if e >= 0.0 {
        1.0 / (1.0 + (-e).exp())
    } else {
        let t = e.exp();
        t / (1.0 + t)
    }
}

/// Indices of columns that are linear combinations of earlier ones.
pub fn aliased_columns(x: &DMatrix<f64>) -> Vec<usize> {
    let mut kept: Vec<usize> = Vec::new();
    let mut aliased = Vec::new();
    let scale = x.amax().max(1.0);
    let tol = 1e-10 * scale * (x.nrows().max(x.ncols()) as f64);
    for j in 0..x.ncols() {
        let mut cols = kept.clone();
        cols.push(j);
        let sub = x.select_columns(&cols);
        let sv = sub.singular_values();
        if sv.min() <= tol {
            aliased.push(j);
        } else {
            kept.push(j);
        }
    }
    aliased
}

/// Maximum-likelihood logistic regression by iteratively reweighted least
/// squares with step halving. `x` includes any intercept column.
pub fn logistic_fit(x: &DMatrix<f64>, y: &[f64], names: &[String]) -> Result<LogisticFit> {
    let (n, p) = x.shape();
    if y.len() != n || names.len() != p {
        return Err(Error::DimensionMismatch {
            context: "logistic design".into(),
            expected: n,
            found: y.len(),
        });
    }
    if n == 0 {
        return Err(Error::Empty("logistic design"));
    }
    if y.iter().any(|&v| v != 0.0 && v != 1.0) {
        return Err(Error::InvalidConfig("logistic outcome must be 0/1".into()));
    }
    let prevalence = y.iter().sum::<f64>() / n as f64;
    if prevalence == 0.0 || prevalence == 1.0 {
        return Err(Error::SingleClass(prevalence));
    }
    let aliased = aliased_columns(x);
    if !aliased.is_empty() {
        return Err(Error::RankDeficient(
            aliased.iter().map(|&j| names[j].clone()).collect(),
        ));
    }

    let yv = DVector::from_row_slice(y);
    let mut beta = DVector::zeros(p);
    let mut dev = deviance(x, y, &beta);
    let mut trace = vec![dev];
    let mut converged = false;
    let mut iterations = 0;
    let mut info = DMatrix::zeros(p, p);
    for it in 0..MAX_IRLS_ITERS {
        let mu = (x * &beta).map(sigmoid);
        let w = mu.map(|m| m * (1.0 - m));
        let score = x.transpose() * (&yv - &mu);
        let xw = DMatrix::from_fn(n, p, |i, j| x[(i, j)] * w[i]);
        info = x.transpose() * xw;
        if score.amax() < SCORE_TOL {
            converged = true;
            iterations = it;
            break;
        }
        let step = crate::linalg::cholesky_with_jitter(&info, 1e-12, it, "information matrix")?
            .solve(&score);
        let mut t = 1.0;
        let mut candidate = &beta + &step * t;
        let mut cand_dev = deviance(x, y, &candidate);
        let mut halvings = 0;
        while !(cand_dev <= dev) && halvings < 50 {
            t *= 0.5;
            candidate = &beta + &step * t;
            cand_dev = deviance(x, y, &candidate);
            halvings += 1;
        }
        if !(cand_dev <= dev) {
            iterations = it + 1;
            break;
        }
        let rel = (dev - cand_dev).abs() / (dev.abs() + 0.1);
        beta = candidate;
        dev = cand_dev;
        trace.push(dev);
        iterations = it + 1;
        if rel < DEVIANCE_REL_TOL {
            converged = true;
            let mu = (x * &beta).map(sigmoid);
            let xw = DMatrix::from_fn(n, p, |i, j| x[(i, j)] * mu[i] * (1.0 - mu[i]));
            info = x.transpose() * xw;
            break;
        }
    }

    let separated = beta.amax() > SEPARATION_THRESHOLD;
    let cov = crate::linalg::cholesky_with_jitter(&info, 1e-12, iterations, "information matrix")
        .map(|c| c.inverse())
        .unwrap_or_else(|_| DMatrix::from_element(p, p, f64::NAN));
    let estimates: Vec<f64> = beta.iter().copied().collect();
    let std_errors: Vec<f64> = (0..p).map(|j| cov[(j, j)].max(0.0).sqrt()).collect();
    let p_values = estimates
        .iter()
        .zip(&std_errors)
        .map(|(&b, &se)| if se > 0.0 { two_sided_normal_p(b / se) } else { f64::NAN })
        .collect();
    let ci = estimates
        .iter()
        .zip(&std_errors)
        .map(|(&b, &se)| {
            (b.abs() <= SEPARATION_THRESHOLD)
                .then(|| ((b - WALD_Z * se).exp(), (b + WALD_Z * se).exp()))
        })
        .collect();
    Ok(LogisticFit {
        names: names.to_vec(),
        odds_ratios: estimates.iter().map(|b| b.exp()).collect(),
        estimates,
        std_errors,
        ci,
        p_values,
        n,
        iterations,
        converged,
        separated,
        deviance_trace: trace,
    })
}
