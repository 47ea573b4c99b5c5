//! Exact inference for a single Δ-scaled linear Gaussian state-space model.
//!
//! For observation times `t_1 < … < t_T` with gaps `Δ_k = t_k − t_{k−1}`:
//!
//! ```text
//! x_1 = μ + u,                     u ~ N(0, P)
//! x_k = (I + Δ_k A) x_{k−1} + w_k, w_k ~ N(0, Δ_k Γ)
//! y_k = C x_k + v_k,               v_k ~ N(0, Σ / Δ_k)
//! ```
//!
//! The first observation has no preceding gap; it uses a reference interval
//! `Δ_1` which defaults to one time unit ([`DEFAULT_FIRST_DELTA`]).

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::{self, outer};
use crate::types::{ClusterParameters, TimeSeries};

/// Reference interval used for the observation noise of the first step.
pub const DEFAULT_FIRST_DELTA: f64 = 1.0;

/// Innovation covariances with a condition estimate above this are rejected.
pub const MAX_INNOVATION_CONDITION: f64 = 1e12;

const INNOVATION_JITTER: f64 = 1e-10;

/// Total dimension cap for [`joint_gaussian_oracle`].
pub const ORACLE_SIZE_CAP: usize = 200;

#[derive(Debug, Clone)]
pub struct FilterResult {
    /// Gap used at each step; `deltas[0]` is the first-step reference interval.
    pub deltas: Vec<f64>,
    pub predicted_means: Vec<DVector<f64>>,
    pub predicted_covs: Vec<DMatrix<f64>>,
    pub filtered_means: Vec<DVector<f64>>,
    pub filtered_covs: Vec<DMatrix<f64>>,
    pub log_likelihood: f64,
}

#[derive(Debug, Clone)]
pub struct SmootherResult {
    pub smoothed_means: Vec<DVector<f64>>,
    pub smoothed_covs: Vec<DMatrix<f64>>,
    /// `lag_one_crosscovs[k-1] = Cov(x_k, x_{k-1} | Y)` for `k = 1..T`.
    pub lag_one_crosscovs: Vec<DMatrix<f64>>,
}

/// Per-step gaps, with `first_delta` standing in for the undefined first gap.
pub fn step_deltas(timestamps: &[f64], first_delta: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(timestamps.len());
    if !timestamps.is_empty() {
        out.push(first_delta);
    }
    out.extend(timestamps.windows(2).map(|w| w[1] - w[0]));
    out
}

/// `I + Δ·A`.
pub fn step_transition(generator: &DMatrix<f64>, delta: f64) -> DMatrix<f64> {
    let n = generator.nrows();
    DMatrix::identity(n, n) + generator * delta
}

fn check_compatible(series: &TimeSeries, params: &ClusterParameters) -> Result<()> {
    series.check_structure()?;
    if series.obs_dim() != params.obs_dim() {
        return Err(Error::DimensionMismatch {
            context: "series vs emission rows",
            expected: params.obs_dim(),
            found: series.obs_dim(),
        });
    }
    Ok(())
}

pub fn kalman_filter(series: &TimeSeries, params: &ClusterParameters) -> Result<FilterResult> {
    kalman_filter_with(series, params, DEFAULT_FIRST_DELTA)
}

/// Covariance-form Kalman filter with Joseph-form updates.
pub fn kalman_filter_with(
    series: &TimeSeries,
    params: &ClusterParameters,
    first_delta: f64,
) -> Result<FilterResult> {
    check_compatible(series, params)?;
    if !(first_delta > 0.0) {
        return Err(Error::InvalidConfig(format!(
            "first-step interval must be positive, got {first_delta}"
        )));
    }
    let t_len = series.len();
    let dx = params.latent_dim();
    let c = &params.emission;
    let ct = c.transpose();
    let eye = DMatrix::<f64>::identity(dx, dx);
    let deltas = step_deltas(&series.timestamps, first_delta);

    let mut out = FilterResult {
        deltas: deltas.clone(),
        predicted_means: Vec::with_capacity(t_len),
        predicted_covs: Vec::with_capacity(t_len),
        filtered_means: Vec::with_capacity(t_len),
        filtered_covs: Vec::with_capacity(t_len),
        log_likelihood: 0.0,
    };

    for k in 0..t_len {
        let delta = deltas[k];
        let (m_pred, p_pred) = if k == 0 {
            (params.init_mean.clone(), params.init_cov.clone())
        } else {
            let f = step_transition(&params.generator, delta);
            let m = &f * &out.filtered_means[k - 1];
            let p = &f * &out.filtered_covs[k - 1] * f.transpose() + &params.process_noise * delta;
            (m, linalg::symmetrized(p))
        };

        let r = &params.obs_noise / delta;
        let pct = &p_pred * &ct;
        let s = linalg::symmetrized(c * &pct + &r);
        let chol = linalg::cholesky_with_jitter(&s, INNOVATION_JITTER, k, "innovation covariance")?;
        let cond = linalg::cholesky_condition_estimate(&chol);
        if cond > MAX_INNOVATION_CONDITION {
            return Err(Error::Singular {
                step: k,
                what: format!("innovation covariance condition number ~{cond:.3e}"),
            });
        }

        let innov = &series.observations[k] - c * &m_pred;
        out.log_likelihood += linalg::gaussian_log_density(&innov, &chol);

        // K = P Cᵀ S⁻¹, computed as (S⁻¹ C P)ᵀ.
        let gain = chol.solve(&pct.transpose()).transpose();
        let m_filt = &m_pred + &gain * &innov;
        let i_kc = &eye - &gain * c;
        let p_filt = &i_kc * &p_pred * i_kc.transpose() + &gain * &r * gain.transpose();

        out.predicted_means.push(m_pred);
        out.predicted_covs.push(p_pred);
        out.filtered_means.push(m_filt);
        out.filtered_covs.push(linalg::symmetrized(p_filt));
    }
    if !out.log_likelihood.is_finite() {
        return Err(Error::NonFinite("log-likelihood"));
    }
    Ok(out)
}

/// Rauch–Tung–Striebel backward pass over a completed filter.
pub fn rts_smoother(
    series: &TimeSeries,
    params: &ClusterParameters,
    filter: &FilterResult,
) -> Result<SmootherResult> {
    let t_len = series.len();
    if filter.filtered_means.len() != t_len {
        return Err(Error::DimensionMismatch {
            context: "filter length",
            expected: t_len,
            found: filter.filtered_means.len(),
        });
    }
    let mut means = filter.filtered_means.clone();
    let mut covs = filter.filtered_covs.clone();
    let mut cross = vec![DMatrix::zeros(0, 0); t_len.saturating_sub(1)];

    for k in (0..t_len.saturating_sub(1)).rev() {
        let f = step_transition(&params.generator, filter.deltas[k + 1]);
        let pf = &filter.filtered_covs[k] * f.transpose();
        let gain = linalg::right_solve_spd(
            &pf,
            &filter.predicted_covs[k + 1],
            INNOVATION_JITTER,
            k + 1,
            "predicted covariance",
        )?;
        let m = &filter.filtered_means[k] + &gain * (&means[k + 1] - &filter.predicted_means[k + 1]);
        let p = &filter.filtered_covs[k]
            + &gain * (&covs[k + 1] - &filter.predicted_covs[k + 1]) * gain.transpose();
        cross[k] = &covs[k + 1] * gain.transpose();
        means[k] = m;
        covs[k] = linalg::symmetrized(p);
    }
    Ok(SmootherResult {
        smoothed_means: means,
        smoothed_covs: covs,
        lag_one_crosscovs: cross,
    })
}

/// Filter and smoother in one call.
pub fn smooth(series: &TimeSeries, params: &ClusterParameters) -> Result<(FilterResult, SmootherResult)> {
    let f = kalman_filter(series, params)?;
    let s = rts_smoother(series, params, &f)?;
    Ok((f, s))
}

fn check_grid(grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::Empty("trajectory grid"));
    }
    for k in 1..grid.len() {
        if grid[k] <= grid[k - 1] {
            return Err(Error::NonIncreasingTimestamps { index: k });
        }
    }
    Ok(())
}

/// Latent rollout with every noise term set to zero.
pub fn noiseless_latent(params: &ClusterParameters, grid: &[f64]) -> Result<Vec<DVector<f64>>> {
    check_grid(grid)?;
    let mut xs = Vec::with_capacity(grid.len());
    xs.push(params.init_mean.clone());
    for w in grid.windows(2) {
        let f = step_transition(&params.generator, w[1] - w[0]);
        let next = f * xs.last().unwrap();
        xs.push(next);
    }
    Ok(xs)
}

/// The cluster's "typical" observed trajectory: `y_k = C x_k` along the
/// noiseless latent rollout.
pub fn noiseless_trajectory(params: &ClusterParameters, grid: &[f64]) -> Result<Vec<DVector<f64>>> {
    Ok(noiseless_latent(params, grid)?
        .iter()
        .map(|x| &params.emission * x)
        .collect())
}

#[derive(Debug, Clone)]
pub struct OracleResult {
    pub log_likelihood: f64,
    pub smoothed_means: Vec<DVector<f64>>,
    pub smoothed_covs: Vec<DMatrix<f64>>,
    /// `Cov(x_k, x_{k-1} | Y)` for `k = 1..T`.
    pub lag_one_crosscovs: Vec<DMatrix<f64>>,
}

/// Dense reference computation: builds the joint Gaussian over all latents
/// and observations from the linear model, then evaluates the observation
/// marginal and latent conditional directly. Test-scale only.
pub fn joint_gaussian_oracle(series: &TimeSeries, params: &ClusterParameters) -> Result<OracleResult> {
    joint_gaussian_oracle_with(series, params, DEFAULT_FIRST_DELTA)
}

pub fn joint_gaussian_oracle_with(
    series: &TimeSeries,
    params: &ClusterParameters,
    first_delta: f64,
) -> Result<OracleResult> {
    check_compatible(series, params)?;
    let t_len = series.len();
    let dx = params.latent_dim();
    let dy = params.obs_dim();
    let nx = t_len * dx;
    let ny = t_len * dy;
    if nx + ny > ORACLE_SIZE_CAP {
        return Err(Error::SizeCap {
            size: nx + ny,
            cap: ORACLE_SIZE_CAP,
        });
    }
    let deltas = step_deltas(&series.timestamps, first_delta);
    let trans: Vec<DMatrix<f64>> = deltas
        .iter()
        .map(|&d| step_transition(&params.generator, d))
        .collect();

    // x = mean + G e, with e = (u, w_2, …, w_T) block-independent.
    let mut mean = DVector::zeros(nx);
    mean.rows_mut(0, dx).copy_from(&params.init_mean);
    for k in 1..t_len {
        let prev = mean.rows((k - 1) * dx, dx).clone_owned();
        mean.rows_mut(k * dx, dx).copy_from(&(&trans[k] * prev));
    }
    let mut g = DMatrix::zeros(nx, nx);
    for col in 0..t_len {
        let mut block = DMatrix::<f64>::identity(dx, dx);
        g.view_mut((col * dx, col * dx), (dx, dx)).copy_from(&block);
        for row in (col + 1)..t_len {
            block = &trans[row] * block;
            g.view_mut((row * dx, col * dx), (dx, dx)).copy_from(&block);
        }
    }
    let mut noise = DMatrix::zeros(nx, nx);
    noise.view_mut((0, 0), (dx, dx)).copy_from(&params.init_cov);
    for k in 1..t_len {
        noise
            .view_mut((k * dx, k * dx), (dx, dx))
            .copy_from(&(&params.process_noise * deltas[k]));
    }
    let cov_x = linalg::symmetrized(&g * noise * g.transpose());

    let mut h = DMatrix::zeros(ny, nx);
    let mut r = DMatrix::zeros(ny, ny);
    let mut y = DVector::zeros(ny);
    for k in 0..t_len {
        h.view_mut((k * dy, k * dx), (dy, dx)).copy_from(&params.emission);
        r.view_mut((k * dy, k * dy), (dy, dy))
            .copy_from(&(&params.obs_noise / deltas[k]));
        y.rows_mut(k * dy, dy).copy_from(&series.observations[k]);
    }
    let cov_xy = &cov_x * h.transpose();
    let cov_y = linalg::symmetrized(&h * &cov_xy + r);
    let chol = nalgebra::Cholesky::new(cov_y).ok_or_else(|| Error::Singular {
        step: 0,
        what: "joint observation covariance is not positive definite".into(),
    })?;
    let resid = &y - &h * &mean;
    let log_likelihood = linalg::gaussian_log_density(&resid, &chol);

    let cond_mean = &mean + &cov_xy * chol.solve(&resid);
    let cond_cov = linalg::symmetrized(&cov_x - &cov_xy * chol.solve(&cov_xy.transpose()));

    let smoothed_means = (0..t_len)
        .map(|k| cond_mean.rows(k * dx, dx).clone_owned())
        .collect();
    let smoothed_covs = (0..t_len)
        .map(|k| cond_cov.view((k * dx, k * dx), (dx, dx)).clone_owned())
        .collect();
    let lag_one_crosscovs = (1..t_len)
        .map(|k| cond_cov.view((k * dx, (k - 1) * dx), (dx, dx)).clone_owned())
        .collect();
    Ok(OracleResult {
        log_likelihood,
        smoothed_means,
        smoothed_covs,
        lag_one_crosscovs,
    })
}

/// `E[x_k x_kᵀ | Y]` from smoother output.
pub fn second_moment(s: &SmootherResult, k: usize) -> DMatrix<f64> {
    &s.smoothed_covs[k] + outer(&s.smoothed_means[k], &s.smoothed_means[k])
}
