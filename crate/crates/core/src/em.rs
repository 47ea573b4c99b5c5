//! Mixture-of-LGSSM clustering by expectation–maximization.
//!
//! Each series is explained by one of `M` Δ-scaled state-space models. The
//! E-step runs a filter and smoother for every (series, cluster) pair and
//! turns the per-cluster marginal likelihoods into responsibilities; the
//! M-step re-estimates every cluster's parameters in closed form from the
//! responsibility-weighted smoother moments.

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::lgssm::{self, SmootherResult};
use crate::linalg::{self, outer};
use crate::par;
use crate::types::{ClusterParameters, TimeSeries};

const REGRESSION_JITTER: f64 = 1e-8;
pub const DEFAULT_INIT_PERTURBATION: f64 = 1e-2;

#[derive(Debug, Clone, PartialEq)]
pub struct FitConfig {
    pub clusters: usize,
    pub latent_dim: usize,
    pub max_iters: usize,
    /// Stop once `|Δℓ| / (1 + |ℓ|)` falls below this.
    pub tol: f64,
    pub seed: u64,
    /// Floor for mixing proportions; a cluster that reaches it is frozen.
    pub min_weight: f64,
    /// Relative size of the seed-derived nudge to each cluster's `μ`.
    pub init_perturbation: f64,
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig {
            clusters: 2,
            latent_dim: 7,
            max_iters: 200,
            tol: 1e-6,
            seed: 0,
            min_weight: 1e-4,
            init_perturbation: DEFAULT_INIT_PERTURBATION,
        }
    }
}

impl FitConfig {
    pub fn validate(&self) -> Result<()> {
        if self.clusters == 0 {
            return Err(Error::InvalidConfig("cluster count must be at least 1".into()));
        }
        if self.latent_dim == 0 {
            return Err(Error::InvalidConfig("latent dimension must be at least 1".into()));
        }
        if !(self.tol > 0.0) {
            return Err(Error::InvalidConfig("tolerance must be positive".into()));
        }
        if !(self.min_weight >= 0.0) || self.min_weight * self.clusters as f64 >= 1.0 {
            return Err(Error::InvalidConfig(format!(
                "min_weight {} incompatible with {} clusters",
                self.min_weight, self.clusters
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct FittedMixture {
    pub clusters: Vec<ClusterParameters>,
    pub weights: Vec<f64>,
    /// One row per series, one column per cluster.
    pub responsibilities: Vec<Vec<f64>>,
    pub labels: Vec<usize>,
    pub loglik_trace: Vec<f64>,
    /// Number of M-steps performed.
    pub iterations: usize,
    pub converged: bool,
    /// Clusters whose weight hit the floor and were no longer updated.
    pub frozen: Vec<bool>,
    pub warnings: Vec<String>,
}

impl FittedMixture {
    pub fn num_clusters(&self) -> usize {
        self.clusters.len()
    }

    pub fn latent_dim(&self) -> usize {
        self.clusters.first().map_or(0, |c| c.latent_dim())
    }

    pub fn obs_dim(&self) -> usize {
        self.clusters.first().map_or(0, |c| c.obs_dim())
    }

    pub fn final_loglik(&self) -> Option<f64> {
        self.loglik_trace.last().copied()
    }

    /// A mixture with only parameters and weights, e.g. loaded from disk.
    pub fn from_parameters(clusters: Vec<ClusterParameters>, weights: Vec<f64>) -> Self {
        let m = clusters.len();
        FittedMixture {
            clusters,
            weights,
            responsibilities: Vec::new(),
            labels: Vec::new(),
            loglik_trace: Vec::new(),
            iterations: 0,
            converged: false,
            frozen: vec![false; m],
            warnings: Vec::new(),
        }
    }
}

/// Responsibility-weighted smoother moments for one cluster.
///
/// With `d_k = x_k − x_{k−1}` and every expectation taken under the
/// smoothing posterior, the accumulators are sums over series `i` (weighted
/// by the responsibility `r_i`) and steps `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct SufficientStats {
    /// `Σ r`.
    pub weight: f64,
    /// `Σ r (T − 1)`.
    pub transitions: f64,
    /// `Σ r T`.
    pub observations: f64,
    /// `Σ r E[x_1]`.
    pub init_sum: DVector<f64>,
    /// `Σ r E[x_1 x_1ᵀ]`.
    pub init_outer: DMatrix<f64>,
    /// `Σ r Σ_k E[d_k x_{k−1}ᵀ]`.
    pub incr_lag: DMatrix<f64>,
    /// `Σ r Σ_k Δ_k E[x_{k−1} x_{k−1}ᵀ]`.
    pub lag_outer_delta: DMatrix<f64>,
    /// `Σ r Σ_k E[d_k d_kᵀ] / Δ_k`.
    pub incr_outer_over_delta: DMatrix<f64>,
    /// `Σ r Σ_k Δ_k y_k E[x_k]ᵀ`.
    pub obs_cross_delta: DMatrix<f64>,
    /// `Σ r Σ_k Δ_k E[x_k x_kᵀ]`.
    pub state_outer_delta: DMatrix<f64>,
    /// `Σ r Σ_k Δ_k y_k y_kᵀ`.
    pub obs_outer_delta: DMatrix<f64>,
}

impl SufficientStats {
    pub fn zeros(dx: usize, dy: usize) -> Self {
        SufficientStats {
            weight: 0.0,
            transitions: 0.0,
            observations: 0.0,
            init_sum: DVector::zeros(dx),
            init_outer: DMatrix::zeros(dx, dx),
            incr_lag: DMatrix::zeros(dx, dx),
            lag_outer_delta: DMatrix::zeros(dx, dx),
            incr_outer_over_delta: DMatrix::zeros(dx, dx),
            obs_cross_delta: DMatrix::zeros(dy, dx),
            state_outer_delta: DMatrix::zeros(dx, dx),
            obs_outer_delta: DMatrix::zeros(dy, dy),
        }
    }

    /// Moments of a single series, scaled by its responsibility `r`.
    pub fn from_smoother(
        series: &TimeSeries,
        smoothed: &SmootherResult,
        deltas: &[f64],
        r: f64,
    ) -> Self {
        let dx = smoothed.smoothed_means[0].len();
        let dy = series.obs_dim();
        let mut s = SufficientStats::zeros(dx, dy);
        let t_len = series.len();
        let means = &smoothed.smoothed_means;
        let covs = &smoothed.smoothed_covs;

        s.weight = r;
        s.transitions = r * (t_len as f64 - 1.0);
        s.observations = r * t_len as f64;
        s.init_sum = &means[0] * r;
        s.init_outer = lgssm::second_moment(smoothed, 0) * r;

        for k in 0..t_len {
            let delta = deltas[k];
            let y = &series.observations[k];
            let second = lgssm::second_moment(smoothed, k);
            s.obs_cross_delta += outer(y, &means[k]) * (r * delta);
            s.state_outer_delta += &second * (r * delta);
            s.obs_outer_delta += outer(y, y) * (r * delta);
            if k == 0 {
                continue;
            }
            // Work with centred moments of the increment to avoid cancellation
            // when Δ_k is small.
            let cross = &smoothed.lag_one_crosscovs[k - 1];
            let mean_incr = &means[k] - &means[k - 1];
            let cov_incr = &covs[k] - cross - cross.transpose() + &covs[k - 1];
            let incr_outer = cov_incr + outer(&mean_incr, &mean_incr);
            let incr_lag = (cross - &covs[k - 1]) + outer(&mean_incr, &means[k - 1]);
            s.incr_lag += incr_lag * r;
            s.lag_outer_delta += lgssm::second_moment(smoothed, k - 1) * (r * delta);
            s.incr_outer_over_delta += incr_outer * (r / delta);
        }
        s
    }

    pub fn merge(mut self, other: SufficientStats) -> Self {
        self.weight += other.weight;
        self.transitions += other.transitions;
        self.observations += other.observations;
        self.init_sum += other.init_sum;
        self.init_outer += other.init_outer;
        self.incr_lag += other.incr_lag;
        self.lag_outer_delta += other.lag_outer_delta;
        self.incr_outer_over_delta += other.incr_outer_over_delta;
        self.obs_cross_delta += other.obs_cross_delta;
        self.state_outer_delta += other.state_outer_delta;
        self.obs_outer_delta += other.obs_outer_delta;
        self
    }
}

fn check_data(data: &[TimeSeries]) -> Result<usize> {
    let first = data.first().ok_or(Error::Empty("no time series supplied"))?;
    let dy = first.obs_dim();
    for s in data {
        s.check_structure()?;
        if s.obs_dim() != dy {
            return Err(Error::DimensionMismatch {
                context: "series observation dimension",
                expected: dy,
                found: s.obs_dim(),
            });
        }
    }
    Ok(dy)
}

/// Identity initialization: every cluster starts with `C = [I 0]`, `A = 0`,
/// the pooled mean of first observations as `μ`, and `P = Σ = Γ` equal to
/// the pooled per-channel variance on the diagonal. With more than one
/// cluster, `μ` is nudged per cluster by seed-derived noise of relative size
/// 1e-2 so the clusters can separate.
pub fn initialize_identity(data: &[TimeSeries], config: &FitConfig) -> Result<FittedMixture> {
    config.validate()?;
    let dy = check_data(data)?;
    let dx = config.latent_dim;
    let m = config.clusters;

    let n = data.len() as f64;
    let mut first_mean = DVector::zeros(dy);
    for s in data {
        first_mean += &s.observations[0];
    }
    first_mean /= n;

    let total: usize = data.iter().map(TimeSeries::len).sum();
    let mut all_mean = DVector::zeros(dy);
    for s in data {
        for y in &s.observations {
            all_mean += y;
        }
    }
    all_mean /= total as f64;
    let mut var = DVector::zeros(dy);
    for s in data {
        for y in &s.observations {
            let d = y - &all_mean;
            var += d.component_mul(&d);
        }
    }
    var /= total as f64;
    let var = var.map(|v: f64| if v.is_finite() && v > 1e-12 { v } else { 1e-12 });
    let mean_var = var.mean();

    let latent_var = DVector::from_fn(dx, |i, _| if i < dy { var[i] } else { mean_var });
    let diag = DMatrix::from_diagonal(&latent_var);
    let obs_diag = DMatrix::from_diagonal(&var);
    let mut mu = DVector::zeros(dx);
    for i in 0..dx.min(dy) {
        mu[i] = first_mean[i];
    }
    let emission = DMatrix::from_fn(dy, dx, |r, c| if r == c { 1.0 } else { 0.0 });

    let directions = split_directions(data, &var, dx, m, config.seed);
    let mut clusters = Vec::with_capacity(m);
    for dir in &directions {
        let mut init_mean = mu.clone();
        for i in 0..dx {
            init_mean[i] += config.init_perturbation * latent_var[i].sqrt() * dir[i];
        }
        clusters.push(ClusterParameters {
            init_mean,
            generator: DMatrix::zeros(dx, dx),
            emission: emission.clone(),
            init_cov: diag.clone(),
            obs_noise: obs_diag.clone(),
            process_noise: diag.clone(),
        });
    }
    let mut model = FittedMixture::from_parameters(clusters, vec![1.0 / m as f64; m]);
    model.responsibilities = vec![vec![1.0 / m as f64; m]; data.len()];
    model.labels = vec![0; data.len()];
    Ok(model)
}

/// Per-cluster offsets of the initial means, in standard-deviation units.
///
/// Offsets lie along the leading principal axes of the standardized
/// per-series mean observations; cluster `l` sits at an evenly spaced
/// position on each axis, with positions shuffled by the seed. Latent
/// coordinates beyond the observation dimension get seeded Gaussian offsets.
fn split_directions(
    data: &[TimeSeries],
    var: &DVector<f64>,
    dx: usize,
    m: usize,
    seed: u64,
) -> Vec<DVector<f64>> {
    let mut out = vec![DVector::zeros(dx); m];
    if m < 2 {
        return out;
    }
    let dy = var.len();
    let sd = var.map(f64::sqrt);
    let means: Vec<DVector<f64>> = data
        .iter()
        .map(|s| {
            let mut acc = DVector::zeros(dy);
            for y in &s.observations {
                acc += y;
            }
            (acc / s.len() as f64).component_div(&sd)
        })
        .collect();
    let mut centre = DVector::zeros(dy);
    for v in &means {
        centre += v;
    }
    centre /= means.len() as f64;
    let mut cov = DMatrix::zeros(dy, dy);
    for v in &means {
        let d = v - &centre;
        cov += &d * d.transpose();
    }
    let eig = linalg::symmetrized(cov).symmetric_eigen();
    let mut axes: Vec<usize> = (0..dy).collect();
    axes.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let scale = (dy as f64).sqrt();
    for &axis in axes.iter().take((m - 1).min(dy)) {
        let v = eig.eigenvectors.column(axis);
        let mut slots: Vec<usize> = (0..m).collect();
        slots.shuffle(&mut rng);
        for (l, &slot) in slots.iter().enumerate() {
            let pos = 2.0 * slot as f64 / (m - 1) as f64 - 1.0;
            for i in 0..dx.min(dy) {
                out[l][i] += scale * pos * v[i];
            }
        }
    }
    for (l, dir) in out.iter_mut().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(l as u64 + 1);
        for i in dy..dx {
            dir[i] = StandardNormal.sample(&mut rng);
        }
    }
    out
}

/// Output of one E-step.
#[derive(Debug, Clone)]
pub struct EStep {
    pub responsibilities: Vec<Vec<f64>>,
    /// `log Σ_l w_l p(Y_i | θ_l)` per series.
    pub series_loglik: Vec<f64>,
    /// Per-series, per-cluster marginal log-likelihoods.
    pub cluster_loglik: Vec<Vec<f64>>,
    pub loglik: f64,
    /// Responsibility-weighted moments per cluster; empty when not requested.
    pub stats: Vec<SufficientStats>,
    pub warnings: Vec<String>,
}

struct SeriesPass {
    loglik: f64,
    cluster_loglik: Vec<f64>,
    resp: Vec<f64>,
    stats: Vec<Option<SufficientStats>>,
    warning: Option<String>,
}

fn log_sum_exp(v: &[f64]) -> f64 {
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    max + v.iter().map(|x| (x - max).exp()).sum::<f64>().ln()
}

/// Normalizes log-weights into probabilities.
pub fn normalize_log(v: &[f64]) -> Option<Vec<f64>> {
    let lse = log_sum_exp(v);
    if !lse.is_finite() {
        return None;
    }
    Some(v.iter().map(|x| (x - lse).exp()).collect())
}

fn series_pass(
    series: &TimeSeries,
    clusters: &[ClusterParameters],
    log_weights: &[f64],
    collect: &[bool],
) -> Result<SeriesPass> {
    let m = clusters.len();
    let mut filters = Vec::with_capacity(m);
    let mut cluster_loglik = Vec::with_capacity(m);
    for params in clusters {
        let f = lgssm::kalman_filter(series, params)?;
        cluster_loglik.push(f.log_likelihood);
        filters.push(f);
    }
    let joint: Vec<f64> = cluster_loglik
        .iter()
        .zip(log_weights)
        .map(|(ll, lw)| ll + lw)
        .collect();
    let (resp, loglik, warning) = match normalize_log(&joint) {
        Some(r) => (r, log_sum_exp(&joint), None),
        None => (
            vec![1.0 / m as f64; m],
            f64::NEG_INFINITY,
            Some(format!(
                "series {}: likelihood underflow in every cluster; responsibilities set uniform",
                series.patient_id
            )),
        ),
    };
    let mut stats = Vec::with_capacity(m);
    for l in 0..m {
        if !collect[l] || resp[l] == 0.0 {
            stats.push(None);
            continue;
        }
        let sm = lgssm::rts_smoother(series, &clusters[l], &filters[l])?;
        stats.push(Some(SufficientStats::from_smoother(
            series,
            &sm,
            &filters[l].deltas,
            resp[l],
        )));
    }
    Ok(SeriesPass {
        loglik,
        cluster_loglik,
        resp,
        stats,
        warning,
    })
}

/// E-step. Sufficient statistics are accumulated only for clusters flagged
/// in `collect` (pass `None` for all clusters). Per-series work runs in
/// parallel; accumulation uses a fixed pairwise reduction order.
pub fn e_step(
    data: &[TimeSeries],
    clusters: &[ClusterParameters],
    weights: &[f64],
    collect: Option<&[bool]>,
) -> Result<EStep> {
    let dy = check_data(data)?;
    let m = clusters.len();
    if m == 0 || weights.len() != m {
        return Err(Error::DimensionMismatch {
            context: "mixture weights",
            expected: m,
            found: weights.len(),
        });
    }
    for c in clusters {
        if c.obs_dim() != dy {
            return Err(Error::DimensionMismatch {
                context: "cluster emission rows vs data",
                expected: dy,
                found: c.obs_dim(),
            });
        }
    }
    let dx = clusters[0].latent_dim();
    let log_weights: Vec<f64> = weights.iter().map(|w| w.ln()).collect();
    let all = vec![true; m];
    let collect = collect.unwrap_or(&all);
    let want_stats = collect.iter().any(|&c| c);

    let passes: Vec<SeriesPass> = par::map(data, |s| series_pass(s, clusters, &log_weights, collect))
        .into_iter()
        .collect::<Result<_>>()?;

    let loglik = par::tree_reduce(passes.iter().map(|p| p.loglik).collect(), |a, b| a + b)
        .unwrap_or(0.0);
    let mut stats = Vec::new();
    if want_stats {
        for l in 0..m {
            let per_series: Vec<SufficientStats> = passes
                .iter()
                .map(|p| {
                    p.stats[l]
                        .clone()
                        .unwrap_or_else(|| SufficientStats::zeros(dx, dy))
                })
                .collect();
            stats.push(
                par::tree_reduce(per_series, SufficientStats::merge)
                    .unwrap_or_else(|| SufficientStats::zeros(dx, dy)),
            );
        }
    }
    let mut warnings = Vec::new();
    let mut responsibilities = Vec::with_capacity(passes.len());
    let mut series_loglik = Vec::with_capacity(passes.len());
    let mut cluster_loglik = Vec::with_capacity(passes.len());
    for p in passes {
        if let Some(w) = p.warning {
            warnings.push(w);
        }
        responsibilities.push(p.resp);
        series_loglik.push(p.loglik);
        cluster_loglik.push(p.cluster_loglik);
    }
    Ok(EStep {
        responsibilities,
        series_loglik,
        cluster_loglik,
        loglik,
        stats,
        warnings,
    })
}

/// Closed-form maximizer of the expected complete-data log-likelihood for
/// one cluster. `previous` supplies values for blocks with no data (e.g.
/// the transition block when every series has a single observation).
pub fn m_step_cluster(stats: &SufficientStats, previous: &ClusterParameters) -> Result<ClusterParameters> {
    if !(stats.weight > 0.0) {
        return Ok(previous.clone());
    }
    let mut next = previous.clone();

    let mu = &stats.init_sum / stats.weight;
    let p = &stats.init_outer / stats.weight - outer(&mu, &mu);
    next.init_mean = mu;
    next.init_cov = linalg::symmetrized(p);

    if stats.transitions > 0.0 {
        let a = linalg::right_solve_spd(
            &stats.incr_lag,
            &stats.lag_outer_delta,
            REGRESSION_JITTER,
            0,
            "transition normal matrix",
        )?;
        let al = &a * stats.incr_lag.transpose();
        let gamma = &stats.incr_outer_over_delta - &al - al.transpose()
            + &a * &stats.lag_outer_delta * a.transpose();
        next.generator = a;
        next.process_noise = linalg::symmetrized(gamma / stats.transitions);
    }

    let c = linalg::right_solve_spd(
        &stats.obs_cross_delta,
        &stats.state_outer_delta,
        REGRESSION_JITTER,
        0,
        "emission normal matrix",
    )?;
    let cx = &c * stats.obs_cross_delta.transpose();
    let sigma = &stats.obs_outer_delta - &cx - cx.transpose()
        + &c * &stats.state_outer_delta * c.transpose();
    next.emission = c;
    next.obs_noise = linalg::symmetrized(sigma / stats.observations);

    for (m, name) in [
        (&next.generator, "generator"),
        (&next.emission, "emission"),
        (&next.init_cov, "initial covariance"),
        (&next.obs_noise, "observation noise"),
        (&next.process_noise, "process noise"),
    ] {
        if m.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite(name));
        }
    }
    Ok(next)
}

/// Result of an M-step over all clusters.
#[derive(Debug, Clone)]
pub struct MStep {
    pub clusters: Vec<ClusterParameters>,
    pub weights: Vec<f64>,
    pub frozen: Vec<bool>,
}

/// M-step: re-estimates every non-frozen cluster and the mixing weights
/// (mean responsibility, floored at `min_weight`, renormalized). Clusters
/// whose weight reaches the floor are frozen from then on.
pub fn m_step(
    stats: &[SufficientStats],
    previous: &[ClusterParameters],
    frozen: &[bool],
    n_series: usize,
    min_weight: f64,
) -> Result<MStep> {
    let m = previous.len();
    if stats.len() != m || frozen.len() != m {
        return Err(Error::DimensionMismatch {
            context: "sufficient statistics per cluster",
            expected: m,
            found: stats.len(),
        });
    }
    let mut weights: Vec<f64> = stats
        .iter()
        .map(|s| s.weight / n_series as f64)
        .collect();
    let mut frozen = frozen.to_vec();
    for l in 0..m {
        if weights[l] <= min_weight {
            weights[l] = min_weight;
            frozen[l] = true;
        }
    }
    let total: f64 = weights.iter().sum();
    for w in &mut weights {
        *w /= total;
    }
    let mut clusters = Vec::with_capacity(m);
    for l in 0..m {
        if frozen[l] {
            clusters.push(previous[l].clone());
        } else {
            clusters.push(m_step_cluster(&stats[l], &previous[l])?);
        }
    }
    Ok(MStep {
        clusters,
        weights,
        frozen,
    })
}

/// Index of the largest entry; ties go to the lowest index.
pub fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate().skip(1) {
        if v > row[best] {
            best = i;
        }
    }
    best
}

fn relative_change(prev: f64, next: f64) -> f64 {
    (next - prev).abs() / (1.0 + next.abs())
}

/// Fits a mixture from the identity initialization.
pub fn fit(data: &[TimeSeries], config: &FitConfig) -> Result<FittedMixture> {
    let init = initialize_identity(data, config)?;
    fit_from(data, init, config)
}

/// Runs EM from the given parameters and weights until the relative
/// log-likelihood change drops below `config.tol` or `config.max_iters`
/// M-steps have been taken. Non-convergence is reported, not an error.
pub fn fit_from(data: &[TimeSeries], init: FittedMixture, config: &FitConfig) -> Result<FittedMixture> {
    config.validate()?;
    check_data(data)?;
    let m = init.clusters.len();
    if m == 0 {
        return Err(Error::Empty("initial mixture has no clusters"));
    }
    let mut clusters = init.clusters;
    let mut weights = init.weights;
    let mut frozen = if init.frozen.len() == m {
        init.frozen
    } else {
        vec![false; m]
    };
    let mut warnings = Vec::new();
    let mut trace = Vec::with_capacity(config.max_iters + 1);

    let collect = |fz: &[bool]| -> Vec<bool> { fz.iter().map(|f| !f).collect() };
    let mut est = e_step(data, &clusters, &weights, Some(&collect(&frozen)))?;
    trace.push(est.loglik);
    let mut iterations = 0;
    let mut converged = false;
    while iterations < config.max_iters {
        let step = m_step(&est.stats, &clusters, &frozen, data.len(), config.min_weight)?;
        for l in 0..m {
            if step.frozen[l] && !frozen[l] {
                warnings.push(format!(
                    "cluster {l} reached the minimum weight at iteration {} and was frozen",
                    iterations + 1
                ));
            }
        }
        clusters = step.clusters;
        weights = step.weights;
        frozen = step.frozen;
        iterations += 1;
        let prev = est.loglik;
        est = e_step(data, &clusters, &weights, Some(&collect(&frozen)))?;
        trace.push(est.loglik);
        if relative_change(prev, est.loglik) < config.tol {
            converged = true;
            break;
        }
    }
    warnings.extend(est.warnings.iter().cloned());
    let labels = est.responsibilities.iter().map(|r| argmax(r)).collect();
    Ok(FittedMixture {
        clusters,
        weights,
        responsibilities: est.responsibilities,
        labels,
        loglik_trace: trace,
        iterations,
        converged,
        frozen,
        warnings,
    })
}

#[derive(Debug, Clone)]
pub struct Assignment {
    pub labels: Vec<usize>,
    pub responsibilities: Vec<Vec<f64>>,
    pub warnings: Vec<String>,
}

/// Hard and soft cluster assignment under fixed parameters.
pub fn assign(data: &[TimeSeries], model: &FittedMixture) -> Result<Assignment> {
    let m = model.clusters.len();
    let est = e_step(data, &model.clusters, &model.weights, Some(&vec![false; m]))?;
    Ok(Assignment {
        labels: est.responsibilities.iter().map(|r| argmax(r)).collect(),
        responsibilities: est.responsibilities,
        warnings: est.warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy_data() -> Vec<TimeSeries> {
        (0..6)
            .map(|i| {
                let ts = vec![0.0, 1.0 + 0.1 * i as f64, 2.5, 4.0];
                let obs = ts
                    .iter()
                    .enumerate()
                    .map(|(k, _)| {
                        DVector::from_row_slice(&[
                            0.1 * i as f64 + 0.05 * k as f64,
                            0.3 - 0.02 * (i * k) as f64,
                        ])
                    })
                    .collect();
                TimeSeries::new(format!("s{i}"), ts, obs)
            })
            .collect()
    }

    #[test]
    fn identity_init_square_case() {
        let data = toy_data();
        let cfg = FitConfig {
            latent_dim: 2,
            ..Default::default()
        };
        let model = initialize_identity(&data, &cfg).unwrap();
        for c in &model.clusters {
            assert_eq!(c.emission, DMatrix::identity(2, 2));
            assert_eq!(c.generator, DMatrix::zeros(2, 2));
        }
        assert_ne!(model.clusters[0].init_mean, model.clusters[1].init_mean);
        assert_eq!(model.weights, vec![0.5, 0.5]);
    }

    #[test]
    fn identity_init_single_cluster_is_unperturbed() {
        let data = toy_data();
        let cfg = FitConfig {
            clusters: 1,
            latent_dim: 3,
            ..Default::default()
        };
        let model = initialize_identity(&data, &cfg).unwrap();
        let c = &model.clusters[0];
        let mean0: f64 = data.iter().map(|s| s.observations[0][0]).sum::<f64>() / 6.0;
        assert_eq!(c.init_mean[0], mean0);
        assert_eq!(c.init_mean[2], 0.0);
        assert_eq!(c.emission.shape(), (2, 3));
        assert_eq!(c.emission[(1, 1)], 1.0);
        assert_eq!(c.emission[(1, 2)], 0.0);
    }

    #[test]
    fn identity_init_is_deterministic() {
        let data = toy_data();
        let cfg = FitConfig {
            latent_dim: 2,
            seed: 11,
            ..Default::default()
        };
        let a = initialize_identity(&data, &cfg).unwrap();
        let b = initialize_identity(&data, &cfg).unwrap();
        assert_eq!(a.clusters, b.clusters);
        assert!(initialize_identity(&[], &cfg).is_err());
    }

    #[test]
    fn identical_clusters_split_evenly() {
        let data = toy_data();
        let cfg = FitConfig {
            clusters: 1,
            latent_dim: 2,
            ..Default::default()
        };
        let one = initialize_identity(&data, &cfg).unwrap().clusters.remove(0);
        let est = e_step(&data, &[one.clone(), one], &[0.5, 0.5], None).unwrap();
        for r in &est.responsibilities {
            assert!((r[0] - 0.5).abs() < 1e-15 && (r[1] - 0.5).abs() < 1e-15);
        }
    }

    #[test]
    fn single_cluster_responsibilities_are_one() {
        let data = toy_data();
        let cfg = FitConfig {
            clusters: 1,
            latent_dim: 2,
            ..Default::default()
        };
        let model = fit(&data, &cfg).unwrap();
        assert!(model.responsibilities.iter().all(|r| r == &vec![1.0]));
        assert!(model.labels.iter().all(|&l| l == 0));
        let a = assign(&data, &model).unwrap();
        assert!(a.labels.iter().all(|&l| l == 0));
    }

    #[test]
    fn argmax_breaks_ties_low() {
        assert_eq!(argmax(&[0.5, 0.5]), 0);
        assert_eq!(argmax(&[0.2, 0.4, 0.4]), 1);
    }

    #[test]
    fn config_validation() {
        assert!(FitConfig { clusters: 0, ..Default::default() }.validate().is_err());
        assert!(FitConfig { latent_dim: 0, ..Default::default() }.validate().is_err());
        assert!(FitConfig { tol: 0.0, ..Default::default() }.validate().is_err());
        assert!(FitConfig::default().validate().is_ok());
    }

    #[test]
    fn stats_merge_is_additive() {
        let data = toy_data();
        let cfg = FitConfig {
            clusters: 1,
            latent_dim: 2,
            ..Default::default()
        };
        let model = initialize_identity(&data, &cfg).unwrap();
        let p = &model.clusters[0];
        let (f, s) = lgssm::smooth(&data[0], p).unwrap();
        let one = SufficientStats::from_smoother(&data[0], &s, &f.deltas, 1.0);
        let half = SufficientStats::from_smoother(&data[0], &s, &f.deltas, 0.5);
        let merged = half.clone().merge(half);
        assert!((merged.incr_lag - &one.incr_lag).amax() < 1e-15);
        assert_eq!(merged.weight, 1.0);
        assert_eq!(one.transitions, 3.0);
    }
}
