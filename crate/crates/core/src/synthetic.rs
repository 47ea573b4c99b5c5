//! Ground-truth data generation from mixtures of Δ-scaled state-space
//! models, with irregular timestamps. Every series draws from its own random
//! stream derived from `(seed, series index)`, so cohorts are identical
//! regardless of how generation is scheduled.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, StandardNormal};

use crate::error::{Error, Result};
use crate::lgssm::step_transition;
use crate::outcomes::Covariates;
use crate::par;
use crate::types::{
    AssessmentRecord, ClusterParameters, Emotion, TimeSeries, EMOTION_DIM, GAD7_ITEMS, PHQ9_ITEMS,
};

/// Length of the observation window in days (twelve weeks).
pub const DEFAULT_HORIZON_DAYS: f64 = 84.0;

/// Mean gap between talk turns in days for the default timestamp model.
pub const DEFAULT_MEAN_GAP_DAYS: f64 = 2.3;

#[derive(Debug, Clone, PartialEq)]
pub enum InterArrival {
    Fixed(f64),
    Exponential { mean: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct TimestampModel {
    pub count_min: usize,
    pub count_max: usize,
    pub inter_arrival: InterArrival,
    pub horizon: f64,
}

impl Default for TimestampModel {
    fn default() -> Self {
        TimestampModel {
            count_min: 20,
            count_max: 48,
            inter_arrival: InterArrival::Exponential {
                mean: DEFAULT_MEAN_GAP_DAYS,
            },
            horizon: DEFAULT_HORIZON_DAYS,
        }
    }
}

impl TimestampModel {
    pub fn validate(&self) -> Result<()> {
        if self.count_min < 1 || self.count_max < self.count_min {
            return Err(Error::InvalidConfig(format!(
                "invalid observation count range [{}, {}]",
                self.count_min, self.count_max
            )));
        }
        if !(self.horizon > 0.0) {
            return Err(Error::InvalidConfig("horizon must be positive".into()));
        }
        let ok = match self.inter_arrival {
            InterArrival::Fixed(d) => d > 0.0,
            InterArrival::Exponential { mean } => mean > 0.0,
        };
        if !ok {
            return Err(Error::InvalidConfig("inter-arrival scale must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CohortSpec {
    pub clusters: Vec<ClusterParameters>,
    pub proportions: Vec<f64>,
    pub n_series: usize,
    pub timestamps: TimestampModel,
    pub seed: u64,
    /// Clamp observations to `[0, 1]` per channel.
    pub clip: bool,
}

impl CohortSpec {
    pub fn validate(&self) -> Result<()> {
        if self.clusters.is_empty() || self.clusters.len() != self.proportions.len() {
            return Err(Error::InvalidConfig(
                "need one proportion per cluster and at least one cluster".into(),
            ));
        }
        if self.proportions.iter().any(|&p| !(p >= 0.0)) {
            return Err(Error::InvalidConfig("proportions must be non-negative".into()));
        }
        let total: f64 = self.proportions.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidConfig(format!(
                "proportions sum to {total}, expected 1"
            )));
        }
        for c in &self.clusters {
            c.check()?;
        }
        self.timestamps.validate()
    }
}

/// Random stream for series `index` under `seed`.
pub fn series_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Draws an observation count uniformly from the configured range, then
/// accumulates inter-arrival gaps from 0, stopping early at the horizon.
pub fn sample_timestamps<R: Rng + ?Sized>(model: &TimestampModel, rng: &mut R) -> Vec<f64> {
    let count = rng.random_range(model.count_min..=model.count_max);
    let mut out = Vec::with_capacity(count);
    let mut t = 0.0;
    out.push(t);
    while out.len() < count {
        let gap = match model.inter_arrival {
            InterArrival::Fixed(d) => d,
            InterArrival::Exponential { mean } => {
                let exp = Exp::new(1.0 / mean).expect("positive rate");
                loop {
                    let g: f64 = exp.sample(rng);
                    if g > 0.0 {
                        break g;
                    }
                }
            }
        };
        t += gap;
        if t >= model.horizon {
            break;
        }
        out.push(t);
    }
    out
}

/// Symmetric square root of a PSD matrix (negative eigenvalues within
/// roundoff are clamped to zero).
fn psd_sqrt(m: &DMatrix<f64>, what: &str) -> Result<DMatrix<f64>> {
    let eig = SymmetricEigen::new(crate::linalg::symmetrized(m.clone()));
    let scale = eig.eigenvalues.amax().max(1e-300);
    let mut vals = eig.eigenvalues.clone();
    for v in vals.iter_mut() {
        if *v < -1e-10 * scale.max(1.0) {
            return Err(Error::Singular {
                step: 0,
                what: format!("{what} is not positive semidefinite"),
            });
        }
        *v = v.max(0.0).sqrt();
    }
    if vals.iter().all(|&v| v == 0.0) {
        return Ok(DMatrix::zeros(m.nrows(), m.ncols()));
    }
    Ok(&eig.eigenvectors * DMatrix::from_diagonal(&vals) * eig.eigenvectors.transpose())
}

fn gauss<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    StandardNormal.sample(rng)
}

fn standard_normal<R: Rng + ?Sized>(d: usize, rng: &mut R) -> DVector<f64> {
    DVector::from_fn(d, |_, _| StandardNormal.sample(rng))
}

#[derive(Debug, Clone)]
pub struct SampledSeries {
    pub series: TimeSeries,
    /// Number of observation entries that were clamped.
    pub clipped: usize,
}

/// Ancestral sampling of one series at the given timestamps.
pub fn sample_series<R: Rng + ?Sized>(
    patient_id: &str,
    params: &ClusterParameters,
    timestamps: &[f64],
    rng: &mut R,
    clip: bool,
) -> Result<SampledSeries> {
    if timestamps.is_empty() {
        return Err(Error::Empty("timestamps"));
    }
    for k in 1..timestamps.len() {
        if timestamps[k] <= timestamps[k - 1] {
            return Err(Error::NonIncreasingTimestamps { index: k });
        }
    }
    let dx = params.latent_dim();
    let dy = params.obs_dim();
    let p_sqrt = psd_sqrt(&params.init_cov, "initial covariance")?;
    let g_sqrt = psd_sqrt(&params.process_noise, "process noise")?;
    let s_sqrt = psd_sqrt(&params.obs_noise, "observation noise")?;

    let mut x = &params.init_mean + &p_sqrt * standard_normal(dx, rng);
    let mut obs = Vec::with_capacity(timestamps.len());
    let mut clipped = 0;
    for k in 0..timestamps.len() {
        let delta = if k == 0 {
            crate::lgssm::DEFAULT_FIRST_DELTA
        } else {
            timestamps[k] - timestamps[k - 1]
        };
        if k > 0 {
            let w = &g_sqrt * standard_normal(dx, rng) * delta.sqrt();
            x = step_transition(&params.generator, delta) * &x + w;
        }
        let v = &s_sqrt * standard_normal(dy, rng) / delta.sqrt();
        let mut y = &params.emission * &x + v;
        if clip {
            for val in y.iter_mut() {
                if *val < 0.0 || *val > 1.0 {
                    *val = val.clamp(0.0, 1.0);
                    clipped += 1;
                }
            }
        }
        obs.push(y);
    }
    Ok(SampledSeries {
        series: TimeSeries::new(patient_id, timestamps.to_vec(), obs),
        clipped,
    })
}

#[derive(Debug, Clone)]
pub struct Cohort {
    pub series: Vec<TimeSeries>,
    /// Generating cluster of each series.
    pub labels: Vec<usize>,
    /// Fraction of observation entries clamped to `[0, 1]`.
    pub clipped_fraction: f64,
}

pub fn patient_id(index: usize) -> String {
    format!("p{index:05}")
}

fn draw_category<R: Rng + ?Sized>(proportions: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (l, &p) in proportions.iter().enumerate() {
        acc += p;
        if u < acc {
            return l;
        }
    }
    // u landed in the rounding gap above the cumulative sum
    proportions.iter().rposition(|&p| p > 0.0).unwrap_or(0)
}

/// Samples a labelled cohort: cluster by proportions, then timestamps, then
/// observations, each series on its own random stream.
pub fn sample_cohort(spec: &CohortSpec) -> Result<Cohort> {
    spec.validate()?;
    let results: Vec<(usize, SampledSeries)> = par::map_range(spec.n_series, |i| {
        let mut rng = series_rng(spec.seed, i as u64);
        let label = draw_category(&spec.proportions, &mut rng);
        let ts = sample_timestamps(&spec.timestamps, &mut rng);
        sample_series(&patient_id(i), &spec.clusters[label], &ts, &mut rng, spec.clip)
            .map(|s| (label, s))
    })
    .into_iter()
    .collect::<Result<_>>()?;

    let mut series = Vec::with_capacity(results.len());
    let mut labels = Vec::with_capacity(results.len());
    let mut clipped = 0usize;
    let mut entries = 0usize;
    for (label, s) in results {
        clipped += s.clipped;
        entries += s.series.len() * s.series.obs_dim();
        labels.push(label);
        series.push(s.series);
    }
    Ok(Cohort {
        series,
        labels,
        clipped_fraction: if entries == 0 {
            0.0
        } else {
            clipped as f64 / entries as f64
        },
    })
}

fn identity_scaled(d: usize, v: f64) -> DMatrix<f64> {
    DMatrix::identity(d, d) * v
}

/// Cluster whose `sadness` channel feeds every other channel with weight
/// `coupling` per day, on top of a uniform per-day decay `decay`.
pub fn sadness_driven_cluster(mean: [f64; EMOTION_DIM], decay: f64, coupling: f64) -> ClusterParameters {
    let s = Emotion::Sadness.index();
    let mut a = identity_scaled(EMOTION_DIM, -decay);
    for r in 0..EMOTION_DIM {
        if r != s {
            a[(r, s)] = coupling;
        }
    }
    ClusterParameters {
        init_mean: DVector::from_row_slice(&mean),
        generator: a,
        emission: DMatrix::identity(EMOTION_DIM, EMOTION_DIM),
        init_cov: identity_scaled(EMOTION_DIM, 2.5e-4),
        obs_noise: identity_scaled(EMOTION_DIM, 4e-4),
        process_noise: identity_scaled(EMOTION_DIM, 5e-6),
    }
}

fn random_spd<R: Rng + ?Sized>(d: usize, scale: f64, rng: &mut R) -> DMatrix<f64> {
    let b = DMatrix::from_fn(d, d, |_, _| gauss(rng));
    crate::linalg::symmetrized((&b * b.transpose() / d as f64 + DMatrix::identity(d, d) * 0.2) * scale)
}

/// Random well-conditioned model of the given dimensions: small generator,
/// dense emission, covariances with eigenvalues bounded away from zero.
pub fn random_parameters<R: Rng + ?Sized>(dx: usize, dy: usize, rng: &mut R) -> ClusterParameters {
    ClusterParameters {
        init_mean: standard_normal(dx, rng),
        generator: DMatrix::from_fn(dx, dx, |_, _| 0.2 * gauss(rng)),
        emission: DMatrix::from_fn(dy, dx, |_, _| gauss(rng)),
        init_cov: random_spd(dx, 1.0, rng),
        obs_noise: random_spd(dy, 0.5, rng),
        process_noise: random_spd(dx, 0.3, rng),
    }
}

/// `len` strictly increasing times from 0 with gaps uniform on `[0.1, 2]`.
pub fn random_timestamps<R: Rng + ?Sized>(len: usize, rng: &mut R) -> Vec<f64> {
    let mut t = 0.0;
    (0..len)
        .map(|k| {
            if k > 0 {
                t += rng.random_range(0.1..2.0);
            }
            t
        })
        .collect()
}

/// Two 7-channel clusters whose means differ by well over five pooled
/// standard deviations in anger, joy and sadness, and whose generators
/// disagree in sign on the sadness→joy coupling. Unclipped.
pub fn well_separated(n_series: usize, seed: u64) -> CohortSpec {
    let joy = Emotion::Joy.index();
    let sad = Emotion::Sadness.index();
    let mut c0 = sadness_driven_cluster([0.25, 0.20, 0.35, 0.60, 0.55, 0.30, 0.20], 0.002, 0.0);
    c0.generator[(joy, sad)] = -0.004;
    let c1 = sadness_driven_cluster([0.45, 0.20, 0.35, 0.35, 0.55, 0.50, 0.20], 0.002, 0.004);
    CohortSpec {
        clusters: vec![c0, c1],
        proportions: vec![0.5, 0.5],
        n_series,
        timestamps: TimestampModel::default(),
        seed,
        clip: false,
    }
}

/// A cohort shaped like the teletherapy data: seven emotion channels, two
/// clusters in a 68/32 split, around 34 observations per series spread
/// irregularly over twelve weeks, scores clamped to `[0, 1]`. The second
/// cluster has stronger outgoing influence from sadness and fear.
pub fn paper_shaped(n_series: usize, seed: u64) -> CohortSpec {
    let fear = Emotion::Fear.index();
    let joy = Emotion::Joy.index();
    let surprise = Emotion::Surprise.index();
    let sad = Emotion::Sadness.index();

    let mut a0 = identity_scaled(EMOTION_DIM, -0.003);
    a0[(joy, joy)] = 0.001;
    a0[(surprise, surprise)] = 0.0005;
    let mut a1 = identity_scaled(EMOTION_DIM, -0.006);
    for r in 0..EMOTION_DIM {
        if r != sad {
            a1[(r, sad)] = 0.004;
        }
        if r != fear {
            a1[(r, fear)] = 0.002;
        }
    }
    let obs = identity_scaled(EMOTION_DIM, 6.4e-3);
    let proc = identity_scaled(EMOTION_DIM, 1e-5);
    let init = identity_scaled(EMOTION_DIM, 1e-3);
    let c0 = ClusterParameters {
        init_mean: DVector::from_row_slice(&[0.060, 0.031, 0.186, 0.151, 0.317, 0.177, 0.079]),
        generator: a0,
        emission: DMatrix::identity(EMOTION_DIM, EMOTION_DIM),
        init_cov: init.clone(),
        obs_noise: obs.clone(),
        process_noise: proc.clone(),
    };
    let c1 = ClusterParameters {
        init_mean: DVector::from_row_slice(&[0.103, 0.075, 0.176, 0.122, 0.276, 0.172, 0.076]),
        generator: a1,
        emission: DMatrix::identity(EMOTION_DIM, EMOTION_DIM),
        init_cov: init,
        obs_noise: obs,
        process_noise: proc,
    };
    CohortSpec {
        clusters: vec![c0, c1],
        proportions: vec![0.68, 0.32],
        n_series,
        timestamps: TimestampModel::default(),
        seed,
        clip: true,
    }
}

/// Named cohort presets.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    PaperShaped,
    WellSeparated,
}

impl Preset {
    pub fn spec(self, n_series: usize, seed: u64) -> CohortSpec {
        match self {
            Preset::PaperShaped => paper_shaped(n_series, seed),
            Preset::WellSeparated => well_separated(n_series, seed),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Preset::PaperShaped => "paper-shaped",
            Preset::WellSeparated => "well-separated",
        }
    }
}

impl std::str::FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "paper-shaped" => Ok(Preset::PaperShaped),
            "well-separated" => Ok(Preset::WellSeparated),
            other => Err(Error::InvalidConfig(format!("unknown preset '{other}'"))),
        }
    }
}

/// Symptom trajectories for synthetic patients, so outcome statistics can be
/// exercised end to end.
#[derive(Debug, Clone, PartialEq)]
pub struct AssessmentModel {
    /// Mean fractional symptom reduction over twelve weeks, per cluster.
    pub improvement: Vec<f64>,
    pub improvement_sd: f64,
    /// Per-patient severity offset (item scale).
    pub severity_sd: f64,
    pub item_noise_sd: f64,
    /// Probability of dropping out after each of weeks 3, 6 and 9.
    pub dropout: f64,
    /// Probability that the week-6 assessment is skipped.
    pub skip_week6: f64,
    /// Maximum deviation of the recorded week from the schedule.
    pub week_jitter: f64,
}

impl Default for AssessmentModel {
    fn default() -> Self {
        AssessmentModel {
            improvement: vec![0.38, 0.26],
            improvement_sd: 0.35,
            severity_sd: 0.45,
            item_noise_sd: 0.55,
            dropout: 0.1,
            skip_week6: 0.04,
            week_jitter: 0.4,
        }
    }
}

/// Baseline item means (PHQ-9 items 1–9, GAD-7 items 1–7) in the moderate
/// to severe range.
const BASELINE_ITEM_MEANS: [f64; PHQ9_ITEMS + GAD7_ITEMS] = [
    1.65, 1.82, 1.94, 2.02, 1.64, 1.93, 1.56, 0.72, 0.28, 2.32, 2.15, 2.24, 2.11, 1.35, 1.79, 1.65,
];

/// Generates assessments at weeks 0, 3, 6, 9, 12 (with dropout and jitter)
/// for patients with the given cluster labels. The seed is mixed with a
/// constant so these draws never share a stream with series generation.
pub fn sample_assessments(
    patient_ids: &[String],
    labels: &[usize],
    model: &AssessmentModel,
    seed: u64,
) -> Vec<AssessmentRecord> {
    let mut out = Vec::new();
    for (i, (pid, &label)) in patient_ids.iter().zip(labels).enumerate() {
        let mut rng = series_rng(seed ^ 0x5eed_a55e_55ed, i as u64);
        let severity = model.severity_sd * gauss(&mut rng) + 0.1;
        let base_improvement = model.improvement[label.min(model.improvement.len() - 1)];
        let improvement =
            base_improvement + model.improvement_sd * gauss(&mut rng);
        let skip6 = rng.random::<f64>() < model.skip_week6;
        for &week in &crate::types::SCHEDULED_WEEKS {
            if week == 6 && skip6 {
                continue;
            }
            let frac = week as f64 / 12.0;
            let mut items = [0u8; PHQ9_ITEMS + GAD7_ITEMS];
            for (j, item) in items.iter_mut().enumerate() {
                let mean = BASELINE_ITEM_MEANS[j] * (1.0 - improvement * frac) + severity;
                let noisy = mean + model.item_noise_sd * gauss(&mut rng);
                *item = noisy.round().clamp(0.0, 3.0) as u8;
            }
            let jitter = if week == 0 {
                0.0
            } else {
                rng.random_range(-model.week_jitter..=model.week_jitter)
            };
            let mut phq9_items = [0u8; PHQ9_ITEMS];
            phq9_items.copy_from_slice(&items[..PHQ9_ITEMS]);
            let mut gad7_items = [0u8; GAD7_ITEMS];
            gad7_items.copy_from_slice(&items[PHQ9_ITEMS..]);
            out.push(AssessmentRecord {
                patient_id: pid.clone(),
                week,
                recorded_week: week as f64 + jitter,
                phq9_items,
                gad7_items,
            });
            if (3..12).contains(&week) && rng.random::<f64>() < model.dropout {
                break;
            }
        }
    }
    out
}

fn pick<'a, R: Rng + ?Sized>(levels: &[(&'a str, f64)], missing: f64, rng: &mut R) -> Option<String> {
    if rng.random::<f64>() < missing {
        return None;
    }
    let probs: Vec<f64> = levels.iter().map(|l| l.1).collect();
    let total: f64 = probs.iter().sum();
    let normalized: Vec<f64> = probs.iter().map(|p| p / total).collect();
    Some(levels[draw_category(&normalized, rng)].0.to_string())
}

/// Demographic covariates drawn independently of cluster membership, with
/// some values missing.
pub fn sample_covariates(patient_ids: &[String], seed: u64) -> Vec<(String, Covariates)> {
    const GENDER: [(&str, f64); 3] = [("Female", 0.78), ("Male", 0.20), ("Non-binary/other", 0.02)];
    const AGE: [(&str, f64); 4] = [("26-35", 0.51), ("18-25", 0.29), ("36-49", 0.17), ("50+", 0.03)];
    const EDUCATION: [(&str, f64); 8] = [
        ("Bachelor Degree or Higher", 0.61),
        ("High School", 0.15),
        ("Masters Degree", 0.08),
        ("Some College", 0.085),
        ("Associates Degree", 0.03),
        ("Doctoral Degree", 0.018),
        ("Professional Degree", 0.013),
        ("Less than high school", 0.011),
    ];
    patient_ids
        .iter()
        .enumerate()
        .map(|(i, pid)| {
            let mut rng = series_rng(seed ^ 0xc0_7a_12_1a_7e, i as u64);
            let cov = Covariates {
                age_group: pick(&AGE, 0.05, &mut rng),
                gender: pick(&GENDER, 0.15, &mut rng),
                education: pick(&EDUCATION, 0.25, &mut rng),
            };
            (pid.clone(), cov)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lgssm::noiseless_trajectory;
    use crate::types::validate_series;

    #[test]
    fn fixed_weekly_grid() {
        let model = TimestampModel {
            count_min: 12,
            count_max: 12,
            inter_arrival: InterArrival::Fixed(7.0),
            horizon: 84.0,
        };
        let ts = sample_timestamps(&model, &mut series_rng(1, 0));
        let expected: Vec<f64> = (0..12).map(|k| 7.0 * k as f64).collect();
        assert_eq!(ts, expected);
    }

    #[test]
    fn horizon_truncates() {
        let model = TimestampModel {
            count_min: 30,
            count_max: 30,
            inter_arrival: InterArrival::Fixed(7.0),
            horizon: 84.0,
        };
        let ts = sample_timestamps(&model, &mut series_rng(1, 0));
        assert_eq!(ts.len(), 12);
        assert!(*ts.last().unwrap() < 84.0);
    }

    #[test]
    fn timestamps_are_seeded() {
        let m = TimestampModel::default();
        let a = sample_timestamps(&m, &mut series_rng(9, 3));
        let b = sample_timestamps(&m, &mut series_rng(9, 3));
        assert_eq!(a, b);
        assert!(a.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn zero_noise_reproduces_rollout() {
        let mut c = well_separated(1, 0).clusters.remove(1);
        c.init_cov = DMatrix::zeros(7, 7);
        c.obs_noise = DMatrix::zeros(7, 7);
        c.process_noise = DMatrix::zeros(7, 7);
        let ts = vec![0.0, 0.4, 3.0, 3.5, 10.0];
        let s = sample_series("x", &c, &ts, &mut series_rng(5, 0), false).unwrap();
        let roll = noiseless_trajectory(&c, &ts).unwrap();
        assert_eq!(s.series.observations, roll);
    }

    #[test]
    fn series_are_seeded() {
        let c = &well_separated(1, 0).clusters[0];
        let ts = vec![0.0, 1.0, 2.0];
        let a = sample_series("x", c, &ts, &mut series_rng(5, 0), false).unwrap();
        let b = sample_series("x", c, &ts, &mut series_rng(5, 0), false).unwrap();
        assert_eq!(a.series, b.series);
    }

    #[test]
    fn non_psd_covariance_is_rejected() {
        let mut c = well_separated(1, 0).clusters.remove(0);
        c.process_noise[(0, 0)] = -1.0;
        let r = sample_series("x", &c, &[0.0, 1.0], &mut series_rng(0, 0), false);
        assert!(matches!(r, Err(Error::Singular { .. })));
    }

    #[test]
    fn degenerate_proportions() {
        let mut spec = well_separated(50, 3);
        spec.proportions = vec![1.0, 0.0];
        let cohort = sample_cohort(&spec).unwrap();
        assert!(cohort.labels.iter().all(|&l| l == 0));
    }

    #[test]
    fn paper_shaped_series_validate() {
        let cohort = sample_cohort(&paper_shaped(60, 2)).unwrap();
        for s in &cohort.series {
            assert!(validate_series(s).is_ok(), "{}", s.patient_id);
        }
        assert!(cohort.clipped_fraction > 0.0);
    }

    #[test]
    fn assessments_are_well_formed() {
        let ids: Vec<String> = (0..40).map(patient_id).collect();
        let labels: Vec<usize> = (0..40).map(|i| i % 2).collect();
        let recs = sample_assessments(&ids, &labels, &AssessmentModel::default(), 1);
        assert!(recs.iter().all(|r| r.phq9_total() <= 27 && r.gad7_total() <= 21));
        assert!(ids
            .iter()
            .all(|id| recs.iter().any(|r| &r.patient_id == id && r.week == 0)));
        let again = sample_assessments(&ids, &labels, &AssessmentModel::default(), 1);
        assert_eq!(recs, again);
    }
}
