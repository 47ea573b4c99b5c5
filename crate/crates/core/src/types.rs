//! Domain types shared across the crate: the emotion vocabulary, irregular
//! time series, per-cluster model parameters and questionnaire records.

use std::fmt;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;

/// Number of emotion channels produced by the upstream scorer.
pub const EMOTION_DIM: usize = 7;

/// Emotion channels in their canonical (serialization and matrix) order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Emotion {
    Anger,
    Disgust,
    Fear,
    Joy,
    Neutral,
    Sadness,
    Surprise,
}

impl Emotion {
    pub const ALL: [Emotion; EMOTION_DIM] = [
        Emotion::Anger,
        Emotion::Disgust,
        Emotion::Fear,
        Emotion::Joy,
        Emotion::Neutral,
        Emotion::Sadness,
        Emotion::Surprise,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            Emotion::Anger => "anger",
            Emotion::Disgust => "disgust",
            Emotion::Fear => "fear",
            Emotion::Joy => "joy",
            Emotion::Neutral => "neutral",
            Emotion::Sadness => "sadness",
            Emotion::Surprise => "surprise",
        }
    }

    pub fn from_index(i: usize) -> Option<Emotion> {
        Self::ALL.get(i).copied()
    }
}

impl fmt::Display for Emotion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Canonical emotion names, in order.
pub fn emotion_order() -> Vec<&'static str> {
    Emotion::ALL.iter().map(|e| e.name()).collect()
}

/// Seven emotion scores, each in `[0, 1]`, indexed by [`Emotion`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EmotionVector([f64; EMOTION_DIM]);

impl EmotionVector {
    pub fn new(values: [f64; EMOTION_DIM]) -> Result<Self> {
        for &v in &values {
            if !v.is_finite() || !(0.0..=1.0).contains(&v) {
                return Err(Error::InvalidConfig(format!(
                    "emotion score {v} outside [0, 1]"
                )));
            }
        }
        Ok(EmotionVector(values))
    }

    pub fn get(&self, e: Emotion) -> f64 {
        self.0[e.index()]
    }

    pub fn as_array(&self) -> &[f64; EMOTION_DIM] {
        &self.0
    }

    pub fn to_dvector(&self) -> DVector<f64> {
        DVector::from_row_slice(&self.0)
    }
}

impl TryFrom<&[f64]> for EmotionVector {
    type Error = Error;

    fn try_from(values: &[f64]) -> Result<Self> {
        let arr: [f64; EMOTION_DIM] = values.try_into().map_err(|_| Error::DimensionMismatch {
            context: "emotion vector",
            expected: EMOTION_DIM,
            found: values.len(),
        })?;
        EmotionVector::new(arr)
    }
}

/// One patient's irregularly timestamped observation sequence.
///
/// Timestamps are in days from treatment start. The observation dimension is
/// not fixed here so the inference code can be exercised on small models;
/// emotion series are 7-dimensional and checked by [`validate_series`].
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries {
    pub patient_id: String,
    pub timestamps: Vec<f64>,
    pub observations: Vec<DVector<f64>>,
}

impl TimeSeries {
    pub fn new(
        patient_id: impl Into<String>,
        timestamps: Vec<f64>,
        observations: Vec<DVector<f64>>,
    ) -> Self {
        TimeSeries {
            patient_id: patient_id.into(),
            timestamps,
            observations,
        }
    }

    pub fn from_emotions(
        patient_id: impl Into<String>,
        timestamps: Vec<f64>,
        emotions: &[EmotionVector],
    ) -> Self {
        let observations = emotions.iter().map(EmotionVector::to_dvector).collect();
        TimeSeries::new(patient_id, timestamps, observations)
    }

    pub fn len(&self) -> usize {
        self.timestamps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.timestamps.is_empty()
    }

    pub fn obs_dim(&self) -> usize {
        self.observations.first().map_or(0, |y| y.len())
    }

    /// Structural checks needed by the inference code: matching lengths,
    /// uniform dimension, finite values and strictly increasing timestamps.
    pub fn check_structure(&self) -> Result<()> {
        if self.is_empty() {
            return Err(Error::Empty("time series has no observations"));
        }
        if self.observations.len() != self.timestamps.len() {
            return Err(Error::DimensionMismatch {
                context: "observations vs timestamps",
                expected: self.timestamps.len(),
                found: self.observations.len(),
            });
        }
        let d = self.obs_dim();
        for y in &self.observations {
            if y.len() != d {
                return Err(Error::DimensionMismatch {
                    context: "observation dimension",
                    expected: d,
                    found: y.len(),
                });
            }
            if y.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite("observation"));
            }
        }
        if self.timestamps.iter().any(|t| !t.is_finite()) {
            return Err(Error::NonFinite("timestamp"));
        }
        for k in 1..self.timestamps.len() {
            if self.timestamps[k] <= self.timestamps[k - 1] {
                return Err(Error::NonIncreasingTimestamps { index: k });
            }
        }
        Ok(())
    }
}

/// A single invariant violation found by [`validate_series`].
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    Empty,
    LengthMismatch { timestamps: usize, observations: usize },
    Dimension { step: usize, found: usize },
    NonFinite { step: usize },
    OutOfRange { step: usize, channel: usize, value: f64 },
    NonIncreasingTimestamps { index: usize },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::Empty => write!(f, "no observations"),
            Violation::LengthMismatch {
                timestamps,
                observations,
            } => write!(
                f,
                "length mismatch: {timestamps} timestamps vs {observations} observations"
            ),
            Violation::Dimension { step, found } => {
                write!(f, "dimension {found} ≠ {EMOTION_DIM} at step {step}")
            }
            Violation::NonFinite { step } => write!(f, "non-finite value at step {step}"),
            Violation::OutOfRange {
                step,
                channel,
                value,
            } => write!(
                f,
                "element out of [0,1]: {value} at step {step}, channel {channel}"
            ),
            Violation::NonIncreasingTimestamps { index } => {
                write!(f, "non-increasing timestamps at index {index}")
            }
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
    /// Steps whose emotion scores sum to something further than 0.01 from 1.
    pub sum_warnings: Vec<usize>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Checks an emotion series against the schema invariants. Never fails;
/// every violation is returned as data.
pub fn validate_series(series: &TimeSeries) -> ValidationReport {
    let mut report = ValidationReport::default();
    if series.timestamps.is_empty() && series.observations.is_empty() {
        report.violations.push(Violation::Empty);
        return report;
    }
    if series.timestamps.len() != series.observations.len() {
        report.violations.push(Violation::LengthMismatch {
            timestamps: series.timestamps.len(),
            observations: series.observations.len(),
        });
    }
    for (k, y) in series.observations.iter().enumerate() {
        if y.len() != EMOTION_DIM {
            report.violations.push(Violation::Dimension {
                step: k,
                found: y.len(),
            });
            continue;
        }
        if y.iter().any(|v| !v.is_finite()) {
            report.violations.push(Violation::NonFinite { step: k });
            continue;
        }
        for (c, &v) in y.iter().enumerate() {
            if !(0.0..=1.0).contains(&v) {
                report.violations.push(Violation::OutOfRange {
                    step: k,
                    channel: c,
                    value: v,
                });
            }
        }
        if (y.sum() - 1.0).abs() > 0.01 {
            report.sum_warnings.push(k);
        }
    }
    for (k, t) in series.timestamps.iter().enumerate() {
        if !t.is_finite() {
            report.violations.push(Violation::NonFinite { step: k });
        }
    }
    for k in 1..series.timestamps.len() {
        if series.timestamps[k] <= series.timestamps[k - 1] {
            report
                .violations
                .push(Violation::NonIncreasingTimestamps { index: k });
        }
    }
    report
}

/// Parameters of one cluster's Δ-scaled linear Gaussian state-space model.
///
/// Between observations separated by Δ the latent state evolves as
/// `x_k = (I + Δ·generator) x_{k-1} + w`, `w ~ N(0, Δ·process_noise)`, and
/// is observed as `y_k = emission x_k + v`, `v ~ N(0, obs_noise / Δ)`. The
/// first state is drawn from `N(init_mean, init_cov)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterParameters {
    pub init_mean: DVector<f64>,
    pub generator: DMatrix<f64>,
    pub emission: DMatrix<f64>,
    pub init_cov: DMatrix<f64>,
    pub obs_noise: DMatrix<f64>,
    pub process_noise: DMatrix<f64>,
}

impl ClusterParameters {
    pub fn latent_dim(&self) -> usize {
        self.init_mean.len()
    }

    pub fn obs_dim(&self) -> usize {
        self.emission.nrows()
    }

    /// Shape checks plus symmetry and PSD of the three covariance blocks.
    pub fn check(&self) -> Result<()> {
        let dx = self.latent_dim();
        let dy = self.obs_dim();
        let square = |m: &DMatrix<f64>, d: usize, ctx: &'static str| -> Result<()> {
            if m.nrows() != d || m.ncols() != d {
                return Err(Error::DimensionMismatch {
                    context: ctx,
                    expected: d,
                    found: if m.nrows() != d { m.nrows() } else { m.ncols() },
                });
            }
            Ok(())
        };
        square(&self.generator, dx, "generator")?;
        square(&self.init_cov, dx, "initial covariance")?;
        square(&self.process_noise, dx, "process noise")?;
        square(&self.obs_noise, dy, "observation noise")?;
        if self.emission.ncols() != dx {
            return Err(Error::DimensionMismatch {
                context: "emission columns",
                expected: dx,
                found: self.emission.ncols(),
            });
        }
        for (m, name) in [
            (&self.init_cov, "initial covariance"),
            (&self.obs_noise, "observation noise"),
            (&self.process_noise, "process noise"),
        ] {
            if m.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite(name));
            }
            if linalg::max_asymmetry(m) > 1e-10 {
                return Err(Error::InvalidConfig(format!("{name} is not symmetric")));
            }
            if linalg::min_eigenvalue(m) < -1e-10 {
                return Err(Error::InvalidConfig(format!(
                    "{name} is not positive semidefinite"
                )));
            }
        }
        Ok(())
    }
}

/// Scheduled assessment weeks.
pub const SCHEDULED_WEEKS: [u8; 5] = [0, 3, 6, 9, 12];

pub const PHQ9_ITEMS: usize = 9;
pub const GAD7_ITEMS: usize = 7;

/// Short item labels, PHQ-9 items 1–9 then GAD-7 items 1–7.
pub const ITEM_NAMES: [&str; PHQ9_ITEMS + GAD7_ITEMS] = [
    "Anhed", "Mood", "Sleep", "Fatigue", "Weight", "Worthl", "Concent", "Psychom", "Suicide",
    "Nervous", "UncWor", "GenWor", "NoRelax", "Restless", "Irritab", "Fear",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Instrument {
    Phq9,
    Gad7,
}

impl Instrument {
    pub const ALL: [Instrument; 2] = [Instrument::Phq9, Instrument::Gad7];

    pub fn name(self) -> &'static str {
        match self {
            Instrument::Phq9 => "PHQ-9",
            Instrument::Gad7 => "GAD-7",
        }
    }
}

/// One completed PHQ-9 + GAD-7 assessment.
#[derive(Debug, Clone, PartialEq)]
pub struct AssessmentRecord {
    pub patient_id: String,
    /// Scheduled week the record was binned to (one of [`SCHEDULED_WEEKS`]).
    pub week: u8,
    /// Week as recorded, before binning.
    pub recorded_week: f64,
    pub phq9_items: [u8; PHQ9_ITEMS],
    pub gad7_items: [u8; GAD7_ITEMS],
}

impl AssessmentRecord {
    pub fn phq9_total(&self) -> u32 {
        self.phq9_items.iter().map(|&v| v as u32).sum()
    }

    pub fn gad7_total(&self) -> u32 {
        self.gad7_items.iter().map(|&v| v as u32).sum()
    }

    pub fn total(&self, instrument: Instrument) -> u32 {
        match instrument {
            Instrument::Phq9 => self.phq9_total(),
            Instrument::Gad7 => self.gad7_total(),
        }
    }

    /// All 16 item responses, PHQ-9 first.
    pub fn items(&self) -> [u8; PHQ9_ITEMS + GAD7_ITEMS] {
        let mut out = [0u8; PHQ9_ITEMS + GAD7_ITEMS];
        out[..PHQ9_ITEMS].copy_from_slice(&self.phq9_items);
        out[PHQ9_ITEMS..].copy_from_slice(&self.gad7_items);
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ev(v: f64) -> DVector<f64> {
        DVector::from_element(EMOTION_DIM, v)
    }

    #[test]
    fn duplicate_timestamp_is_reported() {
        let s = TimeSeries::new("p", vec![1.0, 1.0], vec![ev(0.1), ev(0.1)]);
        let r = validate_series(&s);
        assert_eq!(
            r.violations,
            vec![Violation::NonIncreasingTimestamps { index: 1 }]
        );
        assert!(r.violations[0].to_string().contains("non-increasing timestamps"));
    }

    #[test]
    fn out_of_range_element_is_reported() {
        let mut y = ev(0.1);
        y[3] = 1.2;
        let s = TimeSeries::new("p", vec![0.0], vec![y]);
        let r = validate_series(&s);
        assert_eq!(r.violations.len(), 1);
        assert!(r.violations[0].to_string().contains("element out of [0,1]"));
    }

    #[test]
    fn well_formed_series_is_ok() {
        let y = DVector::from_row_slice(&[0.1, 0.1, 0.1, 0.3, 0.2, 0.1, 0.1]);
        let s = TimeSeries::new("p", vec![0.0, 1.5, 3.0], vec![y.clone(), y.clone(), y]);
        let r = validate_series(&s);
        assert!(r.is_ok());
        assert!(r.sum_warnings.is_empty());
        // pure and idempotent
        assert_eq!(validate_series(&s), r);
    }

    #[test]
    fn unnormalized_vector_warns_but_passes() {
        let s = TimeSeries::new("p", vec![0.0], vec![ev(0.5)]);
        let r = validate_series(&s);
        assert!(r.is_ok());
        assert_eq!(r.sum_warnings, vec![0]);
    }

    #[test]
    fn wrong_dimension_is_reported() {
        let s = TimeSeries::new("p", vec![0.0], vec![DVector::from_element(6, 0.1)]);
        let r = validate_series(&s);
        assert_eq!(r.violations[0].to_string(), "dimension 6 ≠ 7 at step 0");
    }

    #[test]
    fn emotion_order_is_frozen() {
        assert_eq!(
            emotion_order(),
            ["anger", "disgust", "fear", "joy", "neutral", "sadness", "surprise"]
        );
        assert_eq!(Emotion::Sadness.index(), 5);
    }

    #[test]
    fn emotion_vector_rejects_out_of_range() {
        assert!(EmotionVector::new([0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0]).is_ok());
        assert!(EmotionVector::new([0.0, 0.0, 0.0, 1.1, 0.0, 0.0, 0.0]).is_err());
        assert!(EmotionVector::try_from(&[0.1; 6][..]).is_err());
    }

    #[test]
    fn assessment_totals() {
        let r = AssessmentRecord {
            patient_id: "p".into(),
            week: 0,
            recorded_week: 0.0,
            phq9_items: [3; 9],
            gad7_items: [3; 7],
        };
        assert_eq!((r.phq9_total(), r.gad7_total()), (27, 21));
    }
}
