//! Clustering of irregularly sampled multivariate time series with mixtures
//! of Δ-scaled linear Gaussian state-space models, per-cluster temporal
//! emotion networks, and the outcome statistics used to interpret clusters.

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub mod em;
pub mod error;
pub mod ingest;
pub mod lgssm;
pub mod linalg;
pub mod metrics;
pub mod model_io;
pub mod network;
pub mod outcomes;
pub mod par;
pub mod stats;
pub mod synthetic;
pub mod types;

pub use error::{Error, Result};
pub use types::{
    AssessmentRecord, ClusterParameters, Emotion, EmotionVector, Instrument, TimeSeries,
    EMOTION_DIM,
};
