//! Fitted-model JSON: parameters as row-major nested arrays, with the fit
//! history. Numbers round-trip exactly.

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::em::FittedMixture;
use crate::error::{Error, Result};
use crate::types::{emotion_order, ClusterParameters};

pub const MODEL_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterJson {
    pub mu: Vec<f64>,
    #[serde(rename = "A")]
    pub a: Vec<Vec<f64>>,
    #[serde(rename = "C")]
    pub c: Vec<Vec<f64>>,
    #[serde(rename = "P")]
    pub p: Vec<Vec<f64>>,
    #[serde(rename = "Sigma")]
    pub sigma: Vec<Vec<f64>>,
    #[serde(rename = "Gamma")]
    pub gamma: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitJson {
    pub iters: usize,
    pub converged: bool,
    pub loglik_trace: Vec<f64>,
    pub frozen: Vec<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelJson {
    pub version: u32,
    #[serde(rename = "M")]
    pub m: usize,
    pub d_x: usize,
    pub d_y: usize,
    pub emotion_order: Vec<String>,
    pub weights: Vec<f64>,
    pub clusters: Vec<ClusterJson>,
    pub fit: FitJson,
}

fn rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

fn matrix(rows: &[Vec<f64>], nrows: usize, ncols: usize, what: &str) -> Result<DMatrix<f64>> {
    if rows.len() != nrows || rows.iter().any(|r| r.len() != ncols) {
        return Err(Error::Parse(format!(
            "model: {what} must be {nrows}x{ncols}"
        )));
    }
    Ok(DMatrix::from_fn(nrows, ncols, |i, j| rows[i][j]))
}

impl ModelJson {
    pub fn from_fit(fit: &FittedMixture) -> Self {
        ModelJson {
            version: MODEL_VERSION,
            m: fit.num_clusters(),
            d_x: fit.latent_dim(),
            d_y: fit.obs_dim(),
            emotion_order: emotion_order().iter().map(|s| s.to_string()).collect(),
            weights: fit.weights.clone(),
            clusters: fit
                .clusters
                .iter()
                .map(|c| ClusterJson {
                    mu: c.init_mean.iter().copied().collect(),
                    a: rows(&c.generator),
                    c: rows(&c.emission),
                    p: rows(&c.init_cov),
                    sigma: rows(&c.obs_noise),
                    gamma: rows(&c.process_noise),
                })
                .collect(),
            fit: FitJson {
                iters: fit.iterations,
                converged: fit.converged,
                loglik_trace: fit.loglik_trace.clone(),
                frozen: fit.frozen.clone(),
            },
        }
    }

    /// Rebuilds the mixture, checking every shape and parameter invariant.
    pub fn to_fit(&self) -> Result<FittedMixture> {
        if self.version != MODEL_VERSION {
            return Err(Error::Parse(format!(
                "model version {} unsupported (expected {MODEL_VERSION})",
                self.version
            )));
        }
        if self.clusters.len() != self.m || self.weights.len() != self.m {
            return Err(Error::Parse(format!(
                "model: M = {} but {} clusters and {} weights",
                self.m,
                self.clusters.len(),
                self.weights.len()
            )));
        }
        let (dx, dy) = (self.d_x, self.d_y);
        let clusters = self
            .clusters
            .iter()
            .map(|c| {
                if c.mu.len() != dx {
                    return Err(Error::Parse(format!("model: mu must have length {dx}")));
                }
                let p = ClusterParameters {
                    init_mean: DVector::from_column_slice(&c.mu),
                    generator: matrix(&c.a, dx, dx, "A")?,
                    emission: matrix(&c.c, dy, dx, "C")?,
                    init_cov: matrix(&c.p, dx, dx, "P")?,
                    obs_noise: matrix(&c.sigma, dy, dy, "Sigma")?,
                    process_noise: matrix(&c.gamma, dx, dx, "Gamma")?,
                };
                p.check()?;
                Ok(p)
            })
            .collect::<Result<Vec<_>>>()?;
        let mut fit = FittedMixture::from_parameters(clusters, self.weights.clone());
        fit.iterations = self.fit.iters;
        fit.converged = self.fit.converged;
        fit.loglik_trace = self.fit.loglik_trace.clone();
        if self.fit.frozen.len() == self.m {
            fit.frozen = self.fit.frozen.clone();
        }
        Ok(fit)
    }
}

pub fn to_json_string(fit: &FittedMixture) -> Result<String> {
    let mut s = serde_json::to_string_pretty(&ModelJson::from_fit(fit))?;
    s.push('\n');
    Ok(s)
}

pub fn from_json_str(s: &str) -> Result<FittedMixture> {
    serde_json::from_str::<ModelJson>(s)?.to_fit()
}

pub fn save(path: &Path, fit: &FittedMixture) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    std::fs::write(path, to_json_string(fit)?).map_err(|e| Error::io(path, e))
}

pub fn load(path: &Path) -> Result<FittedMixture> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    from_json_str(&text)
}
