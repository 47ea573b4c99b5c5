//! JSON configuration file, command-line overrides and the resolved
//! settings each subcommand runs with. Flags win over the file, the file
//! wins over built-in defaults.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use clap::Args;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use vista_core::em::{FitConfig, DEFAULT_INIT_PERTURBATION};
use vista_core::ingest::{CohortRules, ShortHistory};

use crate::CliError;

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConfigFile {
    pub seed: Option<u64>,
    pub threads: Option<usize>,
    pub out: Option<PathBuf>,
    pub series: Option<PathBuf>,
    pub assessments: Option<PathBuf>,
    pub diagnoses: Option<PathBuf>,
    pub covariates: Option<PathBuf>,
    pub preset: Option<String>,
    pub n: Option<usize>,
    pub anchor: Option<bool>,
    pub adjust: Option<bool>,
    pub fit: FitFile,
    pub network: NetworkFile,
    pub rules: RulesFile,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FitFile {
    pub clusters: Option<usize>,
    pub latent_dim: Option<usize>,
    pub max_iters: Option<usize>,
    pub tol: Option<f64>,
    pub min_weight: Option<f64>,
    pub init_perturbation: Option<f64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NetworkFile {
    pub delta_weeks: Option<f64>,
    pub threshold: Option<f64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RulesFile {
    pub min_baseline_total: Option<u32>,
    pub min_talk_turns: Option<usize>,
    pub gap_low: Option<f64>,
    pub gap_high: Option<f64>,
    pub gap_assessments: Option<usize>,
    pub short_history: Option<String>,
    pub require_transcript: Option<bool>,
    pub excluded_diagnoses: Option<Vec<String>>,
}

pub fn load_config(path: Option<&Path>) -> Result<ConfigFile, CliError> {
    let Some(path) = path else {
        return Ok(ConfigFile::default());
    };
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
    serde_json::from_str(&text)
        .map_err(|e| CliError::Usage(format!("invalid config {}: {e}", path.display())))
}

#[derive(Debug, Clone, Default, Args)]
pub struct FitArgs {
    /// Number of clusters.
    #[arg(long)]
    pub clusters: Option<usize>,
    /// Latent state dimension.
    #[arg(long)]
    pub latent_dim: Option<usize>,
    #[arg(long)]
    pub max_iters: Option<usize>,
    /// Relative log-likelihood tolerance.
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long)]
    pub min_weight: Option<f64>,
    #[arg(long)]
    pub init_perturbation: Option<f64>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct NetworkArgs {
    /// Network step in weeks.
    #[arg(long)]
    pub delta: Option<f64>,
    /// Hide edges with |weight| below this in the edge list.
    #[arg(long)]
    pub threshold: Option<f64>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct RulesArgs {
    #[arg(long)]
    pub min_baseline_total: Option<u32>,
    #[arg(long)]
    pub min_talk_turns: Option<usize>,
    #[arg(long)]
    pub gap_low: Option<f64>,
    #[arg(long)]
    pub gap_high: Option<f64>,
    #[arg(long)]
    pub gap_assessments: Option<usize>,
    /// `skip` or `apply-to-available`.
    #[arg(long)]
    pub short_history: Option<String>,
    /// Do not exclude patients without a transcript.
    #[arg(long)]
    pub allow_missing_transcript: bool,
    /// Diagnosis code to exclude (repeatable).
    #[arg(long = "exclude-diagnosis")]
    pub excluded_diagnoses: Vec<String>,
}

/// Fit settings in serializable form, for manifests and hashing.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FitSettings {
    pub clusters: usize,
    pub latent_dim: usize,
    pub max_iters: usize,
    pub tol: f64,
    pub min_weight: f64,
    pub init_perturbation: f64,
    pub seed: u64,
}

impl FitSettings {
    pub fn resolve(args: &FitArgs, file: &FitFile, seed: u64) -> Result<Self, CliError> {
        let d = FitConfig::default();
        let s = FitSettings {
            clusters: args.clusters.or(file.clusters).unwrap_or(d.clusters),
            latent_dim: args.latent_dim.or(file.latent_dim).unwrap_or(d.latent_dim),
            max_iters: args.max_iters.or(file.max_iters).unwrap_or(d.max_iters),
            tol: args.tol.or(file.tol).unwrap_or(d.tol),
            min_weight: args.min_weight.or(file.min_weight).unwrap_or(d.min_weight),
            init_perturbation: args
                .init_perturbation
                .or(file.init_perturbation)
                .unwrap_or(DEFAULT_INIT_PERTURBATION),
            seed,
        };
        s.to_config().validate().map_err(|e| CliError::Usage(e.to_string()))?;
        Ok(s)
    }

    pub fn to_config(&self) -> FitConfig {
        FitConfig {
            clusters: self.clusters,
            latent_dim: self.latent_dim,
            max_iters: self.max_iters,
            tol: self.tol,
            seed: self.seed,
            min_weight: self.min_weight,
            init_perturbation: self.init_perturbation,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NetworkSettings {
    pub delta_weeks: f64,
    pub threshold: Option<f64>,
}

impl NetworkSettings {
    pub fn resolve(args: &NetworkArgs, file: &NetworkFile) -> Result<Self, CliError> {
        let delta_weeks = args.delta.or(file.delta_weeks).unwrap_or(1.0);
        if !(delta_weeks.is_finite() && delta_weeks > 0.0) {
            return Err(CliError::Usage(format!("--delta must be positive, got {delta_weeks}")));
        }
        let threshold = args.threshold.or(file.threshold);
        if threshold.is_some_and(|t| !(t >= 0.0)) {
            return Err(CliError::Usage("--threshold must be non-negative".into()));
        }
        Ok(NetworkSettings {
            delta_weeks,
            threshold,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RulesSettings {
    pub min_baseline_total: u32,
    pub min_talk_turns: usize,
    pub gap_low: f64,
    pub gap_high: f64,
    pub gap_assessments: usize,
    pub short_history: String,
    pub require_transcript: bool,
    pub excluded_diagnoses: BTreeSet<String>,
}

fn parse_short_history(s: &str) -> Result<ShortHistory, CliError> {
    match s {
        "skip" => Ok(ShortHistory::Skip),
        "apply-to-available" => Ok(ShortHistory::ApplyToAvailable),
        other => Err(CliError::Usage(format!(
            "short history policy must be 'skip' or 'apply-to-available', got '{other}'"
        ))),
    }
}

impl RulesSettings {
    pub fn resolve(args: &RulesArgs, file: &RulesFile) -> Result<Self, CliError> {
        let d = CohortRules::default();
        let mut excluded: BTreeSet<String> =
            file.excluded_diagnoses.iter().flatten().cloned().collect();
        excluded.extend(args.excluded_diagnoses.iter().cloned());
        let s = RulesSettings {
            min_baseline_total: args
                .min_baseline_total
                .or(file.min_baseline_total)
                .unwrap_or(d.min_baseline_total),
            min_talk_turns: args
                .min_talk_turns
                .or(file.min_talk_turns)
                .unwrap_or(d.min_talk_turns),
            gap_low: args.gap_low.or(file.gap_low).unwrap_or(d.gap_bounds.0),
            gap_high: args.gap_high.or(file.gap_high).unwrap_or(d.gap_bounds.1),
            gap_assessments: args
                .gap_assessments
                .or(file.gap_assessments)
                .unwrap_or(d.gap_assessments),
            short_history: args
                .short_history
                .clone()
                .or(file.short_history.clone())
                .unwrap_or_else(|| "skip".into()),
            require_transcript: !args.allow_missing_transcript
                && file.require_transcript.unwrap_or(d.require_transcript),
            excluded_diagnoses: excluded,
        };
        s.to_rules()?;
        Ok(s)
    }

    pub fn to_rules(&self) -> Result<CohortRules, CliError> {
        let rules = CohortRules {
            min_baseline_total: self.min_baseline_total,
            min_talk_turns: self.min_talk_turns,
            gap_bounds: (self.gap_low, self.gap_high),
            gap_assessments: self.gap_assessments,
            short_history: parse_short_history(&self.short_history)?,
            require_transcript: self.require_transcript,
            excluded_diagnoses: self.excluded_diagnoses.clone(),
        };
        rules.validate().map_err(|e| CliError::Usage(e.to_string()))?;
        Ok(rules)
    }
}

pub fn require_seed(flag: Option<u64>, file: &ConfigFile) -> Result<u64, CliError> {
    flag.or(file.seed)
        .ok_or_else(|| CliError::Usage("a seed is required (--seed or \"seed\" in the config)".into()))
}

/// Flag, then config file; the path must exist.
pub fn existing_path(
    flag: Option<&PathBuf>,
    file: Option<&PathBuf>,
    what: &str,
) -> Result<Option<PathBuf>, CliError> {
    match flag.or(file) {
        None => Ok(None),
        Some(p) if p.exists() => Ok(Some(p.clone())),
        Some(p) => Err(CliError::Usage(format!("{what} file {} does not exist", p.display()))),
    }
}

pub fn required_path(
    flag: Option<&PathBuf>,
    file: Option<&PathBuf>,
    what: &str,
) -> Result<PathBuf, CliError> {
    existing_path(flag, file, what)?
        .ok_or_else(|| CliError::Usage(format!("missing {what} input (--{what})")))
}

pub fn output_dir(flag: Option<&PathBuf>, file: &ConfigFile) -> PathBuf {
    flag.or(file.out.as_ref()).cloned().unwrap_or_else(|| PathBuf::from("out"))
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn file_digest(path: &Path) -> Result<String, CliError> {
    let bytes = std::fs::read(path).map_err(|e| vista_core::Error::io(path, e))?;
    Ok(sha256_hex(&bytes))
}
