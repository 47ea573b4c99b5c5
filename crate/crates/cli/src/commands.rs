//! Subcommand implementations. Each stage reads and writes plain CSV/JSON
//! in an output directory so that stages compose and resume.

use std::collections::{BTreeMap, HashMap};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;
use vista_core::em::{assign, fit, FittedMixture};
use vista_core::ingest::{
    anchor_cohort, create, filter_cohort, open, parse_covariates, parse_diagnoses, parse_labels,
    read_assessments, read_emotion_series, write_assessments_csv, write_covariates_csv,
    write_emotion_series, write_labels_csv, Funnel,
};
use vista_core::metrics::adjusted_rand_index;
use vista_core::model_io::{self, MODEL_VERSION};
use vista_core::network::{cluster_network, write_centrality_csv, write_edges_csv, TemporalNetwork};
use vista_core::outcomes::{
    baseline_item_comparison, label_outcomes, regress_outcomes, write_items_csv,
    write_outcomes_csv, write_regression_csv, Covariates,
};
use vista_core::synthetic::{sample_assessments, sample_cohort, sample_covariates, AssessmentModel, Preset};
use vista_core::{AssessmentRecord, TimeSeries};

use crate::config::{
    existing_path, file_digest, output_dir, require_seed, required_path, sha256_hex, ConfigFile,
    FitSettings, NetworkSettings, RulesSettings,
};
use crate::{CliError, Command};

pub const SERIES_FILE: &str = "series.jsonl";
pub const TRUTH_FILE: &str = "truth_labels.csv";
pub const ASSESSMENTS_FILE: &str = "assessments.csv";
pub const COVARIATES_FILE: &str = "covariates.csv";
pub const ELIGIBLE_FILE: &str = "eligible.jsonl";
pub const FUNNEL_FILE: &str = "funnel.json";
pub const EXCLUDED_FILE: &str = "excluded.csv";
pub const MODEL_FILE: &str = "model.json";
pub const LABELS_FILE: &str = "labels.csv";
pub const LOGLIK_FILE: &str = "loglik.csv";
pub const ASSIGNMENTS_FILE: &str = "assignments.csv";
pub const EDGES_FILE: &str = "edges.csv";
pub const CENTRALITY_FILE: &str = "centrality.csv";
pub const OUTCOMES_FILE: &str = "outcomes.csv";
pub const REGRESSION_FILE: &str = "regression.csv";
pub const ITEMS_FILE: &str = "items.csv";
pub const MANIFEST_FILE: &str = "manifest.json";

pub fn dispatch(command: Command, file: &ConfigFile, threads: usize) -> Result<(), CliError> {
    match command {
        Command::Simulate { preset, n, seed, out } => {
            let seed = require_seed(seed, file)?;
            let preset = resolve_preset(preset.as_ref(), file)?.unwrap_or(Preset::PaperShaped);
            let n = resolve_n(n, file)?;
            let summary = simulate(&output_dir(out.as_ref(), file), preset, n, seed)?;
            println!("{summary}");
        }
        Command::Ingest {
            series,
            assessments,
            diagnoses,
            anchor,
            rules,
            out,
        } => {
            let series = required_path(series.as_ref(), file.series.as_ref(), "series")?;
            let assessments =
                required_path(assessments.as_ref(), file.assessments.as_ref(), "assessments")?;
            let diagnoses = existing_path(diagnoses.as_ref(), file.diagnoses.as_ref(), "diagnoses")?;
            let rules = RulesSettings::resolve(&rules, &file.rules)?;
            let anchor = anchor || file.anchor.unwrap_or(false);
            let out = output_dir(out.as_ref(), file);
            let ingested = ingest(&out, &series, &assessments, diagnoses.as_deref(), &rules, anchor)?;
            println!(
                "{} of {} patients eligible; wrote {}",
                ingested.funnel.eligible,
                ingested.funnel.input,
                out.join(ELIGIBLE_FILE).display()
            );
        }
        Command::Fit {
            series,
            seed,
            fit,
            score,
            out,
        } => {
            let seed = require_seed(seed, file)?;
            let settings = FitSettings::resolve(&fit, &file.fit, seed)?;
            let series = required_path(series.as_ref(), file.series.as_ref(), "series")?;
            let score = existing_path(score.as_ref(), None, "score")?;
            let out = output_dir(out.as_ref(), file);
            let data = read_series(&series)?;
            let model = fit_stage(&out, &data, &settings)?;
            println!("{}", fit_summary(&model));
            if let Some(truth) = score {
                let ari = score_labels(&data, &model.labels, &truth)?;
                println!("ARI vs {}: {ari:.4}", truth.display());
            }
        }
        Command::Assign { model, series, out } => {
            let series = required_path(series.as_ref(), file.series.as_ref(), "series")?;
            let model = load_model(&model)?;
            let data = read_series(&series)?;
            let out = output_dir(out.as_ref(), file);
            let labels = assign_stage(&out.join(ASSIGNMENTS_FILE), &data, &model)?;
            println!("assigned {} series to {} clusters", labels.len(), model.num_clusters());
        }
        Command::Network { model, network, out } => {
            let settings = NetworkSettings::resolve(&network, &file.network)?;
            let model = load_model(&model)?;
            let out = output_dir(out.as_ref(), file);
            let nets = network_stage(&out, &model, &settings)?;
            println!("wrote {} networks at delta {} weeks", nets.len(), settings.delta_weeks);
        }
        Command::Outcomes {
            assessments,
            labels,
            covariates,
            unadjusted,
            out,
        } => {
            let assessments =
                required_path(assessments.as_ref(), file.assessments.as_ref(), "assessments")?;
            let labels = required_path(Some(&labels), None, "labels")?;
            let covariates =
                existing_path(covariates.as_ref(), file.covariates.as_ref(), "covariates")?;
            let adjust = !unadjusted && file.adjust.unwrap_or(true) && covariates.is_some();
            let records = read_records(&assessments)?;
            let cluster_of: HashMap<String, usize> = parse_labels(open(&labels)?)?.into_iter().collect();
            let covs = match &covariates {
                Some(p) => parse_covariates(open(p)?)?,
                None => HashMap::new(),
            };
            let out = output_dir(out.as_ref(), file);
            let summary = outcomes_stage(&out, &records, &cluster_of, &covs, adjust)?;
            println!("{summary}");
        }
        Command::Pipeline {
            preset,
            n,
            series,
            assessments,
            diagnoses,
            covariates,
            seed,
            anchor,
            unadjusted,
            rules,
            fit,
            network,
            resume,
            out,
        } => {
            let seed = require_seed(seed, file)?;
            let preset = resolve_preset(preset.as_ref(), file)?;
            let input = match preset {
                Some(p) => PipelineInput::Simulated {
                    preset: p.name().to_string(),
                    n: resolve_n(n, file)?,
                },
                None => PipelineInput::Files {
                    series: required_path(series.as_ref(), file.series.as_ref(), "series")?,
                    assessments: required_path(
                        assessments.as_ref(),
                        file.assessments.as_ref(),
                        "assessments",
                    )?,
                    diagnoses: existing_path(diagnoses.as_ref(), file.diagnoses.as_ref(), "diagnoses")?,
                    covariates: existing_path(
                        covariates.as_ref(),
                        file.covariates.as_ref(),
                        "covariates",
                    )?,
                },
            };
            let config = PipelineConfig {
                input,
                seed,
                anchor: anchor || file.anchor.unwrap_or(false),
                adjust: !unadjusted && file.adjust.unwrap_or(true),
                rules: RulesSettings::resolve(&rules, &file.rules)?,
                fit: FitSettings::resolve(&fit, &file.fit, seed)?,
                network: NetworkSettings::resolve(&network, &file.network)?,
            };
            let out = output_dir(out.as_ref(), file);
            let manifest = pipeline(&out, &config, threads, resume)?;
            for s in &manifest.stages {
                println!("{:<10} {:>8.2}s{}", s.stage, s.seconds, if s.reused { "  (reused)" } else { "" });
            }
            println!("manifest: {}", out.join(MANIFEST_FILE).display());
        }
    }
    Ok(())
}

fn resolve_preset(flag: Option<&String>, file: &ConfigFile) -> Result<Option<Preset>, CliError> {
    flag.or(file.preset.as_ref())
        .map(|p| p.parse().map_err(|e: vista_core::Error| CliError::Usage(e.to_string())))
        .transpose()
}

fn resolve_n(flag: Option<u64>, file: &ConfigFile) -> Result<usize, CliError> {
    match flag.map(|n| n as usize).or(file.n) {
        Some(0) => Err(CliError::Usage("--n must be at least 1".into())),
        Some(n) => Ok(n),
        None => Ok(200),
    }
}

fn write_with<F>(path: &Path, f: F) -> Result<(), CliError>
where
    F: FnOnce(&mut std::io::BufWriter<std::fs::File>) -> vista_core::Result<()>,
{
    let mut w = create(path)?;
    f(&mut w)?;
    w.flush().map_err(|e| vista_core::Error::io(path, e))?;
    Ok(())
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    write_with(path, |w| {
        serde_json::to_writer_pretty(&mut *w, value)?;
        w.write_all(b"\n").map_err(|e| vista_core::Error::io(path, e))
    })
}

pub fn read_series(path: &Path) -> Result<Vec<TimeSeries>, CliError> {
    let parsed = read_emotion_series(path)?;
    for d in &parsed.diagnostics {
        log::info!("{}: {d}", path.display());
    }
    if parsed.items.is_empty() {
        return Err(vista_core::Error::Empty("emotion series cohort").into());
    }
    Ok(parsed.items)
}

fn read_records(path: &Path) -> Result<Vec<AssessmentRecord>, CliError> {
    let parsed = read_assessments(path)?;
    for d in &parsed.diagnostics {
        log::info!("{}: {d}", path.display());
    }
    Ok(parsed.items)
}

fn load_model(path: &Path) -> Result<FittedMixture, CliError> {
    if !path.exists() {
        return Err(CliError::Usage(format!("model file {} does not exist", path.display())));
    }
    Ok(model_io::load(path)?)
}

pub struct SimulationSummary {
    pub n: usize,
    pub dims: usize,
    pub median_turns: f64,
    pub clipped_fraction: f64,
    pub dir: PathBuf,
}

impl std::fmt::Display for SimulationSummary {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "simulated {} series, {} dims, median {} turns, {:.2}% entries clipped -> {}",
            self.n,
            self.dims,
            self.median_turns,
            100.0 * self.clipped_fraction,
            self.dir.display()
        )
    }
}

fn median(mut v: Vec<usize>) -> f64 {
    if v.is_empty() {
        return f64::NAN;
    }
    v.sort_unstable();
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m] as f64
    } else {
        (v[m - 1] + v[m]) as f64 / 2.0
    }
}

/// Writes series, ground-truth labels, assessments and covariates.
pub fn simulate(dir: &Path, preset: Preset, n: usize, seed: u64) -> Result<SimulationSummary, CliError> {
    let cohort = sample_cohort(&preset.spec(n, seed))?;
    let ids: Vec<String> = cohort.series.iter().map(|s| s.patient_id.clone()).collect();
    let records = sample_assessments(&ids, &cohort.labels, &AssessmentModel::default(), seed);
    let covariates = sample_covariates(&ids, seed);
    write_with(&dir.join(SERIES_FILE), |w| write_emotion_series(w, &cohort.series))?;
    write_with(&dir.join(TRUTH_FILE), |w| write_labels_csv(w, &ids, &cohort.labels))?;
    write_with(&dir.join(ASSESSMENTS_FILE), |w| write_assessments_csv(w, &records))?;
    write_with(&dir.join(COVARIATES_FILE), |w| write_covariates_csv(w, &covariates))?;
    Ok(SimulationSummary {
        n,
        dims: cohort.series.first().map_or(0, TimeSeries::obs_dim),
        median_turns: median(cohort.series.iter().map(TimeSeries::len).collect()),
        clipped_fraction: cohort.clipped_fraction,
        dir: dir.to_path_buf(),
    })
}

pub struct Ingested {
    pub series: Vec<TimeSeries>,
    pub records: Vec<AssessmentRecord>,
    pub funnel: Funnel,
}

/// Validates inputs, applies the eligibility funnel and optionally restricts
/// series to assessment-anchored turns.
pub fn ingest(
    dir: &Path,
    series_path: &Path,
    assessments_path: &Path,
    diagnoses_path: Option<&Path>,
    rules: &RulesSettings,
    anchor: bool,
) -> Result<Ingested, CliError> {
    let rules = rules.to_rules()?;
    let series = read_emotion_series(series_path)?;
    for d in &series.diagnostics {
        log::info!("{}: {d}", series_path.display());
    }
    let records = read_records(assessments_path)?;
    let diagnoses = diagnoses_path
        .map(|p| open(p).and_then(parse_diagnoses))
        .transpose()?;
    let filter = filter_cohort(&series.items, &records, diagnoses.as_deref(), &rules);
    let eligible: std::collections::BTreeSet<&str> =
        filter.eligible.iter().map(String::as_str).collect();
    let mut kept: Vec<TimeSeries> = series
        .items
        .into_iter()
        .filter(|s| eligible.contains(s.patient_id.as_str()))
        .collect();
    let kept_records: Vec<AssessmentRecord> = records
        .into_iter()
        .filter(|r| eligible.contains(r.patient_id.as_str()))
        .collect();
    if anchor {
        let (anchored, dropped) = anchor_cohort(&kept, &kept_records);
        if !dropped.is_empty() {
            log::warn!("{} series have no turns inside assessment windows", dropped.len());
        }
        kept = anchored;
    }

    write_with(&dir.join(ELIGIBLE_FILE), |w| write_emotion_series(w, &kept))?;
    write_json(&dir.join(FUNNEL_FILE), &filter.funnel)?;
    write_with(&dir.join(EXCLUDED_FILE), |w| {
        let mut c = csv::Writer::from_writer(w);
        c.write_record(["patient_id", "stage"])?;
        for (pid, stage) in &filter.excluded {
            c.write_record([pid.as_str(), stage.name()])?;
        }
        c.flush().map_err(|e| vista_core::Error::io(EXCLUDED_FILE, e))
    })?;
    Ok(Ingested {
        series: kept,
        records: kept_records,
        funnel: filter.funnel,
    })
}

fn write_fit_outputs(dir: &Path, data: &[TimeSeries], model: &FittedMixture) -> Result<(), CliError> {
    model_io::save(&dir.join(MODEL_FILE), model)?;
    let ids: Vec<String> = data.iter().map(|s| s.patient_id.clone()).collect();
    write_with(&dir.join(LABELS_FILE), |w| write_labels_csv(w, &ids, &model.labels))?;
    write_with(&dir.join(LOGLIK_FILE), |w| {
        let mut c = csv::Writer::from_writer(w);
        c.write_record(["iteration", "loglik"])?;
        for (i, ll) in model.loglik_trace.iter().enumerate() {
            c.write_record([i.to_string(), ll.to_string()])?;
        }
        c.flush().map_err(|e| vista_core::Error::io(LOGLIK_FILE, e))
    })
}

/// Fits the mixture and writes the model, labels and log-likelihood trace.
pub fn fit_stage(dir: &Path, data: &[TimeSeries], settings: &FitSettings) -> Result<FittedMixture, CliError> {
    if data.is_empty() {
        return Err(vista_core::Error::Empty("cohort after filtering").into());
    }
    let model = fit(data, &settings.to_config())?;
    if !model.converged {
        log::warn!("EM stopped after {} iterations without converging", model.iterations);
    }
    for w in &model.warnings {
        log::warn!("{w}");
    }
    write_fit_outputs(dir, data, &model)?;
    Ok(model)
}

pub fn fit_summary(model: &FittedMixture) -> String {
    let sizes: Vec<usize> = (0..model.num_clusters())
        .map(|l| model.labels.iter().filter(|&&x| x == l).count())
        .collect();
    format!(
        "{} clusters, sizes {:?}, {} iterations, converged {}, log-likelihood {:.4}",
        model.num_clusters(),
        sizes,
        model.iterations,
        model.converged,
        model.final_loglik().unwrap_or(f64::NAN)
    )
}

/// Adjusted Rand index of `labels` against a `series_id,cluster` file.
pub fn score_labels(data: &[TimeSeries], labels: &[usize], truth: &Path) -> Result<f64, CliError> {
    let truth: HashMap<String, usize> = parse_labels(open(truth)?)?.into_iter().collect();
    let expected = data
        .iter()
        .map(|s| {
            truth.get(&s.patient_id).copied().ok_or_else(|| {
                vista_core::Error::Parse(format!("no ground-truth label for {}", s.patient_id))
            })
        })
        .collect::<vista_core::Result<Vec<usize>>>()?;
    Ok(adjusted_rand_index(labels, &expected))
}

/// Hard labels and responsibilities under a fixed model.
pub fn assign_stage(path: &Path, data: &[TimeSeries], model: &FittedMixture) -> Result<Vec<usize>, CliError> {
    let a = assign(data, model)?;
    write_with(path, |w| {
        let mut c = csv::Writer::from_writer(w);
        let mut header = vec!["series_id".to_string(), "cluster".to_string()];
        header.extend((0..model.num_clusters()).map(|l| format!("resp_{l}")));
        c.write_record(&header)?;
        for (s, (label, r)) in data.iter().zip(a.labels.iter().zip(&a.responsibilities)) {
            let mut row = vec![s.patient_id.clone(), label.to_string()];
            row.extend(r.iter().map(|v| v.to_string()));
            c.write_record(&row)?;
        }
        c.flush().map_err(|e| vista_core::Error::io(ASSIGNMENTS_FILE, e))
    })?;
    Ok(a.labels)
}

pub fn network_stage(
    dir: &Path,
    model: &FittedMixture,
    settings: &NetworkSettings,
) -> Result<Vec<TemporalNetwork>, CliError> {
    let nets = model
        .clusters
        .iter()
        .map(|c| cluster_network(c, settings.delta_weeks))
        .collect::<vista_core::Result<Vec<_>>>()?;
    write_with(&dir.join(EDGES_FILE), |w| write_edges_csv(w, &nets, settings.threshold))?;
    write_with(&dir.join(CENTRALITY_FILE), |w| write_centrality_csv(w, &nets))?;
    Ok(nets)
}

pub fn outcomes_stage(
    dir: &Path,
    records: &[AssessmentRecord],
    cluster_of: &HashMap<String, usize>,
    covariates: &HashMap<String, Covariates>,
    adjust: bool,
) -> Result<String, CliError> {
    let clustered: Vec<AssessmentRecord> = records
        .iter()
        .filter(|r| cluster_of.contains_key(&r.patient_id))
        .cloned()
        .collect();
    let (labels, excluded) = label_outcomes(&clustered);
    let n_clusters = cluster_of.values().max().map_or(0, |m| m + 1);
    let report = regress_outcomes(&labels, cluster_of, n_clusters, covariates, adjust);
    write_with(&dir.join(OUTCOMES_FILE), |w| write_outcomes_csv(w, &labels))?;
    write_with(&dir.join(REGRESSION_FILE), |w| write_regression_csv(w, &report.rows))?;
    if n_clusters == 2 {
        let items = baseline_item_comparison(&clustered, cluster_of)?;
        write_with(&dir.join(ITEMS_FILE), |w| write_items_csv(w, &items))?;
    } else {
        log::warn!("item comparison needs exactly two clusters; {} found, skipped", n_clusters);
    }
    Ok(format!(
        "{} patients labelled, {} excluded (missing baseline or follow-up), {} regression rows",
        labels.len() / 2,
        excluded.len(),
        report.rows.len()
    ))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PipelineInput {
    Simulated {
        preset: String,
        n: usize,
    },
    Files {
        series: PathBuf,
        assessments: PathBuf,
        diagnoses: Option<PathBuf>,
        covariates: Option<PathBuf>,
    },
}

/// Everything that determines pipeline outputs, except the thread count.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PipelineConfig {
    pub input: PipelineInput,
    pub seed: u64,
    pub anchor: bool,
    pub adjust: bool,
    pub rules: RulesSettings,
    pub fit: FitSettings,
    pub network: NetworkSettings,
}

impl PipelineConfig {
    /// SHA-256 over the configuration and the contents of every input file.
    pub fn hash(&self) -> Result<String, CliError> {
        let mut inputs = BTreeMap::new();
        if let PipelineInput::Files {
            series,
            assessments,
            diagnoses,
            covariates,
        } = &self.input
        {
            inputs.insert("series", file_digest(series)?);
            inputs.insert("assessments", file_digest(assessments)?);
            if let Some(p) = diagnoses {
                inputs.insert("diagnoses", file_digest(p)?);
            }
            if let Some(p) = covariates {
                inputs.insert("covariates", file_digest(p)?);
            }
        }
        let payload = serde_json::to_vec(&(self, inputs)).map_err(vista_core::Error::from)?;
        Ok(sha256_hex(&payload))
    }
}

#[derive(Debug, Clone, Serialize, serde::Deserialize)]
pub struct StageRecord {
    pub stage: String,
    pub seconds: f64,
    pub reused: bool,
    pub outputs: Vec<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub tool_version: &'static str,
    pub core_version: &'static str,
    pub model_version: u32,
    pub config_hash: String,
    pub seed: u64,
    pub threads: usize,
    pub config: PipelineConfig,
    pub stages: Vec<StageRecord>,
}

fn previous_hash(dir: &Path) -> Option<String> {
    let text = std::fs::read_to_string(dir.join(MANIFEST_FILE)).ok()?;
    let v: serde_json::Value = serde_json::from_str(&text).ok()?;
    v.get("config_hash")?.as_str().map(str::to_string)
}

struct Timer {
    stages: Vec<StageRecord>,
}

impl Timer {
    fn run<T>(
        &mut self,
        stage: &str,
        outputs: &[&str],
        f: impl FnOnce() -> Result<T, CliError>,
    ) -> Result<T, CliError> {
        let t = Instant::now();
        let value = f()?;
        self.stages.push(StageRecord {
            stage: stage.into(),
            seconds: t.elapsed().as_secs_f64(),
            reused: false,
            outputs: outputs.iter().map(|s| s.to_string()).collect(),
        });
        log::info!("stage {stage} done in {:.2}s", t.elapsed().as_secs_f64());
        Ok(value)
    }
}

/// ingest → filter → fit → assign → network → outcomes, writing every
/// artifact and a manifest into `dir`. With `resume`, a model left by a run
/// with the same configuration hash is reused instead of refitted.
pub fn pipeline(dir: &Path, config: &PipelineConfig, threads: usize, resume: bool) -> Result<Manifest, CliError> {
    std::fs::create_dir_all(dir).map_err(|e| vista_core::Error::io(dir, e))?;
    let mut timer = Timer { stages: Vec::new() };

    let (series_path, assessments_path, diagnoses_path, covariates_path) = match &config.input {
        PipelineInput::Simulated { preset, n } => {
            let preset: Preset = preset.parse()?;
            let input_dir = dir.join("input");
            timer.run(
                "simulate",
                &[SERIES_FILE, TRUTH_FILE, ASSESSMENTS_FILE, COVARIATES_FILE],
                || simulate(&input_dir, preset, *n, config.seed),
            )?;
            (
                input_dir.join(SERIES_FILE),
                input_dir.join(ASSESSMENTS_FILE),
                None,
                Some(input_dir.join(COVARIATES_FILE)),
            )
        }
        PipelineInput::Files {
            series,
            assessments,
            diagnoses,
            covariates,
        } => (series.clone(), assessments.clone(), diagnoses.clone(), covariates.clone()),
    };
    let hash = config.hash()?;

    let ingested = timer.run("ingest", &[ELIGIBLE_FILE, FUNNEL_FILE, EXCLUDED_FILE], || {
        ingest(
            dir,
            &series_path,
            &assessments_path,
            diagnoses_path.as_deref(),
            &config.rules,
            config.anchor,
        )
    })?;

    let model_path = dir.join(MODEL_FILE);
    let reusable = resume && model_path.exists() && previous_hash(dir).as_deref() == Some(hash.as_str());
    if resume && !reusable {
        log::info!("resume requested but no model from an identical configuration; refitting");
    }
    let model = if reusable {
        let t = Instant::now();
        let mut model = model_io::load(&model_path)?;
        model.labels = assign(&ingested.series, &model)?.labels;
        write_fit_outputs(dir, &ingested.series, &model)?;
        timer.stages.push(StageRecord {
            stage: "fit".into(),
            seconds: t.elapsed().as_secs_f64(),
            reused: true,
            outputs: vec![MODEL_FILE.into(), LABELS_FILE.into(), LOGLIK_FILE.into()],
        });
        model
    } else {
        timer.run("fit", &[MODEL_FILE, LABELS_FILE, LOGLIK_FILE], || {
            fit_stage(dir, &ingested.series, &config.fit)
        })?
    };

    let labels = timer.run("assign", &[ASSIGNMENTS_FILE], || {
        assign_stage(&dir.join(ASSIGNMENTS_FILE), &ingested.series, &model)
    })?;
    timer.run("network", &[EDGES_FILE, CENTRALITY_FILE], || {
        network_stage(dir, &model, &config.network)
    })?;

    let cluster_of: HashMap<String, usize> = ingested
        .series
        .iter()
        .map(|s| s.patient_id.clone())
        .zip(labels)
        .collect();
    let covariates = match &covariates_path {
        Some(p) => parse_covariates(open(p)?)?,
        None => HashMap::new(),
    };
    let adjust = config.adjust && covariates_path.is_some();
    timer.run("outcomes", &[OUTCOMES_FILE, REGRESSION_FILE, ITEMS_FILE], || {
        outcomes_stage(dir, &ingested.records, &cluster_of, &covariates, adjust)
    })?;

    let manifest = Manifest {
        tool_version: env!("CARGO_PKG_VERSION"),
        core_version: vista_core::VERSION,
        model_version: MODEL_VERSION,
        config_hash: hash,
        seed: config.seed,
        threads,
        config: config.clone(),
        stages: timer.stages,
    };
    write_json(&dir.join(MANIFEST_FILE), &manifest)?;
    Ok(manifest)
}
