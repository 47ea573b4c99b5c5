//! Clinical outcome labels, covariate-adjusted logistic regressions of
//! outcome on cluster, and baseline/final item comparisons between clusters.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::io::Write;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::stats::{bonferroni, logistic_fit, mann_whitney_u, LogisticFit};
use crate::types::{AssessmentRecord, Instrument, GAD7_ITEMS, ITEM_NAMES, PHQ9_ITEMS};

/// Clinical cutoff on PHQ-9 and GAD-7 totals.
pub const CLINICAL_THRESHOLD: u32 = 10;
pub const CHANGE_POINTS: u32 = 5;
pub const REMISSION_BELOW: u32 = 5;
/// Item score counted as clinically present.
pub const ITEM_THRESHOLD: u8 = 2;
pub const FINAL_WEEKS: std::ops::RangeInclusive<u8> = 3..=12;

#[derive(Debug, Clone, PartialEq)]
pub struct OutcomeLabel {
    pub patient_id: String,
    pub instrument: Instrument,
    pub baseline: u32,
    pub final_total: u32,
    pub significant_change: bool,
    pub response: bool,
    pub remission: bool,
    pub deterioration: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Outcome {
    SignificantChange,
    Response,
    Remission,
    Deterioration,
}

impl Outcome {
    pub const ALL: [Outcome; 4] = [
        Outcome::SignificantChange,
        Outcome::Response,
        Outcome::Remission,
        Outcome::Deterioration,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Outcome::SignificantChange => "significant_change",
            Outcome::Response => "response",
            Outcome::Remission => "remission",
            Outcome::Deterioration => "deterioration",
        }
    }

    pub fn of(self, label: &OutcomeLabel) -> bool {
        match self {
            Outcome::SignificantChange => label.significant_change,
            Outcome::Response => label.response,
            Outcome::Remission => label.remission,
            Outcome::Deterioration => label.deterioration,
        }
    }
}

/// Applies the four outcome definitions to one baseline/final pair.
pub fn classify(patient_id: &str, instrument: Instrument, baseline: u32, final_total: u32) -> OutcomeLabel {
    let drop = baseline as i64 - final_total as i64;
    OutcomeLabel {
        patient_id: patient_id.to_string(),
        instrument,
        baseline,
        final_total,
        significant_change: baseline >= CLINICAL_THRESHOLD
            && final_total < CLINICAL_THRESHOLD
            && drop >= CHANGE_POINTS as i64,
        response: baseline > 0 && 2 * drop >= baseline as i64,
        remission: final_total < REMISSION_BELOW,
        deterioration: -drop >= CHANGE_POINTS as i64,
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Exclusion {
    pub patient_id: String,
    pub reason: String,
}

/// Baseline and final record for each patient, sorted by patient id.
/// Final is the last record binned to weeks 3–12.
pub fn baseline_and_final(
    records: &[AssessmentRecord],
) -> (Vec<(AssessmentRecord, AssessmentRecord)>, Vec<Exclusion>) {
    let mut by_patient: BTreeMap<&str, Vec<&AssessmentRecord>> = BTreeMap::new();
    for r in records {
        by_patient.entry(r.patient_id.as_str()).or_default().push(r);
    }
    let mut pairs = Vec::new();
    let mut excluded = Vec::new();
    for (pid, mut recs) in by_patient {
        recs.sort_by(|a, b| a.week.cmp(&b.week).then(a.recorded_week.total_cmp(&b.recorded_week)));
        let baseline = recs.iter().find(|r| r.week == 0);
        let last = recs.iter().rev().find(|r| FINAL_WEEKS.contains(&r.week));
        match (baseline, last) {
            (None, _) => excluded.push(Exclusion {
                patient_id: pid.to_string(),
                reason: "missing baseline assessment".into(),
            }),
            (Some(_), None) => excluded.push(Exclusion {
                patient_id: pid.to_string(),
                reason: "no assessment in weeks 3-12".into(),
            }),
            (Some(b), Some(f)) => pairs.push(((*b).clone(), (*f).clone())),
        }
    }
    (pairs, excluded)
}

/// Outcome labels per patient and instrument (PHQ-9 first), with excluded
/// patients and reasons.
pub fn label_outcomes(records: &[AssessmentRecord]) -> (Vec<OutcomeLabel>, Vec<Exclusion>) {
    let (pairs, excluded) = baseline_and_final(records);
    for e in &excluded {
        log::info!("outcomes: excluding {}: {}", e.patient_id, e.reason);
    }
    let mut labels = Vec::with_capacity(2 * pairs.len());
    for (b, f) in &pairs {
        for inst in Instrument::ALL {
            labels.push(classify(&b.patient_id, inst, b.total(inst), f.total(inst)));
        }
    }
    (labels, excluded)
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Covariates {
    pub age_group: Option<String>,
    pub gender: Option<String>,
    pub education: Option<String>,
}

pub const AGE_REFERENCE: &str = "26-35";
pub const GENDER_REFERENCE: &str = "Female";
pub const EDUCATION_REFERENCE: &str = "Bachelor Degree or Higher";

struct Factor {
    name: &'static str,
    reference: &'static str,
    get: fn(&Covariates) -> Option<&str>,
}

const FACTORS: [Factor; 3] = [
    Factor {
        name: "age",
        reference: AGE_REFERENCE,
        get: |c| c.age_group.as_deref(),
    },
    Factor {
        name: "gender",
        reference: GENDER_REFERENCE,
        get: |c| c.gender.as_deref(),
    },
    Factor {
        name: "education",
        reference: EDUCATION_REFERENCE,
        get: |c| c.education.as_deref(),
    },
];

#[derive(Debug, Clone, PartialEq)]
pub struct Design {
    pub x: DMatrix<f64>,
    pub names: Vec<String>,
    /// Rows of the complete-case subset, in input order.
    pub rows: Vec<usize>,
    pub dropped_missing: usize,
    pub references: Vec<(String, String)>,
}

/// Intercept, one indicator per non-reference cluster and, when `adjust` is
/// set, one-hot covariates against their reference levels. Subjects with a
/// missing covariate are dropped.
pub fn build_design(
    clusters: &[usize],
    n_clusters: usize,
    covariates: &[Option<&Covariates>],
    adjust: bool,
) -> Design {
    let rows: Vec<usize> = (0..clusters.len())
        .filter(|&i| {
            !adjust
                || covariates[i].is_some_and(|c| FACTORS.iter().all(|f| (f.get)(c).is_some()))
        })
        .collect();
    let dropped_missing = clusters.len() - rows.len();

    let mut names = vec!["intercept".to_string()];
    let mut columns: Vec<Vec<f64>> = vec![vec![1.0; rows.len()]];
    for l in 1..n_clusters {
        names.push(format!("cluster[{l}]"));
        columns.push(rows.iter().map(|&i| (clusters[i] == l) as u8 as f64).collect());
    }
    let mut references = Vec::new();
    if adjust {
        for f in &FACTORS {
            let levels: BTreeSet<&str> = rows
                .iter()
                .map(|&i| (f.get)(covariates[i].unwrap()).unwrap())
                .collect();
            let reference = if levels.contains(f.reference) {
                f.reference.to_string()
            } else {
                let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
                for &i in &rows {
                    *counts.entry((f.get)(covariates[i].unwrap()).unwrap()).or_default() += 1;
                }
                let modal = counts
                    .iter()
                    .max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(a.0)))
                    .map(|(k, _)| k.to_string())
                    .unwrap_or_default();
                log::warn!(
                    "{}: reference level '{}' absent, using '{}'",
                    f.name,
                    f.reference,
                    modal
                );
                modal
            };
            for level in levels.iter().filter(|l| **l != reference) {
                names.push(format!("{}[{}]", f.name, level));
                columns.push(
                    rows.iter()
                        .map(|&i| ((f.get)(covariates[i].unwrap()) == Some(level)) as u8 as f64)
                        .collect(),
                );
            }
            references.push((f.name.to_string(), reference));
        }
    }
    let x = DMatrix::from_fn(rows.len(), columns.len(), |i, j| columns[j][i]);
    Design {
        x,
        names,
        rows,
        dropped_missing,
        references,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegressionRow {
    pub outcome: Outcome,
    pub instrument: Instrument,
    pub term: String,
    pub odds_ratio: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub p: f64,
    pub n: usize,
    pub status: String,
}

#[derive(Debug)]
pub struct RegressionReport {
    pub rows: Vec<RegressionRow>,
    pub fits: Vec<(Outcome, Instrument, Result<LogisticFit>)>,
    pub references: Vec<(String, String)>,
}

/// Regresses every outcome on cluster membership (plus covariates when
/// `adjust`) separately per instrument and reports the cluster terms.
pub fn regress_outcomes(
    labels: &[OutcomeLabel],
    cluster_of: &HashMap<String, usize>,
    n_clusters: usize,
    covariates: &HashMap<String, Covariates>,
    adjust: bool,
) -> RegressionReport {
    let mut rows = Vec::new();
    let mut fits = Vec::new();
    let mut references = Vec::new();
    for inst in Instrument::ALL {
        let subset: Vec<&OutcomeLabel> = labels
            .iter()
            .filter(|l| l.instrument == inst && cluster_of.contains_key(&l.patient_id))
            .collect();
        let clusters: Vec<usize> = subset.iter().map(|l| cluster_of[&l.patient_id]).collect();
        let covs: Vec<Option<&Covariates>> =
            subset.iter().map(|l| covariates.get(&l.patient_id)).collect();
        let design = build_design(&clusters, n_clusters, &covs, adjust);
        if design.dropped_missing > 0 {
            log::info!(
                "{}: {} of {} patients dropped for missing covariates",
                inst.name(),
                design.dropped_missing,
                subset.len()
            );
        }
        references = design.references.clone();
        for outcome in Outcome::ALL {
            let y: Vec<f64> = design
                .rows
                .iter()
                .map(|&i| outcome.of(subset[i]) as u8 as f64)
                .collect();
            let fit = logistic_fit(&design.x, &y, &design.names);
            for l in 1..n_clusters {
                let term = format!("cluster[{l}]");
                let row = match &fit {
                    Ok(f) => {
                        let j = f.names.iter().position(|n| *n == term).unwrap();
                        let (lo, hi) = f.ci[j].unwrap_or((f64::NAN, f64::NAN));
                        RegressionRow {
                            outcome,
                            instrument: inst,
                            term,
                            odds_ratio: f.odds_ratios[j],
                            ci_low: lo,
                            ci_high: hi,
                            p: f.p_values[j],
                            n: f.n,
                            status: if f.ci[j].is_none() {
                                "separation".into()
                            } else if f.separated {
                                "separation_in_covariates".into()
                            } else if !f.converged {
                                "not_converged".into()
                            } else {
                                "ok".into()
                            },
                        }
                    }
                    Err(e) => RegressionRow {
                        outcome,
                        instrument: inst,
                        term,
                        odds_ratio: f64::NAN,
                        ci_low: f64::NAN,
                        ci_high: f64::NAN,
                        p: f64::NAN,
                        n: design.rows.len(),
                        status: e.to_string(),
                    },
                };
                rows.push(row);
            }
            fits.push((outcome, inst, fit));
        }
    }
    RegressionReport {
        rows,
        fits,
        references,
    }
}

pub const N_ITEMS: usize = PHQ9_ITEMS + GAD7_ITEMS;

#[derive(Debug, Clone, PartialEq)]
pub struct ItemTest {
    pub u: f64,
    pub p_raw: f64,
    pub p_bonferroni: f64,
    pub means: [f64; 2],
    /// Percentage of each cluster scoring at or above [`ITEM_THRESHOLD`].
    pub pct_at_threshold: [f64; 2],
}

/// Per-item Mann–Whitney tests between two groups of item vectors, with
/// Bonferroni correction over the 16 items.
pub fn compare_items(groups: [&[[u8; N_ITEMS]]; 2]) -> Result<Vec<ItemTest>> {
    if groups.iter().any(|g| g.is_empty()) {
        return Err(Error::Empty("cluster in item comparison"));
    }
    let mut tests = Vec::with_capacity(N_ITEMS);
    for j in 0..N_ITEMS {
        let col = |g: &[[u8; N_ITEMS]]| -> Vec<f64> { g.iter().map(|r| r[j] as f64).collect() };
        let (a, b) = (col(groups[0]), col(groups[1]));
        let mw = mann_whitney_u(&a, &b)?;
        let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
        let pct = |v: &[f64]| {
            100.0 * v.iter().filter(|&&s| s >= ITEM_THRESHOLD as f64).count() as f64 / v.len() as f64
        };
        tests.push(ItemTest {
            u: mw.u_x,
            p_raw: mw.p_two_sided,
            p_bonferroni: f64::NAN,
            means: [mean(&a), mean(&b)],
            pct_at_threshold: [pct(&a), pct(&b)],
        });
    }
    let raw: Vec<f64> = tests.iter().map(|t| t.p_raw).collect();
    for (t, p) in tests.iter_mut().zip(bonferroni(&raw)?) {
        t.p_bonferroni = p;
    }
    Ok(tests)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ItemRow {
    pub item: &'static str,
    pub instrument: Instrument,
    pub initial: ItemTest,
    pub final_: ItemTest,
}

/// Baseline and final item comparison between clusters 0 and 1.
pub fn baseline_item_comparison(
    records: &[AssessmentRecord],
    cluster_of: &HashMap<String, usize>,
) -> Result<Vec<ItemRow>> {
    let (pairs, _) = baseline_and_final(records);
    let mut initial: [Vec<[u8; N_ITEMS]>; 2] = [Vec::new(), Vec::new()];
    let mut last: [Vec<[u8; N_ITEMS]>; 2] = [Vec::new(), Vec::new()];
    for (b, f) in &pairs {
        match cluster_of.get(&b.patient_id) {
            Some(&l) if l < 2 => {
                initial[l].push(b.items());
                last[l].push(f.items());
            }
            Some(&l) => {
                return Err(Error::InvalidConfig(format!(
                    "item comparison needs two clusters, found label {l}"
                )))
            }
            None => {}
        }
    }
    let init = compare_items([&initial[0], &initial[1]])?;
    let fin = compare_items([&last[0], &last[1]])?;
    Ok(init
        .into_iter()
        .zip(fin)
        .enumerate()
        .map(|(j, (i, f))| ItemRow {
            item: ITEM_NAMES[j],
            instrument: if j < PHQ9_ITEMS {
                Instrument::Phq9
            } else {
                Instrument::Gad7
            },
            initial: i,
            final_: f,
        })
        .collect())
}

fn fmt(v: f64) -> String {
    if v.is_nan() {
        "NA".into()
    } else {
        v.to_string()
    }
}

pub fn write_outcomes_csv<W: Write>(out: W, labels: &[OutcomeLabel]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "patient_id",
        "instrument",
        "baseline",
        "final",
        "significant_change",
        "response",
        "remission",
        "deterioration",
    ])?;
    for l in labels {
        w.write_record([
            l.patient_id.clone(),
            l.instrument.name().to_string(),
            l.baseline.to_string(),
            l.final_total.to_string(),
            l.significant_change.to_string(),
            l.response.to_string(),
            l.remission.to_string(),
            l.deterioration.to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io("outcomes table", e))?;
    Ok(())
}

pub fn write_regression_csv<W: Write>(out: W, rows: &[RegressionRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "outcome", "measure", "odds_ratio", "ci_low", "ci_high", "p", "term", "n", "status",
    ])?;
    for r in rows {
        w.write_record([
            r.outcome.name().to_string(),
            r.instrument.name().to_string(),
            fmt(r.odds_ratio),
            fmt(r.ci_low),
            fmt(r.ci_high),
            fmt(r.p),
            r.term.clone(),
            r.n.to_string(),
            r.status.clone(),
        ])?;
    }
    w.flush().map_err(|e| Error::io("regression table", e))?;
    Ok(())
}

pub fn write_items_csv<W: Write>(out: W, rows: &[ItemRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "item",
        "instrument",
        "mean_c0_initial",
        "mean_c1_initial",
        "pct2_c0_initial",
        "pct2_c1_initial",
        "u_initial",
        "p_raw_initial",
        "p_initial",
        "mean_c0_final",
        "mean_c1_final",
        "pct2_c0_final",
        "pct2_c1_final",
        "u_final",
        "p_raw_final",
        "p_final",
    ])?;
    for r in rows {
        let mut rec = vec![r.item.to_string(), r.instrument.name().to_string()];
        for t in [&r.initial, &r.final_] {
            rec.extend([
                fmt(t.means[0]),
                fmt(t.means[1]),
                fmt(t.pct_at_threshold[0]),
                fmt(t.pct_at_threshold[1]),
                fmt(t.u),
                fmt(t.p_raw),
                fmt(t.p_bonferroni),
            ]);
        }
        w.write_record(rec)?;
    }
    w.flush().map_err(|e| Error::io("item table", e))?;
    Ok(())
}
