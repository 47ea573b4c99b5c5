//! File formats, cohort eligibility filtering and assessment-anchored
//! talk-turn windows.
//!
//! Emotion series are JSON lines
//! `{"patient_id": str, "timestamps": [days], "emotions": [[7 reals]]}`.
//! Assessments are CSV with header `patient_id,week,phq1..phq9,gad1..gad7`.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs::File;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::outcomes::Covariates;
use crate::types::{
    validate_series, AssessmentRecord, Instrument, TimeSeries, GAD7_ITEMS, PHQ9_ITEMS,
    SCHEDULED_WEEKS,
};

/// Assessments recorded later than this (in weeks) are rejected.
pub const MAX_RECORDED_WEEK: f64 = 13.5;

/// Problem found while reading one line or row of an input file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Diagnostic {
    pub line: usize,
    pub patient_id: Option<String>,
    pub message: String,
}

impl std::fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match &self.patient_id {
            Some(p) => write!(f, "line {} ({}): {}", self.line, p, self.message),
            None => write!(f, "line {}: {}", self.line, self.message),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Parsed<T> {
    pub items: Vec<T>,
    pub diagnostics: Vec<Diagnostic>,
}

#[derive(Serialize, Deserialize)]
struct SeriesRecord {
    patient_id: String,
    timestamps: Vec<f64>,
    emotions: Vec<Vec<f64>>,
}

pub fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| Error::io(path, e))
}

pub fn create(path: &Path) -> Result<std::io::BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    File::create(path)
        .map(std::io::BufWriter::new)
        .map_err(|e| Error::io(path, e))
}

/// Reads emotion series, skipping (with a diagnostic) malformed lines and
/// records that fail validation.
pub fn parse_emotion_series<R: BufRead>(reader: R) -> Result<Parsed<TimeSeries>> {
    let mut items = Vec::new();
    let mut diagnostics = Vec::new();
    let mut sum_warnings = 0usize;
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line.map_err(|e| Error::io(format!("line {line_no}"), e))?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: SeriesRecord = match serde_json::from_str(&line) {
            Ok(r) => r,
            Err(e) => {
                diagnostics.push(Diagnostic {
                    line: line_no,
                    patient_id: None,
                    message: format!("malformed JSON: {e}"),
                });
                continue;
            }
        };
        let series = TimeSeries::new(
            rec.patient_id,
            rec.timestamps,
            rec.emotions.into_iter().map(DVector::from_vec).collect(),
        );
        let report = validate_series(&series);
        if !report.is_ok() {
            let msgs: Vec<String> = report.violations.iter().map(|v| v.to_string()).collect();
            diagnostics.push(Diagnostic {
                line: line_no,
                patient_id: Some(series.patient_id.clone()),
                message: msgs.join("; "),
            });
            continue;
        }
        sum_warnings += report.sum_warnings.len();
        items.push(series);
    }
    if items.is_empty() && diagnostics.is_empty() {
        log::warn!("emotion series input is empty");
    }
    if sum_warnings > 0 {
        log::debug!("{sum_warnings} emotion vectors do not sum to 1");
    }
    if !diagnostics.is_empty() {
        log::warn!("skipped {} emotion series records", diagnostics.len());
    }
    Ok(Parsed { items, diagnostics })
}

pub fn read_emotion_series(path: &Path) -> Result<Parsed<TimeSeries>> {
    parse_emotion_series(open(path)?)
}

pub fn write_emotion_series<W: Write>(mut out: W, series: &[TimeSeries]) -> Result<()> {
    for s in series {
        let rec = SeriesRecord {
            patient_id: s.patient_id.clone(),
            timestamps: s.timestamps.clone(),
            emotions: s.observations.iter().map(|y| y.iter().copied().collect()).collect(),
        };
        serde_json::to_writer(&mut out, &rec)?;
        out.write_all(b"\n").map_err(|e| Error::io("series output", e))?;
    }
    out.flush().map_err(|e| Error::io("series output", e))
}

/// Snaps a recorded week to the nearest scheduled week; ties go to the
/// earlier one.
pub fn bin_week(recorded: f64) -> Option<u8> {
    if !recorded.is_finite() || !(0.0..=MAX_RECORDED_WEEK).contains(&recorded) {
        return None;
    }
    let mut best = SCHEDULED_WEEKS[0];
    for &w in &SCHEDULED_WEEKS[1..] {
        if (recorded - w as f64).abs() < (recorded - best as f64).abs() {
            best = w;
        }
    }
    Some(best)
}

fn assessment_header() -> Vec<String> {
    let mut h = vec!["patient_id".to_string(), "week".to_string()];
    h.extend((1..=PHQ9_ITEMS).map(|i| format!("phq{i}")));
    h.extend((1..=GAD7_ITEMS).map(|i| format!("gad{i}")));
    h
}

/// Reads assessments. Rows with out-of-range items or weeks are rejected
/// with a diagnostic; when two rows of a patient land in the same scheduled
/// week the later row wins.
pub fn parse_assessments<R: Read>(reader: R) -> Result<Parsed<AssessmentRecord>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    let expected = assessment_header();
    let index: Vec<usize> = expected
        .iter()
        .map(|name| {
            header
                .iter()
                .position(|h| h.eq_ignore_ascii_case(name))
                .ok_or_else(|| Error::Parse(format!("assessments: missing column '{name}'")))
        })
        .collect::<Result<_>>()?;

    let mut by_key: BTreeMap<(String, u8), (usize, AssessmentRecord)> = BTreeMap::new();
    let mut diagnostics = Vec::new();
    for (i, row) in rdr.records().enumerate() {
        let line = i + 2;
        let row = match row {
            Ok(r) => r,
            Err(e) => {
                diagnostics.push(Diagnostic {
                    line,
                    patient_id: None,
                    message: e.to_string(),
                });
                continue;
            }
        };
        let field = |k: usize| row.get(index[k]).unwrap_or("");
        let pid = field(0).to_string();
        let fail = |msg: String| Diagnostic {
            line,
            patient_id: Some(pid.clone()),
            message: msg,
        };
        let recorded: f64 = match field(1).parse() {
            Ok(w) => w,
            Err(_) => {
                diagnostics.push(fail(format!("invalid week '{}'", field(1))));
                continue;
            }
        };
        let Some(week) = bin_week(recorded) else {
            diagnostics.push(fail(format!(
                "week {recorded} outside [0, {MAX_RECORDED_WEEK}]"
            )));
            continue;
        };
        let mut items = [0u8; PHQ9_ITEMS + GAD7_ITEMS];
        let mut bad = None;
        for (j, item) in items.iter_mut().enumerate() {
            match field(j + 2).parse::<u8>() {
                Ok(v) if v <= 3 => *item = v,
                _ => {
                    bad = Some(format!("item {} = '{}' not in 0..=3", expected[j + 2], field(j + 2)));
                    break;
                }
            }
        }
        if let Some(msg) = bad {
            diagnostics.push(fail(msg));
            continue;
        }
        let mut phq9_items = [0u8; PHQ9_ITEMS];
        phq9_items.copy_from_slice(&items[..PHQ9_ITEMS]);
        let mut gad7_items = [0u8; GAD7_ITEMS];
        gad7_items.copy_from_slice(&items[PHQ9_ITEMS..]);
        let rec = AssessmentRecord {
            patient_id: pid.clone(),
            week,
            recorded_week: recorded,
            phq9_items,
            gad7_items,
        };
        if let Some((prev_line, _)) = by_key.insert((pid.clone(), week), (line, rec)) {
            diagnostics.push(fail(format!(
                "duplicate assessment for week {week}; replaces line {prev_line}"
            )));
        }
    }
    let items = by_key.into_values().map(|(_, r)| r).collect();
    Ok(Parsed { items, diagnostics })
}

pub fn read_assessments(path: &Path) -> Result<Parsed<AssessmentRecord>> {
    parse_assessments(open(path)?)
}

pub fn write_assessments_csv<W: Write>(out: W, records: &[AssessmentRecord]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(assessment_header())?;
    for r in records {
        let mut rec = vec![r.patient_id.clone(), r.recorded_week.to_string()];
        rec.extend(r.items().iter().map(|v| v.to_string()));
        w.write_record(rec)?;
    }
    w.flush().map_err(|e| Error::io("assessments output", e))
}

/// Reads `(patient_id, code)` diagnosis pairs.
pub fn parse_diagnoses<R: Read>(reader: R) -> Result<Vec<(String, String)>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let mut out = Vec::new();
    for row in rdr.records() {
        let row = row?;
        out.push((
            row.get(0).unwrap_or("").to_string(),
            row.get(1).unwrap_or("").to_string(),
        ));
    }
    Ok(out)
}

/// Reads demographic covariates from CSV with header
/// `patient_id,age_group,gender,education`; empty cells are missing.
pub fn parse_covariates<R: Read>(reader: R) -> Result<HashMap<String, Covariates>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let mut out = HashMap::new();
    let cell = |s: Option<&str>| s.filter(|v| !v.is_empty()).map(str::to_string);
    for row in rdr.records() {
        let row = row?;
        out.insert(
            row.get(0).unwrap_or("").to_string(),
            Covariates {
                age_group: cell(row.get(1)),
                gender: cell(row.get(2)),
                education: cell(row.get(3)),
            },
        );
    }
    Ok(out)
}

pub fn write_covariates_csv<W: Write>(out: W, rows: &[(String, Covariates)]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["patient_id", "age_group", "gender", "education"])?;
    for (pid, c) in rows {
        w.write_record([
            pid.as_str(),
            c.age_group.as_deref().unwrap_or(""),
            c.gender.as_deref().unwrap_or(""),
            c.education.as_deref().unwrap_or(""),
        ])?;
    }
    w.flush().map_err(|e| Error::io("covariates output", e))
}

/// Cluster labels sidecar: `series_id,cluster`.
pub fn write_labels_csv<W: Write>(out: W, ids: &[String], labels: &[usize]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["series_id", "cluster"])?;
    for (id, l) in ids.iter().zip(labels) {
        w.write_record([id.clone(), l.to_string()])?;
    }
    w.flush().map_err(|e| Error::io("labels output", e))
}

pub fn parse_labels<R: Read>(reader: R) -> Result<Vec<(String, usize)>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let mut out = Vec::new();
    for (i, row) in rdr.records().enumerate() {
        let row = row?;
        let label = row
            .get(1)
            .unwrap_or("")
            .parse()
            .map_err(|_| Error::Parse(format!("labels line {}: invalid cluster", i + 2)))?;
        out.push((row.get(0).unwrap_or("").to_string(), label));
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ShortHistory {
    /// Patients with fewer assessments than the rule inspects pass the gap
    /// check unconditionally.
    Skip,
    /// The gap bounds are checked on whatever pairs are available.
    ApplyToAvailable,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CohortRules {
    pub min_baseline_total: u32,
    pub min_talk_turns: usize,
    /// Allowed gap between consecutive early assessments, in weeks.
    pub gap_bounds: (f64, f64),
    pub gap_assessments: usize,
    pub short_history: ShortHistory,
    pub require_transcript: bool,
    pub excluded_diagnoses: BTreeSet<String>,
}

impl Default for CohortRules {
    fn default() -> Self {
        CohortRules {
            min_baseline_total: 10,
            min_talk_turns: 20,
            gap_bounds: (2.0, 4.0),
            gap_assessments: 5,
            short_history: ShortHistory::Skip,
            require_transcript: true,
            excluded_diagnoses: BTreeSet::new(),
        }
    }
}

impl CohortRules {
    pub fn validate(&self) -> Result<()> {
        let (lo, hi) = self.gap_bounds;
        if !(lo >= 0.0 && lo < hi) {
            return Err(Error::InvalidConfig(format!(
                "gap bounds must satisfy 0 <= low < high, got [{lo}, {hi}]"
            )));
        }
        if self.gap_assessments < 2 {
            return Err(Error::InvalidConfig(
                "gap rule needs at least two assessments".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Diagnosis,
    Transcript,
    AssessmentGap,
    BaselineSeverity,
    TalkTurns,
}

impl Stage {
    pub const ORDER: [Stage; 5] = [
        Stage::Diagnosis,
        Stage::Transcript,
        Stage::AssessmentGap,
        Stage::BaselineSeverity,
        Stage::TalkTurns,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Stage::Diagnosis => "diagnosis",
            Stage::Transcript => "transcript",
            Stage::AssessmentGap => "assessment_gap",
            Stage::BaselineSeverity => "baseline_severity",
            Stage::TalkTurns => "talk_turns",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FunnelStage {
    pub stage: Stage,
    pub excluded: usize,
    pub remaining: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Funnel {
    pub input: usize,
    pub stages: Vec<FunnelStage>,
    pub eligible: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CohortFilter {
    /// Eligible patient ids, sorted.
    pub eligible: Vec<String>,
    pub excluded: BTreeMap<String, Stage>,
    pub funnel: Funnel,
}

fn gap_rule_passes(records: &[&AssessmentRecord], rules: &CohortRules) -> bool {
    let n = rules.gap_assessments;
    if records.len() < n && rules.short_history == ShortHistory::Skip {
        return true;
    }
    let (lo, hi) = rules.gap_bounds;
    records
        .iter()
        .take(n)
        .collect::<Vec<_>>()
        .windows(2)
        .all(|w| {
            let gap = w[1].recorded_week - w[0].recorded_week;
            (lo..=hi).contains(&gap)
        })
}

/// First failing stage for one patient, or `None` if eligible.
fn verdict(
    series: Option<&TimeSeries>,
    records: &[&AssessmentRecord],
    codes: Option<&BTreeSet<&str>>,
    rules: &CohortRules,
) -> Option<Stage> {
    if codes.is_some_and(|c| c.iter().any(|code| rules.excluded_diagnoses.contains(*code))) {
        return Some(Stage::Diagnosis);
    }
    if rules.require_transcript && series.is_none_or(|s| s.is_empty()) {
        return Some(Stage::Transcript);
    }
    if !gap_rule_passes(records, rules) {
        return Some(Stage::AssessmentGap);
    }
    let severe = records.iter().find(|r| r.week == 0).is_some_and(|b| {
        Instrument::ALL
            .iter()
            .any(|&i| b.total(i) >= rules.min_baseline_total)
    });
    if !severe {
        return Some(Stage::BaselineSeverity);
    }
    if series.map_or(0, |s| s.len()) < rules.min_talk_turns {
        return Some(Stage::TalkTurns);
    }
    None
}

/// Applies the eligibility rules in funnel order to every patient that
/// appears in either input.
pub fn filter_cohort(
    series: &[TimeSeries],
    assessments: &[AssessmentRecord],
    diagnoses: Option<&[(String, String)]>,
    rules: &CohortRules,
) -> CohortFilter {
    let by_series: HashMap<&str, &TimeSeries> =
        series.iter().map(|s| (s.patient_id.as_str(), s)).collect();
    let mut by_patient: BTreeMap<&str, Vec<&AssessmentRecord>> = BTreeMap::new();
    for s in series {
        by_patient.entry(s.patient_id.as_str()).or_default();
    }
    for r in assessments {
        by_patient.entry(r.patient_id.as_str()).or_default().push(r);
    }
    let mut codes: HashMap<&str, BTreeSet<&str>> = HashMap::new();
    if let Some(d) = diagnoses {
        for (pid, code) in d {
            codes.entry(pid.as_str()).or_default().insert(code.as_str());
        }
    }
    let empty = BTreeSet::new();

    let mut eligible = Vec::new();
    let mut excluded = BTreeMap::new();
    for (pid, recs) in by_patient.iter_mut() {
        recs.sort_by(|a, b| a.recorded_week.total_cmp(&b.recorded_week));
        let patient_codes = diagnoses.map(|_| codes.get(pid).unwrap_or(&empty));
        match verdict(by_series.get(pid).copied(), recs, patient_codes, rules) {
            None => eligible.push(pid.to_string()),
            Some(stage) => {
                excluded.insert(pid.to_string(), stage);
            }
        }
    }

    let input = by_patient.len();
    let mut remaining = input;
    let stages = Stage::ORDER
        .iter()
        .map(|&stage| {
            let n = excluded.values().filter(|&&s| s == stage).count();
            remaining -= n;
            FunnelStage {
                stage,
                excluded: n,
                remaining,
            }
        })
        .collect();
    CohortFilter {
        funnel: Funnel {
            input,
            stages,
            eligible: eligible.len(),
        },
        eligible,
        excluded,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Window {
    pub week: u8,
    pub recorded_week: f64,
    /// Indices into the series' talk turns.
    pub turns: Vec<usize>,
}

/// Talk turns associated with each follow-up assessment: after the previous
/// assessment, no earlier than three weeks before the current one, and no
/// later than the current one. `assessments` must be one patient's records
/// sorted by time.
pub fn anchor_talk_turns(series: &TimeSeries, assessments: &[AssessmentRecord]) -> Vec<Window> {
    assessments
        .windows(2)
        .map(|pair| {
            let prev = pair[0].recorded_week * 7.0;
            let cur = pair[1].recorded_week * 7.0;
            let floor = cur - 21.0;
            let turns = series
                .timestamps
                .iter()
                .enumerate()
                .filter(|&(_, &t)| t > prev && t >= floor && t <= cur)
                .map(|(k, _)| k)
                .collect();
            Window {
                week: pair[1].week,
                recorded_week: pair[1].recorded_week,
                turns,
            }
        })
        .collect()
}

/// The series restricted to turns that fall in any assessment window.
pub fn anchored_series(series: &TimeSeries, windows: &[Window]) -> TimeSeries {
    let keep: BTreeSet<usize> = windows.iter().flat_map(|w| w.turns.iter().copied()).collect();
    TimeSeries::new(
        series.patient_id.clone(),
        keep.iter().map(|&k| series.timestamps[k]).collect(),
        keep.iter().map(|&k| series.observations[k].clone()).collect(),
    )
}

/// Restricts each series to its anchored turns, dropping series left empty.
/// Returns the kept series and the ids of dropped ones.
pub fn anchor_cohort(
    series: &[TimeSeries],
    assessments: &[AssessmentRecord],
) -> (Vec<TimeSeries>, Vec<String>) {
    let mut by_patient: HashMap<&str, Vec<AssessmentRecord>> = HashMap::new();
    for r in assessments {
        by_patient.entry(r.patient_id.as_str()).or_default().push(r.clone());
    }
    let mut kept = Vec::new();
    let mut dropped = Vec::new();
    for s in series {
        let mut recs = by_patient.remove(s.patient_id.as_str()).unwrap_or_default();
        recs.sort_by(|a, b| a.recorded_week.total_cmp(&b.recorded_week));
        let anchored = anchored_series(s, &anchor_talk_turns(s, &recs));
        if anchored.is_empty() {
            dropped.push(s.patient_id.clone());
        } else {
            kept.push(anchored);
        }
    }
    (kept, dropped)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(pid: &str, recorded: f64, phq: u8, gad: u8) -> AssessmentRecord {
        let mut phq9_items = [0u8; PHQ9_ITEMS];
        let mut left = phq;
        for v in phq9_items.iter_mut() {
            *v = left.min(3);
            left -= *v;
        }
        let mut gad7_items = [0u8; GAD7_ITEMS];
        let mut left = gad;
        for v in gad7_items.iter_mut() {
            *v = left.min(3);
            left -= *v;
        }
        AssessmentRecord {
            patient_id: pid.into(),
            week: bin_week(recorded).unwrap(),
            recorded_week: recorded,
            phq9_items,
            gad7_items,
        }
    }

    fn series(pid: &str, n: usize) -> TimeSeries {
        TimeSeries::new(
            pid,
            (0..n).map(|k| k as f64 * 2.0).collect(),
            vec![DVector::from_element(7, 1.0 / 7.0); n],
        )
    }

    #[test]
    fn parses_valid_and_skips_bad_records() {
        let text = concat!(
            r#"{"patient_id":"a","timestamps":[0,1,2.5],"emotions":[[0.1,0.1,0.1,0.1,0.4,0.1,0.1],[0,0,0,1,0,0,0],[0.2,0.1,0.1,0.1,0.3,0.1,0.1]]}"#,
            "\n",
            r#"{"patient_id":"b","timestamps":[0],"emotions":[[0.1,0.1,0.1,0.1,0.5,0.1]]}"#,
            "\n",
            "{not json\n"
        );
        let parsed = parse_emotion_series(text.as_bytes()).unwrap();
        assert_eq!(parsed.items.len(), 1);
        assert_eq!(parsed.items[0].len(), 3);
        assert_eq!(parsed.diagnostics.len(), 2);
        assert!(parsed.diagnostics[0].message.contains("dimension 6 ≠ 7"));
        assert_eq!(parsed.diagnostics[1].line, 3);
    }

    #[test]
    fn empty_input_is_empty_list() {
        let parsed = parse_emotion_series("".as_bytes()).unwrap();
        assert!(parsed.items.is_empty() && parsed.diagnostics.is_empty());
    }

    #[test]
    fn binning() {
        assert_eq!(bin_week(4.0), Some(3));
        assert_eq!(bin_week(4.5), Some(3));
        assert_eq!(bin_week(4.51), Some(6));
        assert_eq!(bin_week(13.4), Some(12));
        assert_eq!(bin_week(14.0), None);
        assert_eq!(bin_week(-0.5), None);
    }

    #[test]
    fn assessment_totals_and_rejections() {
        let mut text = assessment_header().join(",");
        text.push('\n');
        text.push_str(&format!("a,0,{}\n", vec!["0"; 16].join(",")));
        text.push_str(&format!("a,4,{}\n", vec!["3"; 16].join(",")));
        text.push_str(&format!("b,0,{},4\n", vec!["1"; 15].join(",")));
        let parsed = parse_assessments(text.as_bytes()).unwrap();
        assert_eq!(parsed.items.len(), 2);
        assert_eq!((parsed.items[0].phq9_total(), parsed.items[0].gad7_total()), (0, 0));
        assert_eq!((parsed.items[1].phq9_total(), parsed.items[1].gad7_total()), (27, 21));
        assert_eq!(parsed.items[1].week, 3);
        assert_eq!(parsed.diagnostics.len(), 1);
        assert_eq!(parsed.diagnostics[0].line, 4);
    }

    #[test]
    fn assessment_round_trip() {
        let recs = vec![rec("a", 0.0, 15, 12), rec("a", 3.2, 9, 8)];
        let mut buf = Vec::new();
        write_assessments_csv(&mut buf, &recs).unwrap();
        assert_eq!(parse_assessments(buf.as_slice()).unwrap().items, recs);
    }

    #[test]
    fn funnel_examples() {
        let rules = CohortRules::default();
        let s = vec![series("mild", 30), series("quiet", 19), series("gap5", 30), series("gap4", 30)];
        let mut a = vec![rec("mild", 0.0, 9, 9), rec("quiet", 0.0, 14, 3)];
        for (i, w) in [0.0, 3.0, 8.0, 11.0, 12.0].iter().enumerate() {
            a.push(rec("gap5", *w, if i == 0 { 14 } else { 8 }, 5));
        }
        for (i, w) in [0.0, 3.0, 8.0, 11.0].iter().enumerate() {
            a.push(rec("gap4", *w, if i == 0 { 14 } else { 8 }, 5));
        }
        let f = filter_cohort(&s, &a, None, &rules);
        assert_eq!(f.excluded["mild"], Stage::BaselineSeverity);
        assert_eq!(f.excluded["quiet"], Stage::TalkTurns);
        assert_eq!(f.excluded["gap5"], Stage::AssessmentGap);
        assert_eq!(f.eligible, vec!["gap4".to_string()]);
        let excluded: usize = f.funnel.stages.iter().map(|s| s.excluded).sum();
        assert_eq!(excluded + f.funnel.eligible, f.funnel.input);

        let strict = CohortRules {
            short_history: ShortHistory::ApplyToAvailable,
            ..CohortRules::default()
        };
        let f = filter_cohort(&s, &a, None, &strict);
        assert_eq!(f.excluded["gap4"], Stage::AssessmentGap);
    }

    #[test]
    fn diagnosis_and_transcript_stages() {
        let rules = CohortRules {
            excluded_diagnoses: ["F20".to_string()].into_iter().collect(),
            ..CohortRules::default()
        };
        let s = vec![series("x", 30)];
        let a = vec![rec("x", 0.0, 14, 3), rec("y", 0.0, 14, 3)];
        let d = vec![("x".to_string(), "F20".to_string())];
        let f = filter_cohort(&s, &a, Some(&d), &rules);
        assert_eq!(f.excluded["x"], Stage::Diagnosis);
        assert_eq!(f.excluded["y"], Stage::Transcript);
        assert_eq!(f.funnel.stages[0].remaining, 1);
    }

    #[test]
    fn anchoring_examples() {
        let s = TimeSeries::new(
            "p",
            vec![0.0, 30.0, 31.0, 42.0, 50.0],
            vec![DVector::zeros(7); 5],
        );
        let regular = [rec("p", 3.0, 10, 10), rec("p", 6.0, 10, 10)];
        let w = anchor_talk_turns(&s, &regular);
        assert_eq!(w.len(), 1);
        assert_eq!(w[0].turns, vec![1, 2, 3]);

        let missed = [rec("p", 3.0, 10, 10), rec("p", 9.0, 10, 10)];
        let w = anchor_talk_turns(&s, &missed);
        assert_eq!(w[0].turns, vec![3, 4]);

        let baseline_only = [rec("p", 0.0, 10, 10)];
        assert!(anchor_talk_turns(&s, &baseline_only).is_empty());
    }

    #[test]
    fn labels_round_trip() {
        let ids = vec!["a".to_string(), "b".to_string()];
        let mut buf = Vec::new();
        write_labels_csv(&mut buf, &ids, &[1, 0]).unwrap();
        assert_eq!(
            parse_labels(buf.as_slice()).unwrap(),
            vec![("a".to_string(), 1), ("b".to_string(), 0)]
        );
    }
}
