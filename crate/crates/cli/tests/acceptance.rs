//! Acceptance criteria 1–9. Prints one `[PASS]`/`[FAIL]` line per criterion
//! and exits non-zero if any fails.

use std::collections::HashMap;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{Binomial, DiscreteCDF};
use vista_core::em::{fit, FitConfig};
use vista_core::lgssm::{joint_gaussian_oracle, smooth, step_transition};
use vista_core::metrics::adjusted_rand_index;
use vista_core::network::{
    build_network, cluster_network, out_expected_influence, pseudoinverse, rank_scores,
    transition_matrix,
};
use vista_core::outcomes::{classify, label_outcomes, regress_outcomes, Outcome};
use vista_core::stats::{bonferroni, logistic_fit, mann_whitney_exact, mann_whitney_u};
use vista_core::synthetic::{
    random_parameters, random_timestamps, sadness_driven_cluster, sample_cohort, sample_series,
    well_separated,
};
use vista_core::{AssessmentRecord, Emotion, Instrument, TimeSeries};

/// Entries uniform with unit variance.
fn random_matrix<R: Rng>(r: usize, c: usize, rng: &mut R) -> DMatrix<f64> {
    DMatrix::from_fn(r, c, |_, _| rng.random_range(-1.0..1.0) * 3f64.sqrt())
}

/// Minimum-norm least-squares solution of `a z = b` for full-rank `a`, by QR.
fn least_squares(a: &DMatrix<f64>, b: &DVector<f64>) -> DVector<f64> {
    if a.nrows() >= a.ncols() {
        let (q, r) = a.clone().qr().unpack();
        r.solve_upper_triangular(&(q.transpose() * b)).unwrap()
    } else {
        let (q, r) = a.transpose().qr().unpack();
        q * r.transpose().solve_lower_triangular(b).unwrap()
    }
}

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict {
        pass,
        detail: detail.into(),
    }
}

fn within_budget(elapsed: Duration, limit: Duration) -> bool {
    elapsed <= limit
}

fn ac1_filter_oracle() -> Verdict {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let (mut worst_ll, mut worst_mean) = (0.0f64, 0.0f64);
    let mut failures = 0;
    for _ in 0..100 {
        let dx = rng.random_range(1..=4);
        let dy = rng.random_range(1..=4);
        let len = rng.random_range(1..=6);
        let params = random_parameters(dx, dy, &mut rng);
        let ts = random_timestamps(len, &mut rng);
        let series = sample_series("r", &params, &ts, &mut rng, false).unwrap().series;
        let (f, s) = smooth(&series, &params).unwrap();
        let o = joint_gaussian_oracle(&series, &params).unwrap();
        let ll_err = (f.log_likelihood - o.log_likelihood).abs() / f.log_likelihood.abs().max(1.0);
        let mean_err = (0..len)
            .map(|k| (&s.smoothed_means[k] - &o.smoothed_means[k]).amax())
            .fold(0.0, f64::max);
        worst_ll = worst_ll.max(ll_err);
        worst_mean = worst_mean.max(mean_err);
        if ll_err > 1e-8 || mean_err > 1e-7 {
            failures += 1;
        }
    }
    let elapsed = start.elapsed();
    verdict(
        failures == 0 && within_budget(elapsed, Duration::from_secs(10)),
        format!(
            "100 instances, {failures} mismatches, max rel loglik err {worst_ll:.1e}, max smoothed-mean err {worst_mean:.1e}, {:.2}s",
            elapsed.as_secs_f64()
        ),
    )
}

fn random_cohort(rng: &mut ChaCha8Rng, clusters: usize) -> Vec<TimeSeries> {
    let models: Vec<_> = (0..clusters).map(|_| random_parameters(2, 3, rng)).collect();
    (0..30)
        .map(|i| {
            let len = rng.random_range(4..=10);
            let ts = random_timestamps(len, rng);
            sample_series(&format!("s{i}"), &models[i % clusters], &ts, rng, false)
                .unwrap()
                .series
        })
        .collect()
}

fn ac2_monotonicity() -> Verdict {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst_drop = 0.0f64;
    let mut bad = 0;
    for i in 0..50u64 {
        let m = 1 + (i % 3) as usize;
        let data = random_cohort(&mut rng, m.max(2));
        let config = FitConfig {
            clusters: m,
            latent_dim: 2,
            max_iters: 40,
            seed: i,
            ..FitConfig::default()
        };
        let f = fit(&data, &config).unwrap();
        let drop = f
            .loglik_trace
            .windows(2)
            .map(|w| w[0] - w[1])
            .fold(0.0, f64::max);
        worst_drop = worst_drop.max(drop);
        if drop > 1e-6 {
            bad += 1;
        }
    }
    let elapsed = start.elapsed();
    verdict(
        bad == 0 && within_budget(elapsed, Duration::from_secs(120)),
        format!(
            "50 cohorts, {bad} non-monotone traces, largest decrease {worst_drop:.1e}, {:.1}s",
            elapsed.as_secs_f64()
        ),
    )
}

fn ac3_recovery() -> Verdict {
    let start = Instant::now();
    let mut aris = Vec::new();
    for seed in 0..10u64 {
        let cohort = sample_cohort(&well_separated(200, seed)).unwrap();
        let f = fit(&cohort.series, &FitConfig { seed, ..FitConfig::default() }).unwrap();
        aris.push(adjusted_rand_index(&f.labels, &cohort.labels));
    }
    let elapsed = start.elapsed();
    let good = aris.iter().filter(|&&a| a >= 0.9).count();
    let listed: Vec<String> = aris.iter().map(|a| format!("{a:.3}")).collect();
    verdict(
        good >= 9 && within_budget(elapsed, Duration::from_secs(300)),
        format!(
            "{good}/10 seeds with ARI >= 0.9 [{}], {:.1}s",
            listed.join(" "),
            elapsed.as_secs_f64()
        ),
    )
}

const PIPELINE_ARTIFACTS: [&str; 10] = [
    "model.json",
    "labels.csv",
    "loglik.csv",
    "assignments.csv",
    "edges.csv",
    "centrality.csv",
    "outcomes.csv",
    "regression.csv",
    "items.csv",
    "manifest.json",
];

const DETERMINISTIC_ARTIFACTS: [&str; 9] = [
    "model.json",
    "labels.csv",
    "loglik.csv",
    "assignments.csv",
    "edges.csv",
    "centrality.csv",
    "outcomes.csv",
    "regression.csv",
    "items.csv",
];

fn run_pipeline(out: &Path) -> Result<Duration, String> {
    let start = Instant::now();
    let status = Command::new(env!("CARGO_BIN_EXE_vista"))
        .args(["pipeline", "--preset", "paper-shaped", "--n", "300", "--seed", "7", "--threads", "1"])
        .arg("--out")
        .arg(out)
        .output()
        .map_err(|e| e.to_string())?;
    if !status.status.success() {
        return Err(format!(
            "exit {:?}: {}",
            status.status.code(),
            String::from_utf8_lossy(&status.stderr)
        ));
    }
    Ok(start.elapsed())
}

fn ac4_pipeline(dir: &Path) -> Verdict {
    let elapsed = match run_pipeline(dir) {
        Ok(t) => t,
        Err(e) => return verdict(false, format!("pipeline failed: {e}")),
    };
    let missing: Vec<&str> = PIPELINE_ARTIFACTS
        .iter()
        .copied()
        .filter(|f| std::fs::metadata(dir.join(f)).map_or(true, |m| m.len() == 0))
        .collect();
    let rows = |f: &str| {
        std::fs::read_to_string(dir.join(f))
            .map(|t| t.lines().count().saturating_sub(1))
            .unwrap_or(0)
    };
    let model = std::fs::read_to_string(dir.join("model.json")).unwrap_or_default();
    let model: serde_json::Value = serde_json::from_str(&model).unwrap_or_default();
    let shape_ok = model["M"] == 2 && model["d_x"] == 7 && model["d_y"] == 7;
    let ok = missing.is_empty()
        && shape_ok
        && rows("edges.csv") == 2 * 49
        && rows("centrality.csv") == 2 * 7
        && within_budget(elapsed, Duration::from_secs(600));
    verdict(
        ok,
        format!(
            "pipeline on 300 paper-shaped series: missing {:?}, {} edge rows, {} centrality rows, {} regression rows, {:.1}s",
            missing,
            rows("edges.csv"),
            rows("centrality.csv"),
            rows("regression.csv"),
            elapsed.as_secs_f64()
        ),
    )
}

fn ac5_network() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut penrose = 0.0f64;
    for _ in 0..100 {
        let (r, c) = [(7, 7), (7, 10), (10, 7)][rng.random_range(0..3)];
        let a = if rng.random_bool(0.3) {
            let k = rng.random_range(1..=r.min(c));
            random_matrix(r, k, &mut rng) * random_matrix(k, c, &mut rng)
        } else {
            random_matrix(r, c, &mut rng)
        };
        let p = pseudoinverse(&a);
        let ap = &a * &p;
        let pa = &p * &a;
        for err in [
            (&ap * &a - &a).amax(),
            (&pa * &p - &p).amax(),
            (&ap - ap.transpose()).amax(),
            (&pa - pa.transpose()).amax(),
        ] {
            penrose = penrose.max(err);
        }
    }

    let mut transition = 0.0f64;
    for _ in 0..100 {
        let dx = rng.random_range(1..=10);
        let params = random_parameters(dx, 7, &mut rng);
        let delta = rng.random_range(1.0..14.0);
        let c = &params.emission;
        let mut c_pinv = DMatrix::zeros(dx, 7);
        for j in 0..7 {
            let e = DVector::from_fn(7, |i, _| (i == j) as u8 as f64);
            c_pinv.set_column(j, &least_squares(c, &e));
        }
        let oracle = c * step_transition(&params.generator, delta) * c_pinv;
        transition = transition.max((transition_matrix(&params, delta) - oracle).amax());
    }

    let identity = build_network(DMatrix::identity(7, 7), 1.0).unwrap();
    let identity_zero = out_expected_influence(&identity).iter().all(|&v| v == 0.0);

    let planted = sadness_driven_cluster([0.2; 7], 0.002, 0.004);
    let net = cluster_network(&planted, 1.0).unwrap();
    let top = rank_scores(&out_expected_influence(&net)).order[0];
    let sadness_first = top == Emotion::Sadness.index();

    verdict(
        penrose <= 1e-9 && transition <= 1e-9 && identity_zero && sadness_first,
        format!(
            "Penrose max err {penrose:.1e}, least-squares transition err {transition:.1e}, identity outEI zero {identity_zero}, top node {}",
            Emotion::from_index(top).map_or("?", |e| e.name())
        ),
    )
}

fn two_by_two(a: usize, b: usize, c: usize, d: usize) -> (DMatrix<f64>, Vec<f64>) {
    let mut x = Vec::new();
    let mut y = Vec::new();
    for (exposed, case, count) in [(1.0, 1.0, a), (1.0, 0.0, b), (0.0, 1.0, c), (0.0, 0.0, d)] {
        for _ in 0..count {
            x.push(exposed);
            y.push(case);
        }
    }
    let n = x.len();
    (DMatrix::from_fn(n, 2, |i, j| if j == 0 { 1.0 } else { x[i] }), y)
}

fn ac6_statistics() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut worst = (0.0f64, 0, 0);
    for _ in 0..200 {
        let nx = rng.random_range(1..=15);
        let ny = rng.random_range(1..=16 - nx);
        let x: Vec<f64> = (0..nx).map(|_| rng.random::<f64>()).collect();
        let y: Vec<f64> = (0..ny).map(|_| rng.random::<f64>() + 0.2).collect();
        let gap = (mann_whitney_u(&x, &y).unwrap().p_two_sided - mann_whitney_exact(&x, &y).unwrap()).abs();
        if gap > worst.0 {
            worst = (gap, nx, ny);
        }
    }
    let mwu_ok = worst.0 <= 0.03;

    let names = vec!["intercept".to_string(), "exposed".to_string()];
    let (x, y) = two_by_two(40, 10, 20, 30);
    let f = logistic_fit(&x, &y, &names).unwrap();
    let logit_err = (f.estimates[1] - 6f64.ln()).abs();
    let logit_ok = logit_err <= 1e-8 && (f.odds_ratios[1] - 6.0).abs() < 1e-7;

    let bonf_ok = bonferroni(&[0.01, 0.02, 0.3, 0.5]).unwrap() == vec![0.04, 0.08, 1.0, 1.0];

    verdict(
        mwu_ok && logit_ok && bonf_ok,
        format!(
            "MWU normal vs exact max gap {:.3} at n_x={}, n_y={} (limit 0.03); logistic ln OR err {logit_err:.1e} (OR {:.6}); Bonferroni exact {bonf_ok}",
            worst.0, worst.1, worst.2, f.odds_ratios[1]
        ),
    )
}

fn record(pid: &str, week: u8, phq9: u32, gad7: u32) -> AssessmentRecord {
    let spread = |total: u32, items: &mut [u8]| {
        let mut left = total;
        for it in items.iter_mut() {
            let v = left.min(3);
            *it = v as u8;
            left -= v;
        }
        assert_eq!(left, 0);
    };
    let mut phq9_items = [0u8; 9];
    let mut gad7_items = [0u8; 7];
    spread(phq9, &mut phq9_items);
    spread(gad7, &mut gad7_items);
    AssessmentRecord {
        patient_id: pid.into(),
        week,
        recorded_week: week as f64,
        phq9_items,
        gad7_items,
    }
}

fn ac7_outcome_labels() -> Verdict {
    let records = vec![
        record("a", 0, 15, 15),
        record("a", 12, 8, 8),
        record("b", 0, 12, 12),
        record("b", 12, 9, 9),
        record("c", 0, 10, 10),
        record("c", 12, 15, 15),
    ];
    let (labels, excluded) = label_outcomes(&records);
    let get = |pid: &str| {
        labels
            .iter()
            .find(|l| l.patient_id == pid && l.instrument == Instrument::Phq9)
            .cloned()
            .unwrap()
    };
    let (a, b, c) = (get("a"), get("b"), get("c"));
    let ok = excluded.is_empty()
        && labels.len() == 6
        && a.significant_change
        && !a.deterioration
        && !b.significant_change
        && c.deterioration
        && !c.significant_change
        && classify("x", Instrument::Gad7, 15, 8).significant_change;
    verdict(
        ok,
        format!(
            "15->8 significant {}, 12->9 significant {}, 10->15 deterioration {}",
            a.significant_change, b.significant_change, c.deterioration
        ),
    )
}

fn ac8_null_calibration() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let replicates = 100u64;
    let mut rejections = 0u64;
    for _ in 0..replicates {
        let mut labels = Vec::new();
        let mut cluster_of = HashMap::new();
        for i in 0..1000 {
            let pid = format!("p{i}");
            let baseline = rng.random_range(10..=27);
            let final_total = rng.random_range(0..=27);
            labels.push(classify(&pid, Instrument::Phq9, baseline, final_total));
            cluster_of.insert(pid, rng.random_range(0..2usize));
        }
        let report = regress_outcomes(&labels, &cluster_of, 2, &HashMap::new(), false);
        let row = report
            .rows
            .iter()
            .find(|r| r.outcome == Outcome::Response && r.instrument == Instrument::Phq9)
            .unwrap();
        if row.p < 0.05 {
            rejections += 1;
        }
    }
    let binom = Binomial::new(0.05, replicates).unwrap();
    let (lo, hi) = (binom.inverse_cdf(0.005), binom.inverse_cdf(0.995));
    verdict(
        (lo..=hi).contains(&rejections),
        format!("{rejections}/{replicates} rejections at 0.05, 99% binomial interval [{lo}, {hi}]"),
    )
}

fn ac9_determinism(first: &Path, second: &Path) -> Verdict {
    if let Err(e) = run_pipeline(second) {
        return verdict(false, format!("second run failed: {e}"));
    }
    let differing: Vec<&str> = DETERMINISTIC_ARTIFACTS
        .iter()
        .copied()
        .filter(|f| {
            let a = std::fs::read(first.join(f));
            let b = std::fs::read(second.join(f));
            !matches!((a, b), (Ok(x), Ok(y)) if x == y)
        })
        .collect();
    verdict(
        differing.is_empty(),
        format!(
            "{} artifacts compared across two identical runs, differing: {:?}",
            DETERMINISTIC_ARTIFACTS.len(),
            differing
        ),
    )
}

fn main() {
    let scratch = tempfile::tempdir().expect("temporary directory");
    let run_a = scratch.path().join("a");
    let run_b = scratch.path().join("b");

    let criteria: Vec<(&str, Box<dyn Fn() -> Verdict>)> = vec![
        ("AC1 filter/oracle equivalence", Box::new(ac1_filter_oracle)),
        ("AC2 EM monotonicity", Box::new(ac2_monotonicity)),
        ("AC3 cluster recovery", Box::new(ac3_recovery)),
        ("AC4 paper-shaped pipeline", Box::new(|| ac4_pipeline(&run_a))),
        ("AC5 network correctness", Box::new(ac5_network)),
        ("AC6 statistics oracles", Box::new(ac6_statistics)),
        ("AC7 outcome label definitions", Box::new(ac7_outcome_labels)),
        ("AC8 null calibration", Box::new(ac8_null_calibration)),
        ("AC9 determinism", Box::new(|| ac9_determinism(&run_a, &run_b))),
    ];

    let filters: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let criteria: Vec<_> = criteria
        .into_iter()
        .filter(|(name, _)| filters.is_empty() || filters.iter().any(|f| name.starts_with(f.as_str())))
        .collect();

    let mut failed = 0;
    for (name, check) in &criteria {
        let result = catch_unwind(AssertUnwindSafe(check))
            .unwrap_or_else(|_| verdict(false, "panicked"));
        if !result.pass {
            failed += 1;
        }
        println!(
            "[{}] {name}: {}",
            if result.pass { "PASS" } else { "FAIL" },
            result.detail
        );
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
