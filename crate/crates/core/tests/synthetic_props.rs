use proptest::prelude::*;
use statrs::distribution::{Binomial, DiscreteCDF};
use vista_core::ingest::{parse_emotion_series, write_emotion_series};
use vista_core::lgssm::noiseless_trajectory;
use vista_core::synthetic::{
    paper_shaped, sample_cohort, sample_series, sample_timestamps, series_rng, well_separated,
    InterArrival, TimestampModel,
};
use vista_core::TimeSeries;

#[test]
fn exponential_gaps_have_configured_mean() {
    let model = TimestampModel {
        count_min: 20_000,
        count_max: 20_000,
        inter_arrival: InterArrival::Exponential { mean: 2.3 },
        horizon: f64::INFINITY,
    };
    let ts = sample_timestamps(&model, &mut series_rng(3, 0));
    let n = (ts.len() - 1) as f64;
    let mean = ts.last().unwrap() / n;
    assert!((mean - 2.3).abs() < 4.0 * 2.3 / n.sqrt(), "mean gap {mean}");
}

#[test]
fn sample_mean_tracks_noiseless_trajectory() {
    let params = well_separated(1, 0).clusters.remove(1);
    let grid: Vec<f64> = (0..8).map(|k| 3.0 * k as f64).collect();
    let n = 3000;
    let draws: Vec<TimeSeries> = (0..n)
        .map(|i| sample_series("m", &params, &grid, &mut series_rng(8, i), false).unwrap().series)
        .collect();
    let truth = noiseless_trajectory(&params, &grid).unwrap();
    for k in 0..grid.len() {
        for d in 0..7 {
            let vals: Vec<f64> = draws.iter().map(|s| s.observations[k][d]).collect();
            let mean = vals.iter().sum::<f64>() / n as f64;
            let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
            let se = (var / n as f64).sqrt();
            assert!((mean - truth[k][d]).abs() < 4.5 * se, "step {k} channel {d}");
        }
    }
}

#[test]
fn label_counts_fall_in_binomial_interval() {
    let n = 200u64;
    let binom = Binomial::new(0.32, n).unwrap();
    let lo = binom.inverse_cdf(0.005);
    let hi = binom.inverse_cdf(0.995);
    for seed in 0..5 {
        let mut spec = paper_shaped(n as usize, seed);
        spec.proportions = vec![0.68, 0.32];
        let cohort = sample_cohort(&spec).unwrap();
        let ones = cohort.labels.iter().filter(|&&l| l == 1).count() as u64;
        assert!((lo..=hi).contains(&ones), "seed {seed}: {ones} outside [{lo}, {hi}]");
    }
}

#[test]
fn paper_shaped_turn_counts() {
    let cohort = sample_cohort(&paper_shaped(400, 1)).unwrap();
    let mut lens: Vec<usize> = cohort.series.iter().map(TimeSeries::len).collect();
    lens.sort_unstable();
    let median = lens[lens.len() / 2];
    assert!((28..=40).contains(&median), "median {median}");
    assert!(cohort.series.iter().all(|s| *s.timestamps.last().unwrap() < 84.0));
}

#[test]
fn cohorts_do_not_depend_on_thread_count() {
    let spec = well_separated(64, 12);
    let run = |threads| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| sample_cohort(&spec).unwrap())
    };
    let a = run(1);
    let b = run(4);
    assert_eq!(a.series, b.series);
    assert_eq!(a.labels, b.labels);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn series_survive_jsonl(seed in any::<u64>(), n in 1usize..6) {
        let cohort = sample_cohort(&paper_shaped(n, seed)).unwrap();
        let mut buf = Vec::new();
        write_emotion_series(&mut buf, &cohort.series).unwrap();
        let parsed = parse_emotion_series(buf.as_slice()).unwrap();
        prop_assert!(parsed.diagnostics.is_empty());
        prop_assert_eq!(parsed.items, cohort.series);
    }
}
