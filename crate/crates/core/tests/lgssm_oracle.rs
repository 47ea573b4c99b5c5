use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use vista_core::lgssm::{joint_gaussian_oracle_with, kalman_filter_with, rts_smoother, smooth};
use vista_core::synthetic::{random_parameters, random_timestamps, sample_series};

fn instance(seed: u64, dx: usize, dy: usize, len: usize) -> (vista_core::TimeSeries, vista_core::ClusterParameters) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let params = random_parameters(dx, dy, &mut rng);
    let ts = random_timestamps(len, &mut rng);
    let series = sample_series("r", &params, &ts, &mut rng, false).unwrap().series;
    (series, params)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(120))]

    #[test]
    fn filter_and_smoother_match_dense_gaussian(
        seed in any::<u64>(),
        dx in 1usize..=4,
        dy in 1usize..=4,
        len in 1usize..=6,
    ) {
        let (series, params) = instance(seed, dx, dy, len);
        let (filter, smoothed) = smooth(&series, &params).unwrap();
        let oracle = joint_gaussian_oracle_with(&series, &params, 1.0).unwrap();
        let ll = filter.log_likelihood;
        prop_assert!((ll - oracle.log_likelihood).abs() <= 1e-8 * ll.abs().max(1.0),
            "{} vs {}", ll, oracle.log_likelihood);
        for k in 0..len {
            prop_assert!((&smoothed.smoothed_means[k] - &oracle.smoothed_means[k]).amax() <= 1e-7);
            prop_assert!((&smoothed.smoothed_covs[k] - &oracle.smoothed_covs[k]).amax() <= 1e-7);
        }
        for k in 0..len.saturating_sub(1) {
            prop_assert!((&smoothed.lag_one_crosscovs[k] - &oracle.lag_one_crosscovs[k]).amax() <= 1e-7);
        }
    }

    #[test]
    fn time_rescaling_leaves_likelihood_unchanged(seed in any::<u64>(), c in 0.2f64..5.0) {
        let (series, params) = instance(seed, 3, 2, 6);
        let base = kalman_filter_with(&series, &params, 1.0).unwrap().log_likelihood;

        let mut scaled = params.clone();
        scaled.generator /= c;
        scaled.process_noise /= c;
        scaled.obs_noise *= c;
        let mut stretched = series.clone();
        stretched.timestamps.iter_mut().for_each(|t| *t *= c);
        let ll = kalman_filter_with(&stretched, &scaled, c).unwrap().log_likelihood;
        prop_assert!((ll - base).abs() <= 1e-8 * base.abs().max(1.0), "{} vs {}", ll, base);
    }
}

#[test]
fn oracle_agrees_with_nondefault_first_gap() {
    let (series, params) = instance(11, 2, 3, 5);
    for first in [0.25, 3.0] {
        let f = kalman_filter_with(&series, &params, first).unwrap();
        let s = rts_smoother(&series, &params, &f).unwrap();
        let o = joint_gaussian_oracle_with(&series, &params, first).unwrap();
        assert!((f.log_likelihood - o.log_likelihood).abs() < 1e-9 * f.log_likelihood.abs().max(1.0));
        assert!((&s.smoothed_means[0] - &o.smoothed_means[0]).amax() < 1e-8);
    }
}

#[test]
fn latent_larger_than_observed() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..20 {
        let dx = rng.random_range(3..=5);
        let (series, params) = instance(rng.random(), dx, 2, 6);
        let f = kalman_filter_with(&series, &params, 1.0).unwrap();
        let o = joint_gaussian_oracle_with(&series, &params, 1.0).unwrap();
        assert!((f.log_likelihood - o.log_likelihood).abs() < 1e-8 * f.log_likelihood.abs().max(1.0));
    }
}
