use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use vista_core::stats::{bonferroni, logistic_fit, mann_whitney_exact, mann_whitney_u};

fn two_by_two(a: usize, b: usize, c: usize, d: usize) -> (DMatrix<f64>, Vec<f64>) {
    // a: exposed cases, b: exposed controls, c: unexposed cases, d: unexposed controls
    let mut rows = Vec::new();
    let mut y = Vec::new();
    for (exposed, case, count) in [(1.0, 1.0, a), (1.0, 0.0, b), (0.0, 1.0, c), (0.0, 0.0, d)] {
        for _ in 0..count {
            rows.push([1.0, exposed]);
            y.push(case);
        }
    }
    let x = DMatrix::from_fn(rows.len(), 2, |i, j| rows[i][j]);
    (x, y)
}

#[test]
fn logistic_slope_is_log_odds_ratio() {
    let names = vec!["intercept".to_string(), "exposed".to_string()];
    for (a, b, c, d) in [(40, 10, 20, 30), (7, 13, 22, 5), (100, 100, 100, 100), (3, 9, 11, 4)] {
        let (x, y) = two_by_two(a, b, c, d);
        let fit = logistic_fit(&x, &y, &names).unwrap();
        let or = (a as f64 * d as f64) / (b as f64 * c as f64);
        assert!((fit.estimates[1] - or.ln()).abs() < 1e-8);
        assert!((fit.estimates[0] - (c as f64 / d as f64).ln()).abs() < 1e-8);
        let woolf = (1.0 / a as f64 + 1.0 / b as f64 + 1.0 / c as f64 + 1.0 / d as f64).sqrt();
        assert!((fit.std_errors[1] - woolf).abs() < 1e-6);
    }
}

#[test]
fn bonferroni_is_exact() {
    assert_eq!(bonferroni(&[0.01, 0.2, 0.5, 0.001]).unwrap(), vec![0.04, 0.8, 1.0, 0.004]);
}

#[test]
fn normal_approximation_tracks_exact_for_untied_moderate_groups() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut worst: f64 = 0.0;
    for _ in 0..200 {
        let nx = rng.random_range(5..=11);
        let ny = rng.random_range(5..=16 - nx);
        let x: Vec<f64> = (0..nx).map(|_| rng.random::<f64>()).collect();
        let y: Vec<f64> = (0..ny).map(|_| rng.random::<f64>() + 0.3).collect();
        let approx = mann_whitney_u(&x, &y).unwrap().p_two_sided;
        let exact = mann_whitney_exact(&x, &y).unwrap();
        worst = worst.max((approx - exact).abs());
    }
    assert!(worst < 0.03, "largest gap {worst}");
}

proptest! {
    #[test]
    fn mann_whitney_is_symmetric(
        x in prop::collection::vec(0u8..5, 1..9),
        y in prop::collection::vec(0u8..5, 1..9),
    ) {
        let xf: Vec<f64> = x.iter().map(|&v| v as f64).collect();
        let yf: Vec<f64> = y.iter().map(|&v| v as f64).collect();
        let a = mann_whitney_u(&xf, &yf).unwrap();
        let b = mann_whitney_u(&yf, &xf).unwrap();
        prop_assert!((a.u_x + a.u_y - (x.len() * y.len()) as f64).abs() < 1e-12);
        prop_assert_eq!(a.u_x, b.u_y);
        prop_assert!((a.p_two_sided - b.p_two_sided).abs() < 1e-15);
        let e1 = mann_whitney_exact(&xf, &yf).unwrap();
        let e2 = mann_whitney_exact(&yf, &xf).unwrap();
        prop_assert!((e1 - e2).abs() < 1e-15);
        prop_assert!(e1 > 0.0 && e1 <= 1.0);
    }
}
