mod common;

use common::*;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use unishrink::truncated::*;

const N: usize = 20_000;

fn check_normal(mean: f64, var: f64, parts: &[(f64, f64)], seed: u64) {
    let set = match parts {
        [(a, b)] => IntervalSet::single(*a, *b).unwrap(),
        [(a, b), (c, d)] => IntervalSet::from_parts(Interval::new(*a, *b), Interval::new(*c, *d)).unwrap(),
        _ => unreachable!(),
    };
    // the oracle integrates on a finite window covering the region
    let lo = parts[0].0.max(mean - 40.0 * var.sqrt());
    let hi = parts[parts.len() - 1].1.min(mean + 40.0 * var.sqrt());
    let inside = |x: f64| parts.iter().any(|&(a, b)| x >= a && x <= b);
    let cdf = TabulatedCdf::new(
        |x| if inside(x) { -0.5 * (x - mean).powi(2) / var } else { f64::NEG_INFINITY },
        lo,
        hi,
        20_000,
    );
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut counter = DrawCounter::default();
    let draws: Vec<f64> = (0..N)
        .map(|_| truncated_normal(mean, var, &set, &mut counter, &mut rng).unwrap())
        .collect();
    assert!(draws.iter().all(|&x| set.contains(x)));
    assert_eq!(counter.fallbacks, 0);
    let d = ks_distance(&draws, |x| cdf.eval(x));
    assert!(d < ks_critical(N, 1e-4), "N({mean},{var}) on {parts:?}: {d}");
}

#[test]
fn normal_central_and_tail_regions() {
    let inf = f64::INFINITY;
    check_normal(0.0, 1.0, &[(-1.0, 2.0)], 1);
    check_normal(0.0, 1.0, &[(3.0, inf)], 2);
    check_normal(0.0, 1.0, &[(8.0, 8.5)], 3);
    check_normal(0.0, 1.0, &[(-inf, -5.0)], 4);
    check_normal(2.0, 0.25, &[(-1.0, 0.0)], 5);
    check_normal(0.0, 1.0, &[(30.0, 31.0)], 6);
    check_normal(0.0, 1.0, &[(4.0, 4.01)], 7);
    check_normal(-3.0, 4.0, &[(-inf, inf)], 8);
}

#[test]
fn normal_two_intervals() {
    check_normal(0.0, 1.0, &[(-3.0, -1.0), (0.5, 2.0)], 11);
    check_normal(0.0, 1.0, &[(-10.0, -9.0), (9.0, 10.0)], 12);
    check_normal(1.0, 1.0, &[(-10.0, -9.0), (6.0, 6.5)], 13);
}

#[test]
fn flat_normal_is_uniform() {
    let set = IntervalSet::single(-2.0, 3.0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    let mut counter = DrawCounter::default();
    let draws: Vec<f64> = (0..N)
        .map(|_| truncated_normal(0.0, f64::INFINITY, &set, &mut counter, &mut rng).unwrap())
        .collect();
    let d = ks_distance(&draws, |x| ((x + 2.0) / 5.0).clamp(0.0, 1.0));
    assert!(d < ks_critical(N, 1e-4), "{d}");
}

fn check_gamma(shape: f64, rate: f64, lo: f64, hi: f64, seed: u64) {
    let window_hi = if hi.is_finite() { hi } else { lo.max(shape / rate) + 80.0 * (shape.max(1.0)).sqrt() / rate };
    let log_density = |x: f64| if x > 0.0 { (shape - 1.0) * x.ln() - rate * x } else { f64::NEG_INFINITY };
    let cdf = if lo == 0.0 {
        TabulatedCdf::geometric(log_density, 1e-14 * window_hi, window_hi, 20_000)
    } else {
        TabulatedCdf::new(log_density, lo, window_hi, 20_000)
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut counter = DrawCounter::default();
    let draws: Vec<f64> = (0..N)
        .map(|_| truncated_gamma(shape, rate, lo, hi, &mut counter, &mut rng).unwrap())
        .collect();
    assert!(draws.iter().all(|&x| x >= lo && x <= hi && x > 0.0));
    assert_eq!(counter.fallbacks, 0);
    let d = ks_distance(&draws, |x| cdf.eval(x));
    assert!(d < ks_critical(N, 1e-4), "Ga({shape},{rate}) on [{lo},{hi}]: {d}");
}

#[test]
fn gamma_regions() {
    let inf = f64::INFINITY;
    check_gamma(2.0, 1.0, 0.0, inf, 21);
    check_gamma(0.5, 2.0, 0.0, 0.1, 22);
    check_gamma(3.0, 1.0, 20.0, inf, 23);
    check_gamma(5.0, 1.0, 0.0, 0.01, 24);
    check_gamma(50.0, 1.0, 1.0, 2.0, 25);
    check_gamma(0.3, 1.0, 0.0, inf, 26);
    check_gamma(16.0, 4.0, 3.9, 4.1, 27);
    check_gamma(200.0, 0.5, 100.0, 101.0, 28);
}

#[test]
fn power_law_when_rate_is_zero() {
    // density ∝ x^{k-1} on [a, b]
    let (k, a, b) = (2.5f64, 0.5f64, 3.0f64);
    let mut rng = ChaCha8Rng::seed_from_u64(29);
    let mut counter = DrawCounter::default();
    let draws: Vec<f64> = (0..N)
        .map(|_| truncated_gamma(k, 0.0, a, b, &mut counter, &mut rng).unwrap())
        .collect();
    let d = ks_distance(&draws, |x| (x.powf(k) - a.powf(k)) / (b.powf(k) - a.powf(k)));
    assert!(d < ks_critical(N, 1e-4), "{d}");
}

proptest! {
    #[test]
    fn normal_draws_stay_inside(
        mean in -50.0f64..50.0,
        sd in 1e-3f64..20.0,
        a in -60.0f64..60.0,
        width in 1e-6f64..30.0,
        seed in any::<u64>(),
    ) {
        let set = IntervalSet::single(a, a + width).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut counter = DrawCounter::default();
        for _ in 0..20 {
            let x = truncated_normal(mean, sd * sd, &set, &mut counter, &mut rng).unwrap();
            prop_assert!(set.contains(x), "{} outside [{}, {}]", x, a, a + width);
        }
    }

    #[test]
    fn gamma_draws_stay_inside(
        shape in 0.05f64..500.0,
        rate in 0.0f64..100.0,
        lo in 0.0f64..50.0,
        width in 1e-6f64..50.0,
        seed in any::<u64>(),
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut counter = DrawCounter::default();
        for _ in 0..20 {
            let x = truncated_gamma(shape, rate, lo, lo + width, &mut counter, &mut rng).unwrap();
            prop_assert!(x >= lo && x <= lo + width);
        }
    }

    #[test]
    fn gamma_quantile_inverts_cdf(shape in 0.1f64..100.0, rate in 0.01f64..10.0, u in 0.001f64..0.999) {
        let x = truncated_gamma_quantile(shape, rate, 0.0, f64::INFINITY, u).unwrap();
        prop_assert!((gamma_p(shape, rate * x) - u).abs() < 1e-9);
    }

    #[test]
    fn normal_quantile_inverts_cdf(p in 1e-12f64..(1.0 - 1e-12)) {
        let x = normal_quantile(p);
        prop_assert!((normal_cdf(x) - p).abs() < 1e-12 * p.max(1e-3) / 1e-3);
    }
}
