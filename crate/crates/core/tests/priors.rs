mod common;

use common::*;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use statrs::function::gamma::gamma;
use unishrink::priors::*;

#[test]
fn normalizers_match_closed_forms() {
    let cases = [
        (Family::ExponentialPower { q: 0.2 }, 2.0 * gamma(6.0)),
        (Family::ExponentialPower { q: 2.0 }, std::f64::consts::PI.sqrt()),
        (
            Family::StudentT { nu: 3.0 },
            std::f64::consts::PI.sqrt() * gamma(1.5) / gamma(2.0),
        ),
        (Family::GeneralizedDoublePareto { alpha: 1.0 }, 2.0),
        (Family::Logarithmic, 2.0 * std::f64::consts::PI),
    ];
    for (f, exact) in cases {
        let z = prior_normalizer(&f);
        assert!((z / exact - 1.0).abs() < 1e-9, "{f:?}: {z} vs {exact}");
    }
}

#[test]
fn mixture_reproduces_density_for_other_shapes() {
    let families = [
        Family::ExponentialPower { q: 0.5 },
        Family::ExponentialPower { q: 1.0 },
        Family::ExponentialPower { q: 2.0 },
        Family::StudentT { nu: 1.0 },
        Family::StudentT { nu: 10.0 },
        Family::GeneralizedDoublePareto { alpha: 0.5 },
        Family::GeneralizedDoublePareto { alpha: 3.0 },
    ];
    for f in families {
        let zg = prior_normalizer(&f);
        let zh = mixing_normalizer(&f);
        for theta in [0.05, 0.3, 1.0, 2.5, 7.0] {
            let direct = f.log_g(theta).exp() / zg;
            let mix = mixture_density(&f, theta, zh);
            assert!((mix / direct - 1.0).abs() < 1e-7, "{f:?} θ={theta}: {mix} vs {direct}");
        }
    }
}

#[test]
fn latent_draws_follow_conditional_law() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for f in FAMILIES {
        for theta in [0.0, 0.4, 3.0] {
            if theta == 0.0 && f != Family::Logarithmic {
                continue;
            }
            let spec = PriorSpec::new(f, 1.0).unwrap();
            let draws: Vec<f64> = (0..20_000).map(|_| sample_latent(&f, theta, &mut rng)).collect();
            assert!(draws.iter().all(|&t| t > theta));
            let d = ks_distance(&draws, |t| 1.0 - spec.conditional_survival(theta, t));
            assert!(d < ks_critical(draws.len(), 1e-4), "{f:?} θ={theta}: {d}");
        }
    }
}

#[test]
fn log_family_at_zero_uses_half_cauchy() {
    // with π(0) infinite, t | θ = 0 has the mixing density 1/(1+t²)
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let draws: Vec<f64> = (0..20_000)
        .map(|_| sample_latent(&Family::Logarithmic, 0.0, &mut rng))
        .collect();
    let d = ks_distance(&draws, |t| std::f64::consts::FRAC_2_PI * t.atan());
    assert!(d < ks_critical(draws.len(), 1e-4), "{d}");
}

#[test]
fn slice_sampled_tau_matches_quadrature() {
    // τ | deviations under a half-Cauchy prior, compared with the tabulated
    // posterior after thinning
    let devs = [0.3, -1.2, 0.05, 2.0, -0.4];
    for f in [
        Family::Logarithmic,
        Family::GeneralizedDoublePareto { alpha: 1.0 },
        Family::StudentT { nu: 3.0 },
    ] {
        let hyper = TauHyperPrior::HalfCauchy { scale: 1.0 };
        let log_post = |tau: f64| {
            if tau <= 0.0 {
                return f64::NEG_INFINITY;
            }
            let mut acc = -(devs.len() as f64) * tau.ln() - (tau * tau).ln_1p();
            for d in devs {
                acc += f.log_g(d / tau);
            }
            acc
        };
        let cdf = TabulatedCdf::new(log_post, 1e-9, 400.0, 40_000);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut tau = 1.0;
        let mut draws = Vec::new();
        for it in 0..60_000 {
            tau = sample_tau(&hyper, &f, &devs, devs.len(), tau, &mut rng).unwrap();
            if it >= 1000 && it % 3 == 0 {
                draws.push(tau);
            }
        }
        let d = ks_distance(&draws, |x| cdf.eval(x));
        assert!(d < 0.02, "{f:?}: {d}");
    }
}

#[test]
fn uniform_transform_tau_matches_quadrature() {
    let devs = [0.8, -0.1, 1.5];
    let f = Family::GeneralizedDoublePareto { alpha: 1.0 };
    let log_post = |tau: f64| {
        if tau <= 0.0 {
            return f64::NEG_INFINITY;
        }
        let mut acc = -(devs.len() as f64) * tau.ln() - 2.0 * tau.ln_1p();
        for d in devs {
            acc += f.log_g(d / tau);
        }
        acc
    };
    let cdf = TabulatedCdf::new(log_post, 1e-9, 2000.0, 100_000);
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut tau = 1.0;
    let mut draws = Vec::new();
    for it in 0..60_000 {
        tau = sample_tau(&TauHyperPrior::UniformTransform, &f, &devs, 3, tau, &mut rng).unwrap();
        if it >= 1000 && it % 3 == 0 {
            draws.push(tau);
        }
    }
    let d = ks_distance(&draws, |x| cdf.eval(x));
    assert!(d < 0.02, "{d}");
}

fn family_strategy() -> impl Strategy<Value = Family> {
    prop_oneof![
        (0.1f64..3.0).prop_map(|q| Family::ExponentialPower { q }),
        (0.5f64..30.0).prop_map(|nu| Family::StudentT { nu }),
        (0.1f64..5.0).prop_map(|alpha| Family::GeneralizedDoublePareto { alpha }),
        Just(Family::Logarithmic),
    ]
}

proptest! {
    #[test]
    fn inverse_cdf_round_trip(
        f in family_strategy(),
        theta in -20.0f64..20.0,
        u in 1e-6f64..1.0,
        tau in 0.05f64..10.0,
    ) {
        prop_assume!(theta != 0.0);
        let spec = PriorSpec::new(f, tau).unwrap();
        let t = spec.inverse_conditional_cdf(theta, u).unwrap();
        prop_assert!(t >= theta.abs());
        let back = spec.conditional_survival(theta, t);
        prop_assert!((back - u).abs() < 1e-9, "u={} back={}", u, back);
    }

    #[test]
    fn inverse_cdf_decreasing_in_u(
        f in family_strategy(),
        theta in 0.01f64..10.0,
        u1 in 1e-6f64..1.0,
        u2 in 1e-6f64..1.0,
    ) {
        prop_assume!(u1 < u2);
        let spec = PriorSpec::new(f, 1.0).unwrap();
        let t1 = spec.inverse_conditional_cdf(theta, u1).unwrap();
        let t2 = spec.inverse_conditional_cdf(theta, u2).unwrap();
        prop_assert!(t1 >= t2);
    }

    #[test]
    fn latent_draws_strictly_exceed_theta(f in family_strategy(), theta in -1e3f64..1e3, seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..20 {
            let t = sample_latent(&f, theta, &mut rng);
            prop_assert!(t > theta.abs() && t.is_finite());
        }
    }

    #[test]
    fn tau_draws_positive(
        f in family_strategy(),
        devs in proptest::collection::vec(-50.0f64..50.0, 1..20),
        seed in any::<u64>(),
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let hyper = TauHyperPrior::HalfCauchy { scale: 1.0 };
        let tau = sample_tau(&hyper, &f, &devs, devs.len(), 1.0, &mut rng).unwrap();
        prop_assert!(tau > 0.0 && tau.is_finite());
    }
}
