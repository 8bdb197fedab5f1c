use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use unishrink::mcar::*;
use unishrink::precision::ChainConfig;

fn random_matrix(r: usize, c: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    DMatrix::from_fn(r, c, |_, _| StandardNormal.sample(rng))
}

fn random_spd(p: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    let a = random_matrix(p, p, rng);
    &a * a.transpose() + DMatrix::identity(p, p) * 0.5
}

fn column_precision() -> DMatrix<f64> {
    default_column_precision()
}

fn cosine(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    a.dot(b) / (a.norm() * b.norm())
}

// vec(X)ᵀ (Ω_c ⊗ Ω_r) vec(X) assembled element by element
fn brute_quadratic(x: &DMatrix<f64>, r: &DMatrix<f64>, c: &DMatrix<f64>) -> f64 {
    let k = c.kronecker(r);
    let v = DMatrix::from_column_slice(x.len(), 1, x.as_slice());
    (v.transpose() * k * v)[(0, 0)]
}

#[test]
fn suffstats_match_kronecker_quadratic() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for pr in 1..=4 {
        for pc in 1..=4 {
            let r = random_spd(pr, &mut rng);
            let c = random_spd(pc, &mut rng);
            let xs: Vec<_> = (0..3).map(|_| random_matrix(pr, pc, &mut rng)).collect();
            let brute: f64 = xs.iter().map(|x| brute_quadratic(x, &r, &c)).sum();
            let (sr, nr) = row_suffstats(&xs, &c).unwrap();
            let (sc, nc) = col_suffstats(&xs, &r).unwrap();
            assert_eq!(nr, (pc * 3) as f64);
            assert_eq!(nc, (pr * 3) as f64);
            let via_r = (&r * &sr).trace();
            let via_c = (&c * &sc).trace();
            assert!((via_r - brute).abs() < 1e-12 * brute.abs().max(1.0));
            assert!((via_c - brute).abs() < 1e-12 * brute.abs().max(1.0));
        }
    }
}

#[test]
fn log_density_matches_vec_form() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let r = random_spd(3, &mut rng);
    let c = random_spd(2, &mut rng);
    let x = random_matrix(3, 2, &mut rng);
    let k = c.kronecker(&r);
    let brute = -0.5 * 6.0 * (2.0 * std::f64::consts::PI).ln()
        + 0.5 * k.clone().cholesky().unwrap().determinant().ln()
        - 0.5 * brute_quadratic(&x, &r, &c);
    let got = matrix_normal_log_density(&x, &r, &c).unwrap();
    assert!((got - brute).abs() < 1e-10, "{got} vs {brute}");
}

#[test]
fn rescale_leaves_likelihood_unchanged() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let r = random_spd(4, &mut rng);
    let c = random_spd(3, &mut rng);
    let (ir, ic) = identify(&r, &c);
    assert_eq!(ir[(0, 0)], 1.0);
    let x = random_matrix(4, 3, &mut rng);
    let a = matrix_normal_log_density(&x, &r, &c).unwrap();
    let b = matrix_normal_log_density(&x, &ir, &ic).unwrap();
    assert!((a - b).abs() < 1e-10);
}

#[test]
fn simulated_replicates_have_kronecker_covariance() {
    let adj = AdjacencyModel::new(lattice_adjacency(1, 2)).unwrap();
    let r = adj.car_precision(0.5).unwrap();
    let c = DMatrix::from_row_slice(2, 2, &[1.0, 0.4, 0.4, 2.0]);
    let xs = simulate_replicates(&r, &c, 50_000, 6).unwrap();
    let mut cov = DMatrix::<f64>::zeros(4, 4);
    for x in &xs {
        let v = DMatrix::from_column_slice(4, 1, x.as_slice());
        cov += &v * v.transpose();
    }
    cov /= xs.len() as f64;
    let target = c.kronecker(&r).try_inverse().unwrap();
    assert!((cov - &target).norm() / target.norm() < 0.02);
}

#[test]
fn gv_recovers_rho() {
    let adj = AdjacencyModel::new(lattice_adjacency(2, 5)).unwrap();
    let r = adj.car_precision(0.9).unwrap();
    let xs = simulate_replicates(&r, &column_precision(), 50, 21).unwrap();
    let spec = McarSpec {
        variant: McarVariant::Gv,
        ..McarSpec::default()
    };
    let config = ChainConfig {
        iters: 1500,
        burnin: 500,
        seed: 1,
        ..ChainConfig::default()
    };
    let out = fit_mcar(&xs, &adj, &spec, &config).unwrap();
    assert_eq!(out.rho_mode, Some(0.9));
    let post = out.rho_posterior.unwrap();
    assert!((post.iter().sum::<f64>() - 1.0).abs() < 1e-9);
    assert!(out.draws_r.iter().all(|d| d[0] == 1.0));
}

#[test]
fn wp1_recovers_rho_and_column_precision() {
    let adj = AdjacencyModel::new(lattice_adjacency(2, 5)).unwrap();
    let r = adj.car_precision(0.9).unwrap();
    let c = column_precision();
    let xs = simulate_replicates(&r, &c, 50, 22).unwrap();
    let config = ChainConfig {
        iters: 1500,
        burnin: 500,
        seed: 2,
        ..ChainConfig::default()
    };
    let out = fit_mcar(&xs, &adj, &McarSpec::default(), &config).unwrap();
    assert_eq!(out.rho_mode, Some(0.9));
    let (_, truth_c) = identify(&r, &c);
    assert!(cosine(&out.mean_omega_c, &truth_c) > 0.95);
}

#[test]
fn wp2_recovers_both_precisions() {
    let adj = AdjacencyModel::new(lattice_adjacency(2, 5)).unwrap();
    let r = adj.car_precision(0.9).unwrap();
    let c = column_precision();
    let xs = simulate_replicates(&r, &c, 50, 23).unwrap();
    let spec = McarSpec {
        variant: McarVariant::Wp2,
        ..McarSpec::default()
    };
    let config = ChainConfig {
        iters: 1500,
        burnin: 500,
        seed: 3,
        ..ChainConfig::default()
    };
    let out = fit_mcar(&xs, &adj, &spec, &config).unwrap();
    assert!(out.rho_posterior.is_none());
    let (tr, tc) = identify(&r, &c);
    assert!(cosine(&out.mean_omega_r, &tr) > 0.9);
    assert!(cosine(&out.mean_omega_c, &tc) > 0.9);
    // identified draws: Ω_r,11 = 1 and negative off-diagonals on the graph
    for d in &out.draws_r {
        assert_eq!(d[0], 1.0);
    }
    for (i, j) in adj.graph.edges() {
        assert!(out.mean_omega_r[(i, j)] < 0.0);
    }
}

#[test]
fn wp2_prior_draws_respect_constraints() {
    let adj = AdjacencyModel::new(lattice_adjacency(2, 3)).unwrap();
    for tau in [0.1, 1.0, 10.0] {
        let spec = McarSpec {
            variant: McarVariant::Wp2,
            row_tau: tau,
            ..McarSpec::default()
        };
        let s = prior_elicitation_sim(&adj, &spec, 2000, 200, 9).unwrap();
        assert!(s.all_off_diagonal_negative);
        assert_eq!(s.elements.len(), adj.graph.free_elements().len());
        for e in &s.elements {
            if e.i != e.j {
                assert!(e.max < 0.0);
            }
        }
    }
}

#[test]
fn fit_rejects_isolated_regions_and_bad_shapes() {
    let mut w = lattice_adjacency(1, 3);
    w[(1, 2)] = 0.0;
    w[(2, 1)] = 0.0;
    let adj = AdjacencyModel::new(w).unwrap();
    let xs = vec![DMatrix::zeros(3, 2)];
    let config = ChainConfig {
        iters: 10,
        burnin: 5,
        ..ChainConfig::default()
    };
    assert!(fit_mcar(&xs, &adj, &McarSpec::default(), &config).is_err());
    let adj = AdjacencyModel::new(lattice_adjacency(1, 3)).unwrap();
    let xs = vec![DMatrix::zeros(2, 2)];
    assert!(fit_mcar(&xs, &adj, &McarSpec::default(), &config).is_err());
}
