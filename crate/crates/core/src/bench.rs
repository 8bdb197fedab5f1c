//! Covariance models, data generation, losses and the benchmark loop.

use std::time::Instant;

use nalgebra::DMatrix;
use rand::{Rng, RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{cholesky, extremal_eigenvalues, log_det, spd_inverse};
use crate::precision::{run_chain, scatter, ChainConfig, ConstraintLedger, PrecisionModel};
use crate::priors::{Family, TauHyperPrior};

/// One of the four benchmark covariance structures.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub id: u8,
    pub p: usize,
    /// Seed of the random pattern of models 3 and 4.
    #[serde(default)]
    pub seed: u64,
}

impl ModelSpec {
    pub fn new(id: u8, p: usize, seed: u64) -> Result<Self> {
        let spec = ModelSpec { id, p, seed };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(1..=4).contains(&self.id) {
            return Err(Error::InvalidSpec(format!(
                "model id must be 1, 2, 3 or 4, got {}",
                self.id
            )));
        }
        if self.p < 2 {
            return Err(Error::InvalidSpec("benchmark models need p >= 2".into()));
        }
        Ok(())
    }

    /// Edge probability of models 3 and 4.
    pub fn alpha(&self) -> Option<f64> {
        match self.id {
            3 => Some(0.1),
            4 => Some(0.5),
            _ => None,
        }
    }
}

/// True `(Σ, Ω)` of a model.
pub fn generate_truth(spec: &ModelSpec) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    spec.validate()?;
    let p = spec.p;
    match spec.id {
        1 => {
            let sigma = DMatrix::from_fn(p, p, |i, j| 0.7f64.powi((i as i32 - j as i32).abs()));
            let omega = spd_inverse(&sigma)?;
            Ok((sigma, omega))
        }
        2 => {
            let band = [1.0, 0.2, 0.2, 0.2, 0.1];
            let omega = DMatrix::from_fn(p, p, |i, j| {
                let d = i.abs_diff(j);
                if d < band.len() {
                    band[d]
                } else {
                    0.0
                }
            });
            let sigma = spd_inverse(&omega)?;
            Ok((sigma, omega))
        }
        _ => {
            let alpha = spec.alpha().expect("models 3 and 4 carry alpha");
            let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
            let mut b = DMatrix::zeros(p, p);
            for i in 0..p {
                for j in 0..i {
                    if rng.random::<f64>() < alpha {
                        b[(i, j)] = 0.5;
                        b[(j, i)] = 0.5;
                    }
                }
            }
            let delta = condition_shift(&b)?;
            let omega = b + DMatrix::identity(p, p) * delta;
            let sigma = spd_inverse(&omega)?;
            Ok((sigma, omega))
        }
    }
}

/// `δ` with `cond(B + δI) = p`: the eigenvalues shift by `δ`, so
/// `(λmax + δ)/(λmin + δ) = p` solves in closed form.
pub fn condition_shift(b: &DMatrix<f64>) -> Result<f64> {
    let p = b.nrows() as f64;
    let (lmin, lmax) = extremal_eigenvalues(b);
    if !(lmax - lmin > 1e-12 * lmax.abs().max(1.0)) {
        return Err(Error::InvalidSpec(
            "the random pattern has no edges; the condition number cannot be set".into(),
        ));
    }
    Ok((lmax - p * lmin) / (p - 1.0))
}

/// `max λ / min λ`.
pub fn condition_number(m: &DMatrix<f64>) -> f64 {
    let (lo, hi) = extremal_eigenvalues(m);
    hi / lo
}

/// `p × n` matrix with iid `N(0, Σ)` columns.
pub fn sample_data<R: Rng + ?Sized>(sigma: &DMatrix<f64>, n: usize, rng: &mut R) -> Result<DMatrix<f64>> {
    let l = cholesky(sigma)?;
    let p = sigma.nrows();
    let z = DMatrix::from_fn(p, n, |_, _| rng.sample::<f64, _>(StandardNormal));
    Ok(l * z)
}

/// `tr(Σ̂ Σ⁻¹) - log det(Σ̂ Σ⁻¹) - p`.
pub fn stein_loss(estimate: &DMatrix<f64>, truth: &DMatrix<f64>) -> Result<f64> {
    let p = truth.nrows();
    if estimate.shape() != truth.shape() {
        return Err(Error::Dimension("loss arguments differ in shape".into()));
    }
    let omega = spd_inverse(truth)?;
    let tr = (estimate * &omega).trace();
    Ok(tr - (log_det(estimate)? - log_det(truth)?) - p as f64)
}

/// `tr((Σ̂ - Σ)²)`, the squared Frobenius distance.
pub fn squared_loss(estimate: &DMatrix<f64>, truth: &DMatrix<f64>) -> Result<f64> {
    if estimate.shape() != truth.shape() {
        return Err(Error::Dimension("loss arguments differ in shape".into()));
    }
    Ok((estimate - truth).norm_squared())
}

/// `(E[Ω]⁻¹, E[Ω⁻¹])` over a set of precision draws.
pub fn bayes_estimators(draws: &[DMatrix<f64>]) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let first = draws
        .first()
        .ok_or_else(|| Error::InvalidSpec("no draws to summarize".into()))?;
    let p = first.nrows();
    let mut mean = DMatrix::zeros(p, p);
    let mut mean_inv = DMatrix::zeros(p, p);
    for d in draws {
        mean += d;
        mean_inv += spd_inverse(d)?;
    }
    let k = draws.len() as f64;
    Ok((spd_inverse(&(mean / k))?, mean_inv / k))
}

/// Hyperprior used for a family unless configured otherwise.
pub fn default_hyper(family: &Family) -> TauHyperPrior {
    match family {
        Family::ExponentialPower { .. } => TauHyperPrior::GammaInvQ {
            shape: 1.0,
            rate: 0.1,
        },
        Family::GeneralizedDoublePareto { .. } => TauHyperPrior::UniformTransform,
        Family::StudentT { .. } | Family::Logarithmic => TauHyperPrior::HalfCauchy { scale: 1.0 },
    }
}

/// A prior family with an optional `τ` hyperprior, written as one JSON
/// object: `{"family": "ep", "q": 0.2, "tau": {"gamma_inv_q": [1, 0.1]}}`.
/// Without `tau` the benchmark default for the family applies.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BenchPrior {
    #[serde(flatten)]
    pub family: Family,
    #[serde(default)]
    pub tau: Option<TauHyperPrior>,
}

impl BenchPrior {
    pub fn hyper(&self) -> TauHyperPrior {
        self.tau.unwrap_or_else(|| default_hyper(&self.family))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchConfig {
    pub models: Vec<u8>,
    pub p: usize,
    pub n: Vec<usize>,
    pub priors: Vec<BenchPrior>,
    pub replicates: usize,
    pub seed: u64,
    pub iters: usize,
    pub burnin: usize,
    pub thin: usize,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig {
            models: vec![1, 2, 3, 4],
            p: 30,
            n: vec![30, 100],
            priors: vec![
                BenchPrior {
                    family: Family::ExponentialPower { q: 0.2 },
                    tau: None,
                },
                BenchPrior {
                    family: Family::ExponentialPower { q: 1.0 },
                    tau: None,
                },
                BenchPrior {
                    family: Family::GeneralizedDoublePareto { alpha: 1.0 },
                    tau: None,
                },
                BenchPrior {
                    family: Family::Logarithmic,
                    tau: None,
                },
            ],
            replicates: 20,
            seed: 0,
            iters: 15_000,
            burnin: 5_000,
            thin: 1,
        }
    }
}

/// One line of the results table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchRow {
    pub model: u8,
    pub p: usize,
    pub n: usize,
    pub prior: String,
    pub replicate: usize,
    #[serde(rename = "L1")]
    pub l1: f64,
    #[serde(rename = "L2")]
    pub l2: f64,
    pub runtime_seconds: f64,
}

/// SplitMix64 finalizer, used to derive independent seeds from a base seed
/// and a path of indices.
pub fn derive_seed(base: u64, path: &[u64]) -> u64 {
    let mix = |mut z: u64| {
        z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    };
    path.iter().fold(mix(base), |acc, &k| mix(acc ^ mix(k)))
}

/// Fits one replicate: data from `sigma`, posterior by the block sampler,
/// both losses of the matching Bayes estimators.
pub fn run_replicate(
    sigma: &DMatrix<f64>,
    n: usize,
    prior: &BenchPrior,
    chain: &ChainConfig,
    data_seed: u64,
) -> Result<(f64, f64)> {
    let p = sigma.nrows();
    let mut rng = ChaCha8Rng::seed_from_u64(data_seed);
    let y = sample_data(sigma, n, &mut rng)?;
    let model = PrecisionModel::new(prior.family, prior.hyper(), ConstraintLedger::new(p))?;
    let out = run_chain(&model, &scatter(&y), n as f64, None, chain)?;
    let (s_l1, s_l2) = out.bayes_estimators()?;
    Ok((stein_loss(&s_l1, sigma)?, squared_loss(&s_l2, sigma)?))
}

/// Runs the whole grid; `progress` sees each finished row.
pub fn run_bench<F: FnMut(&BenchRow)>(config: &BenchConfig, mut progress: F) -> Result<Vec<BenchRow>> {
    if config.iters <= config.burnin {
        return Err(Error::config(
            "/bench/iters",
            format!("iters ({}) must exceed burnin ({})", config.iters, config.burnin),
        ));
    }
    let mut rows = Vec::new();
    for &id in &config.models {
        let spec = ModelSpec::new(id, config.p, derive_seed(config.seed, &[u64::from(id)]))?;
        let (sigma, _) = generate_truth(&spec)?;
        for &n in &config.n {
            for prior in &config.priors {
                for rep in 0..config.replicates {
                    let data_seed = derive_seed(config.seed, &[u64::from(id), n as u64, rep as u64]);
                    let chain = ChainConfig {
                        iters: config.iters,
                        burnin: config.burnin,
                        thin: config.thin,
                        seed: derive_seed(data_seed, &[1]),
                        chain: 0,
                        store_draws: false,
                        ..ChainConfig::default()
                    };
                    let start = Instant::now();
                    let (l1, l2) = run_replicate(&sigma, n, prior, &chain, data_seed)?;
                    let row = BenchRow {
                        model: id,
                        p: config.p,
                        n,
                        prior: prior.family.label(),
                        replicate: rep,
                        l1,
                        l2,
                        runtime_seconds: start.elapsed().as_secs_f64(),
                    };
                    progress(&row);
                    rows.push(row);
                }
            }
        }
    }
    Ok(rows)
}
