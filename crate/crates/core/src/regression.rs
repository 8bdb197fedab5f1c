//! Shrinkage regression `y = Xβ + ε`, `ε ~ N(0, σ²I)`, with the prior
//! `β_j | σ, τ ∝ g(β_j / (στ))`, `p(σ²) ∝ 1/σ²` and the same uniform-mixture
//! latent scales as the precision sampler.

use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::diagnostics::{max_abs_finite, LagAutocorr};
use crate::error::{Error, Result};
use crate::linalg::cholesky;
use crate::precision::{ChainConfig, MAX_FALLBACK_RATE};
use crate::priors::{sample_latent, sample_tau, Family, TauHyperPrior};
use crate::truncated::{truncated_gamma, truncated_normal, DrawCounter, IntervalSet};

/// Design, response and cached cross products.
#[derive(Debug, Clone)]
pub struct RegressionData {
    pub x: DMatrix<f64>,
    pub y: DVector<f64>,
    pub xtx: DMatrix<f64>,
    pub xty: DVector<f64>,
}

impl RegressionData {
    pub fn new(x: DMatrix<f64>, y: DVector<f64>) -> Result<Self> {
        if x.nrows() != y.len() {
            return Err(Error::Dimension(format!(
                "X has {} rows but y has {} entries",
                x.nrows(),
                y.len()
            )));
        }
        if x.nrows() == 0 || x.ncols() == 0 {
            return Err(Error::InvalidSpec("regression needs n >= 1 and p >= 1".into()));
        }
        if x.iter().chain(y.iter()).any(|v| !v.is_finite()) {
            return Err(Error::DegenerateData("X or y has non-finite entries".into()));
        }
        let xtx = x.transpose() * &x;
        if let Some(j) = (0..x.ncols()).find(|&j| !(xtx[(j, j)] > 0.0)) {
            return Err(Error::DegenerateData(format!("column {j} of X is zero")));
        }
        let xty = x.transpose() * &y;
        Ok(RegressionData { x, y, xtx, xty })
    }

    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn p(&self) -> usize {
        self.x.ncols()
    }

    pub fn rss(&self, beta: &DVector<f64>) -> f64 {
        (&self.y - &self.x * beta).norm_squared()
    }

    /// Least-squares fit; requires `XᵀX` nonsingular.
    pub fn ols(&self) -> Result<DVector<f64>> {
        let l = cholesky(&self.xtx)?;
        let z = l.clone().solve_lower_triangular(&self.xty).expect("triangular factor");
        Ok(l.transpose().solve_upper_triangular(&z).expect("triangular factor"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegressionModel {
    pub family: Family,
    pub hyper: TauHyperPrior,
}

impl RegressionModel {
    pub fn new(family: Family, hyper: TauHyperPrior) -> Result<Self> {
        family.validate()?;
        hyper.validate(&family)?;
        Ok(RegressionModel { family, hyper })
    }
}

/// `(β, σ², τ, t)` with `|β_j| < σ τ t_j`.
#[derive(Debug, Clone)]
pub struct RegressionState {
    pub beta: DVector<f64>,
    pub sigma2: f64,
    pub tau: f64,
    pub t: DVector<f64>,
    /// `XᵀX β`, kept in step with `beta`.
    xtx_beta: DVector<f64>,
    pub counter: DrawCounter,
}

impl RegressionState {
    /// `β = 0`, `σ² = yᵀy / n`, `τ` at its fixed value or hyperprior median.
    pub fn new<R: Rng + ?Sized>(
        data: &RegressionData,
        model: &RegressionModel,
        rng: &mut R,
    ) -> Result<Self> {
        let p = data.p();
        let yty = data.y.norm_squared();
        if !(yty > 0.0) {
            return Err(Error::DegenerateData("y is identically zero".into()));
        }
        let mut state = RegressionState {
            beta: DVector::zeros(p),
            sigma2: yty / data.n() as f64,
            tau: model.hyper.initial_tau(&model.family),
            t: DVector::from_element(p, f64::NAN),
            xtx_beta: DVector::zeros(p),
            counter: DrawCounter::default(),
        };
        sample_scales(&mut state, model, rng);
        Ok(state)
    }

    /// Builds a state at given values; the scales must be feasible.
    pub fn from_parts(
        data: &RegressionData,
        beta: DVector<f64>,
        sigma2: f64,
        tau: f64,
        t: DVector<f64>,
    ) -> Result<Self> {
        if beta.len() != data.p() || t.len() != data.p() {
            return Err(Error::Dimension("beta and t must have p entries".into()));
        }
        let state = RegressionState {
            xtx_beta: &data.xtx * &beta,
            beta,
            sigma2,
            tau,
            t,
            counter: DrawCounter::default(),
        };
        if !state.is_feasible() {
            return Err(Error::InfeasibleState(
                "|beta_j| < sigma tau t_j does not hold".into(),
            ));
        }
        Ok(state)
    }

    pub fn is_feasible(&self) -> bool {
        let s = self.sigma2.sqrt() * self.tau;
        self.beta
            .iter()
            .zip(self.t.iter())
            .all(|(b, t)| b.abs() <= s * t)
    }
}

/// Coordinatewise truncated normal updates of `β`, ascending `j`.
pub fn sample_beta<R: Rng + ?Sized>(
    state: &mut RegressionState,
    data: &RegressionData,
    rng: &mut R,
) -> Result<()> {
    let p = data.p();
    let sigma = state.sigma2.sqrt();
    for j in 0..p {
        let xjj = data.xtx[(j, j)];
        let bj = state.beta[j];
        let mean = bj + (data.xty[j] - state.xtx_beta[j]) / xjj;
        let var = state.sigma2 / xjj;
        let half = sigma * state.tau * state.t[j];
        let region = IntervalSet::single(-half, half)?;
        let new = truncated_normal(mean, var, &region, &mut state.counter, rng)?;
        let delta = new - bj;
        if delta != 0.0 {
            state.beta[j] = new;
            state.xtx_beta.axpy(delta, &data.xtx.column(j), 1.0);
        }
    }
    Ok(())
}

/// `1/σ² ~ Ga((n+p)/2, RSS/2)` truncated to `σ ≥ max_j |β_j| / (τ t_j)`.
///
/// The `σ^{-p}` factor comes from the normalizing constants of the `p`
/// coefficient priors.
pub fn sample_sigma2<R: Rng + ?Sized>(
    state: &mut RegressionState,
    data: &RegressionData,
    rng: &mut R,
) -> Result<()> {
    let rss = data.rss(&state.beta);
    if !(rss > 0.0) {
        return Err(Error::DegenerateData(
            "residual sum of squares is zero; the variance conditional is improper".into(),
        ));
    }
    let lb = state
        .beta
        .iter()
        .zip(state.t.iter())
        .map(|(b, t)| b.abs() / (state.tau * t))
        .fold(0.0, f64::max);
    let hi = if lb > 0.0 { 1.0 / (lb * lb) } else { f64::INFINITY };
    let shape = 0.5 * (data.n() + data.p()) as f64;
    let prec = truncated_gamma(shape, 0.5 * rss, 0.0, hi, &mut state.counter, rng)?;
    if !(prec > 0.0) {
        return Err(Error::NumericalUnderflow(format!(
            "variance precision draw {prec} is not positive"
        )));
    }
    state.sigma2 = 1.0 / prec;
    Ok(())
}

/// `τ` given `β/σ` with the scales integrated out.
pub fn sample_tau_given_beta<R: Rng + ?Sized>(
    state: &mut RegressionState,
    model: &RegressionModel,
    rng: &mut R,
) -> Result<()> {
    let sigma = state.sigma2.sqrt();
    let devs: Vec<f64> = state.beta.iter().map(|b| b / sigma).collect();
    state.tau = sample_tau(&model.hyper, &model.family, &devs, devs.len(), state.tau, rng)?;
    Ok(())
}

/// Latent scales given `θ_j = β_j / (στ)`.
pub fn sample_scales<R: Rng + ?Sized>(
    state: &mut RegressionState,
    model: &RegressionModel,
    rng: &mut R,
) {
    let s = state.sigma2.sqrt() * state.tau;
    for j in 0..state.beta.len() {
        state.t[j] = sample_latent(&model.family, state.beta[j] / s, rng);
    }
}

/// `β → σ² → τ → t`.
pub fn regression_sweep<R: Rng + ?Sized>(
    state: &mut RegressionState,
    data: &RegressionData,
    model: &RegressionModel,
    rng: &mut R,
) -> Result<()> {
    sample_beta(state, data, rng)?;
    sample_sigma2(state, data, rng)?;
    sample_tau_given_beta(state, model, rng)?;
    sample_scales(state, model, rng);
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegressionDiagnostics {
    pub sweeps: usize,
    pub kept: usize,
    pub truncated_draws: u64,
    pub fallbacks: u64,
    pub fallback_rate: f64,
    pub acf_lag10: Vec<f64>,
    pub max_abs_acf_lag10: f64,
}

#[derive(Debug, Clone)]
pub struct RegressionOutput {
    pub beta_draws: Vec<Vec<f64>>,
    pub sigma2_draws: Vec<f64>,
    pub tau_draws: Vec<f64>,
    pub mean_beta: DVector<f64>,
    pub mean_sigma2: f64,
    pub mean_tau: f64,
    pub diagnostics: RegressionDiagnostics,
    pub runtime_seconds: f64,
}

/// Runs one regression chain. `config.options` is ignored.
pub fn run_regression_chain(
    data: &RegressionData,
    model: &RegressionModel,
    config: &ChainConfig,
) -> Result<RegressionOutput> {
    config.validate()?;
    let start = Instant::now();
    let p = data.p();
    let mut rng = config.rng();
    let mut state = RegressionState::new(data, model, &mut rng)?;
    let mut acf = LagAutocorr::new(p, 10);
    let mut sum_beta = DVector::zeros(p);
    let (mut sum_s2, mut sum_tau, mut kept) = (0.0, 0.0, 0usize);
    let mut beta_draws = Vec::new();
    let mut sigma2_draws = Vec::new();
    let mut tau_draws = Vec::new();
    for it in 0..config.iters {
        regression_sweep(&mut state, data, model, &mut rng)?;
        if it >= config.burnin {
            acf.push(state.beta.as_slice());
            if config.keeps(it) {
                sum_beta += &state.beta;
                sum_s2 += state.sigma2;
                sum_tau += state.tau;
                kept += 1;
                if config.store_draws {
                    beta_draws.push(state.beta.as_slice().to_vec());
                    sigma2_draws.push(state.sigma2);
                    tau_draws.push(state.tau);
                }
            }
        }
    }
    let c = state.counter;
    if c.rate() > MAX_FALLBACK_RATE {
        return Err(Error::FallbackRate {
            rate: c.rate(),
            limit: MAX_FALLBACK_RATE,
            count: c.fallbacks,
            draws: c.draws,
        });
    }
    let k = kept as f64;
    let acf_values = acf.values();
    Ok(RegressionOutput {
        beta_draws,
        sigma2_draws,
        tau_draws,
        mean_beta: sum_beta / k,
        mean_sigma2: sum_s2 / k,
        mean_tau: sum_tau / k,
        diagnostics: RegressionDiagnostics {
            sweeps: config.iters,
            kept,
            truncated_draws: c.draws,
            fallbacks: c.fallbacks,
            fallback_rate: c.rate(),
            max_abs_acf_lag10: max_abs_finite(&acf_values),
            acf_lag10: acf_values,
        },
        runtime_seconds: start.elapsed().as_secs_f64(),
    })
}

/// `(β̂ - β)ᵀ Σ_X (β̂ - β)`.
pub fn model_error(estimate: &DVector<f64>, truth: &DVector<f64>, cov_x: &DMatrix<f64>) -> Result<f64> {
    if estimate.len() != truth.len() || cov_x.shape() != (truth.len(), truth.len()) {
        return Err(Error::Dimension("model error arguments disagree in size".into()));
    }
    let d = estimate - truth;
    Ok(d.dot(&(cov_x * &d)))
}

/// Coefficient patterns of the simulation design (1 to 5), each of length 20.
pub fn scenario_beta(config: u8) -> Result<DVector<f64>> {
    let mut b = vec![0.0; 20];
    match config {
        1 | 2 => {
            let v = if config == 1 { 1.0 } else { 3.0 };
            b[..5].fill(v);
        }
        3 | 4 => {
            let v = if config == 3 { 1.0 } else { 3.0 };
            b[..5].fill(v);
            b[10..15].fill(v);
        }
        5 => b.fill(0.85),
        _ => {
            return Err(Error::InvalidSpec(format!(
                "coefficient configuration must be 1 to 5, got {config}"
            )))
        }
    }
    Ok(DVector::from_vec(b))
}

/// Predictor covariance: identity (`correlated = false`) or `0.5^{|j-k|}`.
pub fn scenario_cov(p: usize, correlated: bool) -> DMatrix<f64> {
    if correlated {
        DMatrix::from_fn(p, p, |j, k| 0.5f64.powi((j as i32 - k as i32).abs()))
    } else {
        DMatrix::identity(p, p)
    }
}

/// Draws `(X, y)` with rows `x ~ N(0, Σ_X)` and `y = xᵀβ + N(0, noise_sd²)`.
pub fn simulate_regression<R: Rng + ?Sized>(
    beta: &DVector<f64>,
    cov_x: &DMatrix<f64>,
    n: usize,
    noise_sd: f64,
    rng: &mut R,
) -> Result<RegressionData> {
    let p = beta.len();
    let l = cholesky(cov_x)?;
    let z = DMatrix::from_fn(n, p, |_, _| rng.sample::<f64, _>(StandardNormal));
    let x = z * l.transpose();
    let eps = DVector::from_fn(n, |_, _| noise_sd * rng.sample::<f64, _>(StandardNormal));
    let y = &x * beta + eps;
    RegressionData::new(x, y)
}

/// One dataset of the simulation design, seeded.
pub fn scenario_dataset(config: u8, correlated: bool, seed: u64) -> Result<(RegressionData, DVector<f64>, DMatrix<f64>)> {
    let beta = scenario_beta(config)?;
    let cov = scenario_cov(beta.len(), correlated);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let data = simulate_regression(&beta, &cov, 50, 3.0, &mut rng)?;
    Ok((data, beta, cov))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn orthonormal_data() -> RegressionData {
        // two orthonormal columns
        let x = DMatrix::from_row_slice(4, 2, &[0.5, 0.5, 0.5, -0.5, 0.5, 0.5, 0.5, -0.5]);
        let y = DVector::from_vec(vec![1.0, 2.0, 0.5, -1.0]);
        RegressionData::new(x, y).unwrap()
    }

    #[test]
    fn unconstrained_beta_centers_on_xty() {
        let data = orthonormal_data();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut st = RegressionState::from_parts(
            &data,
            DVector::zeros(2),
            0.01,
            1.0,
            DVector::from_element(2, f64::INFINITY),
        )
        .unwrap();
        let k = 20_000;
        let mut sum = DVector::zeros(2);
        for _ in 0..k {
            sample_beta(&mut st, &data, &mut rng).unwrap();
            sum += &st.beta;
        }
        let mean = sum / k as f64;
        for j in 0..2 {
            // sd 0.1, se 0.1/√k
            assert!((mean[j] - data.xty[j]).abs() < 0.005, "{mean}");
        }
    }

    #[test]
    fn collapsing_scale_pins_beta() {
        let data = orthonormal_data();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut st = RegressionState::from_parts(
            &data,
            DVector::zeros(2),
            1.0,
            1.0,
            DVector::from_element(2, 1e-9),
        )
        .unwrap();
        sample_beta(&mut st, &data, &mut rng).unwrap();
        assert!(st.beta.iter().all(|b| b.abs() <= 1e-9));
    }

    #[test]
    fn sigma2_respects_lower_bound() {
        let data = orthonormal_data();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let beta = DVector::from_vec(vec![1.5, -1.0]);
        let t = DVector::from_vec(vec![0.5, 5.0]);
        let mut st = RegressionState::from_parts(&data, beta, 16.0, 1.0, t).unwrap();
        // σ ≥ 1.5 / 0.5 = 3
        for _ in 0..2000 {
            sample_sigma2(&mut st, &data, &mut rng).unwrap();
            assert!(st.sigma2 >= 9.0 * (1.0 - 1e-12));
        }
    }

    #[test]
    fn exact_fit_is_degenerate() {
        let x = DMatrix::from_row_slice(2, 1, &[1.0, 2.0]);
        let y = DVector::from_vec(vec![1.0, 2.0]);
        let data = RegressionData::new(x, y).unwrap();
        let mut st = RegressionState::from_parts(
            &data,
            DVector::from_element(1, 1.0),
            1.0,
            1.0,
            DVector::from_element(1, 2.0),
        )
        .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        assert!(matches!(
            sample_sigma2(&mut st, &data, &mut rng),
            Err(Error::DegenerateData(_))
        ));
    }

    #[test]
    fn fixed_tau_unchanged_and_zero_beta_scales() {
        let data = orthonormal_data();
        let model = RegressionModel::new(Family::Logarithmic, TauHyperPrior::Fixed(0.7)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut st = RegressionState::new(&data, &model, &mut rng).unwrap();
        assert_eq!(st.tau, 0.7);
        assert!(st.t.iter().all(|t| *t > 0.0 && t.is_finite()));
        sample_tau_given_beta(&mut st, &model, &mut rng).unwrap();
        assert_eq!(st.tau, 0.7);
    }

    #[test]
    fn model_error_zero_at_truth() {
        let b = scenario_beta(1).unwrap();
        assert_eq!(model_error(&b, &b, &scenario_cov(20, false)).unwrap(), 0.0);
        let e = DVector::from_element(20, 0.0);
        assert_eq!(model_error(&e, &b, &scenario_cov(20, false)).unwrap(), 5.0);
    }

    #[test]
    fn scenario_patterns() {
        assert_eq!(scenario_beta(3).unwrap().sum(), 10.0);
        assert_eq!(scenario_beta(4).unwrap()[12], 3.0);
        assert!((scenario_beta(5).unwrap().sum() - 17.0).abs() < 1e-12);
        assert!(scenario_beta(6).is_err());
        assert_eq!(scenario_cov(3, true)[(0, 2)], 0.25);
    }

    #[test]
    fn shrinks_towards_zero() {
        // true β = 0: the posterior mean has a smaller norm than least squares
        let beta = DVector::zeros(10);
        for seed in 0..5 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let data = simulate_regression(&beta, &scenario_cov(10, false), 50, 1.0, &mut rng).unwrap();
            let model = RegressionModel::new(
                Family::ExponentialPower { q: 1.0 },
                TauHyperPrior::Fixed(0.05),
            )
            .unwrap();
            let cfg = ChainConfig {
                iters: 3000,
                burnin: 500,
                seed,
                store_draws: false,
                ..ChainConfig::default()
            };
            let out = run_regression_chain(&data, &model, &cfg).unwrap();
            assert!(out.mean_beta.norm() < data.ols().unwrap().norm());
        }
    }
}
