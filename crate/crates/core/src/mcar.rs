//! Gaussian layer of the multivariate CAR model: `vec(X) ~ N(0, (Ω_c ⊗ Ω_r)⁻¹)`
//! for `p_r × p_c` matrices `X`, with `Ω_r` either `E_W - ρW` (common `ρ` on
//! a grid) or a graph-constrained shrinkage prior centered at that matrix.

use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{ChiSquared, Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::diagnostics::{quantile, MatrixMean};
use crate::error::{Error, Result};
use crate::linalg::{cholesky, extremal_eigenvalues, log_det, spd_inverse};
use crate::precision::{
    gibbs_sweep, lower_triangle, ChainConfig, ConstraintLedger, GibbsState, Graph, PrecisionModel,
    SweepOptions, MAX_FALLBACK_RATE,
};
use crate::priors::{Family, TauHyperPrior};
use crate::truncated::{DrawCounter, Interval};

/// The 31 support points of the discrete `ρ` prior.
pub fn rho_grid() -> Vec<f64> {
    let mut g: Vec<f64> = (0..=16).map(|k| k as f64 * 0.05).collect();
    g.extend((1..=5).map(|k| 0.80 + k as f64 * 0.02));
    g.extend((1..=9).map(|k| 0.90 + k as f64 * 0.01));
    g.iter().map(|x| (x * 100.0).round() / 100.0).collect()
}

/// Adjacency `W`, row sums `E_W` and the induced graph.
#[derive(Debug, Clone)]
pub struct AdjacencyModel {
    pub w: DMatrix<f64>,
    pub row_sums: DVector<f64>,
    pub graph: Graph,
    /// Regions without neighbours; `E_W - ρW` is singular when any exist.
    pub isolated: Vec<usize>,
}

impl AdjacencyModel {
    pub fn new(w: DMatrix<f64>) -> Result<Self> {
        let graph = Graph::from_adjacency(&w)?;
        let row_sums = DVector::from_fn(w.nrows(), |i, _| w.row(i).sum());
        let isolated = graph.isolated();
        Ok(AdjacencyModel {
            w,
            row_sums,
            graph,
            isolated,
        })
    }

    pub fn dim(&self) -> usize {
        self.w.nrows()
    }

    fn require_connected_rows(&self) -> Result<()> {
        if self.isolated.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidSpec(format!(
                "regions {:?} have no neighbours, so E_W - rho W is singular",
                self.isolated
            )))
        }
    }

    /// `(1/λmin, 1/λmax)` of `E_W^{-1/2} W E_W^{-1/2}`; `M(ρ)` is positive
    /// definite exactly inside this interval.
    pub fn admissible_interval(&self) -> Result<(f64, f64)> {
        self.require_connected_rows()?;
        let p = self.dim();
        let d: Vec<f64> = self.row_sums.iter().map(|s| 1.0 / s.sqrt()).collect();
        let n = DMatrix::from_fn(p, p, |i, j| d[i] * self.w[(i, j)] * d[j]);
        let (lo, hi) = extremal_eigenvalues(&n);
        Ok((1.0 / lo, 1.0 / hi))
    }

    /// `M(ρ) = E_W - ρW`.
    pub fn car_precision(&self, rho: f64) -> Result<DMatrix<f64>> {
        let (lo, hi) = self.admissible_interval()?;
        // the interval ends are where M turns singular; allow for rounding
        let tol = 1e-10;
        if !(rho > lo + tol && rho < hi - tol) {
            return Err(Error::RhoOutOfRange { rho, lo, hi });
        }
        Ok(self.car_unchecked(rho))
    }

    fn car_unchecked(&self, rho: f64) -> DMatrix<f64> {
        // non-neighbours stay at +0 rather than -ρ·0
        let mut m = self.w.map(|w| if w == 0.0 { 0.0 } else { -rho * w });
        for i in 0..self.dim() {
            m[(i, i)] = self.row_sums[i];
        }
        m
    }
}

/// `(S_r, n_eff) = (Σ_k X_k Ω_c X_kᵀ, p_c · n_rep)`, the statistics of `Ω_r`.
pub fn row_suffstats(xs: &[DMatrix<f64>], omega_c: &DMatrix<f64>) -> Result<(DMatrix<f64>, f64)> {
    let (pr, pc) = replicate_shape(xs)?;
    if omega_c.shape() != (pc, pc) {
        return Err(Error::Dimension(format!("Ω_c must be {pc}x{pc}")));
    }
    let mut s = DMatrix::zeros(pr, pr);
    for x in xs {
        s += x * omega_c * x.transpose();
    }
    Ok((s, (pc * xs.len()) as f64))
}

/// `(S_c, n_eff) = (Σ_k X_kᵀ Ω_r X_k, p_r · n_rep)`, the statistics of `Ω_c`.
pub fn col_suffstats(xs: &[DMatrix<f64>], omega_r: &DMatrix<f64>) -> Result<(DMatrix<f64>, f64)> {
    let (pr, pc) = replicate_shape(xs)?;
    if omega_r.shape() != (pr, pr) {
        return Err(Error::Dimension(format!("Ω_r must be {pr}x{pr}")));
    }
    let mut s = DMatrix::zeros(pc, pc);
    for x in xs {
        s += x.transpose() * omega_r * x;
    }
    Ok((s, (pr * xs.len()) as f64))
}

fn replicate_shape(xs: &[DMatrix<f64>]) -> Result<(usize, usize)> {
    let first = xs
        .first()
        .ok_or_else(|| Error::InvalidSpec("at least one replicate matrix is required".into()))?;
    let shape = first.shape();
    if xs.iter().any(|x| x.shape() != shape) {
        return Err(Error::Dimension("replicate matrices differ in shape".into()));
    }
    Ok(shape)
}

/// Matrix-normal log density of one `X`.
pub fn matrix_normal_log_density(
    x: &DMatrix<f64>,
    omega_r: &DMatrix<f64>,
    omega_c: &DMatrix<f64>,
) -> Result<f64> {
    let (pr, pc) = x.shape();
    let quad = (omega_c * x.transpose() * omega_r * x).trace();
    Ok(-0.5 * (pr * pc) as f64 * (2.0 * std::f64::consts::PI).ln()
        + 0.5 * pr as f64 * log_det(omega_c)?
        + 0.5 * pc as f64 * log_det(omega_r)?
        - 0.5 * quad)
}

/// `X = L_r^{-T} Z L_c^{-1}` with `Ω = L Lᵀ`, so `vec(X) ~ N(0, (Ω_c ⊗ Ω_r)⁻¹)`.
pub fn sample_matrix_normal<R: Rng + ?Sized>(
    omega_r: &DMatrix<f64>,
    omega_c: &DMatrix<f64>,
    rng: &mut R,
) -> Result<DMatrix<f64>> {
    let lr = cholesky(omega_r)?;
    let lc = cholesky(omega_c)?;
    let z = DMatrix::from_fn(omega_r.nrows(), omega_c.nrows(), |_, _| {
        rng.sample::<f64, _>(StandardNormal)
    });
    let a = lr
        .transpose()
        .solve_upper_triangular(&z)
        .ok_or_else(|| Error::Domain("singular row factor".into()))?;
    // a L_c^{-1} = (L_c^{-T} aᵀ)ᵀ
    let b = lc
        .transpose()
        .solve_upper_triangular(&a.transpose())
        .ok_or_else(|| Error::Domain("singular column factor".into()))?;
    Ok(b.transpose())
}

/// Wishart draw with `df` degrees of freedom and scale `V` (mean `df · V`),
/// by the Bartlett decomposition.
pub fn sample_wishart<R: Rng + ?Sized>(df: f64, scale: &DMatrix<f64>, rng: &mut R) -> Result<DMatrix<f64>> {
    let p = scale.nrows();
    if !(df > (p as f64) - 1.0) {
        return Err(Error::Domain(format!(
            "Wishart degrees of freedom {df} must exceed p - 1 = {}",
            p as f64 - 1.0
        )));
    }
    let l = cholesky(scale)?;
    let mut a = DMatrix::zeros(p, p);
    for i in 0..p {
        let chi = ChiSquared::new(df - i as f64)
            .map_err(|e| Error::Domain(format!("chi-squared: {e}")))?;
        a[(i, i)] = chi.sample(rng).sqrt();
        for j in 0..i {
            a[(i, j)] = rng.sample::<f64, _>(StandardNormal);
        }
    }
    let la = l * a;
    let mut w = &la * la.transpose();
    crate::linalg::mirror_lower(&mut w);
    Ok(w)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum McarVariant {
    /// `Ω_r = M(ρ)` with `ρ` on the grid, conjugate Wishart `Ω_c`.
    Gv,
    /// `Ω_r = M(ρ)` with `ρ` on the grid, shrinkage prior on `Ω_c`.
    Wp1,
    /// Shrinkage prior on `Ω_r` around `M(ρ)` with negative off-diagonals,
    /// shrinkage prior on `Ω_c`.
    Wp2,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct McarSpec {
    pub variant: McarVariant,
    pub col_family: Family,
    pub col_tau: TauHyperPrior,
    /// Wishart prior of `Ω_c` under `gv`: density `∝ |Ω|^{(b-2)/2} exp(-tr(DΩ)/2)`.
    pub wishart_b: f64,
    /// `D`; identity when absent.
    pub wishart_d: Option<Vec<Vec<f64>>>,
    pub row_family: Family,
    /// Fixed `τ_r` of the row prior.
    pub row_tau: f64,
    /// `ρ` inside the row prior's center `M(ρ)`.
    pub row_rho: f64,
}

impl Default for McarSpec {
    fn default() -> Self {
        McarSpec {
            variant: McarVariant::Wp1,
            col_family: Family::Logarithmic,
            col_tau: TauHyperPrior::HalfCauchy { scale: 1.0 },
            wishart_b: 3.0,
            wishart_d: None,
            row_family: Family::ExponentialPower { q: 1.0 },
            row_tau: 1.0,
            row_rho: 0.9,
        }
    }
}

impl McarSpec {
    pub fn validate(&self) -> Result<()> {
        self.col_family.validate()?;
        self.col_tau.validate(&self.col_family)?;
        self.row_family.validate()?;
        if !(self.row_tau > 0.0 && self.row_tau.is_finite()) {
            return Err(Error::InvalidSpec("row_tau must be positive and finite".into()));
        }
        if !(self.wishart_b > 0.0) {
            return Err(Error::InvalidSpec("wishart_b must be positive".into()));
        }
        Ok(())
    }

    fn wishart_d(&self, pc: usize) -> Result<DMatrix<f64>> {
        match &self.wishart_d {
            None => Ok(DMatrix::identity(pc, pc)),
            Some(rows) => {
                if rows.len() != pc || rows.iter().any(|r| r.len() != pc) {
                    return Err(Error::Dimension(format!("wishart_d must be {pc}x{pc}")));
                }
                let d = DMatrix::from_fn(pc, pc, |i, j| rows[i][j]);
                cholesky(&d)?;
                Ok(d)
            }
        }
    }
}

/// Shrinkage model of `Ω_r` centered at `M(ρ)`: graph `G_r`, negative boxes
/// on the edges, fixed `τ_r`.
pub fn row_prior_model(adj: &AdjacencyModel, spec: &McarSpec) -> Result<PrecisionModel> {
    let m = adj.car_precision(spec.row_rho)?;
    let mut ledger = ConstraintLedger::with_graph(adj.graph.clone());
    for (i, j) in adj.graph.free_elements() {
        ledger.set_center(i, j, m[(i, j)]);
        if i != j {
            ledger.set_box(
                i,
                j,
                Interval {
                    lo: f64::NEG_INFINITY,
                    hi: 0.0,
                },
            );
        }
    }
    PrecisionModel::new(spec.row_family, TauHyperPrior::Fixed(spec.row_tau), ledger)
}

fn col_model(pc: usize, spec: &McarSpec) -> Result<PrecisionModel> {
    PrecisionModel::new(spec.col_family, spec.col_tau, ConstraintLedger::new(pc))
}

#[derive(Debug, Clone, Serialize)]
pub struct McarDiagnostics {
    pub sweeps: usize,
    pub kept: usize,
    pub row_counter: DrawCounter,
    pub col_counter: DrawCounter,
}

#[derive(Debug, Clone)]
pub struct McarOutput {
    /// Means of the identified draws (`Ω_r,11 = 1`).
    pub mean_omega_r: DMatrix<f64>,
    pub mean_omega_c: DMatrix<f64>,
    pub rho_grid: Vec<f64>,
    /// Grid posterior averaged over kept sweeps (Rao-Blackwellized).
    pub rho_posterior: Option<Vec<f64>>,
    pub rho_mode: Option<f64>,
    pub rho_draws: Vec<f64>,
    pub draws_r: Vec<Vec<f64>>,
    pub draws_c: Vec<Vec<f64>>,
    pub diagnostics: McarDiagnostics,
    pub runtime_seconds: f64,
}

/// `(Ω_r / c, c Ω_c)` with `c = Ω_r,11`; leaves `Ω_c ⊗ Ω_r` unchanged.
pub fn identify(omega_r: &DMatrix<f64>, omega_c: &DMatrix<f64>) -> (DMatrix<f64>, DMatrix<f64>) {
    let c = omega_r[(0, 0)];
    (omega_r / c, omega_c * c)
}

/// Grid posterior of `ρ` given `S_r` and `n_eff`: weights
/// `(n/2) log|M(ρ)| - tr(M(ρ) S_r)/2`, uniform prior.
struct RhoSampler {
    grid: Vec<f64>,
    log_dets: Vec<f64>,
    w: DMatrix<f64>,
    row_sums: DVector<f64>,
}

impl RhoSampler {
    fn new(adj: &AdjacencyModel) -> Result<Self> {
        let grid = rho_grid();
        let log_dets = grid
            .iter()
            .map(|&r| log_det(&adj.car_precision(r)?))
            .collect::<Result<Vec<_>>>()?;
        Ok(RhoSampler {
            grid,
            log_dets,
            w: adj.w.clone(),
            row_sums: adj.row_sums.clone(),
        })
    }

    fn probabilities(&self, s: &DMatrix<f64>, n: f64) -> Vec<f64> {
        let tr_e: f64 = (0..s.nrows()).map(|i| self.row_sums[i] * s[(i, i)]).sum();
        let tr_w = self.w.component_mul(s).sum();
        let logw: Vec<f64> = self
            .grid
            .iter()
            .zip(&self.log_dets)
            .map(|(&r, &ld)| 0.5 * n * ld - 0.5 * (tr_e - r * tr_w))
            .collect();
        let max = logw.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let w: Vec<f64> = logw.iter().map(|l| (l - max).exp()).collect();
        let total: f64 = w.iter().sum();
        w.iter().map(|x| x / total).collect()
    }
}

fn categorical<R: Rng + ?Sized>(probs: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (k, p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return k;
        }
    }
    probs.len() - 1
}

/// Gibbs sampler for `(Ω_r, Ω_c, ρ)` over replicates `xs` (each `p_r × p_c`).
pub fn fit_mcar(
    xs: &[DMatrix<f64>],
    adj: &AdjacencyModel,
    spec: &McarSpec,
    config: &ChainConfig,
) -> Result<McarOutput> {
    config.validate()?;
    spec.validate()?;
    let start = Instant::now();
    let (pr, pc) = replicate_shape(xs)?;
    if pr != adj.dim() {
        return Err(Error::Dimension(format!(
            "replicates have {pr} rows but the adjacency matrix is {}x{}",
            adj.dim(),
            adj.dim()
        )));
    }
    adj.require_connected_rows()?;
    let mut rng = config.rng();
    let opts = config.options;

    let rho_sampler = match spec.variant {
        McarVariant::Gv | McarVariant::Wp1 => Some(RhoSampler::new(adj)?),
        McarVariant::Wp2 => None,
    };
    let mut rho_index = rho_grid()
        .iter()
        .position(|&r| (r - 0.9).abs() < 1e-12)
        .expect("0.9 is on the grid");
    let grid = rho_grid();

    let mut omega_r = adj.car_precision(spec.row_rho.clamp(0.0, 0.99))?;
    let mut omega_c = DMatrix::identity(pc, pc);

    let cmodel = match spec.variant {
        McarVariant::Gv => None,
        _ => Some(col_model(pc, spec)?),
    };
    let (sc0, nc) = col_suffstats(xs, &omega_r)?;
    let mut cstate = match &cmodel {
        Some(m) => Some(GibbsState::new(m, sc0, nc, None, &mut rng)?),
        None => None,
    };
    let rmodel = match spec.variant {
        McarVariant::Wp2 => Some(row_prior_model(adj, spec)?),
        _ => None,
    };
    let (sr0, nr) = row_suffstats(xs, &omega_c)?;
    let mut rstate = match &rmodel {
        Some(m) => Some(GibbsState::new(m, sr0, nr, Some(omega_r.clone()), &mut rng)?),
        None => None,
    };
    let wishart_d = spec.wishart_d(pc)?;

    let mut mean_r = MatrixMean::new(pr, pr);
    let mut mean_c = MatrixMean::new(pc, pc);
    let mut rho_post = vec![0.0; grid.len()];
    let mut rho_draws = Vec::new();
    let mut draws_r = Vec::new();
    let mut draws_c = Vec::new();
    let mut kept = 0usize;

    for it in 0..config.iters {
        // column precision
        let (sc, nc) = col_suffstats(xs, &omega_r)?;
        match (&cmodel, &mut cstate) {
            (Some(m), Some(st)) => {
                st.set_data(sc, nc)?;
                gibbs_sweep(st, m, &opts, &mut rng)?;
                omega_c = st.omega.clone();
            }
            _ => {
                let scale = spd_inverse(&(&wishart_d + sc))?;
                omega_c = sample_wishart(spec.wishart_b + nc + pc as f64 - 1.0, &scale, &mut rng)?;
            }
        }
        // row precision
        let (sr, nr) = row_suffstats(xs, &omega_c)?;
        let mut probs = None;
        match (&rmodel, &mut rstate) {
            (Some(m), Some(st)) => {
                st.set_data(sr, nr)?;
                gibbs_sweep(st, m, &opts, &mut rng)?;
                omega_r = st.omega.clone();
            }
            _ => {
                let rs = rho_sampler.as_ref().expect("grid sampler for gv and wp1");
                let p = rs.probabilities(&sr, nr);
                rho_index = categorical(&p, &mut rng);
                omega_r = adj.car_unchecked(grid[rho_index]);
                probs = Some(p);
            }
        }
        if config.keeps(it) {
            let (ir, ic) = identify(&omega_r, &omega_c);
            mean_r.push(&ir);
            mean_c.push(&ic);
            if let Some(p) = &probs {
                for (acc, v) in rho_post.iter_mut().zip(p) {
                    *acc += v;
                }
                rho_draws.push(grid[rho_index]);
            }
            if config.store_draws {
                draws_r.push(lower_triangle(&ir));
                draws_c.push(lower_triangle(&ic));
            }
            kept += 1;
        }
    }

    let row_counter = rstate.as_ref().map(|s| s.counter).unwrap_or_default();
    let col_counter = cstate.as_ref().map(|s| s.counter).unwrap_or_default();
    for c in [row_counter, col_counter] {
        if c.rate() > MAX_FALLBACK_RATE {
            return Err(Error::FallbackRate {
                rate: c.rate(),
                limit: MAX_FALLBACK_RATE,
                count: c.fallbacks,
                draws: c.draws,
            });
        }
    }
    let (rho_posterior, rho_mode) = if rho_sampler.is_some() {
        let post: Vec<f64> = rho_post.iter().map(|v| v / kept as f64).collect();
        let mode = post
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .map(|(k, _)| grid[k]);
        (Some(post), mode)
    } else {
        (None, None)
    };
    Ok(McarOutput {
        mean_omega_r: mean_r.mean().expect("kept draws"),
        mean_omega_c: mean_c.mean().expect("kept draws"),
        rho_grid: grid,
        rho_posterior,
        rho_mode,
        rho_draws,
        draws_r,
        draws_c,
        diagnostics: McarDiagnostics {
            sweeps: config.iters,
            kept,
            row_counter,
            col_counter,
        },
        runtime_seconds: start.elapsed().as_secs_f64(),
    })
}

/// Quantiles of one free element of `Ω_r` under its prior.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ElementSummary {
    pub i: usize,
    pub j: usize,
    pub center: f64,
    pub q05: f64,
    pub q25: f64,
    pub q50: f64,
    pub q75: f64,
    pub q95: f64,
    pub iqr: f64,
    pub median_abs_deviation_from_center: f64,
    pub max: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ElicitationSummary {
    pub row_tau: f64,
    pub draws: usize,
    pub elements: Vec<ElementSummary>,
    /// Whether every off-diagonal draw was negative.
    pub all_off_diagonal_negative: bool,
    pub counter: DrawCounter,
}

/// Prior draws of `Ω_r` under the centered, sign-constrained shrinkage
/// prior (a chain with no data), summarized per free element.
pub fn prior_elicitation_sim(
    adj: &AdjacencyModel,
    spec: &McarSpec,
    n_draws: usize,
    burnin: usize,
    seed: u64,
) -> Result<ElicitationSummary> {
    spec.validate()?;
    let model = row_prior_model(adj, spec)?;
    let p = adj.dim();
    let start = adj.car_precision(spec.row_rho)?;
    let config = ChainConfig {
        iters: burnin + n_draws,
        burnin,
        thin: 1,
        seed,
        chain: 0,
        store_draws: false,
        options: SweepOptions::default(),
    };
    config.validate()?;
    let mut rng = config.rng();
    let mut st = GibbsState::new(&model, DMatrix::zeros(p, p), 0.0, Some(start), &mut rng)?;
    let free = adj.graph.free_elements();
    let mut samples: Vec<Vec<f64>> = vec![Vec::with_capacity(n_draws); free.len()];
    let mut negative = true;
    for it in 0..config.iters {
        gibbs_sweep(&mut st, &model, &config.options, &mut rng)?;
        if it >= burnin {
            for (k, &(i, j)) in free.iter().enumerate() {
                let v = st.omega[(i, j)];
                if i != j && !(v < 0.0) {
                    negative = false;
                }
                samples[k].push(v);
            }
        }
    }
    let elements = free
        .iter()
        .zip(samples.iter_mut())
        .map(|(&(i, j), xs)| {
            let center = model.ledger.center[(i, j)];
            let mut dev: Vec<f64> = xs.iter().map(|x| (x - center).abs()).collect();
            dev.sort_by(|a, b| a.total_cmp(b));
            xs.sort_by(|a, b| a.total_cmp(b));
            let q = |pr: f64| quantile(xs, pr);
            ElementSummary {
                i,
                j,
                center,
                q05: q(0.05),
                q25: q(0.25),
                q50: q(0.5),
                q75: q(0.75),
                q95: q(0.95),
                iqr: q(0.75) - q(0.25),
                median_abs_deviation_from_center: quantile(&dev, 0.5),
                max: *xs.last().expect("draws"),
            }
        })
        .collect();
    Ok(ElicitationSummary {
        row_tau: spec.row_tau,
        draws: n_draws,
        elements,
        all_off_diagonal_negative: negative,
        counter: st.counter,
    })
}

/// Synthetic replicates from `(Ω_r, Ω_c)`.
pub fn simulate_replicates(
    omega_r: &DMatrix<f64>,
    omega_c: &DMatrix<f64>,
    n_rep: usize,
    seed: u64,
) -> Result<Vec<DMatrix<f64>>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n_rep)
        .map(|_| sample_matrix_normal(omega_r, omega_c, &mut rng))
        .collect()
}

/// Column precision of the synthetic design: a sparse 4×4 matrix with
/// mixed-sign partial correlations.
pub fn default_column_precision() -> DMatrix<f64> {
    DMatrix::from_row_slice(
        4,
        4,
        &[
            2.0, 0.6, 0.0, 0.0, //
            0.6, 1.5, -0.4, 0.0, //
            0.0, -0.4, 1.0, 0.3, //
            0.0, 0.0, 0.3, 2.5,
        ],
    )
}

/// Adjacency of an `rows × cols` rook lattice.
pub fn lattice_adjacency(rows: usize, cols: usize) -> DMatrix<f64> {
    let p = rows * cols;
    let mut w = DMatrix::zeros(p, p);
    for r in 0..rows {
        for c in 0..cols {
            let v = r * cols + c;
            if c + 1 < cols {
                w[(v, v + 1)] = 1.0;
                w[(v + 1, v)] = 1.0;
            }
            if r + 1 < rows {
                w[(v, v + cols)] = 1.0;
                w[(v + cols, v)] = 1.0;
            }
        }
    }
    w
}
