//! Block Gibbs sampler for a precision matrix under scale-mixture-of-uniform
//! priors.
//!
//! Each sweep visits the 2x2 blocks `{i, j}` of the edges of the graph,
//! writes the Schur component `A = Ω_ee - B` as `L diag(d1, d2) Lᵀ` and draws
//! `d1`, `d2`, `l21` from truncated gamma / normal conditionals. Vertices
//! without edges get a single truncated gamma update of their diagonal. The
//! global scale `τ` is drawn with the latent scales integrated out, then the
//! latent scales are refreshed given the new `τ`.

use std::time::Instant;

use nalgebra::{DMatrix, Matrix2};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::diagnostics::{max_abs_finite, LagAutocorr, MatrixMean};
use crate::error::{Error, Result};
use crate::linalg::{
    cholesky, inverse_from_cholesky, mirror_lower, schur_block, spd_inverse, BlockDecomposition,
};
use crate::priors::{sample_latent, sample_tau, Family, TauHyperPrior};
use crate::truncated::{truncated_gamma, truncated_normal, DrawCounter, Interval, IntervalSet};

/// Largest fallback share tolerated before a chain is declared failed.
pub const MAX_FALLBACK_RATE: f64 = 1e-3;

/// Cap applied to the quadratic `l21` bounds when `d1` is tiny.
const QUAD_CAP: f64 = 1e308;

/// Undirected graph on `p` vertices.
#[derive(Debug, Clone, PartialEq)]
pub struct Graph {
    p: usize,
    adj: Vec<bool>,
}

impl Graph {
    pub fn complete(p: usize) -> Self {
        let mut adj = vec![true; p * p];
        for v in 0..p {
            adj[v * p + v] = false;
        }
        Graph { p, adj }
    }

    pub fn empty(p: usize) -> Self {
        Graph {
            p,
            adj: vec![false; p * p],
        }
    }

    pub fn from_edges(p: usize, edges: &[(usize, usize)]) -> Result<Self> {
        let mut g = Graph::empty(p);
        for &(i, j) in edges {
            if i >= p || j >= p || i == j {
                return Err(Error::InvalidSpec(format!(
                    "edge ({i}, {j}) is not valid for {p} vertices"
                )));
            }
            g.adj[i * p + j] = true;
            g.adj[j * p + i] = true;
        }
        Ok(g)
    }

    /// Reads a symmetric 0/1 adjacency matrix with zero diagonal.
    pub fn from_adjacency(w: &DMatrix<f64>) -> Result<Self> {
        let p = w.nrows();
        if w.ncols() != p {
            return Err(Error::Dimension(format!(
                "adjacency matrix is {}x{}",
                w.nrows(),
                w.ncols()
            )));
        }
        let mut g = Graph::empty(p);
        for i in 0..p {
            for j in 0..p {
                let x = w[(i, j)];
                if x != 0.0 && x != 1.0 {
                    return Err(Error::InvalidSpec(format!(
                        "adjacency entry ({i}, {j}) = {x} is not 0 or 1"
                    )));
                }
                if x != w[(j, i)] {
                    return Err(Error::InvalidSpec(format!(
                        "adjacency matrix is not symmetric at ({i}, {j})"
                    )));
                }
                if i == j && x != 0.0 {
                    return Err(Error::InvalidSpec(format!(
                        "adjacency matrix has a nonzero diagonal at {i}"
                    )));
                }
                g.adj[i * p + j] = x == 1.0;
            }
        }
        Ok(g)
    }

    pub fn dim(&self) -> usize {
        self.p
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.adj[i * self.p + j]
    }

    /// Edges `(i, j)` with `j < i`, in lexicographic order.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for i in 0..self.p {
            for j in 0..i {
                if self.has_edge(i, j) {
                    out.push((i, j));
                }
            }
        }
        out
    }

    pub fn degree(&self, v: usize) -> usize {
        (0..self.p).filter(|&u| self.has_edge(v, u)).count()
    }

    pub fn isolated(&self) -> Vec<usize> {
        (0..self.p).filter(|&v| self.degree(v) == 0).collect()
    }

    /// Elements `(i, j)`, `i ≥ j`, that carry a prior: the diagonal and the edges.
    pub fn free_elements(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for i in 0..self.p {
            for j in 0..=i {
                if i == j || self.has_edge(i, j) {
                    out.push((i, j));
                }
            }
        }
        out
    }
}

/// Per-element centers, scale multipliers, boxes and the sparsity graph.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstraintLedger {
    pub center: DMatrix<f64>,
    pub multiplier: DMatrix<f64>,
    boxes: Vec<Option<Interval>>,
    pub graph: Graph,
}

impl ConstraintLedger {
    /// Complete graph, zero centers, unit multipliers, no boxes.
    pub fn new(p: usize) -> Self {
        Self::with_graph(Graph::complete(p))
    }

    pub fn with_graph(graph: Graph) -> Self {
        let p = graph.dim();
        ConstraintLedger {
            center: DMatrix::zeros(p, p),
            multiplier: DMatrix::from_element(p, p, 1.0),
            boxes: vec![None; p * p],
            graph,
        }
    }

    pub fn dim(&self) -> usize {
        self.graph.dim()
    }

    pub fn is_free(&self, i: usize, j: usize) -> bool {
        i == j || self.graph.has_edge(i, j)
    }

    pub fn set_center(&mut self, i: usize, j: usize, m: f64) {
        self.center[(i, j)] = m;
        self.center[(j, i)] = m;
    }

    pub fn set_multiplier(&mut self, i: usize, j: usize, v: f64) {
        self.multiplier[(i, j)] = v;
        self.multiplier[(j, i)] = v;
    }

    pub fn set_box(&mut self, i: usize, j: usize, b: Interval) {
        let p = self.dim();
        self.boxes[i * p + j] = Some(b);
        self.boxes[j * p + i] = Some(b);
    }

    pub fn get_box(&self, i: usize, j: usize) -> Option<Interval> {
        self.boxes[i * self.dim() + j]
    }

    pub fn validate(&self) -> Result<()> {
        let p = self.dim();
        if self.center.shape() != (p, p) || self.multiplier.shape() != (p, p) {
            return Err(Error::Dimension(format!(
                "ledger arrays must be {p}x{p}"
            )));
        }
        for i in 0..p {
            for j in 0..=i {
                let free = self.is_free(i, j);
                let m = self.center[(i, j)];
                let v = self.multiplier[(i, j)];
                if !m.is_finite() {
                    return Err(Error::InvalidSpec(format!("center ({i}, {j}) is not finite")));
                }
                if !(v > 0.0 && v.is_finite()) {
                    return Err(Error::InvalidSpec(format!(
                        "scale multiplier ({i}, {j}) must be positive"
                    )));
                }
                if !free && (m != 0.0 || self.get_box(i, j).is_some()) {
                    return Err(Error::InvalidSpec(format!(
                        "element ({i}, {j}) is outside the graph and cannot carry a center or box"
                    )));
                }
                if i == j {
                    if let Some(b) = self.get_box(i, i) {
                        if b.lo < 0.0 {
                            return Err(Error::InvalidSpec(format!(
                                "diagonal box ({i}, {i}) must lie in (0, inf)"
                            )));
                        }
                    }
                }
            }
        }
        Ok(())
    }

    /// A random `τ` keeps the prior a scale family only with zero centers and
    /// boxes whose finite endpoints are 0.
    pub fn is_scale_invariant(&self) -> bool {
        let zero_centers = self.center.iter().all(|&m| m == 0.0);
        let cone_boxes = self
            .boxes
            .iter()
            .flatten()
            .all(|b| (b.lo == 0.0 || b.lo.is_infinite()) && (b.hi == 0.0 || b.hi.is_infinite()));
        zero_centers && cone_boxes
    }

    /// Identity pushed into the ledger: boxed diagonals that exclude 1 go to
    /// the box midpoint (or one unit inside a half-open box).
    pub fn initial_omega(&self) -> Result<DMatrix<f64>> {
        let p = self.dim();
        let mut omega = DMatrix::identity(p, p);
        for i in 0..p {
            for j in 0..=i {
                if let Some(b) = self.get_box(i, j) {
                    let cur = omega[(i, j)];
                    if !b.contains(cur) {
                        let x = inside_point(&b);
                        omega[(i, j)] = x;
                        omega[(j, i)] = x;
                    }
                }
            }
        }
        cholesky(&omega).map_err(|_| {
            Error::InvalidSpec("the ledger boxes admit no positive-definite starting point near the identity".into())
        })?;
        Ok(omega)
    }

    /// Allowed interval for `ω_ij` given `τ` and the latent scale.
    pub fn element_region(&self, i: usize, j: usize, tau: f64, t: f64) -> Option<Interval> {
        let m = self.center[(i, j)];
        let w = tau * self.multiplier[(i, j)] * t;
        let mixture = Interval {
            lo: m - w,
            hi: m + w,
        };
        match self.get_box(i, j) {
            Some(b) => mixture.intersect(&b),
            None => (w > 0.0).then_some(mixture),
        }
    }

    /// Number of ledger violations of `omega` (boxes and graph zeros).
    pub fn violations(&self, omega: &DMatrix<f64>) -> usize {
        let p = self.dim();
        let mut count = 0;
        for i in 0..p {
            for j in 0..=i {
                let x = omega[(i, j)];
                if omega[(j, i)] != x {
                    count += 1;
                }
                if !self.is_free(i, j) {
                    if x != 0.0 {
                        count += 1;
                    }
                } else if let Some(b) = self.get_box(i, j) {
                    if !b.contains(x) {
                        count += 1;
                    }
                }
            }
        }
        count
    }
}

fn inside_point(b: &Interval) -> f64 {
    match (b.lo.is_finite(), b.hi.is_finite()) {
        (true, true) => 0.5 * (b.lo + b.hi),
        (true, false) => b.lo + 1.0,
        (false, true) => b.hi - 1.0,
        (false, false) => 0.0,
    }
}

/// Prior family, `τ` hyperprior and constraint ledger.
#[derive(Debug, Clone, PartialEq)]
pub struct PrecisionModel {
    pub family: Family,
    pub hyper: TauHyperPrior,
    pub ledger: ConstraintLedger,
}

impl PrecisionModel {
    pub fn new(family: Family, hyper: TauHyperPrior, ledger: ConstraintLedger) -> Result<Self> {
        let model = PrecisionModel {
            family,
            hyper,
            ledger,
        };
        model.validate()?;
        Ok(model)
    }

    pub fn validate(&self) -> Result<()> {
        self.family.validate()?;
        self.hyper.validate(&self.family)?;
        self.ledger.validate()?;
        if !self.hyper.is_fixed() && !self.ledger.is_scale_invariant() {
            return Err(Error::InvalidSpec(
                "a random tau needs zero centers and sign-only boxes; fix tau instead".into(),
            ));
        }
        Ok(())
    }
}

/// How blocks obtain their Schur components.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BlockPath {
    /// Running inverse `Σ = Ω⁻¹`, rank-two updates after each block.
    #[default]
    Fast,
    /// Fresh Cholesky solve of `Ω_{V∖e,V∖e}` for every block.
    Reference,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepOptions {
    pub path: BlockPath,
    /// Factorize the whole of `Ω` after every block update.
    pub verify_blocks: bool,
    /// Shuffle the edge order every sweep.
    pub random_scan: bool,
}

/// Latent scales `t_ij` of the free elements, standardized so that the
/// constraint reads `|ω_ij - m_ij| < τ v_ij t_ij`. Entries outside the graph
/// hold `NaN`.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentScales {
    pub t: DMatrix<f64>,
}

/// `(Ω, T, τ)`, the data `S` and `n`, and the running inverse `Σ`.
#[derive(Debug, Clone)]
pub struct GibbsState {
    pub omega: DMatrix<f64>,
    pub sigma: DMatrix<f64>,
    pub scales: LatentScales,
    pub tau: f64,
    pub s: DMatrix<f64>,
    pub n: f64,
    pub counter: DrawCounter,
    pub block_checks: u64,
    scratch: Vec<f64>,
}

impl GibbsState {
    /// Starts from `omega0` (or the ledger's projected identity) with `τ` at
    /// its fixed value or hyperprior median, then draws the latent scales.
    pub fn new<R: Rng + ?Sized>(
        model: &PrecisionModel,
        s: DMatrix<f64>,
        n: f64,
        omega0: Option<DMatrix<f64>>,
        rng: &mut R,
    ) -> Result<Self> {
        let p = model.ledger.dim();
        check_data(&s, n, p)?;
        let omega = match omega0 {
            Some(mut o) => {
                if o.shape() != (p, p) {
                    return Err(Error::Dimension(format!(
                        "initial precision is {}x{}, expected {p}x{p}",
                        o.nrows(),
                        o.ncols()
                    )));
                }
                mirror_lower(&mut o);
                if model.ledger.violations(&o) > 0 {
                    return Err(Error::InvalidSpec(
                        "initial precision violates the constraint ledger".into(),
                    ));
                }
                o
            }
            None => model.ledger.initial_omega()?,
        };
        let sigma = spd_inverse(&omega)?;
        let tau = model.hyper.initial_tau(&model.family);
        let mut state = GibbsState {
            omega,
            sigma,
            scales: LatentScales {
                t: DMatrix::from_element(p, p, f64::NAN),
            },
            tau,
            s,
            n,
            counter: DrawCounter::default(),
            block_checks: 0,
            scratch: Vec::with_capacity(2 * p),
        };
        sample_latent_scales(&mut state, model, rng);
        Ok(state)
    }

    pub fn dim(&self) -> usize {
        self.omega.nrows()
    }

    /// Replaces the sufficient statistics, e.g. when an outer sampler changes
    /// the effective data.
    pub fn set_data(&mut self, s: DMatrix<f64>, n: f64) -> Result<()> {
        check_data(&s, n, self.dim())?;
        self.s = s;
        self.n = n;
        Ok(())
    }

    /// Recomputes `Σ` from a fresh Cholesky factorization of `Ω`.
    pub fn refresh_inverse(&mut self) -> Result<()> {
        let l = cholesky(&self.omega)?;
        self.sigma = inverse_from_cholesky(&l);
        Ok(())
    }

    /// Whether every free element satisfies its mixture box and ledger box.
    pub fn is_feasible(&self, ledger: &ConstraintLedger) -> bool {
        let p = self.dim();
        if ledger.violations(&self.omega) > 0 {
            return false;
        }
        for (i, j) in ledger.graph.free_elements() {
            let t = self.scales.t[(i, j)];
            let dev = (self.omega[(i, j)] - ledger.center[(i, j)]).abs();
            if !(t > 0.0) || dev > self.tau * ledger.multiplier[(i, j)] * t {
                return false;
            }
        }
        let _ = p;
        true
    }
}

fn check_data(s: &DMatrix<f64>, n: f64, p: usize) -> Result<()> {
    if s.shape() != (p, p) {
        return Err(Error::Dimension(format!(
            "S is {}x{}, expected {p}x{p}",
            s.nrows(),
            s.ncols()
        )));
    }
    if !(n >= 0.0) || !n.is_finite() {
        return Err(Error::InvalidSpec(format!("sample size must be >= 0, got {n}")));
    }
    if s.iter().any(|x| !x.is_finite()) {
        return Err(Error::DegenerateData("S has non-finite entries".into()));
    }
    Ok(())
}

/// Regions for `(d1, d2, l21)` in a block, each given the other two at their
/// current values.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlockRegions {
    pub d1: IntervalSet,
    pub d2: IntervalSet,
    pub l21: IntervalSet,
}

/// Element intervals for `(ω_ii, ω_ij, ω_jj)` of block `(i, j)`.
fn block_boxes(
    state: &GibbsState,
    ledger: &ConstraintLedger,
    i: usize,
    j: usize,
) -> Result<[Interval; 3]> {
    let get = |a: usize, b: usize| {
        ledger
            .element_region(a, b, state.tau, state.scales.t[(a.max(b), a.min(b))])
            .ok_or_else(|| {
                Error::InfeasibleState(format!("empty region for element ({a}, {b})"))
            })
    };
    Ok([get(i, i)?, get(i, j)?, get(j, j)?])
}

/// `{x > 0 : c + k x ∈ [lo, hi]}` intersected into `acc`.
fn restrict_linear(acc: Interval, c: f64, k: f64, target: &Interval) -> Option<Interval> {
    if k == 0.0 {
        return target.contains(c).then_some(acc);
    }
    let a = (target.lo - c) / k;
    let b = (target.hi - c) / k;
    let (lo, hi) = if k > 0.0 { (a, b) } else { (b, a) };
    let lo = if lo.is_nan() { f64::NEG_INFINITY } else { lo };
    let hi = if hi.is_nan() { f64::INFINITY } else { hi };
    acc.intersect(&Interval { lo, hi })
}

fn d1_region(blk: &BlockDecomposition, boxes: &[Interval; 3]) -> Option<Interval> {
    let b = &blk.b;
    let l = blk.l21;
    let mut acc = Interval {
        lo: 0.0,
        hi: f64::INFINITY,
    };
    acc = restrict_linear(acc, b[(0, 0)], 1.0, &boxes[0])?;
    acc = restrict_linear(acc, b[(1, 0)], l, &boxes[1])?;
    acc = restrict_linear(acc, blk.d2 + b[(1, 1)], l * l, &boxes[2])?;
    Some(acc)
}

fn d2_region(blk: &BlockDecomposition, d1: f64, l: f64, boxes: &[Interval; 3]) -> Option<Interval> {
    let acc = Interval {
        lo: 0.0,
        hi: f64::INFINITY,
    };
    restrict_linear(acc, d1 * l * l + blk.b[(1, 1)], 1.0, &boxes[2])
}

fn l21_region(
    blk: &BlockDecomposition,
    d1: f64,
    d2: f64,
    boxes: &[Interval; 3],
) -> Result<IntervalSet> {
    let b = &blk.b;
    let linear = Interval {
        lo: (boxes[1].lo - b[(1, 0)]) / d1,
        hi: (boxes[1].hi - b[(1, 0)]) / d1,
    };
    let cap = |x: f64, bound: f64| if bound.is_finite() { x.min(QUAD_CAP) } else { x };
    let qlo = cap((boxes[2].lo - b[(1, 1)] - d2) / d1, boxes[2].lo);
    let qhi = cap((boxes[2].hi - b[(1, 1)] - d2) / d1, boxes[2].hi);
    if !(qhi > 0.0) {
        return Err(Error::InfeasibleState(format!(
            "quadratic l21 bound {qhi} is not positive in block ({}, {})",
            blk.i, blk.j
        )));
    }
    let rhi = qhi.sqrt();
    let parts = if qlo > 0.0 {
        let rlo = qlo.sqrt();
        (
            Interval::new(-rhi, -rlo).and_then(|x| x.intersect(&linear)),
            Interval::new(rlo, rhi).and_then(|x| x.intersect(&linear)),
        )
    } else {
        (Interval::new(-rhi, rhi).and_then(|x| x.intersect(&linear)), None)
    };
    IntervalSet::from_parts(parts.0, parts.1)
}

/// Regions of the three block parameters at the current state.
pub fn block_conditional_regions(
    state: &GibbsState,
    ledger: &ConstraintLedger,
    blk: &BlockDecomposition,
) -> Result<BlockRegions> {
    let boxes = block_boxes(state, ledger, blk.i, blk.j)?;
    let infeasible = |what: &str| {
        Error::InfeasibleState(format!("empty {what} region in block ({}, {})", blk.i, blk.j))
    };
    let d1 = d1_region(blk, &boxes).ok_or_else(|| infeasible("d1"))?;
    let d2 = d2_region(blk, blk.d1, blk.l21, &boxes).ok_or_else(|| infeasible("d2"))?;
    let l21 = l21_region(blk, blk.d1, blk.d2, &boxes)?;
    Ok(BlockRegions {
        d1: IntervalSet::One(d1),
        d2: IntervalSet::One(d2),
        l21,
    })
}

/// Schur decomposition of block `(i, j)` through the running inverse.
fn fast_block(state: &GibbsState, i: usize, j: usize) -> Result<BlockDecomposition> {
    let s = &state.sigma;
    let se = Matrix2::new(s[(i, i)], s[(i, j)], s[(j, i)], s[(j, j)]);
    let det = se[(0, 0)] * se[(1, 1)] - se[(0, 1)] * se[(1, 0)];
    if !(det > 0.0) || !(se[(0, 0)] > 0.0) {
        return Err(Error::NotPositiveDefinite {
            pivot: i,
            value: det,
        });
    }
    let a = Matrix2::new(se[(1, 1)], -se[(0, 1)], -se[(1, 0)], se[(0, 0)]) / det;
    let a = Matrix2::new(a[(0, 0)], a[(1, 0)], a[(1, 0)], a[(1, 1)]);
    let o = &state.omega;
    let oe = Matrix2::new(o[(i, i)], o[(i, j)], o[(j, i)], o[(j, j)]);
    let mut b = oe - a;
    b[(0, 1)] = b[(1, 0)];
    BlockDecomposition::from_parts(i, j, a, b)
}

/// `Σ ← Σ - Σ_{:,e} Δ (I + Σ_ee Δ)⁻¹ Σ_{e,:}` after `Ω_ee += Δ`.
fn rank_two_update(
    sigma: &mut DMatrix<f64>,
    i: usize,
    j: usize,
    delta: &Matrix2<f64>,
    scratch: &mut Vec<f64>,
) {
    let p = sigma.nrows();
    let se = Matrix2::new(sigma[(i, i)], sigma[(i, j)], sigma[(j, i)], sigma[(j, j)]);
    let m = Matrix2::identity() + se * delta;
    let Some(minv) = m.try_inverse() else {
        return;
    };
    let k = delta * minv;
    let (k00, k11, k01) = (k[(0, 0)], k[(1, 1)], 0.5 * (k[(0, 1)] + k[(1, 0)]));
    scratch.clear();
    scratch.extend_from_slice(sigma.column(i).as_slice());
    scratch.extend_from_slice(sigma.column(j).as_slice());
    let (ci, cj) = scratch.split_at(p);
    let data = sigma.as_mut_slice();
    for c in 0..p {
        let u0 = k00 * ci[c] + k01 * cj[c];
        let u1 = k01 * ci[c] + k11 * cj[c];
        let col = &mut data[c * p..(c + 1) * p];
        for ((x, a), b) in col.iter_mut().zip(ci).zip(cj) {
            *x -= a * u0 + b * u1;
        }
    }
}

fn sample_gamma<R: Rng + ?Sized>(
    shape: f64,
    rate: f64,
    region: Interval,
    counter: &mut DrawCounter,
    rng: &mut R,
) -> Result<f64> {
    truncated_gamma(shape, rate.max(0.0), region.lo, region.hi, counter, rng)
}

fn keep(current: f64, counter: &mut DrawCounter) -> f64 {
    counter.draws += 1;
    counter.fallbacks += 1;
    current
}

/// One Gibbs update of block `(i, j)`: `d1`, then `d2`, then `l21`.
pub fn sample_block<R: Rng + ?Sized>(
    state: &mut GibbsState,
    model: &PrecisionModel,
    path: BlockPath,
    i: usize,
    j: usize,
    rng: &mut R,
) -> Result<()> {
    let ledger = &model.ledger;
    let blk = match path {
        BlockPath::Fast => fast_block(state, i, j)?,
        BlockPath::Reference => schur_block(&state.omega, i, j)?,
    };
    let boxes = block_boxes(state, ledger, i, j)?;
    let s11 = state.s[(i, i)];
    let s21 = state.s[(i, j)];
    let s22 = state.s[(j, j)];
    let half_n = 0.5 * state.n;
    // A box narrower than the rounding error of the block terms can leave
    // no representable value. The conditional then lies within an ulp of
    // the current value, which is kept and counted as a fallback.
    let l = blk.l21;
    let d1 = match d1_region(&blk, &boxes) {
        Some(r1) => {
            let rate1 = 0.5 * (s11 + 2.0 * s21 * l + s22 * l * l);
            sample_gamma(half_n + 2.0, rate1, r1, &mut state.counter, rng)?
        }
        None => keep(blk.d1, &mut state.counter),
    };

    let d2 = match d2_region(&blk, d1, l, &boxes) {
        Some(r2) => sample_gamma(half_n + 1.0, 0.5 * s22, r2, &mut state.counter, rng)?,
        None => keep(blk.d2, &mut state.counter),
    };

    let l = match l21_region(&blk, d1, d2, &boxes) {
        Ok(r3) => {
            let (mean, var) = if s22 > 0.0 {
                (-s21 / s22, 1.0 / (s22 * d1))
            } else {
                (0.0, f64::INFINITY)
            };
            truncated_normal(mean, var, &r3, &mut state.counter, rng)?
        }
        Err(Error::InfeasibleState(_)) => keep(l, &mut state.counter),
        Err(e) => return Err(e),
    };

    let (mut wii, mut wij, mut wjj) = BlockDecomposition::omega_entries(&blk.b, d1, d2, l);
    // recomposition can leave a box by an ulp
    wii = boxes[0].clamp(wii);
    wij = boxes[1].clamp(wij);
    wjj = boxes[2].clamp(wjj);

    let delta = Matrix2::new(
        wii - state.omega[(i, i)],
        wij - state.omega[(i, j)],
        wij - state.omega[(j, i)],
        wjj - state.omega[(j, j)],
    );
    state.omega[(i, i)] = wii;
    state.omega[(i, j)] = wij;
    state.omega[(j, i)] = wij;
    state.omega[(j, j)] = wjj;
    if path == BlockPath::Fast {
        rank_two_update(&mut state.sigma, i, j, &delta, &mut state.scratch);
    }
    Ok(())
}

/// Update of the diagonal of a vertex without edges. Its row is zero off the
/// diagonal, so `ω_vv` is exactly the Schur component.
pub fn sample_isolated_diag<R: Rng + ?Sized>(
    state: &mut GibbsState,
    model: &PrecisionModel,
    v: usize,
    rng: &mut R,
) -> Result<()> {
    let ledger = &model.ledger;
    if ledger.graph.degree(v) != 0 {
        return Err(Error::Domain(format!("vertex {v} is not isolated")));
    }
    let region = ledger
        .element_region(v, v, state.tau, state.scales.t[(v, v)])
        .and_then(|r| {
            r.intersect(&Interval {
                lo: 0.0,
                hi: f64::INFINITY,
            })
        })
        .ok_or_else(|| Error::InfeasibleState(format!("empty region for diagonal {v}")))?;
    let w = sample_gamma(
        0.5 * state.n + 1.0,
        0.5 * state.s[(v, v)],
        region,
        &mut state.counter,
        rng,
    )?;
    let w = region.clamp(w);
    state.omega[(v, v)] = w;
    state.sigma[(v, v)] = 1.0 / w;
    Ok(())
}

/// Draws every latent scale given `Ω` and `τ`.
pub fn sample_latent_scales<R: Rng + ?Sized>(
    state: &mut GibbsState,
    model: &PrecisionModel,
    rng: &mut R,
) {
    let ledger = &model.ledger;
    for (i, j) in ledger.graph.free_elements() {
        let theta = (state.omega[(i, j)] - ledger.center[(i, j)])
            / (state.tau * ledger.multiplier[(i, j)]);
        state.scales.t[(i, j)] = sample_latent(&model.family, theta, rng);
    }
}

/// Draws `τ` with the latent scales integrated out.
pub fn update_tau<R: Rng + ?Sized>(
    state: &mut GibbsState,
    model: &PrecisionModel,
    rng: &mut R,
) -> Result<()> {
    if model.hyper.is_fixed() {
        return Ok(());
    }
    let ledger = &model.ledger;
    let free = ledger.graph.free_elements();
    let devs: Vec<f64> = free
        .iter()
        .map(|&(i, j)| (state.omega[(i, j)] - ledger.center[(i, j)]) / ledger.multiplier[(i, j)])
        .collect();
    state.tau = sample_tau(&model.hyper, &model.family, &devs, free.len(), state.tau, rng)?;
    Ok(())
}

/// One sweep: blocks, isolated diagonals, `τ`, latent scales. `Σ` is
/// refreshed from a Cholesky factorization at the end, which also checks
/// that `Ω` is positive definite.
pub fn gibbs_sweep<R: Rng + ?Sized>(
    state: &mut GibbsState,
    model: &PrecisionModel,
    options: &SweepOptions,
    rng: &mut R,
) -> Result<()> {
    let mut edges = model.ledger.graph.edges();
    if options.random_scan {
        edges.shuffle(rng);
    }
    for &(i, j) in &edges {
        sample_block(state, model, options.path, i, j, rng)?;
        if options.verify_blocks {
            cholesky(&state.omega)?;
            state.block_checks += 1;
        }
    }
    for v in model.ledger.graph.isolated() {
        sample_isolated_diag(state, model, v, rng)?;
    }
    update_tau(state, model, rng)?;
    sample_latent_scales(state, model, rng);
    state.refresh_inverse()
}

/// Row-major lower triangle `(0,0), (1,0), (1,1), (2,0), …`.
pub fn lower_triangle(m: &DMatrix<f64>) -> Vec<f64> {
    let p = m.nrows();
    let mut out = Vec::with_capacity(p * (p + 1) / 2);
    for i in 0..p {
        for j in 0..=i {
            out.push(m[(i, j)]);
        }
    }
    out
}

/// Inverse of [`lower_triangle`].
pub fn from_lower_triangle(p: usize, v: &[f64]) -> Result<DMatrix<f64>> {
    if v.len() != p * (p + 1) / 2 {
        return Err(Error::Dimension(format!(
            "{} values cannot fill the lower triangle of a {p}x{p} matrix",
            v.len()
        )));
    }
    let mut m = DMatrix::zeros(p, p);
    let mut k = 0;
    for i in 0..p {
        for j in 0..=i {
            m[(i, j)] = v[k];
            m[(j, i)] = v[k];
            k += 1;
        }
    }
    Ok(m)
}

/// Chain length and bookkeeping.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChainConfig {
    pub iters: usize,
    pub burnin: usize,
    pub thin: usize,
    pub seed: u64,
    /// Stream index of the chain; chains sharing a seed stay independent.
    pub chain: u64,
    /// Keep every stored draw (otherwise only running summaries).
    pub store_draws: bool,
    pub options: SweepOptions,
}

impl Default for ChainConfig {
    fn default() -> Self {
        ChainConfig {
            iters: 15_000,
            burnin: 5_000,
            thin: 1,
            seed: 0,
            chain: 0,
            store_draws: true,
            options: SweepOptions::default(),
        }
    }
}

impl ChainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.iters <= self.burnin {
            return Err(Error::config(
                "/sampler/iters",
                format!("iters ({}) must exceed burnin ({})", self.iters, self.burnin),
            ));
        }
        if self.thin == 0 {
            return Err(Error::config("/sampler/thin", "thin must be at least 1"));
        }
        Ok(())
    }

    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.chain);
        rng
    }

    /// Whether iteration `it` (0-based) is stored.
    pub fn keeps(&self, it: usize) -> bool {
        it >= self.burnin && (it - self.burnin).is_multiple_of(self.thin)
    }

    pub fn kept(&self) -> usize {
        (self.iters - self.burnin).div_ceil(self.thin)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChainDiagnostics {
    pub sweeps: usize,
    pub kept: usize,
    pub truncated_draws: u64,
    pub fallbacks: u64,
    pub fallback_rate: f64,
    pub block_checks: u64,
    /// Lag-10 autocorrelation (in sweeps, after burn-in) of each element of
    /// the lower triangle.
    pub acf_lag10: Vec<f64>,
    pub max_abs_acf_lag10: f64,
}

#[derive(Debug, Clone)]
pub struct ChainOutput {
    pub p: usize,
    /// Stored draws of `Ω` as lower triangles; empty unless requested.
    pub draws: Vec<Vec<f64>>,
    pub tau_draws: Vec<f64>,
    pub mean_omega: DMatrix<f64>,
    pub mean_sigma: DMatrix<f64>,
    pub diagnostics: ChainDiagnostics,
    pub runtime_seconds: f64,
}

impl ChainOutput {
    /// `(E[Ω]⁻¹, E[Σ])`, the Bayes estimators of `Σ` under Stein and
    /// squared-error loss.
    pub fn bayes_estimators(&self) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
        Ok((spd_inverse(&self.mean_omega)?, self.mean_sigma.clone()))
    }
}

/// Runs one chain on data `(S, n)`; `observer` sees every stored state.
pub fn run_chain_with<F>(
    model: &PrecisionModel,
    s: &DMatrix<f64>,
    n: f64,
    omega0: Option<DMatrix<f64>>,
    config: &ChainConfig,
    mut observer: F,
) -> Result<ChainOutput>
where
    F: FnMut(&GibbsState),
{
    config.validate()?;
    model.validate()?;
    let start = Instant::now();
    let p = model.ledger.dim();
    let mut rng = config.rng();
    let mut state = GibbsState::new(model, s.clone(), n, omega0, &mut rng)?;
    let mut mean_omega = MatrixMean::new(p, p);
    let mut mean_sigma = MatrixMean::new(p, p);
    let mut acf = LagAutocorr::new(p * (p + 1) / 2, 10);
    let mut draws = Vec::new();
    let mut tau_draws = Vec::new();
    for it in 0..config.iters {
        gibbs_sweep(&mut state, model, &config.options, &mut rng)?;
        if it >= config.burnin {
            let lt = lower_triangle(&state.omega);
            acf.push(&lt);
            if config.keeps(it) {
                mean_omega.push(&state.omega);
                mean_sigma.push(&state.sigma);
                tau_draws.push(state.tau);
                observer(&state);
                if config.store_draws {
                    draws.push(lt);
                }
            }
        }
    }
    let counter = state.counter;
    if counter.rate() > MAX_FALLBACK_RATE {
        return Err(Error::FallbackRate {
            rate: counter.rate(),
            limit: MAX_FALLBACK_RATE,
            count: counter.fallbacks,
            draws: counter.draws,
        });
    }
    let acf_values = acf.values();
    let diagnostics = ChainDiagnostics {
        sweeps: config.iters,
        kept: mean_omega.count(),
        truncated_draws: counter.draws,
        fallbacks: counter.fallbacks,
        fallback_rate: counter.rate(),
        block_checks: state.block_checks,
        max_abs_acf_lag10: max_abs_finite(&acf_values),
        acf_lag10: acf_values,
    };
    Ok(ChainOutput {
        p,
        draws,
        tau_draws,
        mean_omega: mean_omega.mean().expect("at least one kept draw"),
        mean_sigma: mean_sigma.mean().expect("at least one kept draw"),
        diagnostics,
        runtime_seconds: start.elapsed().as_secs_f64(),
    })
}

pub fn run_chain(
    model: &PrecisionModel,
    s: &DMatrix<f64>,
    n: f64,
    omega0: Option<DMatrix<f64>>,
    config: &ChainConfig,
) -> Result<ChainOutput> {
    run_chain_with(model, s, n, omega0, config, |_| {})
}

/// `S = Y Yᵀ` for `Y` with one observation per column.
pub fn scatter(y: &DMatrix<f64>) -> DMatrix<f64> {
    y * y.transpose()
}
