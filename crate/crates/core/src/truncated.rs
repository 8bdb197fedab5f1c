//! Exact draws from univariate truncated normal and truncated gamma laws.
//!
//! Normal: inverse CDF in the central region, Robert's exponential-proposal
//! rejection (or a uniform proposal for narrow windows) once the region starts
//! more than three standard deviations from the mean. Gamma: inverse CDF of the
//! regularized incomplete gamma, switching to exact tangent-envelope rejection
//! when the tail probabilities underflow.

use rand::{Rng, RngExt};
use rand_distr::{Distribution, Exp1, Gamma, StandardNormal};
use serde::Serialize;
use statrs::function::erf::{erfc, erfc_inv};
use statrs::function::gamma::{gamma_lr, gamma_ur, ln_gamma};

use crate::error::{Error, Result};

const TAIL_START: f64 = 3.0;
const MAX_REJECTIONS: usize = 100_000;
const PLAIN_GAMMA_TRIES: usize = 3;

/// A closed interval `[lo, hi]`; `hi` may be `+∞` and `lo` may be `-∞`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Option<Self> {
        (lo < hi).then_some(Interval { lo, hi })
    }

    pub fn everything() -> Self {
        Interval {
            lo: f64::NEG_INFINITY,
            hi: f64::INFINITY,
        }
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }

    pub fn intersect(&self, other: &Interval) -> Option<Interval> {
        Interval::new(self.lo.max(other.lo), self.hi.min(other.hi))
    }

    /// Point of the interval closest to `x`.
    pub fn clamp(&self, x: f64) -> f64 {
        x.max(self.lo).min(self.hi)
    }
}

/// One interval or a union of two disjoint, sorted intervals.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum IntervalSet {
    One(Interval),
    Two(Interval, Interval),
}

impl IntervalSet {
    pub fn single(lo: f64, hi: f64) -> Result<Self> {
        Interval::new(lo, hi)
            .map(IntervalSet::One)
            .ok_or_else(|| Error::InfeasibleState(format!("empty interval [{lo}, {hi}]")))
    }

    /// Builds a set from up to two candidate intervals, dropping empty ones.
    pub fn from_parts(a: Option<Interval>, b: Option<Interval>) -> Result<Self> {
        match (a, b) {
            (Some(x), Some(y)) => {
                let (x, y) = if x.lo <= y.lo { (x, y) } else { (y, x) };
                if x.hi >= y.lo {
                    Ok(IntervalSet::One(Interval {
                        lo: x.lo,
                        hi: x.hi.max(y.hi),
                    }))
                } else {
                    Ok(IntervalSet::Two(x, y))
                }
            }
            (Some(x), None) | (None, Some(x)) => Ok(IntervalSet::One(x)),
            (None, None) => Err(Error::InfeasibleState("empty interval set".into())),
        }
    }

    pub fn parts(&self) -> Vec<Interval> {
        match *self {
            IntervalSet::One(a) => vec![a],
            IntervalSet::Two(a, b) => vec![a, b],
        }
    }

    pub fn contains(&self, x: f64) -> bool {
        match self {
            IntervalSet::One(a) => a.contains(x),
            IntervalSet::Two(a, b) => a.contains(x) || b.contains(x),
        }
    }

    /// Feasible point closest to `x`.
    pub fn nearest(&self, x: f64) -> f64 {
        match self {
            IntervalSet::One(a) => a.clamp(x),
            IntervalSet::Two(a, b) => {
                let (ca, cb) = (a.clamp(x), b.clamp(x));
                if (ca - x).abs() <= (cb - x).abs() {
                    ca
                } else {
                    cb
                }
            }
        }
    }
}

/// Counts truncated draws and how many of them had to use the deterministic
/// fallback.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct DrawCounter {
    pub draws: u64,
    pub fallbacks: u64,
}

impl DrawCounter {
    pub fn rate(&self) -> f64 {
        if self.draws == 0 {
            0.0
        } else {
            self.fallbacks as f64 / self.draws as f64
        }
    }

    pub fn merge(&mut self, other: &DrawCounter) {
        self.draws += other.draws;
        self.fallbacks += other.fallbacks;
    }
}

// ---------------------------------------------------------------------------
// normal

/// `Φ(x)`.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

/// `Φ⁻¹(p)` for `p ∈ (0, 1)`.
pub fn normal_quantile(p: f64) -> f64 {
    -std::f64::consts::SQRT_2 * erfc_inv(2.0 * p)
}

/// `log Φ(x)`, accurate far into the lower tail.
pub fn log_normal_cdf(x: f64) -> f64 {
    if x > -30.0 {
        normal_cdf(x).ln()
    } else {
        // asymptotic Mills-ratio expansion
        let z2 = 1.0 / (x * x);
        let series = 1.0 - z2 + 3.0 * z2 * z2 - 15.0 * z2 * z2 * z2;
        -0.5 * x * x - (-x).ln() - 0.5 * (2.0 * std::f64::consts::PI).ln() + series.ln()
    }
}

/// `log(1 - exp(x))` for `x ≤ 0`.
fn log1m_exp(x: f64) -> f64 {
    if x > -std::f64::consts::LN_2 {
        (-x.exp_m1()).ln()
    } else {
        (-x.exp()).ln_1p()
    }
}

/// `log(Φ(b) - Φ(a))` for standardized bounds.
pub fn log_normal_mass(a: f64, b: f64) -> f64 {
    if a >= b {
        return f64::NEG_INFINITY;
    }
    if a >= 0.0 {
        return log_normal_mass(-b, -a);
    }
    if b <= 0.0 {
        let lb = log_normal_cdf(b);
        let la = log_normal_cdf(a);
        lb + log1m_exp(la - lb)
    } else {
        (-(normal_cdf(a) + normal_cdf(-b))).ln_1p()
    }
}

/// Standard normal restricted to `[a, b]`; `None` if the rejection loop gives up.
fn standard_truncated_normal<R: Rng + ?Sized>(a: f64, b: f64, rng: &mut R) -> Option<f64> {
    if a == f64::NEG_INFINITY && b == f64::INFINITY {
        return Some(rng.sample(StandardNormal));
    }
    if a >= TAIL_START {
        return right_tail_normal(a, b, rng);
    }
    if b <= -TAIL_START {
        return right_tail_normal(-b, -a, rng).map(|z| -z);
    }
    // central region: keep the interval on the side where Φ is accurate
    let (lo, hi, flip) = if a > 0.0 { (-b, -a, true) } else { (a, b, false) };
    let plo = normal_cdf(lo);
    let phi = normal_cdf(hi);
    let u: f64 = rng.random();
    let p = plo + u * (phi - plo);
    let z = if p > 0.0 && p < 1.0 {
        normal_quantile(p).max(lo).min(hi)
    } else {
        lo.max(hi.min(0.0))
    };
    Some(if flip { -z } else { z })
}

/// Robert (1995): standard normal on `[a, b]` with `a ≥ 3`.
fn right_tail_normal<R: Rng + ?Sized>(a: f64, b: f64, rng: &mut R) -> Option<f64> {
    if b - a < 1.0 / a {
        // narrow window: uniform proposal, acceptance exp((a² - z²)/2) ≥ e^{-1.5}
        for _ in 0..MAX_REJECTIONS {
            let z = a + rng.random::<f64>() * (b - a);
            let log_u = crate::priors::open01(rng).ln();
            if log_u <= 0.5 * (a * a - z * z) {
                return Some(z);
            }
        }
        return None;
    }
    let alpha = 0.5 * (a + (a * a + 4.0).sqrt());
    for _ in 0..MAX_REJECTIONS {
        let e: f64 = rng.sample(Exp1);
        let z = a + e / alpha;
        if z > b {
            continue;
        }
        let log_u = crate::priors::open01(rng).ln();
        if log_u <= -0.5 * (z - alpha) * (z - alpha) {
            return Some(z);
        }
    }
    None
}

/// Exact draw from `N(mean, variance)` restricted to `region`.
///
/// Two-interval regions pick an interval with probability proportional to its
/// normal mass (computed in log space). An infinite variance means a flat
/// density on a bounded region. If the masses are not representable the
/// feasible point nearest the mean is returned and counted as a fallback.
pub fn truncated_normal<R: Rng + ?Sized>(
    mean: f64,
    variance: f64,
    region: &IntervalSet,
    counter: &mut DrawCounter,
    rng: &mut R,
) -> Result<f64> {
    counter.draws += 1;
    if !(variance > 0.0) || mean.is_nan() {
        return Err(Error::Domain(format!(
            "truncated normal needs positive variance, got mean {mean}, variance {variance}"
        )));
    }
    let parts = region.parts();
    if variance == f64::INFINITY || !mean.is_finite() {
        return flat_draw(&parts, region, mean, counter, rng);
    }
    let sd = variance.sqrt();
    let standardized: Vec<(f64, f64)> = parts
        .iter()
        .map(|iv| ((iv.lo - mean) / sd, (iv.hi - mean) / sd))
        .collect();

    let pick = if standardized.len() == 1 {
        Some(0)
    } else {
        let lm0 = log_normal_mass(standardized[0].0, standardized[0].1);
        let lm1 = log_normal_mass(standardized[1].0, standardized[1].1);
        if lm0.is_nan() || lm1.is_nan() || (lm0 == f64::NEG_INFINITY && lm1 == f64::NEG_INFINITY)
        {
            None
        } else {
            // P(first) = 1 / (1 + exp(lm1 - lm0))
            let p0 = 1.0 / (1.0 + (lm1 - lm0).exp());
            Some(if rng.random::<f64>() < p0 { 0 } else { 1 })
        }
    };

    let draw = pick.and_then(|k| {
        let (a, b) = standardized[k];
        standard_truncated_normal(a, b, rng).map(|z| parts[k].clamp(mean + sd * z))
    });
    match draw {
        Some(x) if x.is_finite() => Ok(x),
        _ => {
            counter.fallbacks += 1;
            Ok(region.nearest(mean))
        }
    }
}

fn flat_draw<R: Rng + ?Sized>(
    parts: &[Interval],
    region: &IntervalSet,
    mean: f64,
    counter: &mut DrawCounter,
    rng: &mut R,
) -> Result<f64> {
    let widths: Vec<f64> = parts.iter().map(|iv| iv.hi - iv.lo).collect();
    if widths.iter().any(|w| !w.is_finite()) {
        return Err(Error::Domain(
            "flat truncated density on an unbounded region is improper".into(),
        ));
    }
    let total: f64 = widths.iter().sum();
    let mut u = rng.random::<f64>() * total;
    for (iv, w) in parts.iter().zip(&widths) {
        if u <= *w {
            return Ok(iv.clamp(iv.lo + u));
        }
        u -= w;
    }
    counter.fallbacks += 1;
    Ok(region.nearest(if mean.is_finite() { mean } else { 0.0 }))
}

// ---------------------------------------------------------------------------
// gamma

/// Regularized lower incomplete gamma `P(a, y)` with the `y = 0` and `y = ∞`
/// limits handled.
pub fn gamma_p(a: f64, y: f64) -> f64 {
    if y <= 0.0 {
        0.0
    } else if y == f64::INFINITY {
        1.0
    } else {
        gamma_lr(a, y)
    }
}

/// Regularized upper incomplete gamma `Q(a, y)`.
pub fn gamma_q(a: f64, y: f64) -> f64 {
    if y <= 0.0 {
        1.0
    } else if y == f64::INFINITY {
        0.0
    } else {
        gamma_ur(a, y)
    }
}

fn log_gamma_density(a: f64, y: f64, lg: f64) -> f64 {
    (a - 1.0) * y.ln() - y - lg
}

/// Quantile of `Ga(shape, rate)` restricted to `[lo, hi]` at cumulative
/// probability `u ∈ [0, 1]` (of the truncated law). Returns `None` when the
/// incomplete-gamma values underflow.
pub fn truncated_gamma_quantile(shape: f64, rate: f64, lo: f64, hi: f64, u: f64) -> Option<f64> {
    if rate == 0.0 {
        return power_law_quantile(shape, lo, hi, u);
    }
    let (ylo, yhi) = (rate * lo, rate * hi);
    standard_gamma_quantile(shape, ylo, yhi, u).map(|y| (y / rate).max(lo).min(hi))
}

/// `x ∝ x^{a-1}` on `[lo, hi]`: the zero-rate limit.
fn power_law_quantile(a: f64, lo: f64, hi: f64, u: f64) -> Option<f64> {
    if !hi.is_finite() {
        return None;
    }
    let r = (lo / hi).powf(a);
    let x = hi * (r + u * (1.0 - r)).powf(1.0 / a);
    Some(x.max(lo).min(hi))
}

fn standard_gamma_quantile(a: f64, ylo: f64, yhi: f64, u: f64) -> Option<f64> {
    let plo = gamma_p(a, ylo);
    if plo < 0.5 {
        let phi = gamma_p(a, yhi);
        if !(phi > plo) {
            return None;
        }
        let target = plo + u * (phi - plo);
        Some(solve_monotone(a, ylo, yhi, target, true))
    } else {
        let qlo = gamma_q(a, ylo);
        let qhi = gamma_q(a, yhi);
        if !(qlo > qhi) {
            return None;
        }
        let target = qlo - u * (qlo - qhi);
        Some(solve_monotone(a, ylo, yhi, target, false))
    }
}

/// Solves `P(a, y) = target` (`lower`) or `Q(a, y) = target` on `[ylo, yhi]`
/// by safeguarded Newton iteration.
fn solve_monotone(a: f64, ylo: f64, yhi: f64, target: f64, lower: bool) -> f64 {
    let lg = ln_gamma(a);
    let f = |y: f64| {
        if lower {
            gamma_p(a, y) - target
        } else {
            target - gamma_q(a, y)
        }
    };
    let mut lo = ylo;
    let mut hi = yhi;
    if !hi.is_finite() {
        hi = (ylo.max(a) * 2.0).max(1.0);
        while f(hi) < 0.0 {
            lo = hi;
            hi *= 2.0;
            if !hi.is_finite() {
                return lo;
            }
        }
    }
    let mut y = if ylo > 0.0 || a >= 1.0 {
        0.5 * (lo + hi)
    } else {
        0.5 * hi
    };
    for _ in 0..200 {
        let fy = f(y);
        if fy == 0.0 {
            return y;
        }
        if fy < 0.0 {
            lo = y;
        } else {
            hi = y;
        }
        let dens = log_gamma_density(a, y, lg).exp();
        let mut next = if dens > 0.0 { y - fy / dens } else { f64::NAN };
        if !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        if (next - y).abs() <= 4.0 * f64::EPSILON * y.abs() || hi - lo <= 4.0 * f64::EPSILON * hi {
            return next;
        }
        y = next;
    }
    y
}

/// Exact draw from `Ga(shape, rate)` (rate parameterization) restricted to
/// `[lo, hi] ⊂ [0, ∞]`.
///
/// A zero rate is the improper `x^{shape-1}` limit and needs a finite `hi`.
/// Should even the tail-rejection paths fail, the feasible point nearest the
/// mode is returned and counted as a fallback.
pub fn truncated_gamma<R: Rng + ?Sized>(
    shape: f64,
    rate: f64,
    lo: f64,
    hi: f64,
    counter: &mut DrawCounter,
    rng: &mut R,
) -> Result<f64> {
    counter.draws += 1;
    if !(shape > 0.0) || !(rate >= 0.0) || !rate.is_finite() {
        return Err(Error::Domain(format!(
            "truncated gamma needs shape > 0 and finite rate >= 0, got ({shape}, {rate})"
        )));
    }
    let lo = lo.max(0.0);
    if !(lo < hi) {
        return Err(Error::InfeasibleState(format!(
            "empty gamma truncation region [{lo}, {hi}]"
        )));
    }
    if rate == 0.0 && !hi.is_finite() {
        return Err(Error::Domain(
            "zero-rate gamma on an unbounded region is improper".into(),
        ));
    }
    if rate > 0.0 {
        // a few plain draws first: whether one lands inside or the inverse
        // CDF below is used, the result has the truncated law
        if let Ok(g) = Gamma::new(shape, 1.0 / rate) {
            for _ in 0..PLAIN_GAMMA_TRIES {
                let x: f64 = g.sample(rng);
                if x >= lo && x <= hi {
                    return Ok(x);
                }
            }
        }
    }
    let u: f64 = rng.random();
    if let Some(x) = truncated_gamma_quantile(shape, rate, lo, hi, u) {
        if x.is_finite() {
            return Ok(x);
        }
    }
    // tails underflowed: exact rejection in the standardized scale
    let (ylo, yhi) = (rate * lo, rate * hi);
    let mode = (shape - 1.0).max(0.0);
    let draw = if ylo >= mode {
        upper_tail_gamma(shape, ylo, yhi, rng)
    } else if yhi <= mode {
        lower_tail_gamma(shape, ylo, yhi, rng)
    } else {
        None
    };
    match draw {
        Some(y) => Ok((y / rate).max(lo).min(hi)),
        None => {
            counter.fallbacks += 1;
            let m = if rate > 0.0 { mode / rate } else { hi };
            Ok(m.max(lo).min(hi))
        }
    }
}

/// `y ∝ y^{a-1} e^{-y}` on `[ylo, yhi]` with `ylo` past the mode.
fn upper_tail_gamma<R: Rng + ?Sized>(a: f64, ylo: f64, yhi: f64, rng: &mut R) -> Option<f64> {
    let f = |y: f64| (a - 1.0) * y.ln() - y;
    // concave log density for a ≥ 1: the tangent at ylo is an envelope;
    // for a < 1 the Exp(1) tail times ylo^{a-1} dominates
    let slope = if a >= 1.0 { (a - 1.0) / ylo - 1.0 } else { -1.0 };
    let rate = -slope;
    if !(rate > 0.0) {
        return None;
    }
    for _ in 0..MAX_REJECTIONS {
        let e: f64 = rng.sample(Exp1);
        let y = ylo + e / rate;
        if y > yhi {
            continue;
        }
        let log_accept = f(y) - f(ylo) - slope * (y - ylo);
        if crate::priors::open01(rng).ln() <= log_accept {
            return Some(y);
        }
    }
    None
}

/// `y ∝ y^{a-1} e^{-y}` on `[ylo, yhi]` with `yhi` below the mode (`a > 1`).
fn lower_tail_gamma<R: Rng + ?Sized>(a: f64, ylo: f64, yhi: f64, rng: &mut R) -> Option<f64> {
    if !(a > 1.0) || !yhi.is_finite() {
        return None;
    }
    let f = |y: f64| (a - 1.0) * y.ln() - y;
    // increasing concave log density; tangent at yhi gives an exponential
    // envelope growing towards yhi
    let slope = (a - 1.0) / yhi - 1.0;
    if !(slope > 0.0) {
        return None;
    }
    let width = yhi - ylo;
    for _ in 0..MAX_REJECTIONS {
        // yhi - y ~ Exp(slope) truncated to [0, width]
        let u = crate::priors::open01(rng);
        let d = -(1.0 - u * (-(slope * width)).exp_m1().abs()).ln() / slope;
        let d = d.min(width);
        let y = yhi - d;
        let log_accept = f(y) - f(yhi) - slope * (y - yhi);
        if crate::priors::open01(rng).ln() <= log_accept {
            return Some(y);
        }
    }
    None
}
