//! Independent oracles shared by the integration and acceptance tests:
//! adaptive quadrature, tabulated CDFs and Kolmogorov distances.
#![allow(dead_code)]

use unishrink::priors::Family;

/// `∫_a^b f` by tanh-sinh quadrature; `b` may be `+∞` (mapped by `t = 1/u`).
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64) -> f64 {
    if b.is_infinite() {
        let c = a.max(0.0) + 1.0;
        let head = if c > a { finite(&f, a, c) } else { 0.0 };
        let tail = finite(|u: f64| if u > 0.0 { f(1.0 / u) / (u * u) } else { 0.0 }, 0.0, 1.0 / c);
        return head + tail;
    }
    finite(&f, a, b)
}

fn finite<F: Fn(f64) -> f64>(f: F, a: f64, b: f64) -> f64 {
    // split in halves so sharp interior features are resolved
    let mid = 0.5 * (a + b);
    let tol = 1e-14;
    quadrature::double_exponential::integrate(&f, a, mid, tol).integral
        + quadrature::double_exponential::integrate(&f, mid, b, tol).integral
}

/// Normalizing constant of `g` over the real line.
pub fn prior_normalizer(family: &Family) -> f64 {
    let g = |x: f64| family.log_g(x).exp();
    2.0 * (integrate(g, 0.0, 1.0) + integrate(g, 1.0, f64::INFINITY))
}

/// Normalizing constant of `h` on `(0, ∞)`.
pub fn mixing_normalizer(family: &Family) -> f64 {
    let h = |t: f64| if t > 0.0 { family.log_h(t).exp() } else { 0.0 };
    integrate(h, 0.0, 1.0) + integrate(h, 1.0, f64::INFINITY)
}

/// `∫_{|θ|}^∞ h(t) / (2t) dt` with normalized `h`: the density of `θ` when
/// `θ | t ~ U(-t, t)` and `t ~ h`.
pub fn mixture_density(family: &Family, theta: f64, zh: f64) -> f64 {
    let at = theta.abs();
    // scaled by the integrand at the lower limit so tail values keep their
    // relative accuracy under an absolute tolerance
    let shift = if at > 0.0 { family.log_h(at) } else { 0.0 };
    let f = |t: f64| if t > 0.0 { (family.log_h(t) - shift).exp() / (2.0 * t) } else { 0.0 };
    let split = at.max(1.0) * 2.0;
    (integrate(f, at, split) + integrate(f, split, f64::INFINITY)) * shift.exp() / zh
}

/// CDF tabulated from an unnormalized log density on `[lo, hi]` by
/// quadrature between consecutive knots.
pub struct TabulatedCdf {
    knots: Vec<f64>,
    cdf: Vec<f64>,
}

impl TabulatedCdf {
    pub fn new<F: Fn(f64) -> f64>(log_density: F, lo: f64, hi: f64, knots: usize) -> Self {
        let xs: Vec<f64> = (0..=knots)
            .map(|k| lo + (hi - lo) * k as f64 / knots as f64)
            .collect();
        Self::from_knots(log_density, xs)
    }

    /// Knots `0` and then geometric from `first` to `hi`, for densities with
    /// an integrable singularity at zero.
    pub fn geometric<F: Fn(f64) -> f64>(log_density: F, first: f64, hi: f64, knots: usize) -> Self {
        let ratio = (hi / first).ln() / knots as f64;
        let mut xs = vec![0.0];
        xs.extend((0..=knots).map(|k| first * (ratio * k as f64).exp()));
        Self::from_knots(log_density, xs)
    }

    pub fn from_knots<F: Fn(f64) -> f64>(log_density: F, xs: Vec<f64>) -> Self {
        // shift by the largest value on the grid to avoid overflow
        let shift = xs
            .iter()
            .map(|&x| log_density(x))
            .filter(|v| v.is_finite())
            .fold(f64::NEG_INFINITY, f64::max);
        let f = |x: f64| {
            let v = log_density(x) - shift;
            if v.is_nan() {
                0.0
            } else {
                v.exp()
            }
        };
        let mut cdf = vec![0.0];
        for w in xs.windows(2) {
            let piece = quadrature::double_exponential::integrate(f, w[0], w[1], 1e-14).integral;
            cdf.push(cdf.last().unwrap() + piece);
        }
        let total = *cdf.last().unwrap();
        for c in &mut cdf {
            *c /= total;
        }
        TabulatedCdf { knots: xs, cdf }
    }

    pub fn eval(&self, x: f64) -> f64 {
        if x <= self.knots[0] {
            return 0.0;
        }
        if x >= *self.knots.last().unwrap() {
            return 1.0;
        }
        let k = self.knots.partition_point(|&k| k <= x) - 1;
        let w = (x - self.knots[k]) / (self.knots[k + 1] - self.knots[k]);
        self.cdf[k] + w * (self.cdf[k + 1] - self.cdf[k])
    }
}

/// Kolmogorov distance between a sample and a continuous CDF.
pub fn ks_distance<F: Fn(f64) -> f64>(sample: &[f64], cdf: F) -> f64 {
    let mut s = sample.to_vec();
    s.sort_by(|a, b| a.total_cmp(b));
    let n = s.len() as f64;
    s.iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
        })
        .fold(0.0, f64::max)
}

/// Asymptotic critical value of the one-sample Kolmogorov statistic.
pub fn ks_critical(n: usize, alpha: f64) -> f64 {
    (-(alpha / 2.0).ln() / (2.0 * n as f64)).sqrt()
}

/// Two-sample Kolmogorov distance.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> f64 {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(|x, y| x.total_cmp(y));
    b.sort_by(|x, y| x.total_cmp(y));
    let (mut i, mut j, mut d) = (0usize, 0usize, 0.0f64);
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / a.len() as f64 - j as f64 / b.len() as f64).abs());
    }
    d
}

pub const FAMILIES: [Family; 4] = [
    Family::ExponentialPower { q: 0.2 },
    Family::StudentT { nu: 3.0 },
    Family::GeneralizedDoublePareto { alpha: 1.0 },
    Family::Logarithmic,
];
