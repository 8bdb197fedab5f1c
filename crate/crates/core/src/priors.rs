//! Shrinkage prior families written as scale mixtures of uniforms.
//!
//! Each family has an unnormalized density `π(θ)` (with global scale `τ`), a
//! mixing density `h(t) ∝ -2t π'(t)` such that `θ | t ~ U(-t, t)`, and a closed
//! form for the conditional law of the latent scale `t` given `θ`:
//! `p(t | θ) ∝ -π'(t) 1{t > |θ|}`. Its survival function is
//! `pr(T > t | θ) = π(t) / π(|θ|)`, which is what [`PriorSpec::inverse_conditional_cdf`]
//! inverts (so `u = 1` maps to `t = |θ|` and the map is decreasing in `u`).

use rand::{Rng, RngExt};
use rand_distr::{Distribution, Gamma};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::slice::SliceSampler;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum Family {
    #[serde(rename = "ep")]
    ExponentialPower { q: f64 },
    StudentT { nu: f64 },
    #[serde(rename = "gdp")]
    GeneralizedDoublePareto { alpha: f64 },
    #[serde(rename = "log")]
    Logarithmic,
}

impl Family {
    pub const NAMES: [&'static str; 4] = ["ep", "student_t", "gdp", "log"];

    pub fn name(&self) -> &'static str {
        match self {
            Family::ExponentialPower { .. } => "ep",
            Family::StudentT { .. } => "student_t",
            Family::GeneralizedDoublePareto { .. } => "gdp",
            Family::Logarithmic => "log",
        }
    }

    /// Short label including the shape parameter, e.g. `ep(q=0.2)`.
    pub fn label(&self) -> String {
        match self {
            Family::ExponentialPower { q } => format!("ep(q={q})"),
            Family::StudentT { nu } => format!("student_t(nu={nu})"),
            Family::GeneralizedDoublePareto { alpha } => format!("gdp(alpha={alpha})"),
            Family::Logarithmic => "log".to_string(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let (name, v) = match *self {
            Family::ExponentialPower { q } => ("q", q),
            Family::StudentT { nu } => ("nu", nu),
            Family::GeneralizedDoublePareto { alpha } => ("alpha", alpha),
            Family::Logarithmic => return Ok(()),
        };
        if v > 0.0 && v.is_finite() {
            Ok(())
        } else {
            Err(Error::InvalidSpec(format!(
                "{} prior needs {name} > 0, got {v}",
                self.name()
            )))
        }
    }

    /// `log g(x)` for the standardized density (`τ = 1`). Infinite at `x = 0`
    /// for the logarithmic family.
    pub fn log_g(&self, x: f64) -> f64 {
        let ax = x.abs();
        match *self {
            Family::ExponentialPower { q } => -ax.powf(q),
            Family::StudentT { nu } => -0.5 * (nu + 1.0) * (x * x).ln_1p(),
            Family::GeneralizedDoublePareto { alpha } => -(1.0 + alpha) * ax.ln_1p(),
            Family::Logarithmic => log_spike(ax).ln(),
        }
    }

    /// Unnormalized `log h(t)` for the standardized density.
    pub fn log_h(&self, t: f64) -> f64 {
        match *self {
            Family::ExponentialPower { q } => q * t.ln() - t.powf(q),
            Family::StudentT { nu } => 2.0 * t.ln() - 0.5 * (nu + 3.0) * (t * t).ln_1p(),
            Family::GeneralizedDoublePareto { alpha } => t.ln() - (2.0 + alpha) * t.ln_1p(),
            Family::Logarithmic => -(t * t).ln_1p(),
        }
    }

    /// Quantile map of `t | θ` for the standardized density, indexed by the
    /// survival probability `u = π(t)/π(|θ|)`.
    fn latent_quantile(&self, theta: f64, u: f64) -> f64 {
        let at = theta.abs();
        let neg_log_u = -u.ln();
        match *self {
            Family::ExponentialPower { q } => (neg_log_u + at.powf(q)).powf(1.0 / q),
            Family::StudentT { nu } => {
                let c = (2.0 * neg_log_u / (nu + 1.0)).exp_m1();
                ((1.0 + at * at) * c + at * at).sqrt()
            }
            Family::GeneralizedDoublePareto { alpha } => {
                (1.0 + at) * (neg_log_u / (1.0 + alpha)).exp_m1() + at
            }
            Family::Logarithmic => {
                if at == 0.0 {
                    // π(0) is infinite; the latent scale is drawn from h itself.
                    1.0 / (0.5 * std::f64::consts::PI * u).tan()
                } else {
                    (u * log_spike(at)).exp_m1().powf(-0.5)
                }
            }
        }
    }

    /// `pr(T > t | θ)` for the standardized density.
    fn latent_survival(&self, theta: f64, t: f64) -> f64 {
        let at = theta.abs();
        if t <= at {
            return 1.0;
        }
        match *self {
            Family::Logarithmic if at == 0.0 => {
                1.0 - std::f64::consts::FRAC_2_PI * t.atan()
            }
            Family::Logarithmic => log_spike(t) / log_spike(at),
            _ => (self.log_g(t) - self.log_g(at)).exp(),
        }
    }
}

/// `ln(1 + 1/x²)` evaluated without overflow for tiny `x` or cancellation for
/// large `x`.
fn log_spike(ax: f64) -> f64 {
    if ax > 1.0 {
        (1.0 / (ax * ax)).ln_1p()
    } else {
        (ax * ax).ln_1p() - 2.0 * ax.ln()
    }
}

/// A prior family together with its global scale `τ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PriorSpec {
    pub family: Family,
    pub tau: f64,
}

impl PriorSpec {
    pub fn new(family: Family, tau: f64) -> Result<Self> {
        family.validate()?;
        if !(tau > 0.0 && tau.is_finite()) {
            return Err(Error::InvalidSpec(format!("tau must be positive, got {tau}")));
        }
        Ok(PriorSpec { family, tau })
    }

    /// Unnormalized `log π(θ)`.
    pub fn log_density(&self, theta: f64) -> Result<f64> {
        if !theta.is_finite() {
            return Err(Error::Domain(format!("theta must be finite, got {theta}")));
        }
        if theta == 0.0 && self.family == Family::Logarithmic {
            return Err(Error::Domain(
                "logarithmic density is infinite at theta = 0".into(),
            ));
        }
        Ok(self.family.log_g(theta / self.tau))
    }

    /// Unnormalized `log h(t)`.
    pub fn mixing_log_density(&self, t: f64) -> Result<f64> {
        if !(t > 0.0) {
            return Err(Error::Domain(format!("t must be positive, got {t}")));
        }
        Ok(self.family.log_h(t / self.tau))
    }

    /// Draw-ready quantile of the latent scale given `θ`: returns `t ≥ |θ|`
    /// with `π(t) = u π(|θ|)`.
    pub fn inverse_conditional_cdf(&self, theta: f64, u: f64) -> Result<f64> {
        if !(u > 0.0 && u <= 1.0) {
            return Err(Error::Domain(format!("u must lie in (0, 1], got {u}")));
        }
        if !theta.is_finite() {
            return Err(Error::Domain(format!("theta must be finite, got {theta}")));
        }
        let t = self.tau * self.family.latent_quantile(theta / self.tau, u);
        Ok(t.max(theta.abs()))
    }

    /// `pr(T > t | θ) = π(t) / π(|θ|)`, the function inverted by
    /// [`inverse_conditional_cdf`](Self::inverse_conditional_cdf).
    pub fn conditional_survival(&self, theta: f64, t: f64) -> f64 {
        self.family
            .latent_survival(theta / self.tau, t / self.tau)
    }
}

/// Hyperprior on the global shrinkage parameter `τ`.
///
/// JSON forms: `{"fixed": v}`, `{"gamma_inv_q": [a, b]}`, `{"half_cauchy": s}`,
/// `{"uniform_transform": true}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "TauRepr", into = "TauRepr")]
pub enum TauHyperPrior {
    /// `τ` held at a value.
    Fixed(f64),
    /// `τ^{-q} ~ Ga(shape, rate)`; conjugate for the exponential power family.
    GammaInvQ { shape: f64, rate: f64 },
    /// `1/(1+τ) ~ U(0,1)`, i.e. `p(τ) = (1+τ)^{-2}`.
    UniformTransform,
    /// `τ ~ C⁺(0, scale)`.
    HalfCauchy { scale: f64 },
}

#[derive(Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
enum TauRepr {
    Fixed(f64),
    GammaInvQ([f64; 2]),
    UniformTransform(bool),
    HalfCauchy(f64),
}

impl TryFrom<TauRepr> for TauHyperPrior {
    type Error = String;

    fn try_from(r: TauRepr) -> std::result::Result<Self, String> {
        Ok(match r {
            TauRepr::Fixed(v) => TauHyperPrior::Fixed(v),
            TauRepr::GammaInvQ([shape, rate]) => TauHyperPrior::GammaInvQ { shape, rate },
            TauRepr::UniformTransform(true) => TauHyperPrior::UniformTransform,
            TauRepr::UniformTransform(false) => {
                return Err("uniform_transform must be `true`".into())
            }
            TauRepr::HalfCauchy(scale) => TauHyperPrior::HalfCauchy { scale },
        })
    }
}

impl From<TauHyperPrior> for TauRepr {
    fn from(h: TauHyperPrior) -> Self {
        match h {
            TauHyperPrior::Fixed(v) => TauRepr::Fixed(v),
            TauHyperPrior::GammaInvQ { shape, rate } => TauRepr::GammaInvQ([shape, rate]),
            TauHyperPrior::UniformTransform => TauRepr::UniformTransform(true),
            TauHyperPrior::HalfCauchy { scale } => TauRepr::HalfCauchy(scale),
        }
    }
}

impl TauHyperPrior {
    pub fn validate(&self, family: &Family) -> Result<()> {
        let ok = match *self {
            TauHyperPrior::Fixed(v) => v > 0.0 && v.is_finite(),
            TauHyperPrior::GammaInvQ { shape, rate } => {
                if !matches!(family, Family::ExponentialPower { .. }) {
                    return Err(Error::InvalidSpec(
                        "the gamma_inv_q hyperprior is only defined for the ep family".into(),
                    ));
                }
                shape > 0.0 && rate > 0.0 && shape.is_finite() && rate.is_finite()
            }
            TauHyperPrior::UniformTransform => true,
            TauHyperPrior::HalfCauchy { scale } => scale > 0.0 && scale.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidSpec(format!(
                "tau hyperprior parameters must be positive: {self:?}"
            )))
        }
    }

    pub fn is_fixed(&self) -> bool {
        matches!(self, TauHyperPrior::Fixed(_))
    }

    /// Starting value for chains: the fixed value or the hyperprior median.
    pub fn initial_tau(&self, family: &Family) -> f64 {
        match *self {
            TauHyperPrior::Fixed(v) => v,
            TauHyperPrior::GammaInvQ { shape, rate } => {
                let q = match family {
                    Family::ExponentialPower { q } => *q,
                    _ => 1.0,
                };
                let lambda = gamma_median(shape, rate);
                lambda.powf(-1.0 / q)
            }
            TauHyperPrior::UniformTransform => 1.0,
            TauHyperPrior::HalfCauchy { scale } => scale,
        }
    }

    /// `log p(τ)` up to a constant; used by the slice sampler.
    fn log_prior(&self, family: &Family, tau: f64) -> f64 {
        match *self {
            TauHyperPrior::Fixed(_) => 0.0,
            TauHyperPrior::GammaInvQ { shape, rate } => {
                let q = match family {
                    Family::ExponentialPower { q } => *q,
                    _ => 1.0,
                };
                let lambda = tau.powf(-q);
                (shape - 1.0) * lambda.ln() - rate * lambda + (-q - 1.0) * tau.ln()
            }
            TauHyperPrior::UniformTransform => -2.0 * tau.ln_1p(),
            TauHyperPrior::HalfCauchy { scale } => -((tau / scale).powi(2)).ln_1p(),
        }
    }
}

fn gamma_median(shape: f64, rate: f64) -> f64 {
    use statrs::distribution::{ContinuousCDF, Gamma as GammaDist};
    GammaDist::new(shape, rate)
        .map(|g| g.inverse_cdf(0.5))
        .unwrap_or(shape / rate)
}

/// Draws `τ` from `p(τ | Ω) ∝ τ^{-n} ∏ g(dev_k / τ) p(τ)`, with the latent
/// scales integrated out.
///
/// `deviations` are `(ω_k - m_k) / v_k` over the free elements and
/// `n_elements` is the number of free elements.
pub fn sample_tau<R: Rng + ?Sized>(
    hyper: &TauHyperPrior,
    family: &Family,
    deviations: &[f64],
    n_elements: usize,
    current: f64,
    rng: &mut R,
) -> Result<f64> {
    match *hyper {
        TauHyperPrior::Fixed(v) => Ok(v),
        TauHyperPrior::GammaInvQ { shape, rate } => {
            let q = match family {
                Family::ExponentialPower { q } => *q,
                _ => unreachable!("validated: gamma_inv_q requires the ep family"),
            };
            let sum: f64 = deviations.iter().map(|d| d.abs().powf(q)).sum();
            let post_shape = shape + n_elements as f64 / q;
            let post_rate = rate + sum;
            let lambda = Gamma::new(post_shape, 1.0 / post_rate)
                .map_err(|e| Error::Domain(format!("tau posterior: {e}")))?
                .sample(rng);
            if !(lambda > 0.0) {
                return Err(Error::NumericalUnderflow(format!(
                    "gamma draw for tau^-q underflowed (shape {post_shape}, rate {post_rate})"
                )));
            }
            Ok(lambda.powf(-1.0 / q))
        }
        _ => {
            let n = n_elements as f64;
            let log_target = |eta: f64| -> f64 {
                let tau = eta.exp();
                let mut acc = -n * eta + hyper.log_prior(family, tau) + eta;
                for d in deviations {
                    let v = family.log_g(d / tau);
                    if v.is_finite() {
                        acc += v;
                    }
                }
                acc
            };
            let eta = SliceSampler::new(1.0).sample(current.ln(), log_target, rng)?;
            Ok(eta.exp())
        }
    }
}

/// Draws the latent scale `t > |θ|` given a standardized deviation `θ`.
pub fn sample_latent<R: Rng + ?Sized>(family: &Family, theta: f64, rng: &mut R) -> f64 {
    let u: f64 = open01(rng);
    let t = family.latent_quantile(theta, u);
    let at = theta.abs();
    if t > at {
        t
    } else {
        // u rounded to 1; move one ulp past the bound to keep strict feasibility
        next_up(at)
    }
}

/// Uniform draw on the open interval (0, 1).
pub fn open01<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    loop {
        let u: f64 = rng.random();
        if u > 0.0 {
            return u;
        }
    }
}

pub(crate) fn next_up(x: f64) -> f64 {
    x.next_up()
}
