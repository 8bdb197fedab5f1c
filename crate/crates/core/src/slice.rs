//! Univariate slice sampler (stepping out, then shrinkage).

use rand::{Rng, RngExt};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy)]
pub struct SliceSampler {
    width: f64,
    max_steps: usize,
}

impl SliceSampler {
    pub fn new(width: f64) -> Self {
        SliceSampler {
            width,
            max_steps: 64,
        }
    }

    /// One slice-sampling transition from `x0` targeting `exp(log_f)`.
    pub fn sample<R, F>(&self, x0: f64, log_f: F, rng: &mut R) -> Result<f64>
    where
        R: Rng + ?Sized,
        F: Fn(f64) -> f64,
    {
        let f0 = log_f(x0);
        if !f0.is_finite() {
            return Err(Error::Domain(format!(
                "slice sampler started at a point with log density {f0}"
            )));
        }
        let e: f64 = rng.random();
        let level = f0 + (1.0 - e).ln();

        let u: f64 = rng.random();
        let mut lo = x0 - self.width * u;
        let mut hi = lo + self.width;
        let v: f64 = rng.random();
        let mut j = (self.max_steps as f64 * v).floor() as usize;
        let mut k = self.max_steps - 1 - j;
        while j > 0 && log_f(lo) > level {
            lo -= self.width;
            j -= 1;
        }
        while k > 0 && log_f(hi) > level {
            hi += self.width;
            k -= 1;
        }

        for _ in 0..200 {
            let w: f64 = rng.random();
            let x = lo + w * (hi - lo);
            if log_f(x) > level {
                return Ok(x);
            }
            if x < x0 {
                lo = x;
            } else {
                hi = x;
            }
        }
        // shrinkage collapsed onto x0 without acceptance; stay put
        Ok(x0)
    }
}
