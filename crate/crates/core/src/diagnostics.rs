//! Streaming chain summaries: running means and lag-k autocorrelations.

use std::collections::VecDeque;

use nalgebra::DMatrix;

/// Running elementwise mean of equally sized matrices.
#[derive(Debug, Clone)]
pub struct MatrixMean {
    sum: DMatrix<f64>,
    count: usize,
}

impl MatrixMean {
    pub fn new(rows: usize, cols: usize) -> Self {
        MatrixMean {
            sum: DMatrix::zeros(rows, cols),
            count: 0,
        }
    }

    pub fn push(&mut self, m: &DMatrix<f64>) {
        self.sum += m;
        self.count += 1;
    }

    pub fn count(&self) -> usize {
        self.count
    }

    /// `None` before the first push.
    pub fn mean(&self) -> Option<DMatrix<f64>> {
        (self.count > 0).then(|| &self.sum / self.count as f64)
    }
}

/// Lag-`k` autocorrelation of each coordinate of a vector-valued sequence,
/// accumulated without storing the sequence.
#[derive(Debug, Clone)]
pub struct LagAutocorr {
    lag: usize,
    window: VecDeque<Vec<f64>>,
    n: usize,
    sum: Vec<f64>,
    sum_sq: Vec<f64>,
    pairs: usize,
    sum_cross: Vec<f64>,
}

impl LagAutocorr {
    pub fn new(dim: usize, lag: usize) -> Self {
        LagAutocorr {
            lag,
            window: VecDeque::with_capacity(lag + 1),
            n: 0,
            sum: vec![0.0; dim],
            sum_sq: vec![0.0; dim],
            pairs: 0,
            sum_cross: vec![0.0; dim],
        }
    }

    pub fn push(&mut self, x: &[f64]) {
        debug_assert_eq!(x.len(), self.sum.len());
        for (k, v) in x.iter().enumerate() {
            self.sum[k] += v;
            self.sum_sq[k] += v * v;
        }
        self.n += 1;
        if self.window.len() == self.lag {
            let old = self.window.pop_front().expect("window holds lag entries");
            for (k, v) in x.iter().enumerate() {
                self.sum_cross[k] += v * old[k];
            }
            self.pairs += 1;
            self.window.push_back(x.to_vec());
        } else {
            self.window.push_back(x.to_vec());
        }
    }

    /// Per-coordinate autocorrelation; `NaN` for constant coordinates or too
    /// short sequences.
    pub fn values(&self) -> Vec<f64> {
        if self.pairs < 2 {
            return vec![f64::NAN; self.sum.len()];
        }
        let n = self.n as f64;
        (0..self.sum.len())
            .map(|k| {
                let mean = self.sum[k] / n;
                let var = self.sum_sq[k] / n - mean * mean;
                if var <= 1e-300 {
                    return f64::NAN;
                }
                let cov = self.sum_cross[k] / self.pairs as f64 - mean * mean;
                (cov / var).clamp(-1.0, 1.0)
            })
            .collect()
    }
}

/// Largest finite absolute value, or `NaN` if there is none.
pub fn max_abs_finite(v: &[f64]) -> f64 {
    v.iter()
        .filter(|x| x.is_finite())
        .fold(f64::NAN, |acc, x| if acc.is_nan() { x.abs() } else { acc.max(x.abs()) })
}

/// Empirical quantile with linear interpolation (type 7).
pub fn quantile(sorted: &[f64], prob: f64) -> f64 {
    assert!(!sorted.is_empty(), "quantile of an empty sample");
    let h = (sorted.len() - 1) as f64 * prob.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    quantile(&v, 0.5)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    #[test]
    fn ar1_autocorrelation() {
        // x_t = 0.9 x_{t-1} + e_t has lag-10 autocorrelation 0.9^10
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut acf = LagAutocorr::new(1, 10);
        let mut x = 0.0;
        for _ in 0..400_000 {
            let e: f64 = StandardNormal.sample(&mut rng);
            x = 0.9 * x + e;
            acf.push(&[x]);
        }
        let r = acf.values()[0];
        assert!((r - 0.9f64.powi(10)).abs() < 0.02, "{r}");
    }

    #[test]
    fn constant_sequence_is_nan() {
        let mut acf = LagAutocorr::new(2, 3);
        for _ in 0..20 {
            acf.push(&[1.0, 2.0]);
        }
        assert!(acf.values().iter().all(|v| v.is_nan()));
    }

    #[test]
    fn quantiles() {
        let v = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(quantile(&v, 0.0), 1.0);
        assert_eq!(quantile(&v, 1.0), 4.0);
        assert_eq!(quantile(&v, 0.5), 2.5);
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
    }

    #[test]
    fn matrix_mean() {
        let mut m = MatrixMean::new(1, 1);
        assert!(m.mean().is_none());
        m.push(&DMatrix::from_element(1, 1, 1.0));
        m.push(&DMatrix::from_element(1, 1, 3.0));
        assert_eq!(m.mean().unwrap()[(0, 0)], 2.0);
    }
}
