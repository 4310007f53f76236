use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::scalar::Real;

pub const DEFAULT_RESAMPLES: usize = 2000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BootstrapConfig {
    pub resamples: usize,
    pub seed: u64,
    /// Coverage of the percentile interval, e.g. 0.95.
    pub level: f64,
}

impl Default for BootstrapConfig {
    fn default() -> Self {
        Self { resamples: DEFAULT_RESAMPLES, seed: 0, level: 0.95 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval<T> {
    pub lower: T,
    pub upper: T,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate<T> {
    pub value: T,
    pub ci: Interval<T>,
}

/// Linear-interpolation quantile of sorted data.
pub(crate) fn quantile<T: Real>(sorted: &[T], q: f64) -> T {
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    let w = T::lit(h - lo as f64);
    sorted[lo] + (sorted[hi] - sorted[lo]) * w
}

/// Percentile interval for `stat` over unit resamples drawn with replacement.
/// Resample `r` uses its own ChaCha stream, so the result does not depend on
/// thread scheduling. Resamples where `stat` is undefined are skipped. The
/// interval is widened, if needed, to contain `point`.
pub fn bootstrap_ci<T, F>(n_units: usize, point: T, config: &BootstrapConfig, stat: F) -> Interval<T>
where
    T: Real,
    F: Fn(&[usize]) -> Option<T> + Sync,
{
    if n_units == 0 || config.resamples == 0 {
        return Interval { lower: point, upper: point };
    }
    let mut draws: Vec<T> = (0..config.resamples)
        .into_par_iter()
        .filter_map(|r| {
            let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
            rng.set_stream(r as u64);
            let idx: Vec<usize> = (0..n_units).map(|_| rng.random_range(0..n_units)).collect();
            stat(&idx)
        })
        .collect();
    draws.retain(|x| !x.is_nan());
    if draws.is_empty() {
        return Interval { lower: point, upper: point };
    }
    draws.sort_by(|a, b| a.partial_cmp(b).expect("no NaN"));
    let tail = (1.0 - config.level) / 2.0;
    let lower = quantile(&draws, tail);
    let upper = quantile(&draws, 1.0 - tail);
    Interval { lower: lower.min(point), upper: upper.max(point) }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quantiles() {
        let v = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(quantile(&v, 0.0), 1.0);
        assert_eq!(quantile(&v, 1.0), 4.0);
        assert_eq!(quantile(&v, 0.5), 2.5);
    }

    #[test]
    fn seeded_and_reproducible() {
        let data: Vec<f64> = (0..50).map(|i| (i % 7) as f64).collect();
        let mean = |idx: &[usize]| Some(idx.iter().map(|&i| data[i]).sum::<f64>() / idx.len() as f64);
        let point = mean(&(0..50).collect::<Vec<_>>()).unwrap();
        let cfg = BootstrapConfig { resamples: 500, seed: 9, level: 0.95 };
        let a = bootstrap_ci(50, point, &cfg, mean);
        let b = bootstrap_ci(50, point, &cfg, mean);
        assert_eq!(a, b);
        assert!(a.lower <= point && point <= a.upper);
        let c = bootstrap_ci(50, point, &BootstrapConfig { seed: 10, ..cfg }, mean);
        assert_ne!(a, c);
    }
}
