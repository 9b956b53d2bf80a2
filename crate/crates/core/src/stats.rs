//! Small descriptive-statistics helpers shared by the reporting modules.

use serde::{Deserialize, Serialize};

/// How percentiles are computed over a sorted sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum PercentileMethod {
    /// Linear interpolation between order statistics, rank = 1 + q·(n−1).
    #[default]
    Linear,
    /// Nearest-rank, rank = ceil(q·n).
    NearestRank,
}

pub fn mean(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    Some(values.iter().sum::<f64>() / values.len() as f64)
}

/// Median with the even-length convention of averaging the two middle
/// order statistics, so e.g. [1, 2, 3, 4] → 2.5.
pub fn median(values: &[f64]) -> Option<f64> {
    percentile(values, 0.5, PercentileMethod::Linear)
}

/// Percentile of an unsorted sample. `q` is a fraction in [0, 1].
pub fn percentile(values: &[f64], q: f64, method: PercentileMethod) -> Option<f64> {
    if values.is_empty() || !(0.0..=1.0).contains(&q) {
        return None;
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = sorted.len();
    match method {
        PercentileMethod::Linear => {
            let rank = q * (n - 1) as f64;
            let lo = rank.floor() as usize;
            let hi = rank.ceil() as usize;
            if lo == hi {
                Some(sorted[lo])
            } else {
                let frac = rank - lo as f64;
                Some(sorted[lo] + frac * (sorted[hi] - sorted[lo]))
            }
        }
        PercentileMethod::NearestRank => {
            if q == 0.0 {
                return Some(sorted[0]);
            }
            let rank = (q * n as f64).ceil() as usize;
            Some(sorted[rank.saturating_sub(1)])
        }
    }
}
