//! Two-sample Hotelling's T² test with pooled covariance, for 2-D
//! feature vectors.

use serde::Serialize;

use super::special::f_cdf;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SeparationTest {
    pub t2: f64,
    pub f_statistic: f64,
    pub p_value: f64,
    pub df1: f64,
    pub df2: f64,
    pub n_a: usize,
    pub n_b: usize,
}

fn mean2(points: &[[f64; 2]]) -> [f64; 2] {
    let n = points.len() as f64;
    [
        points.iter().map(|p| p[0]).sum::<f64>() / n,
        points.iter().map(|p| p[1]).sum::<f64>() / n,
    ]
}

/// Sum of outer products of deviations from the group mean.
fn scatter(points: &[[f64; 2]], mean: [f64; 2]) -> [[f64; 2]; 2] {
    let mut s = [[0.0; 2]; 2];
    for p in points {
        let d = [p[0] - mean[0], p[1] - mean[1]];
        s[0][0] += d[0] * d[0];
        s[0][1] += d[0] * d[1];
        s[1][0] += d[1] * d[0];
        s[1][1] += d[1] * d[1];
    }
    s
}

/// Two-sample T² on 2-D groups: T² = (n₁n₂/(n₁+n₂)) · δᵀ S⁻¹ δ with the
/// pooled covariance S, and F = T²·(n₁+n₂−p−1)/((n₁+n₂−2)·p), p = 2.
pub fn hotelling_t2(group_a: &[[f64; 2]], group_b: &[[f64; 2]]) -> Result<SeparationTest> {
    const P: f64 = 2.0;
    let (n_a, n_b) = (group_a.len(), group_b.len());
    if n_a < 3 || n_b < 3 {
        return Err(Error::config(
            "Hotelling's test needs at least 3 points per group in 2 dimensions",
        ));
    }
    let n = (n_a + n_b) as f64;

    let mean_a = mean2(group_a);
    let mean_b = mean2(group_b);
    let sa = scatter(group_a, mean_a);
    let sb = scatter(group_b, mean_b);
    let pooled = [
        [(sa[0][0] + sb[0][0]) / (n - 2.0), (sa[0][1] + sb[0][1]) / (n - 2.0)],
        [(sa[1][0] + sb[1][0]) / (n - 2.0), (sa[1][1] + sb[1][1]) / (n - 2.0)],
    ];

    let det = pooled[0][0] * pooled[1][1] - pooled[0][1] * pooled[1][0];
    let scale = pooled[0][0].abs().max(pooled[1][1].abs()).max(f64::MIN_POSITIVE);
    if !det.is_finite() || det.abs() <= 1e-12 * scale * scale {
        return Err(Error::Numeric(
            "pooled covariance is singular; jitter the data or drop a dimension".into(),
        ));
    }
    let inv = [
        [pooled[1][1] / det, -pooled[0][1] / det],
        [-pooled[1][0] / det, pooled[0][0] / det],
    ];

    let delta = [mean_a[0] - mean_b[0], mean_a[1] - mean_b[1]];
    let quad = delta[0] * (inv[0][0] * delta[0] + inv[0][1] * delta[1])
        + delta[1] * (inv[1][0] * delta[0] + inv[1][1] * delta[1]);
    let t2 = (n_a as f64 * n_b as f64 / n) * quad;

    let df1 = P;
    let df2 = n - P - 1.0;
    let f_statistic = t2 * df2 / ((n - 2.0) * P);
    let p_value = 1.0 - f_cdf(f_statistic, df1, df2)?;

    Ok(SeparationTest {
        t2,
        f_statistic,
        p_value,
        df1,
        df2,
        n_a,
        n_b,
    })
}
