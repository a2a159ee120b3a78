use serde::{Deserialize, Serialize};

use super::StatsError;

/// Five-number summary plus mean and 1.5 IQR outliers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxplotSummary {
    pub n: usize,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub mean: f64,
    pub whisker_low: f64,
    pub whisker_high: f64,
    pub outliers: Vec<f64>,
}

/// Quantile of sorted data by linear interpolation between order statistics
/// (position `(n - 1) * p`). Every quartile in this crate goes through here.
pub fn quantile_linear(sorted: &[f64], p: f64) -> f64 {
    debug_assert!(!sorted.is_empty());
    let h = (sorted.len() - 1) as f64 * p.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn boxplot_summary(data: &[f64]) -> Result<BoxplotSummary, StatsError> {
    if data.is_empty() {
        return Err(StatsError::Empty);
    }
    if data.iter().any(|x| !x.is_finite()) {
        return Err(StatsError::NonFinite);
    }
    let mut sorted = data.to_vec();
    sorted.sort_by(f64::total_cmp);
    let q1 = quantile_linear(&sorted, 0.25);
    let median = quantile_linear(&sorted, 0.5);
    let q3 = quantile_linear(&sorted, 0.75);
    let iqr = q3 - q1;
    let (lo_fence, hi_fence) = (q1 - 1.5 * iqr, q3 + 1.5 * iqr);
    let (inliers, outliers): (Vec<f64>, Vec<f64>) =
        sorted.iter().partition(|&&x| x >= lo_fence && x <= hi_fence);
    // Quartiles always lie inside the fences, so at least one inlier exists.
    let whisker_low = inliers[0];
    let whisker_high = inliers[inliers.len() - 1];
    let mean = data.iter().sum::<f64>() / data.len() as f64;
    Ok(BoxplotSummary {
        n: data.len(),
        q1,
        median,
        q3,
        mean,
        whisker_low,
        whisker_high,
        outliers,
    })
}
