//! Sample summaries recorded in run manifests.

use serde::Serialize;

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, Serialize)]
pub struct Summary {
    pub count: u64,
    pub mean: f64,
    pub stddev: f64,
    pub p5: f64,
    pub p50: f64,
    pub p95: f64,
}

/// Mean, unbiased standard deviation, and interpolated percentiles.
/// A single sample has stddev 0.
pub fn summarize(samples: &[f64]) -> Result<Summary> {
    if samples.is_empty() {
        return Err(Error::Numeric(inl_core::Error::InvalidInput(
            "summarize needs at least one sample".into(),
        )));
    }
    if samples.iter().any(|x| !x.is_finite()) {
        return Err(Error::Numeric(inl_core::Error::InvalidInput(
            "summarize needs finite samples".into(),
        )));
    }
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    let stddev = if samples.len() > 1 {
        (samples.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    let mut sorted = samples.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite values compare"));
    Ok(Summary {
        count: samples.len() as u64,
        mean,
        stddev,
        p5: percentile(&sorted, 5.0),
        p50: percentile(&sorted, 50.0),
        p95: percentile(&sorted, 95.0),
    })
}

/// Linear interpolation on the ascending-sorted slice.
fn percentile(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p / 100.0;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    if lo == hi {
        sorted[lo]
    } else {
        sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
    }
}
