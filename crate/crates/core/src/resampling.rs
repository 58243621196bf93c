//! Critical values by overlapping-window subsampling.
//!
//! The full-sample statistic has a distribution that cannot be simulated
//! directly, but every contiguous window of length b yields a smaller copy of
//! it. Collecting the statistic over all T - b + 1 windows, taking an upper
//! quantile, and extrapolating the quantile in 1/b toward the full sample
//! size gives the critical value. Rejection requires the full-sample
//! statistic to exceed the critical value strictly.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{GridPolicy, SpanningConfig};
use crate::error::Error;
use crate::panel::ReturnPanel;
use crate::sets::PortfolioSet;
use crate::statistic::{build_z_grid, saddle_statistic, ZGrid};
use crate::Result;

/// Statistic over every window of one block length, ascending window start.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubsampleDistribution {
    pub block: usize,
    pub stats: Vec<f64>,
}

/// Evaluate the statistic on every overlapping window of length `block`.
/// Window thresholds follow the configured policy: rebuilt per window, or
/// shared from `full_grid`.
pub fn subsample_statistics(
    panel: &ReturnPanel,
    outer: &PortfolioSet,
    inner: &PortfolioSet,
    block: usize,
    config: &SpanningConfig,
    full_grid: &ZGrid,
) -> Result<SubsampleDistribution> {
    let t_len = panel.periods();
    if block < 2 || block > t_len {
        return Err(Error::InvalidConfig(format!(
            "block length {block} outside 2..={t_len}"
        )));
    }
    let tols = &config.tolerances;
    let stats: Vec<f64> = (0..=t_len - block)
        .into_par_iter()
        .map(|start| -> Result<f64> {
            let window = panel.window(start, block)?;
            let grid_storage;
            let grid = match config.grid_policy {
                GridPolicy::Global => full_grid,
                GridPolicy::Window => {
                    grid_storage =
                        build_z_grid(&window, outer, inner, &config.z_grid, tols)?;
                    &grid_storage
                }
            };
            Ok(saddle_statistic(&window, outer, inner, grid, tols)?.xi)
        })
        .collect::<Result<_>>()?;
    Ok(SubsampleDistribution { block, stats })
}

/// Left-continuous empirical quantile: the smallest observed value whose
/// cumulative share reaches `p`.
pub fn empirical_quantile(values: &[f64], p: f64) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::InvalidConfig("quantile of an empty sample".into()));
    }
    if !(p > 0.0 && p <= 1.0) {
        return Err(Error::InvalidConfig(format!(
            "quantile level {p} outside (0, 1]"
        )));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    // Smallest k with k/n >= p; the epsilon absorbs p*n landing a hair above
    // an integer in floating point.
    let k = ((p * n as f64) - 1e-9).ceil().max(1.0) as usize;
    Ok(sorted[k.min(n) - 1])
}

/// Fitted line q(b) = intercept + slope / b and its value at the full sample
/// size.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BiasCorrection {
    pub intercept: f64,
    pub slope: f64,
    /// intercept + slope / T.
    pub corrected: f64,
}

/// Least-squares fit of quantiles against reciprocal block length,
/// extrapolated to `periods`.
pub fn bias_correct(points: &[(usize, f64)], periods: usize) -> Result<BiasCorrection> {
    if points.len() < 2 {
        return Err(Error::InvalidConfig(
            "bias correction needs at least two block lengths".into(),
        ));
    }
    let mut blocks: Vec<usize> = points.iter().map(|&(b, _)| b).collect();
    blocks.sort_unstable();
    blocks.dedup();
    if blocks.len() < 2 {
        return Err(Error::InvalidConfig(
            "bias correction needs two distinct block lengths".into(),
        ));
    }
    if blocks[0] == 0 {
        return Err(Error::InvalidConfig("zero block length".into()));
    }
    let n = points.len() as f64;
    let xs: Vec<f64> = points.iter().map(|&(b, _)| 1.0 / b as f64).collect();
    let x_bar = xs.iter().sum::<f64>() / n;
    let y_bar = points.iter().map(|&(_, q)| q).sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for (x, &(_, q)) in xs.iter().zip(points) {
        sxx += (x - x_bar) * (x - x_bar);
        sxy += (x - x_bar) * (q - y_bar);
    }
    let slope = sxy / sxx;
    let intercept = y_bar - slope * x_bar;
    Ok(BiasCorrection {
        intercept,
        slope,
        corrected: intercept + slope / periods as f64,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Decision {
    Accept,
    Reject,
}

/// Reject only on a strict exceedance, so a statistic sitting exactly at the
/// critical value accepts.
pub fn decide(xi: f64, critical: f64) -> Decision {
    if xi > critical {
        Decision::Reject
    } else {
        Decision::Accept
    }
}
