//! The scaled saddle statistic deciding whether one portfolio set spans
//! another for every reverse S-shaped risk profile.
//!
//! Two families of comparisons cover the preference class. Below or at a
//! threshold z <= 0 the relevant functional is the expected shortfall
//! sum_t (z - w'Y_t)_+, where risk seeking over losses makes the inner set's
//! best (smallest) shortfall compete with the outer set's. Above zero the
//! functional flips to the clipped sum sum_t max(w'Y_t, z), where risk
//! aversion over gains compares the sets' best (largest) values. Both
//! differences are nonnegative for every z when the inner set is contained in
//! the outer set, and their scaled supremum over a threshold grid is the test
//! statistic: zero signals spanning, a positive value measures the best
//! improvement the outer set offers some admissible investor.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{Tolerances, ZGridMode};
use crate::error::Error;
use crate::lp::PreparedHinge;
use crate::mip::{self, DEFAULT_NODE_CAP};
use crate::panel::ReturnPanel;
use crate::sets::{PortfolioSet, PortfolioWeights};
use crate::Result;

/// Shortfall of a portfolio return against a threshold, (z - x)_+.
pub fn shortfall(z: f64, portfolio_return: f64) -> f64 {
    (z - portfolio_return).max(0.0)
}

/// Return clipped from below at the threshold, max(x, z).
pub fn clipped(z: f64, portfolio_return: f64) -> f64 {
    portfolio_return.max(z)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum KernelSide {
    /// Shortfall comparison at thresholds z <= 0.
    Lower,
    /// Clipped-sum comparison at thresholds z > 0.
    Upper,
}

/// Threshold grid split at zero; zero itself belongs to the lower side.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZGrid {
    /// Ascending, all <= 0.
    pub negatives: Vec<f64>,
    /// Ascending, all > 0.
    pub positives: Vec<f64>,
}

impl ZGrid {
    pub fn len(&self) -> usize {
        self.negatives.len() + self.positives.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Build the threshold grid: either every distinct vertex portfolio return
/// observed in the sample, or a fixed pair of ranges.
pub fn build_z_grid(
    panel: &ReturnPanel,
    outer: &PortfolioSet,
    inner: &PortfolioSet,
    mode: &ZGridMode,
    tols: &Tolerances,
) -> Result<ZGrid> {
    match mode {
        ZGridMode::FixedGrid(fixed) => {
            let negatives = fixed.negative.points()?;
            let positives = fixed.positive.points()?;
            if negatives.iter().any(|&z| z > 0.0) {
                return Err(Error::InvalidConfig(
                    "fixed lower grid reaches above zero".into(),
                ));
            }
            if positives.iter().any(|&z| z <= 0.0) {
                return Err(Error::InvalidConfig(
                    "fixed upper grid reaches zero or below".into(),
                ));
            }
            Ok(ZGrid {
                negatives,
                positives,
            })
        }
        ZGridMode::SampleValues => {
            let mut values = Vec::new();
            for set in [outer, inner] {
                for v in set.vertices() {
                    for t in 0..panel.periods() {
                        values.push(dot(panel.row(t), v));
                    }
                }
            }
            values.sort_by(f64::total_cmp);
            let mut negatives = Vec::new();
            let mut positives = Vec::new();
            let mut last = f64::NEG_INFINITY;
            for z in values {
                if !negatives.is_empty() || !positives.is_empty() {
                    if z <= last + tols.grid_dedup_tol {
                        continue;
                    }
                }
                last = z;
                if z <= 0.0 {
                    negatives.push(z);
                } else {
                    positives.push(z);
                }
            }
            if negatives.is_empty() {
                return Err(Error::EmptyGridSide { side: "lower" });
            }
            if positives.is_empty() {
                return Err(Error::EmptyGridSide { side: "upper" });
            }
            Ok(ZGrid {
                negatives,
                positives,
            })
        }
    }
}

/// Threshold, side, and maximizing outer portfolio behind the statistic.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BestPoint {
    pub side: KernelSide,
    pub z: f64,
    /// Difference before the 1/sqrt(T) scaling.
    pub unscaled: f64,
    pub weights: PortfolioWeights,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GridPoint {
    pub side: KernelSide,
    pub z: f64,
    pub unscaled: f64,
    pub scaled: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StatisticResult {
    /// Scaled supremum over the grid.
    pub xi: f64,
    pub periods: usize,
    pub best: BestPoint,
    pub per_z: Vec<GridPoint>,
    pub lp_iterations: u64,
    pub mip_nodes: u64,
}

/// Scaled shortfall-side difference at one threshold.
pub fn shortfall_difference(
    panel: &ReturnPanel,
    outer: &PortfolioSet,
    inner: &PortfolioSet,
    z: f64,
    tols: &Tolerances,
) -> Result<f64> {
    let outer_p = PreparedHinge::new(panel, outer);
    let inner_p = PreparedHinge::new(panel, inner);
    let diff = inner_p.solve(z, tols)?.value - outer_p.solve(z, tols)?.value;
    Ok(diff / (panel.periods() as f64).sqrt())
}

/// Scaled clipped-sum difference at one threshold.
pub fn upper_difference(
    panel: &ReturnPanel,
    outer: &PortfolioSet,
    inner: &PortfolioSet,
    z: f64,
    tols: &Tolerances,
) -> Result<f64> {
    let outer_p = PreparedHinge::new(panel, outer);
    let inner_p = PreparedHinge::new(panel, inner);
    let outer_v = mip::solve_prepared_max(&outer_p, z, tols, DEFAULT_NODE_CAP)?.value;
    let inner_v = mip::solve_prepared_max(&inner_p, z, tols, DEFAULT_NODE_CAP)?.value;
    Ok((outer_v - inner_v) / (panel.periods() as f64).sqrt())
}

struct Evaluation {
    unscaled: f64,
    face: usize,
    coeffs: Vec<f64>,
    lp_iterations: u64,
    mip_nodes: u64,
}

/// Saddle statistic over the grid. Ties in the argmax keep the earliest
/// point: lower side before upper, then ascending threshold.
pub fn saddle_statistic(
    panel: &ReturnPanel,
    outer: &PortfolioSet,
    inner: &PortfolioSet,
    grid: &ZGrid,
    tols: &Tolerances,
) -> Result<StatisticResult> {
    if panel.assets() != outer.assets() {
        return Err(Error::DimensionMismatch {
            expected: outer.assets(),
            found: panel.assets(),
        });
    }
    if grid.is_empty() {
        return Err(Error::InvalidConfig("empty threshold grid".into()));
    }
    let outer_p = PreparedHinge::new(panel, outer);
    let inner_p = PreparedHinge::new(panel, inner);

    let lower: Vec<(f64, Evaluation)> = grid
        .negatives
        .par_iter()
        .map(|&z| -> Result<(f64, Evaluation)> {
            let o = outer_p.solve(z, tols)?;
            let i = inner_p.solve(z, tols)?;
            Ok((
                z,
                Evaluation {
                    unscaled: i.value - o.value,
                    face: o.face,
                    coeffs: o.coeffs,
                    lp_iterations: o.iterations + i.iterations,
                    mip_nodes: 0,
                },
            ))
        })
        .collect::<Result<_>>()?;
    let upper: Vec<(f64, Evaluation)> = grid
        .positives
        .par_iter()
        .map(|&z| -> Result<(f64, Evaluation)> {
            let o = mip::solve_prepared_max(&outer_p, z, tols, DEFAULT_NODE_CAP)?;
            let i = mip::solve_prepared_max(&inner_p, z, tols, DEFAULT_NODE_CAP)?;
            Ok((
                z,
                Evaluation {
                    unscaled: o.value - i.value,
                    face: o.face,
                    coeffs: o.coeffs,
                    lp_iterations: o.iterations + i.iterations,
                    mip_nodes: o.nodes + i.nodes,
                },
            ))
        })
        .collect::<Result<_>>()?;

    let scale = (panel.periods() as f64).sqrt();
    let mut per_z = Vec::with_capacity(grid.len());
    let mut best: Option<(KernelSide, f64, &Evaluation)> = None;
    let mut lp_iterations = 0u64;
    let mut mip_nodes = 0u64;
    for (side, batch) in [(KernelSide::Lower, &lower), (KernelSide::Upper, &upper)] {
        for (z, eval) in batch {
            per_z.push(GridPoint {
                side,
                z: *z,
                unscaled: eval.unscaled,
                scaled: eval.unscaled / scale,
            });
            lp_iterations += eval.lp_iterations;
            mip_nodes += eval.mip_nodes;
            let better = match &best {
                None => true,
                Some((_, _, b)) => eval.unscaled > b.unscaled,
            };
            if better {
                best = Some((side, *z, eval));
            }
        }
    }
    let (side, z, eval) = best.expect("grid verified nonempty");
    let weights =
        PortfolioWeights::from_combination(&outer.face_vertices(eval.face), &eval.coeffs)?;
    Ok(StatisticResult {
        xi: eval.unscaled / scale,
        periods: panel.periods(),
        best: BestPoint {
            side,
            z,
            unscaled: eval.unscaled,
            weights,
        },
        per_z,
        lp_iterations,
        mip_nodes,
    })
}

fn dot(row: &[f64], v: &[f64]) -> f64 {
    row.iter().zip(v).map(|(a, b)| a * b).sum()
}
