//! Run configuration for the spanning pipeline.

use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::Result;

/// Numerical tolerances, one knob per mechanism. Defaults are the tested
/// values; loosening them is supported but not covered by the test suite.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Tolerances {
    /// Simplex feasibility / reduced-cost threshold.
    pub lp_tol: f64,
    /// Distance and objective ties (character, face selection, indicators).
    pub tie_tol: f64,
    /// Branch-and-bound pruning and integrality threshold.
    pub mip_tol: f64,
    /// Grid values closer than this collapse to one point.
    pub grid_dedup_tol: f64,
    /// Maximum residual for a point to count as a member of a complex.
    pub membership_tol: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            lp_tol: 1e-9,
            tie_tol: 1e-9,
            mip_tol: 1e-8,
            grid_dedup_tol: 1e-12,
            membership_tol: 1e-8,
        }
    }
}

/// Equispaced grid over one side of zero: `from`, `from + step`, ... up to
/// and including `to` when it lands on the lattice.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridRange {
    pub from: f64,
    pub to: f64,
    pub step: f64,
}

impl GridRange {
    pub fn points(&self) -> Result<Vec<f64>> {
        if !(self.step > 0.0) || !self.step.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "grid step must be positive, got {}",
                self.step
            )));
        }
        if !self.from.is_finite() || !self.to.is_finite() || self.from > self.to {
            return Err(Error::InvalidConfig(format!(
                "bad grid range [{}, {}]",
                self.from, self.to
            )));
        }
        let count = ((self.to - self.from) / self.step + 0.5).floor() as usize + 1;
        Ok((0..count).map(|i| self.from + i as f64 * self.step).collect())
    }
}

/// Explicit z grids for both sides of zero. The negative side may include 0;
/// the positive side must stay strictly positive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FixedZGrid {
    pub negative: GridRange,
    pub positive: GridRange,
}

/// Where z grids come from: pooled sample values of all vertex portfolios,
/// or user-specified fixed ranges.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ZGridMode {
    SampleValues,
    FixedGrid(FixedZGrid),
}

/// Grid handling inside subsample windows: rebuild from the window's own
/// sample, or reuse the full-sample grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GridPolicy {
    Window,
    Global,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SpanningConfig {
    /// Nominal test level.
    pub alpha: f64,
    /// Subsample window lengths; empty means derive from T at run time.
    pub subsample_sizes: Vec<usize>,
    pub z_grid: ZGridMode,
    pub grid_policy: GridPolicy,
    /// Extrapolate subsample quantiles to window length T by regressing on
    /// 1/b. With one subsample size the largest-b quantile is used as is.
    pub bias_correction: bool,
    /// Seed for any randomized caller (Monte Carlo); the pipeline itself is
    /// deterministic.
    pub rng_seed: u64,
    /// Worker threads; 0 means use all available.
    pub threads: usize,
    pub tolerances: Tolerances,
}

impl Default for SpanningConfig {
    fn default() -> Self {
        Self {
            alpha: 0.05,
            subsample_sizes: Vec::new(),
            z_grid: ZGridMode::SampleValues,
            grid_policy: GridPolicy::Window,
            bias_correction: true,
            rng_seed: 0,
            threads: 0,
            tolerances: Tolerances::default(),
        }
    }
}

impl SpanningConfig {
    pub fn validate(&self, periods: usize) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "alpha must lie in (0, 1), got {}",
                self.alpha
            )));
        }
        for &b in &self.subsample_sizes {
            if b < 2 || b > periods {
                return Err(Error::InvalidConfig(format!(
                    "subsample size {b} outside [2, {periods}]"
                )));
            }
        }
        if let ZGridMode::FixedGrid(grid) = &self.z_grid {
            let neg = grid.negative.points()?;
            let pos = grid.positive.points()?;
            if neg.iter().any(|&z| z > 0.0) {
                return Err(Error::InvalidConfig(
                    "negative-side grid contains values above 0".into(),
                ));
            }
            if pos.iter().any(|&z| z <= 0.0) {
                return Err(Error::InvalidConfig(
                    "positive-side grid must stay strictly above 0".into(),
                ));
            }
        }
        Ok(())
    }

    /// Subsample sizes actually used for a panel of `periods` rows: the
    /// configured list, or quarter-spaced defaults ( 1/6, 1/3, 1/2, 2/3 of T,
    /// the fixed list {120, 240, 360, 480} for long samples).
    pub fn resolved_subsample_sizes(&self, periods: usize) -> Vec<usize> {
        if !self.subsample_sizes.is_empty() {
            return self.subsample_sizes.clone();
        }
        default_subsample_sizes(periods)
    }
}

/// Default window lengths
/// - long samples (T >= 700, e.g. monthly history): {120, 240, 360, 480}
/// - otherwise fractions {T/6, T/3, T/2, 2T/3}, deduplicated, at least 2.
pub fn default_subsample_sizes(periods: usize) -> Vec<usize> {
    let raw: Vec<usize> = if periods >= 700 {
        vec![120, 240, 360, 480]
    } else {
        [6.0, 3.0, 2.0, 1.5]
            .iter()
            .map(|d| ((periods as f64) / d).round() as usize)
            .collect()
    };
    let mut sizes: Vec<usize> = raw
        .into_iter()
        .map(|b| b.clamp(2, periods))
        .collect();
    sizes.dedup();
    sizes
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_sizes_match_reference_lists() {
        assert_eq!(default_subsample_sizes(300), vec![50, 100, 150, 200]);
        assert_eq!(default_subsample_sizes(1000), vec![120, 240, 360, 480]);
        assert_eq!(default_subsample_sizes(1044), vec![120, 240, 360, 480]);
    }

    #[test]
    fn grid_range_includes_endpoint_on_lattice() {
        let g = GridRange { from: -1.0, to: 0.0, step: 0.5 };
        assert_eq!(g.points().unwrap(), vec![-1.0, -0.5, 0.0]);
        let g = GridRange { from: 0.5, to: 1.0, step: 0.5 };
        assert_eq!(g.points().unwrap(), vec![0.5, 1.0]);
    }

    #[test]
    fn validate_rejects_bad_alpha_and_sizes() {
        let mut c = SpanningConfig::default();
        c.alpha = 0.0;
        assert!(c.validate(100).is_err());
        c.alpha = 0.05;
        c.subsample_sizes = vec![200];
        assert!(c.validate(100).is_err());
        c.subsample_sizes = vec![50];
        assert!(c.validate(100).is_ok());
    }

    #[test]
    fn validate_rejects_positive_grid_touching_zero() {
        let mut c = SpanningConfig::default();
        c.z_grid = ZGridMode::FixedGrid(FixedZGrid {
            negative: GridRange { from: -1.0, to: 0.0, step: 0.5 },
            positive: GridRange { from: 0.0, to: 1.0, step: 0.5 },
        });
        assert!(c.validate(100).is_err());
    }

    #[test]
    fn config_json_round_trip() {
        let c = SpanningConfig::default();
        let text = serde_json::to_string(&c).unwrap();
        let back: SpanningConfig = serde_json::from_str(&text).unwrap();
        assert_eq!(c, back);
    }
}
