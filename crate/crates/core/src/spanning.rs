//! End-to-end spanning test: statistic, subsampled critical value, decision.

use serde::Serialize;

use crate::character::{self, CharacterReport};
use crate::config::SpanningConfig;
use crate::error::Error;
use crate::panel::ReturnPanel;
use crate::resampling::{
    bias_correct, decide, empirical_quantile, subsample_statistics, BiasCorrection, Decision,
};
use crate::sets::PortfolioSet;
use crate::statistic::{build_z_grid, saddle_statistic, StatisticResult, ZGrid};
use crate::Result;

/// Subsampled distribution of one block length and its upper quantile.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SubsampleSummary {
    pub block: usize,
    pub windows: usize,
    pub quantile: f64,
    pub stats: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpanningResult {
    pub alpha: f64,
    pub statistic: StatisticResult,
    pub grid: ZGrid,
    pub subsamples: Vec<SubsampleSummary>,
    /// Quantile extrapolation in reciprocal block length, when enabled.
    pub bias: Option<BiasCorrection>,
    /// Largest-block quantile, the critical value without extrapolation.
    pub critical_uncorrected: f64,
    /// The critical value the decision uses.
    pub critical_value: f64,
    pub decision: Decision,
    pub character: CharacterReport,
    pub warnings: Vec<String>,
}

/// Test whether `inner` spans `outer` at the configured level.
///
/// `inner` must sit inside `outer` as a complex; each of its vertices is
/// checked by projection. The statistic takes its supremum over the
/// configured threshold grid, critical values come from overlapping-window
/// subsampling at each block length, and with bias correction enabled the
/// decision uses the quantiles' reciprocal-block extrapolation at the full
/// sample size, otherwise the largest block's quantile.
pub fn run_span(
    panel: &ReturnPanel,
    outer: &PortfolioSet,
    inner: &PortfolioSet,
    config: &SpanningConfig,
) -> Result<SpanningResult> {
    run_span_with_character(panel, outer, inner, config, None)
}

/// `run_span` with an optional precomputed character report; panels drawn
/// for the same pair of sets can share one.
pub fn run_span_with_character(
    panel: &ReturnPanel,
    outer: &PortfolioSet,
    inner: &PortfolioSet,
    config: &SpanningConfig,
    character: Option<CharacterReport>,
) -> Result<SpanningResult> {
    config.validate(panel.periods())?;
    if panel.assets() != outer.assets() {
        return Err(Error::DimensionMismatch {
            expected: outer.assets(),
            found: panel.assets(),
        });
    }
    let tols = &config.tolerances;
    for (i, v) in inner.vertices().iter().enumerate() {
        let d = character::project_to_complex(outer, v).distance;
        if d > tols.membership_tol {
            return Err(Error::NotSubset(format!(
                "inner vertex {i} sits {d:.3e} away from the outer set"
            )));
        }
    }

    let character = match character {
        Some(c) => c,
        None => character::character(outer, inner, tols)?,
    };
    let mut warnings = Vec::new();
    if let Some(w) = character::validate_alpha(&character, config.alpha) {
        warnings.push(w);
    }

    let grid = build_z_grid(panel, outer, inner, &config.z_grid, tols)?;
    let statistic = saddle_statistic(panel, outer, inner, &grid, tols)?;

    let blocks = config.resolved_subsample_sizes(panel.periods());
    let mut subsamples = Vec::with_capacity(blocks.len());
    let mut quantiles = Vec::with_capacity(blocks.len());
    for &block in &blocks {
        let dist = subsample_statistics(panel, outer, inner, block, config, &grid)?;
        let quantile = empirical_quantile(&dist.stats, 1.0 - config.alpha)?;
        quantiles.push((block, quantile));
        subsamples.push(SubsampleSummary {
            block,
            windows: dist.stats.len(),
            quantile,
            stats: dist.stats,
        });
    }
    let critical_uncorrected = quantiles
        .last()
        .map(|&(_, q)| q)
        .expect("validated configs have at least one block length");

    let bias = if config.bias_correction {
        Some(bias_correct(&quantiles, panel.periods())?)
    } else {
        None
    };
    let critical_value = bias
        .as_ref()
        .map_or(critical_uncorrected, |b| b.corrected);
    let decision = decide(statistic.xi, critical_value);

    Ok(SpanningResult {
        alpha: config.alpha,
        statistic,
        grid,
        subsamples,
        bias,
        critical_uncorrected,
        critical_value,
        decision,
        character,
        warnings,
    })
}
