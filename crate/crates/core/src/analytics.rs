//! Rolling backtests and performance analytics for the selected portfolios.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, FisherSnedecor, StudentsT};

use crate::config::{Tolerances, ZGridMode};
use crate::error::Error;
use crate::panel::ReturnPanel;
use crate::resampling::empirical_quantile;
use crate::sets::{PortfolioSet, PortfolioWeights};
use crate::statistic::{build_z_grid, saddle_statistic};
use crate::Result;

pub const DEFAULT_ESTIMATION_WINDOW: usize = 360;
pub const DEFAULT_TRANSACTION_COST: f64 = 0.0035;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BacktestConfig {
    /// Estimation window length; the following period is traded.
    pub window: usize,
    /// Proportional cost per unit of turnover.
    pub transaction_cost: f64,
    pub z_grid: ZGridMode,
    pub tolerances: Tolerances,
}

impl Default for BacktestConfig {
    fn default() -> Self {
        Self {
            window: DEFAULT_ESTIMATION_WINDOW,
            transaction_cost: DEFAULT_TRANSACTION_COST,
            z_grid: ZGridMode::SampleValues,
            tolerances: Tolerances::default(),
        }
    }
}

/// One out-of-sample period.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BacktestRecord {
    /// Date of the realized return row, when the panel has dates.
    pub date: Option<String>,
    /// Portfolio chosen from the estimation window.
    pub weights: PortfolioWeights,
    /// Statistic on the estimation window.
    pub xi: f64,
    pub gross_return: f64,
    /// Weight change against the drifted previous portfolio.
    pub turnover: f64,
    pub net_return: f64,
    pub gross_wealth: f64,
    pub net_wealth: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BacktestResult {
    pub window: usize,
    pub transaction_cost: f64,
    pub records: Vec<BacktestRecord>,
    pub gross_multiple: f64,
    pub net_multiple: f64,
    /// net / gross - 1: the fraction of terminal wealth lost to trading.
    pub cost_drag: f64,
}

impl BacktestResult {
    pub fn net_returns(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.net_return).collect()
    }

    pub fn gross_returns(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.gross_return).collect()
    }

    pub fn dates(&self) -> Option<Vec<String>> {
        self.records
            .iter()
            .map(|r| r.date.clone())
            .collect::<Option<Vec<_>>>()
    }
}

/// Weights after one period of price drift, before rebalancing.
pub fn drift_weights(weights: &[f64], returns: &[f64]) -> Result<Vec<f64>> {
    let growth = 1.0
        + weights
            .iter()
            .zip(returns)
            .map(|(w, r)| w * r)
            .sum::<f64>();
    if growth <= 0.0 {
        return Err(Error::NumericalFailure(
            "portfolio wiped out within a period".into(),
        ));
    }
    Ok(weights
        .iter()
        .zip(returns)
        .map(|(w, r)| w * (1.0 + r) / growth)
        .collect())
}

/// One wealth update net of proportional trading costs.
pub fn net_wealth_step(wealth: f64, ret: f64, cost: f64, turnover: f64) -> Result<f64> {
    let next = wealth * (1.0 + ret) * (1.0 - cost * turnover);
    if next <= 0.0 {
        return Err(Error::NumericalFailure(format!(
            "wealth knocked to {next} by return {ret} and turnover {turnover}"
        )));
    }
    Ok(next)
}

/// Roll the statistic's maximizing portfolio forward one period at a time.
///
/// Each window of `config.window` periods selects the outer-set portfolio
/// behind the spanning statistic against `inner`; the next period's return is
/// realized gross and net of proportional costs on the turnover against the
/// drifted previous holdings.
pub fn run_backtest(
    panel: &ReturnPanel,
    outer: &PortfolioSet,
    inner: &PortfolioSet,
    config: &BacktestConfig,
) -> Result<BacktestResult> {
    let t_len = panel.periods();
    if config.window < 2 || config.window >= t_len {
        return Err(Error::InvalidConfig(format!(
            "estimation window {} outside 2..{t_len}",
            config.window
        )));
    }
    if !(0.0..1.0).contains(&config.transaction_cost) {
        return Err(Error::InvalidConfig(format!(
            "transaction cost {} outside [0, 1)",
            config.transaction_cost
        )));
    }
    let out_len = t_len - config.window;
    let tols = &config.tolerances;
    let picks: Vec<(PortfolioWeights, f64)> = (0..out_len)
        .into_par_iter()
        .map(|start| -> Result<(PortfolioWeights, f64)> {
            let window = panel.window(start, config.window)?;
            let grid = build_z_grid(&window, outer, inner, &config.z_grid, tols)?;
            let stat = saddle_statistic(&window, outer, inner, &grid, tols)?;
            Ok((stat.best.weights, stat.xi))
        })
        .collect::<Result<_>>()?;

    let mut records = Vec::with_capacity(out_len);
    let mut gross_wealth = 1.0;
    let mut net_wealth = 1.0;
    let mut held: Option<Vec<f64>> = None;
    for (i, (weights, xi)) in picks.into_iter().enumerate() {
        let realized = panel.row(config.window + i);
        let gross_return = weights
            .as_slice()
            .iter()
            .zip(realized)
            .map(|(w, r)| w * r)
            .sum::<f64>();
        let turnover = match &held {
            None => 0.0,
            Some(prev) => weights
                .as_slice()
                .iter()
                .zip(prev)
                .map(|(w, d)| (w - d).abs())
                .sum(),
        };
        gross_wealth *= 1.0 + gross_return;
        if gross_wealth <= 0.0 {
            return Err(Error::NumericalFailure(
                "gross wealth wiped out".into(),
            ));
        }
        net_wealth = net_wealth_step(
            net_wealth,
            gross_return,
            config.transaction_cost,
            turnover,
        )?;
        let net_return = (1.0 + gross_return) * (1.0 - config.transaction_cost * turnover) - 1.0;
        held = Some(drift_weights(weights.as_slice(), realized)?);
        records.push(BacktestRecord {
            date: panel
                .dates()
                .map(|d| d[config.window + i].clone()),
            weights,
            xi,
            gross_return,
            turnover,
            net_return,
            gross_wealth,
            net_wealth,
        });
    }
    Ok(BacktestResult {
        window: config.window,
        transaction_cost: config.transaction_cost,
        records,
        gross_multiple: gross_wealth,
        net_multiple: net_wealth,
        cost_drag: net_wealth / gross_wealth - 1.0,
    })
}

/// Moment and tail summary of a return series.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PerfReport {
    pub count: usize,
    pub mean: f64,
    pub stdev: f64,
    pub skewness: f64,
    pub excess_kurtosis: f64,
    /// Loss at the lower 5% sample quantile, reported positive for a loss.
    pub value_at_risk_5: f64,
    pub sharpe: f64,
    /// Mean excess return over sqrt(2) times the downside deviation.
    pub downside_sharpe: f64,
}

/// Summary statistics; excess means use `riskfree` when given, raw returns
/// otherwise.
pub fn performance(returns: &[f64], riskfree: Option<&[f64]>) -> Result<PerfReport> {
    let n = returns.len();
    if n < 2 {
        return Err(Error::InvalidConfig(
            "performance summary needs at least two returns".into(),
        ));
    }
    if let Some(rf) = riskfree {
        if rf.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: rf.len(),
            });
        }
    }
    let mean = returns.iter().sum::<f64>() / n as f64;
    let mut m2 = 0.0;
    let mut m3 = 0.0;
    let mut m4 = 0.0;
    let mut down = 0.0;
    for &r in returns {
        let d = r - mean;
        m2 += d * d;
        m3 += d * d * d;
        m4 += d * d * d * d;
        if r < mean {
            down += d * d;
        }
    }
    let stdev = (m2 / (n as f64 - 1.0)).sqrt();
    let m2n = m2 / n as f64;
    let skewness = if m2n > 0.0 {
        (m3 / n as f64) / m2n.powf(1.5)
    } else {
        0.0
    };
    let excess_kurtosis = if m2n > 0.0 {
        (m4 / n as f64) / (m2n * m2n) - 3.0
    } else {
        0.0
    };
    let downside = (down / (n as f64 - 1.0)).sqrt();
    let excess_mean = match riskfree {
        Some(rf) => {
            returns
                .iter()
                .zip(rf)
                .map(|(r, f)| r - f)
                .sum::<f64>()
                / n as f64
        }
        None => mean,
    };
    Ok(PerfReport {
        count: n,
        mean,
        stdev,
        skewness,
        excess_kurtosis,
        value_at_risk_5: -empirical_quantile(returns, 0.05)?,
        sharpe: if stdev > 0.0 { excess_mean / stdev } else { 0.0 },
        downside_sharpe: if downside > 0.0 {
            excess_mean / (2.0_f64.sqrt() * downside)
        } else {
            0.0
        },
    })
}

/// Mean return the strategy offers at the benchmark's volatility, in excess
/// of the benchmark's own mean.
pub fn return_loss(strategy: &[f64], benchmark: &[f64]) -> Result<f64> {
    if strategy.len() != benchmark.len() {
        return Err(Error::DimensionMismatch {
            expected: strategy.len(),
            found: benchmark.len(),
        });
    }
    let s = performance(strategy, None)?;
    let b = performance(benchmark, None)?;
    if s.stdev <= 0.0 {
        return Err(Error::InvalidConfig(
            "strategy volatility is zero".into(),
        ));
    }
    Ok(s.mean / s.stdev * b.stdev - b.mean)
}

/// Two-part power utility: gains raised to `gain_power`, losses raised to
/// `loss_power` and scaled by `loss_aversion`.
pub fn utility(x: f64, gain_power: f64, loss_power: f64, loss_aversion: f64) -> f64 {
    if x >= 0.0 {
        x.powf(gain_power)
    } else {
        -loss_aversion * (-x).powf(loss_power)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OpportunityCost {
    /// Sure increment to the benchmark that matches the strategy's average
    /// utility.
    pub theta: f64,
    pub bracket: (f64, f64),
    /// The initial unit bracket had to be widened.
    pub widened: bool,
}

/// Solve mean U(1 + benchmark + theta) = mean U(1 + strategy) for theta by
/// bisection to 1e-10.
pub fn opportunity_cost(
    strategy: &[f64],
    benchmark: &[f64],
    gain_power: f64,
    loss_power: f64,
    loss_aversion: f64,
) -> Result<OpportunityCost> {
    if strategy.is_empty() || strategy.len() != benchmark.len() {
        return Err(Error::DimensionMismatch {
            expected: strategy.len(),
            found: benchmark.len(),
        });
    }
    let target = strategy
        .iter()
        .map(|&r| utility(1.0 + r, gain_power, loss_power, loss_aversion))
        .sum::<f64>()
        / strategy.len() as f64;
    let gap = |theta: f64| -> f64 {
        benchmark
            .iter()
            .map(|&r| utility(1.0 + r + theta, gain_power, loss_power, loss_aversion))
            .sum::<f64>()
            / benchmark.len() as f64
            - target
    };
    let mut lo = -1.0;
    let mut hi = 1.0;
    let mut widened = false;
    // Utility rises in theta, so the gap has at most one root; widen until
    // it is bracketed.
    while gap(lo) > 0.0 || gap(hi) < 0.0 {
        lo *= 2.0;
        hi *= 2.0;
        widened = true;
        if hi > 16.0 {
            return Err(Error::NumericalFailure(
                "no matching sure increment within +-16".into(),
            ));
        }
    }
    let bracket = (lo, hi);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let g = gap(mid);
        if g == 0.0 {
            lo = mid;
            hi = mid;
            break;
        }
        if g < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-10 {
            break;
        }
    }
    Ok(OpportunityCost {
        theta: 0.5 * (lo + hi),
        bracket,
        widened,
    })
}

/// Least-squares fit with named coefficients and classical inference.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OlsFit {
    /// "const" first, then the regressor names.
    pub names: Vec<String>,
    pub coefficients: Vec<f64>,
    pub std_errors: Vec<f64>,
    pub t_stats: Vec<f64>,
    pub p_values: Vec<f64>,
    pub r_squared: f64,
    pub adj_r_squared: f64,
    pub f_stat: f64,
    pub f_p_value: f64,
    pub observations: usize,
    #[serde(skip)]
    pub residuals: Vec<f64>,
}

/// Ordinary least squares of `y` on an intercept and the named regressors.
pub fn ols(y: &[f64], regressors: &[(String, Vec<f64>)]) -> Result<OlsFit> {
    let n = y.len();
    let k = regressors.len() + 1;
    if regressors.is_empty() {
        return Err(Error::InvalidConfig("no regressors".into()));
    }
    if n <= k + 1 {
        return Err(Error::InvalidConfig(format!(
            "{n} observations cannot support {k} coefficients"
        )));
    }
    for (name, col) in regressors {
        if col.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: col.len(),
            });
        }
        if col.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "regressor {name} has a non-finite entry"
            )));
        }
    }

    // Normal equations on [1, X].
    let x_col = |j: usize, t: usize| -> f64 {
        if j == 0 {
            1.0
        } else {
            regressors[j - 1].1[t]
        }
    };
    let mut xtx = vec![0.0; k * k];
    let mut xty = vec![0.0; k];
    for t in 0..n {
        for i in 0..k {
            let xi = x_col(i, t);
            xty[i] += xi * y[t];
            for j in i..k {
                xtx[i * k + j] += xi * x_col(j, t);
            }
        }
    }
    for i in 0..k {
        for j in 0..i {
            xtx[i * k + j] = xtx[j * k + i];
        }
    }
    let inv = invert(&xtx, k).ok_or_else(|| {
        Error::InvalidConfig("collinear regressors: normal equations are singular".into())
    })?;
    let coefficients: Vec<f64> = (0..k)
        .map(|i| (0..k).map(|j| inv[i * k + j] * xty[j]).sum())
        .collect();

    let residuals: Vec<f64> = (0..n)
        .map(|t| y[t] - (0..k).map(|j| coefficients[j] * x_col(j, t)).sum::<f64>())
        .collect();
    let rss: f64 = residuals.iter().map(|e| e * e).sum();
    let y_bar = y.iter().sum::<f64>() / n as f64;
    let tss: f64 = y.iter().map(|v| (v - y_bar) * (v - y_bar)).sum();
    let dof = (n - k) as f64;
    let sigma2 = rss / dof;
    let std_errors: Vec<f64> = (0..k).map(|i| (sigma2 * inv[i * k + i]).sqrt()).collect();
    let t_stats: Vec<f64> = coefficients
        .iter()
        .zip(&std_errors)
        .map(|(b, se)| if *se > 0.0 { b / se } else { f64::INFINITY })
        .collect();
    let student = StudentsT::new(0.0, 1.0, dof)
        .map_err(|e| Error::NumericalFailure(e.to_string()))?;
    let p_values: Vec<f64> = t_stats
        .iter()
        .map(|&t| {
            if t.is_finite() {
                2.0 * (1.0 - student.cdf(t.abs()))
            } else {
                0.0
            }
        })
        .collect();
    let r_squared = if tss > 0.0 { 1.0 - rss / tss } else { 0.0 };
    let adj_r_squared = 1.0 - (1.0 - r_squared) * (n as f64 - 1.0) / dof;
    let f_dof1 = (k - 1) as f64;
    let f_stat = if r_squared < 1.0 {
        (r_squared / f_dof1) / ((1.0 - r_squared) / dof)
    } else {
        f64::INFINITY
    };
    let f_p_value = if f_stat.is_finite() {
        let fisher = FisherSnedecor::new(f_dof1, dof)
            .map_err(|e| Error::NumericalFailure(e.to_string()))?;
        1.0 - fisher.cdf(f_stat)
    } else {
        0.0
    };

    let mut names = vec!["const".to_string()];
    names.extend(regressors.iter().map(|(n, _)| n.clone()));
    Ok(OlsFit {
        names,
        coefficients,
        std_errors,
        t_stats,
        p_values,
        r_squared,
        adj_r_squared,
        f_stat,
        f_p_value,
        observations: n,
        residuals,
    })
}

fn invert(a: &[f64], n: usize) -> Option<Vec<f64>> {
    let mut m = a.to_vec();
    let mut inv = vec![0.0; n * n];
    for i in 0..n {
        inv[i * n + i] = 1.0;
    }
    let scale = a
        .iter()
        .fold(0.0f64, |acc, &x| acc.max(x.abs()))
        .max(1.0);
    for col in 0..n {
        let pivot = (col..n).max_by(|&p, &q| m[p * n + col].abs().total_cmp(&m[q * n + col].abs()))?;
        if m[pivot * n + col].abs() < 1e-12 * scale {
            return None;
        }
        if pivot != col {
            for j in 0..n {
                m.swap(col * n + j, pivot * n + j);
                inv.swap(col * n + j, pivot * n + j);
            }
        }
        let d = m[col * n + col];
        for j in 0..n {
            m[col * n + j] /= d;
            inv[col * n + j] /= d;
        }
        for row in 0..n {
            if row != col {
                let f = m[row * n + col];
                if f != 0.0 {
                    for j in 0..n {
                        let mc = m[col * n + j];
                        let ic = inv[col * n + j];
                        m[row * n + j] -= f * mc;
                        inv[row * n + j] -= f * ic;
                    }
                }
            }
        }
    }
    Some(inv)
}

/// Factor return columns with an optional riskfree series, loaded from CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct FactorPanel {
    pub names: Vec<String>,
    pub columns: Vec<Vec<f64>>,
    pub riskfree: Option<Vec<f64>>,
    pub dates: Option<Vec<String>>,
}

/// CSV layout mirrors return panels: optional leading date column, then one
/// column per factor; a column named "rf" (any case) becomes the riskfree
/// series.
pub fn load_factors(path: impl AsRef<std::path::Path>) -> Result<FactorPanel> {
    let panel = ReturnPanel::load(path)?;
    let mut names = Vec::new();
    let mut columns: Vec<Vec<f64>> = Vec::new();
    let mut riskfree = None;
    for (j, name) in panel.names().iter().enumerate() {
        let col: Vec<f64> = (0..panel.periods()).map(|t| panel.row(t)[j]).collect();
        if name.eq_ignore_ascii_case("rf") {
            riskfree = Some(col);
        } else {
            names.push(name.clone());
            columns.push(col);
        }
    }
    if names.is_empty() {
        return Err(Error::InvalidConfig(
            "factor file has no factor columns".into(),
        ));
    }
    Ok(FactorPanel {
        names,
        columns,
        riskfree,
        dates: panel.dates().map(|d| d.to_vec()),
    })
}

/// Line the factor rows up with a return series: joined by date when both
/// sides have dates, positionally (equal length required) otherwise.
pub fn align_factors(
    factors: &FactorPanel,
    dates: Option<&[String]>,
    len: usize,
) -> Result<(Vec<(String, Vec<f64>)>, Option<Vec<f64>>)> {
    let index: Vec<usize> = match (dates, &factors.dates) {
        (Some(dates), Some(fdates)) => {
            if dates.len() != len {
                return Err(Error::DimensionMismatch {
                    expected: len,
                    found: dates.len(),
                });
            }
            dates
                .iter()
                .map(|d| {
                    fdates.iter().position(|f| f == d).ok_or_else(|| {
                        Error::InvalidConfig(format!("date {d} missing from the factor file"))
                    })
                })
                .collect::<Result<_>>()?
        }
        _ => {
            let flen = factors.columns[0].len();
            if flen != len {
                return Err(Error::DimensionMismatch {
                    expected: len,
                    found: flen,
                });
            }
            (0..len).collect()
        }
    };
    let cols = factors
        .names
        .iter()
        .zip(&factors.columns)
        .map(|(name, col)| {
            (
                name.clone(),
                index.iter().map(|&i| col[i]).collect::<Vec<f64>>(),
            )
        })
        .collect();
    let rf = factors
        .riskfree
        .as_ref()
        .map(|col| index.iter().map(|&i| col[i]).collect());
    Ok((cols, rf))
}
