//! Stochastic spanning tests under Markowitz stochastic dominance (MSD).
//!
//! A portfolio set K stochastically spans a larger set L when no investor with
//! reverse S-shaped utility (risk seeking below a reference point, risk averse
//! above) can improve on K by moving to L. The crate computes the saddle-type
//! spanning statistic by exact linear and mixed-integer programming over
//! simplicial-complex portfolio sets, calibrates critical values by
//! subsampling with a regression-based bias correction, and ships the
//! supporting machinery: effective-extreme-point character bounds on the test
//! level, vector-GARCH Monte Carlo experiments, and rolling-window backtests
//! with net-of-cost performance analytics.

pub mod analytics;
pub mod character;
pub mod config;
pub mod error;
pub mod lp;
pub mod mip;
pub mod panel;
pub mod resampling;
pub mod sets;
pub mod simulation;
pub mod spanning;
pub mod statistic;

mod simplex;

pub use config::{FixedZGrid, GridPolicy, GridRange, SpanningConfig, Tolerances, ZGridMode};
pub use error::Error;
pub use panel::ReturnPanel;
pub use sets::{PortfolioSet, PortfolioWeights};

/// Crate result alias; every fallible public operation returns this.
pub type Result<T> = std::result::Result<T, Error>;
