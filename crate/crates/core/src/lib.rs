//! Realized variance forecasting and straddle portfolio backtesting.
//!
//! The crate is organized as a pipeline:
//!
//! - [`panel_data`]: intraday print cleaning, interval sampling, realized
//!   variance, horizon averages, the unbalanced daily panel, CSV I/O and a
//!   deterministic stochastic-volatility panel simulator.
//! - [`models`]: OLS, penalized (elastic-net) regression by coordinate
//!   descent, HAR, rolling squared returns, PCA factor models and forecast
//!   combination.
//! - [`backtest`]: walk-forward splits, balanced-window filtering,
//!   time-ordered hyperparameter tuning and the leakage-checked engine.
//! - [`eval`]: loss functions, Mincer-Zarnowitz regressions and panel
//!   aggregation schemes.
//! - [`options`]: option quote filters, delta-neutral ATM straddles,
//!   volatility-spread signals and quantile portfolio sorts.
//! - [`cli`]: the batch command-line front end used by the `rvforecast` binary.

pub mod backtest;
pub mod cli;
pub mod error;
pub mod eval;
pub mod models;
pub mod options;
pub mod panel_data;
pub mod stamp;

pub use error::{Error, Result};
pub use stamp::{FiltrationStamp, StampMarker};

/// Lower bound applied to every emitted variance forecast (daily variance units).
pub const VARIANCE_FLOOR: f64 = 1e-8;

/// Trading days per year used to (de-)annualize volatilities.
pub const TRADING_DAYS_PER_YEAR: f64 = 250.0;
