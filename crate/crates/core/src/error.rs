//! Crate-wide error type.

use thiserror::Error;

/// Errors raised anywhere in the forecasting and backtesting pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("format error at row {row}: {msg}")]
    Format { row: usize, msg: String },

    #[error("singular design: {0}")]
    SingularDesign(String),

    #[error("coordinate descent did not converge after {iterations} iterations (last gap {gap:.3e})")]
    Convergence { iterations: usize, gap: f64 },

    #[error("degenerate regressor: {0}")]
    DegenerateRegressor(String),

    #[error("degenerate series: {0}")]
    DegenerateSeries(String),

    #[error("empty universe: {0}")]
    EmptyUniverse(String),

    #[error("hyperparameter tuning failed: {0}")]
    Tuning(String),

    #[error("look-ahead leakage: {0}")]
    Leakage(String),

    #[error("crossed quote: bid {bid} > ask {ask}")]
    CrossedQuote { bid: f64, ask: f64 },

    #[error("degenerate delta: {0}")]
    DegenerateDelta(String),

    #[error("degenerate portfolio: {0}")]
    DegeneratePortfolio(String),

    #[error("data error: {0}")]
    Data(String),

    #[error("backtest failed: {0}")]
    Backtest(String),

    #[error("usage: {0}")]
    Usage(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn insufficient(msg: impl Into<String>) -> Self {
        Error::InsufficientData(msg.into())
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn format(row: usize, msg: impl Into<String>) -> Self {
        Error::Format { row, msg: msg.into() }
    }
}
