//! Forecast scoring: per-cell losses, Mincer-Zarnowitz regressions, panel
//! error aggregation and moment summaries.

mod aggregate;
mod loss;
mod mz;
mod summary;

pub use aggregate::{
    aggregate_panel_errors, mz_regression, realized_from_panel, score_forecasts, Aggregation, ErrorReport, ErrorRow,
    ScoredCell, ERROR_REPORT_HEADER,
};
pub use loss::{forecast_loss, LossKind};
pub use mz::{mz_fit, MzFit};
pub use summary::{moment_summary, summary_statistics, Moments, SummaryRow, SummaryTable};
