//! Intraday data ingestion, realized variance measurement and the daily panel.

mod bars;
pub(crate) mod io;
mod panel;
mod prints;
mod rv;
pub(crate) mod simulate;

pub use bars::{
    build_bar_series, daily_record_from_closes, daily_record_from_prints, panel_from_prints, IntradayBarSeries, PanelBuild,
};
pub use io::{
    load_panel_csv, load_prints_csv, load_ranges_csv, load_truth_csv, write_panel_csv, write_prints_csv,
    write_ranges_csv, write_truth_csv, DailyRange, TruthMap,
};
pub use panel::{DailyPanel, DailyPanelBuilder, DailyRecord, DailyValues, FirmId};
pub use prints::{
    filter_intraday_prints, format_time, parse_time, size_weighted_median, IntradayPrint, EXCLUDED_CONDITIONS,
    PREDICTOR_CUTOFF_SECS, SESSION_CLOSE_SECS, SESSION_OPEN_SECS,
};
pub use rv::{compute_log_returns, horizon_average, realized_variance, trailing_mean, Horizon, HorizonAverages};
pub use simulate::{simulate_gbm_closes, simulate_panel, OptionSimConfig, SimConfig, SimOutput};
