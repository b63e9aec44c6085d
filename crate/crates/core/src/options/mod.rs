//! Option quotes, straddle construction and volatility-spread portfolio sorts.

mod filters;
mod pricing;
mod quote;
mod signal;
mod sort;
mod straddle;

pub use filters::{
    apply_option_filters, flag_reversals, quote_rejection, FilterOutcome, RejectReason, MIN_OPTION_PRICE,
};
pub use pricing::black_scholes;
pub use quote::{
    load_quotes_csv, midpoint_price, write_quotes_csv, ContractKey, OptionQuote, OptionRight, QUOTES_HEADER,
};
pub use signal::{vrp_signal, vrp_value, VrpForm, VrpSignal};
pub use sort::{
    assign_bins, bin_sizes, performance_stats, sort_portfolios, vrp_sort_observations, PerformanceStats,
    SortObservation, SortReport,
};
pub use straddle::{
    build_straddle_returns, calendar_prorated_rf, delta_hedged_excess_return, delta_neutral_weights, leg_return,
    load_straddle_returns_csv, select_atm_straddle, straddle_excess_return, straddle_implied_vol, straddle_return,
    trading_days_between, write_straddle_returns_csv, StraddleBook, StraddlePosition, StraddleReturn, StraddleSkip,
    MIN_TRADING_DAYS_TO_EXPIRY,
};
