//! Walk-forward backtesting: filtration-checked data access, splits,
//! hyperparameter tuning and the forecasting engine.

mod builtin;
mod engine;
mod splits;
mod tuning;
mod view;

pub use builtin::{HarModel, LassoModel, PcaModel, RollingSdModel};
pub use engine::{
    run_backtest, run_backtest_with, valid_model_names, write_run_manifest, BacktestConfig, BacktestResult,
    CombinationKind, FittedModel, ForecastModel, OriginContext, BASE_MODELS, COMBINATION_MODELS,
};
pub use splits::{balanced_firm_indices, balanced_window_filter, make_walkforward_splits, SplitSpec};
pub use tuning::{tune_hyperparameters, TuningPolicy, ValidationLoss};
pub use view::FiltrationView;
