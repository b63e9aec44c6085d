//! Variance forecasters: OLS, elastic-net regression, HAR, the rolling
//! squared-return benchmark, PCA factor models and forecast combinations.

mod combine;
mod forecast_set;
pub(crate) mod har;
mod ols;
mod pca;
mod penalized;

pub use combine::{average_forecasts, egalitarian_combine, egalitarian_combine_with, egalitarian_lambda_max, CombinationWeights};
pub use forecast_set::{
    load_forecasts_csv, write_combination_weights_csv, write_forecasts_csv, ForecastEntry, ForecastSet, FORECAST_HEADER,
};
pub use har::{
    fit_har, har_forecast, har_forecast_with, har_regressor_series, har_regressors, rolling_sd_squared_forecast,
    HARCoefficients, HAR_WARMUP, MIN_FIT_ROWS,
};
pub use ols::{fit_ols, OlsFit};
pub use pca::{extract_pca_factors, factor_model_forecast, fit_factor_model, FactorModel, FactorPanel, FactorSpec, PcaFactors};
pub use penalized::{
    fit_penalized, lambda_grid, PenalizedFit, PenalizedOptions, PenalizedProblem, PenalizedResponse, PenalizedSolution,
    PenaltySpec,
};
