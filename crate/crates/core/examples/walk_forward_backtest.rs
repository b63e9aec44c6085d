//! Walk-forward backtest of the built-in forecasters on a simulated panel.

use rvforecast::backtest::{run_backtest, BacktestConfig};
use rvforecast::eval::{aggregate_panel_errors, score_forecasts, Aggregation};
use rvforecast::panel_data::{simulate_panel, SimConfig};

fn main() -> rvforecast::error::Result<()> {
    let sim = simulate_panel(&SimConfig { n_firms: 12, n_days: 420, seed: 4, emit_prints: false, options: None, ..Default::default() })?;
    let config = BacktestConfig {
        window_w: 250,
        models: ["rolling_sd", "har", "lasso", "pca", "pca_har", "avg", "elasso", "pelasso"].map(String::from).to_vec(),
        ..Default::default()
    };
    let result = run_backtest(&sim.panel, &config)?;
    for (model, gaps) in &result.gaps {
        println!("{model:>10}: {} forecasts, {gaps} gaps", result.attempted[model] - gaps);
    }
    let report = aggregate_panel_errors(&score_forecasts(&result.forecasts, &sim.truth), Aggregation::Pooled)?;
    println!("{report}");
    for (model, weights) in &result.combination_weights {
        println!("{model} weights: {weights:?}");
    }
    Ok(())
}
