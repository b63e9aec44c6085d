//! Delta-neutral straddle returns sorted into quintiles on the gap between
//! forecast and implied volatility.

use rvforecast::backtest::{run_backtest, BacktestConfig};
use rvforecast::options::{build_straddle_returns, sort_portfolios, vrp_sort_observations, VrpForm};
use rvforecast::panel_data::{simulate_panel, SimConfig};

fn main() -> rvforecast::Result<()> {
    let sim = simulate_panel(&SimConfig { n_firms: 25, n_days: 400, seed: 21, emit_prints: false, ..Default::default() })?;
    let book = build_straddle_returns(&sim.quotes, 0.0);
    println!(
        "{} straddle returns, {} quotes rejected, {} firm-dates skipped, {} reversals",
        book.returns.len(),
        book.rejected_quotes.values().sum::<usize>(),
        book.skipped.values().sum::<usize>(),
        book.reversals
    );
    let config = BacktestConfig { models: vec!["har".into()], ..Default::default() };
    let forecasts = run_backtest(&sim.panel, &config)?.forecasts;
    let (obs, missing) = vrp_sort_observations(&book.returns, &forecasts, "har", VrpForm::LogRatio)?;
    println!("{} sortable straddles, {missing} without a forecast", obs.len());
    let report = sort_portfolios(&obs, 5)?;
    for (name, stats) in report.stats() {
        if let Ok(s) = stats {
            println!("{name:>4}: mean {:+.4}  sd {:.4}  t {:+.2}", s.mean, s.sd, s.t_stat);
        }
    }
    Ok(())
}
