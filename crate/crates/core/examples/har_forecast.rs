//! One-step HAR forecast for a single firm, next to the rolling
//! squared-return benchmark.

use rvforecast::models::{har_forecast, rolling_sd_squared_forecast};
use rvforecast::panel_data::{simulate_panel, SimConfig};

fn main() -> rvforecast::Result<()> {
    let sim = simulate_panel(&SimConfig { n_firms: 1, n_days: 320, seed: 3, k_common_factors: 1, turnover: 0.0, emit_prints: false, options: None, ..Default::default() })?;
    let firm = sim.panel.firms()[0].clone();
    let dates = sim.panel.dates();
    let series: Vec<_> = sim.panel.records().filter(|r| r.firm_id == firm).collect();
    let target = dates[300];
    let rv: Vec<_> = series.iter().filter(|r| r.date < target).map(|r| (r.date, r.rv_day)).collect();
    let (coef, har) = har_forecast(&rv, (dates[50], dates[299]), target)?;
    println!("HAR: c {:.3e}, daily {:.3}, weekly {:.3}, monthly {:.3}", coef.c, coef.beta_d, coef.beta_w, coef.beta_m);

    let returns: Vec<f64> = series.iter().filter(|r| r.date < target).map(|r| r.ret_full_day).collect();
    let rolling = rolling_sd_squared_forecast(&returns, 22)?;
    let truth = sim.truth[&(firm, target)];
    println!("forecasts for {target}: HAR {har:.3e}, rolling {rolling:.3e}, true variance {truth:.3e}");
    Ok(())
}
