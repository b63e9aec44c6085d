//! Principal-component factor forecast of next-day RV for a balanced block
//! of firms.

use nalgebra::DMatrix;
use rvforecast::models::{factor_model_forecast, FactorPanel, FactorSpec};
use rvforecast::panel_data::{simulate_panel, SimConfig};

fn main() -> rvforecast::Result<()> {
    let sim = simulate_panel(&SimConfig { n_firms: 15, n_days: 300, seed: 9, turnover: 0.0, emit_prints: false, options: None, ..Default::default() })?;
    let panel = &sim.panel;
    let h = 280;
    let rv = DMatrix::from_fn(panel.n_firms(), h, |i, d| panel.get(i, d).expect("balanced").rv_day);
    let spec = FactorSpec { k: 3, window: 250, ..Default::default() };
    let (model, forecast) = factor_model_forecast(&spec, &FactorPanel::single(&rv))?;
    let share: Vec<String> = model.pca.explained_share().iter().take(5).map(|s| format!("{:.1}%", 100.0 * s)).collect();
    println!("variance share of the leading components: {}", share.join(", "));
    let target = panel.dates()[h];
    for (i, f) in forecast.iter().enumerate().take(5) {
        let firm = &panel.firms()[i];
        println!("{firm} {target}: forecast {f:.3e}, true {:.3e}", sim.truth[&(firm.clone(), target)]);
    }
    Ok(())
}
