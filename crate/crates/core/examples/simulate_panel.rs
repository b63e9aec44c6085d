//! Simulates an unbalanced panel with option quotes and writes it to CSV.

use rvforecast::eval::summary_statistics;
use rvforecast::panel_data::{simulate_panel, write_panel_csv, write_truth_csv, SimConfig};

fn main() -> rvforecast::Result<()> {
    let config = SimConfig { n_firms: 8, n_days: 120, seed: 11, emit_prints: false, ..Default::default() };
    let sim = simulate_panel(&config)?;
    println!(
        "{} firms x {} dates, {} firm-days present, {} option quotes",
        sim.panel.n_firms(),
        sim.panel.n_dates(),
        sim.panel.len(),
        sim.quotes.len()
    );
    let out = std::env::temp_dir().join("rvforecast_sim");
    std::fs::create_dir_all(&out)?;
    write_panel_csv(&sim.panel, out.join("panel.csv"))?;
    write_truth_csv(&sim.truth, out.join("truth.csv"))?;
    println!("wrote {}", out.display());
    print!("{}", summary_statistics(&sim.panel)?);
    Ok(())
}
