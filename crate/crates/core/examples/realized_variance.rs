//! Realized variance of one simulated trading day, from raw prints to the
//! daily record, compared with the day's true integrated variance.

use chrono::NaiveDate;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rvforecast::panel_data::{
    build_bar_series, compute_log_returns, daily_record_from_prints, filter_intraday_prints, realized_variance,
    simulate_gbm_closes, FirmId, IntradayPrint,
};

fn main() -> rvforecast::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let true_var = 4e-4;
    // One-minute GBM path; every close becomes a print at the end of its minute.
    let closes = simulate_gbm_closes(&mut rng, 50.0, true_var, 390);
    let firm = FirmId::from("XYZ");
    let date = NaiveDate::from_ymd_opt(2024, 3, 4).unwrap();
    let mut prints: Vec<IntradayPrint> = closes
        .iter()
        .enumerate()
        .map(|(i, &price)| IntradayPrint {
            firm_id: firm.clone(),
            date,
            time: 9 * 3600 + 30 * 60 + 60 * i as u32,
            price,
            size: 100,
            condition_code: None,
        })
        .collect();
    // A fat-finger print and an excluded sale condition, both removed by the filters.
    prints.insert(100, IntradayPrint { price: 500.0, ..prints[100].clone() });
    prints.insert(200, IntradayPrint { condition_code: Some("Z".into()), price: 1.0, ..prints[200].clone() });

    let high = closes.iter().cloned().fold(f64::MIN, f64::max);
    let low = closes.iter().cloned().fold(f64::MAX, f64::min);
    let clean = filter_intraday_prints(&prints, high, low);
    println!("prints: {} raw, {} after cleaning", prints.len(), clean.len());

    let bars = build_bar_series(firm.clone(), date, &clean, 5)?;
    let rv = realized_variance(&compute_log_returns(&bars.prices)?)?;
    println!("5-minute RV {rv:.6e} vs true integrated variance {true_var:.6e}");

    let (record, _) = daily_record_from_prints(&prints, high, low, Some(closes[0]), 5)?;
    println!(
        "record: rv_day {:.6e}, rv_355 {:.6e}, ret_355 {:+.5}, ret_full_day {:+.5}",
        record.rv_day, record.rv_355, record.ret_355, record.ret_full_day
    );
    Ok(())
}
