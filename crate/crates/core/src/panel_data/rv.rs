//! Log returns, realized variance and trailing horizon averages.

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Continuously compounded returns between consecutive prices.
pub fn compute_log_returns(prices: &[f64]) -> Result<Vec<f64>> {
    if prices.len() < 2 {
        return Err(Error::insufficient(format!("need at least 2 prices, got {}", prices.len())));
    }
    if let Some(bad) = prices.iter().find(|p| !(**p > 0.0) || !p.is_finite()) {
        return Err(Error::Domain(format!("log return undefined for price {bad}")));
    }
    Ok(prices.windows(2).map(|w| (w[1] / w[0]).ln()).collect())
}

/// Sum of squared intraday returns, accumulated with Neumaier compensation so
/// the result does not depend on the order of the returns beyond rounding.
pub fn realized_variance(intraday_returns: &[f64]) -> Result<f64> {
    if intraday_returns.is_empty() {
        return Err(Error::insufficient("realized variance of an empty return list"));
    }
    let (mut sum, mut comp) = (0.0f64, 0.0f64);
    for r in intraday_returns {
        let x = r * r;
        let t = sum + x;
        if sum.abs() >= x.abs() {
            comp += (sum - t) + x;
        } else {
            comp += (x - t) + sum;
        }
        sum = t;
    }
    Ok(sum + comp)
}

/// Averaging horizon of the HAR components.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Horizon {
    Daily,
    Weekly,
    Monthly,
}

impl Horizon {
    pub const ALL: [Horizon; 3] = [Horizon::Daily, Horizon::Weekly, Horizon::Monthly];

    /// Number of trailing trading days averaged.
    pub fn days(self) -> usize {
        match self {
            Horizon::Daily => 1,
            Horizon::Weekly => 5,
            Horizon::Monthly => 22,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Horizon::Daily => "d",
            Horizon::Weekly => "w",
            Horizon::Monthly => "m",
        }
    }
}

/// Mean of `values[end + 1 - n ..= end]`.
pub fn trailing_mean(values: &[f64], end: usize, n: usize) -> Result<f64> {
    if n == 0 || end >= values.len() || end + 1 < n {
        return Err(Error::insufficient(format!(
            "trailing mean of {n} values ending at index {end} (have {})",
            values.len()
        )));
    }
    Ok(values[end + 1 - n..=end].iter().sum::<f64>() / n as f64)
}

/// Trailing equal-weight average of a dated series over the given horizon,
/// using observations dated on or before `as_of`. Missing history is an
/// error; nothing is padded or imputed.
pub fn horizon_average(daily_series: &[(NaiveDate, f64)], as_of: NaiveDate, horizon: Horizon) -> Result<f64> {
    let available = daily_series.partition_point(|(d, _)| *d <= as_of);
    let n = horizon.days();
    if available < n {
        return Err(Error::insufficient(format!(
            "{}-day average as of {as_of} needs {n} observations, have {available}",
            horizon.label()
        )));
    }
    Ok(daily_series[available - n..available].iter().map(|(_, v)| v).sum::<f64>() / n as f64)
}

/// Daily, weekly and monthly averages of realized variance and returns at one date.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HorizonAverages {
    pub rv_d: f64,
    pub rv_w: f64,
    pub rv_m: f64,
    pub ret_d: f64,
    pub ret_w: f64,
    pub ret_m: f64,
}

impl HorizonAverages {
    /// Averages ending at index `at` of two aligned daily series.
    pub fn at(rv: &[f64], ret: &[f64], at: usize) -> Result<Self> {
        Ok(Self {
            rv_d: trailing_mean(rv, at, 1)?,
            rv_w: trailing_mean(rv, at, 5)?,
            rv_m: trailing_mean(rv, at, 22)?,
            ret_d: trailing_mean(ret, at, 1)?,
            ret_w: trailing_mean(ret, at, 5)?,
            ret_m: trailing_mean(ret, at, 22)?,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::panel_data::simulate_gbm_closes;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn dated(values: &[f64]) -> Vec<(NaiveDate, f64)> {
        let start = NaiveDate::from_ymd_opt(2021, 1, 1).unwrap();
        values
            .iter()
            .enumerate()
            .map(|(i, &v)| (start + chrono::Days::new(i as u64), v))
            .collect()
    }

    #[test]
    fn flat_prices_give_zero_return() {
        assert_eq!(compute_log_returns(&[100.0, 100.0]).unwrap(), vec![0.0]);
    }

    #[test]
    fn five_percent_move() {
        let r = compute_log_returns(&[100.0, 105.0]).unwrap();
        assert!((r[0] - 0.048_790_164_169_432).abs() < 1e-12);
    }

    #[test]
    fn log_return_rejects_bad_input() {
        assert!(matches!(compute_log_returns(&[100.0, 0.0]), Err(Error::Domain(_))));
        assert!(matches!(compute_log_returns(&[100.0]), Err(Error::InsufficientData(_))));
    }

    #[test]
    fn realized_variance_cases() {
        assert_eq!(realized_variance(&[0.0; 78]).unwrap(), 0.0);
        assert!((realized_variance(&[0.01, -0.02]).unwrap() - 0.0005).abs() < 1e-18);
        assert!(realized_variance(&[]).is_err());
    }

    #[test]
    fn realized_variance_tracks_integrated_variance() {
        // Monte-Carlo oracle: constant-volatility paths with known daily variance.
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let days = 10_000;
        let mean: f64 = (0..days)
            .map(|_| {
                let closes = simulate_gbm_closes(&mut rng, 50.0, 4e-4, 78);
                realized_variance(&compute_log_returns(&closes).unwrap()).unwrap()
            })
            .sum::<f64>()
            / days as f64;
        assert!((mean / 4e-4 - 1.0).abs() < 0.02, "mean RV {mean}");
    }

    #[test]
    fn horizon_average_cases() {
        let constant = dated(&[3e-4; 30]);
        let last = constant.last().unwrap().0;
        for h in Horizon::ALL {
            assert!((horizon_average(&constant, last, h).unwrap() - 3e-4).abs() < 1e-18);
        }
        let ramp = dated(&[9.0, 9.0, 1e-4, 2e-4, 3e-4, 4e-4, 5e-4]);
        let last = ramp.last().unwrap().0;
        assert!((horizon_average(&ramp, last, Horizon::Weekly).unwrap() - 3e-4).abs() < 1e-18);
        let short = dated(&[1e-4; 21]);
        let last = short.last().unwrap().0;
        assert!(matches!(horizon_average(&short, last, Horizon::Monthly), Err(Error::InsufficientData(_))));
    }

    #[test]
    fn horizon_average_ignores_later_observations() {
        let series = dated(&[1.0, 2.0, 3.0, 4.0, 5.0, 100.0]);
        let as_of = series[4].0;
        assert_eq!(horizon_average(&series, as_of, Horizon::Weekly).unwrap(), 3.0);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn horizon_average_is_translation_equivariant(
                values in prop::collection::vec(0.0f64..1e-2, 22..40),
                shift in -1e-2f64..1e-2,
            ) {
                let base = dated(&values);
                let shifted: Vec<_> = base.iter().map(|&(d, v)| (d, v + shift)).collect();
                let as_of = base.last().unwrap().0;
                for h in Horizon::ALL {
                    let a = horizon_average(&base, as_of, h).unwrap();
                    let b = horizon_average(&shifted, as_of, h).unwrap();
                    prop_assert!((b - (a + shift)).abs() < 1e-15);
                }
            }

            #[test]
            fn weekly_and_monthly_stay_within_input_range(values in prop::collection::vec(0.0f64..1.0, 22..40)) {
                let end = values.len() - 1;
                for n in [5usize, 22] {
                    let window = &values[end + 1 - n..];
                    let lo = window.iter().cloned().fold(f64::INFINITY, f64::min);
                    let hi = window.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                    let m = trailing_mean(&values, end, n).unwrap();
                    prop_assert!(m >= lo - 1e-15 && m <= hi + 1e-15);
                }
            }

            #[test]
            fn realized_variance_is_order_independent(mut returns in prop::collection::vec(-0.05f64..0.05, 1..100)) {
                let forward = realized_variance(&returns).unwrap();
                returns.reverse();
                let backward = realized_variance(&returns).unwrap();
                prop_assert!((forward - backward).abs() <= 1e-15 * forward.max(f64::MIN_POSITIVE) + f64::EPSILON * 1e-3);
                prop_assert!(forward >= 0.0);
            }
        }
    }
}
