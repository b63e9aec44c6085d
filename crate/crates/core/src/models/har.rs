//! HAR model and the rolling squared-return benchmark.

use std::ops::RangeInclusive;

use chrono::NaiveDate;
use nalgebra::DMatrix;

use super::ols::{fit_ols, OlsFit};
use crate::error::{Error, Result};
use crate::panel_data::Horizon;
use crate::VARIANCE_FLOOR;

/// Default minimum number of usable rows for any regression.
pub const MIN_FIT_ROWS: usize = 60;

/// Lags needed before the first HAR regressor row (monthly window minus one).
pub const HAR_WARMUP: usize = 21;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HARCoefficients {
    pub c: f64,
    pub beta_d: f64,
    pub beta_w: f64,
    pub beta_m: f64,
}

impl HARCoefficients {
    pub fn predict(&self, x: [f64; 3]) -> f64 {
        self.c + self.beta_d * x[0] + self.beta_w * x[1] + self.beta_m * x[2]
    }

    fn from_ols(fit: &OlsFit) -> Self {
        HARCoefficients { c: fit.intercept, beta_d: fit.slopes[0], beta_w: fit.slopes[1], beta_m: fit.slopes[2] }
    }
}

/// (daily, weekly, monthly) trailing means of `series` ending at `at`
/// inclusive, or `None` with fewer than 22 observations.
pub fn har_regressors(series: &[f64], at: usize) -> Option<[f64; 3]> {
    if at < HAR_WARMUP || at >= series.len() {
        return None;
    }
    let mean = |h: Horizon| {
        let n = h.days();
        series[at + 1 - n..=at].iter().sum::<f64>() / n as f64
    };
    Some([series[at], mean(Horizon::Weekly), mean(Horizon::Monthly)])
}

/// Regressors for every position of `series` (`None` during warm-up).
pub fn har_regressor_series(series: &[f64]) -> Vec<Option<[f64; 3]>> {
    (0..series.len()).map(|at| har_regressors(series, at)).collect()
}

/// Fits `target[s + 1] = c + b . har(predictor, s)` over origins `s` in
/// `origins`. `predictor` and `target` are aligned by position.
pub fn fit_har(
    predictor: &[f64],
    target: &[f64],
    origins: RangeInclusive<usize>,
    min_rows: usize,
) -> Result<(HARCoefficients, OlsFit)> {
    let rows: Vec<([f64; 3], f64)> = origins
        .filter_map(|s| Some((har_regressors(predictor, s)?, *target.get(s + 1)?)))
        .collect();
    fit_har_rows(&rows, min_rows)
}

pub(crate) fn fit_har_rows(rows: &[([f64; 3], f64)], min_rows: usize) -> Result<(HARCoefficients, OlsFit)> {
    if rows.len() < min_rows.max(4) {
        return Err(Error::insufficient(format!("{} usable HAR rows, need {}", rows.len(), min_rows.max(4))));
    }
    let x = DMatrix::from_fn(rows.len(), 3, |i, j| rows[i].0[j]);
    let y: Vec<f64> = rows.iter().map(|r| r.1).collect();
    let fit = fit_ols(&x, &y)?;
    Ok((HARCoefficients::from_ols(&fit), fit))
}

/// HAR forecast on a single dated RV series.
///
/// Training pairs are (regressors at the previous observation, RV at `d`) for
/// every observation date `d` inside `fit_window`; the forecast for `target`
/// uses the regressors at the last observation before `target`. The result is
/// floored at [`VARIANCE_FLOOR`].
pub fn har_forecast(
    trailing_rv: &[(NaiveDate, f64)],
    fit_window: (NaiveDate, NaiveDate),
    target: NaiveDate,
) -> Result<(HARCoefficients, f64)> {
    har_forecast_with(trailing_rv, fit_window, target, MIN_FIT_ROWS)
}

pub fn har_forecast_with(
    trailing_rv: &[(NaiveDate, f64)],
    fit_window: (NaiveDate, NaiveDate),
    target: NaiveDate,
    min_rows: usize,
) -> Result<(HARCoefficients, f64)> {
    if trailing_rv.windows(2).any(|w| w[0].0 >= w[1].0) {
        return Err(Error::Data("RV series must be strictly increasing in date".into()));
    }
    if fit_window.1 >= target {
        return Err(Error::Leakage(format!("fit window ends {} but the target is {target}", fit_window.1)));
    }
    let values: Vec<f64> = trailing_rv.iter().map(|(_, v)| *v).collect();
    let last = trailing_rv
        .iter()
        .rposition(|(d, _)| *d < target)
        .ok_or_else(|| Error::insufficient("no observation before the target"))?;
    let rows: Vec<([f64; 3], f64)> = (1..=last)
        .filter(|&q| (fit_window.0..=fit_window.1).contains(&trailing_rv[q].0))
        .filter_map(|q| Some((har_regressors(&values, q - 1)?, values[q])))
        .collect();
    let (coef, _) = fit_har_rows(&rows, min_rows)?;
    let x = har_regressors(&values, last)
        .ok_or_else(|| Error::insufficient("fewer than 22 observations before the target"))?;
    Ok((coef, coef.predict(x).max(VARIANCE_FLOOR)))
}

/// Mean of the last `window` squared returns (not demeaned).
pub fn rolling_sd_squared_forecast(trailing_full_day_returns: &[f64], window: usize) -> Result<f64> {
    if window == 0 {
        return Err(Error::config("rolling window must be positive"));
    }
    let n = trailing_full_day_returns.len();
    if n < window {
        return Err(Error::insufficient(format!("{n} returns for a {window}-day window")));
    }
    let tail = &trailing_full_day_returns[n - window..];
    Ok(tail.iter().map(|r| r * r).sum::<f64>() / window as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::panel_data::Horizon;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn dates(n: usize) -> Vec<NaiveDate> {
        crate::panel_data::simulate::weekdays_from(NaiveDate::from_ymd_opt(2012, 1, 2).unwrap(), n)
    }

    /// Series generated exactly by the HAR recursion.
    fn har_dgp(coef: HARCoefficients, n: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut v: Vec<f64> = (0..22).map(|_| 1e-4 * (1.0 + rng.random::<f64>())).collect();
        while v.len() < n {
            let x = har_regressors(&v, v.len() - 1).unwrap();
            v.push(coef.predict(x));
        }
        v
    }

    #[test]
    fn plug_in_forecast() {
        let coef = HARCoefficients { c: 1e-4, beta_d: 0.4, beta_w: 0.3, beta_m: 0.2 };
        assert!((coef.predict([4e-4, 5e-4, 6e-4]) - 5.3e-4).abs() < 1e-18);
        let pass = HARCoefficients { c: 0.0, beta_d: 1.0, beta_w: 0.0, beta_m: 0.0 };
        assert_eq!(pass.predict([3.3e-4, 1.0, 2.0]), 3.3e-4);
    }

    #[test]
    fn regressors_match_horizon_average() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let v: Vec<f64> = (0..300).map(|_| rng.random::<f64>() * 1e-3).collect();
        let ds = dates(300);
        let dated: Vec<(NaiveDate, f64)> = ds.iter().copied().zip(v.iter().copied()).collect();
        let fast = har_regressor_series(&v);
        for at in [21, 22, 63, 64, 65, 200, 299] {
            let x = har_regressors(&v, at).unwrap();
            let y = fast[at].unwrap();
            for (h, k) in Horizon::ALL.iter().zip(0..3) {
                let oracle = crate::panel_data::horizon_average(&dated, ds[at], *h).unwrap();
                assert!((x[k] - oracle).abs() < 1e-18);
                assert_eq!(y[k], x[k]);
            }
        }
        assert!(fast[20].is_none() && har_regressors(&v, 20).is_none());
    }

    #[test]
    fn zero_noise_dgp_is_recovered() {
        let coef = HARCoefficients { c: 5e-5, beta_d: 0.35, beta_w: 0.3, beta_m: 0.2 };
        let v = har_dgp(coef, 200, 1);
        let ds = dates(200);
        let dated: Vec<_> = ds.iter().copied().zip(v.iter().copied()).collect();
        let (fit, f) = har_forecast(&dated, (ds[30], ds[180]), ds[199]).unwrap();
        for (a, b) in [(fit.c, coef.c), (fit.beta_d, coef.beta_d), (fit.beta_w, coef.beta_w), (fit.beta_m, coef.beta_m)] {
            assert!((a - b).abs() < 1e-8, "{a} vs {b}");
        }
        assert!((f - v[199]).abs() < 1e-12);
    }

    #[test]
    fn short_window_exact_recovery() {
        let coef = HARCoefficients { c: 1e-5, beta_d: 0.5, beta_w: 0.25, beta_m: 0.15 };
        let v = har_dgp(coef, 40, 2);
        let (fit, _) = fit_har(&v, &v, 25..=30, 4).unwrap();
        assert!((fit.beta_d - 0.5).abs() < 1e-8 && (fit.c - 1e-5).abs() < 1e-8);
    }

    #[test]
    fn insufficient_history() {
        let ds = dates(50);
        let dated: Vec<_> = ds.iter().map(|d| (*d, 1e-4)).collect();
        assert!(matches!(har_forecast(&dated, (ds[0], ds[40]), ds[49]), Err(Error::InsufficientData(_))));
        assert!(matches!(har_forecast(&dated, (ds[0], ds[49]), ds[49]), Err(Error::Leakage(_))));
    }

    #[test]
    fn rolling_benchmark() {
        assert!((rolling_sd_squared_forecast(&[0.02; 30], 22).unwrap() - 4e-4).abs() < 1e-18);
        assert!((rolling_sd_squared_forecast(&[0.01, -0.01], 2).unwrap() - 1e-4).abs() < 1e-18);
        assert!(matches!(rolling_sd_squared_forecast(&[0.01], 0), Err(Error::Config(_))));
        assert!(matches!(rolling_sd_squared_forecast(&[0.01], 2), Err(Error::InsufficientData(_))));
    }
}
