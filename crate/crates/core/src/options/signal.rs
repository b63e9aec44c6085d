//! Spread between forecast realized volatility and implied volatility.

use std::str::FromStr;

use chrono::NaiveDate;

use crate::error::{Error, Result};
use crate::panel_data::FirmId;
use crate::stamp::FiltrationStamp;
use crate::TRADING_DAYS_PER_YEAR;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum VrpForm {
    /// `rv - iv`
    Difference,
    /// `rv / iv`
    Ratio,
    /// `ln(rv / iv)`
    #[default]
    LogRatio,
}

impl VrpForm {
    pub fn name(self) -> &'static str {
        match self {
            VrpForm::Difference => "difference",
            VrpForm::Ratio => "ratio",
            VrpForm::LogRatio => "log_ratio",
        }
    }
}

impl FromStr for VrpForm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        [VrpForm::Difference, VrpForm::Ratio, VrpForm::LogRatio]
            .into_iter()
            .find(|f| f.name() == s)
            .ok_or_else(|| Error::Usage(format!("unknown signal form '{s}'; use difference, ratio or log_ratio")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VrpSignal {
    pub firm_id: FirmId,
    pub date: NaiveDate,
    /// Square root of the daily variance forecast.
    pub rv_forecast_vol: f64,
    /// Annualized implied volatility divided by sqrt(250).
    pub iv_daily: f64,
    pub signal: f64,
    pub form: VrpForm,
    /// Latest information the signal depends on.
    pub made_at: FiltrationStamp,
}

/// `(sqrt(forecast_var), iv / sqrt(250), f(rv, iv))` for the chosen form.
pub fn vrp_value(forecast_var: f64, iv_annualized: f64, form: VrpForm) -> Result<(f64, f64, f64)> {
    if !(forecast_var >= 0.0) || !forecast_var.is_finite() || !iv_annualized.is_finite() {
        return Err(Error::Domain(format!("invalid signal inputs ({forecast_var}, {iv_annualized})")));
    }
    let rv = forecast_var.sqrt();
    let iv = iv_annualized / TRADING_DAYS_PER_YEAR.sqrt();
    let signal = match form {
        VrpForm::Difference => rv - iv,
        VrpForm::Ratio | VrpForm::LogRatio if !(rv > 0.0 && iv > 0.0) => {
            return Err(Error::Domain(format!("{} needs positive volatilities, got ({rv}, {iv})", form.name())));
        }
        VrpForm::Ratio => rv / iv,
        VrpForm::LogRatio => (rv / iv).ln(),
    };
    Ok((rv, iv, signal))
}

pub fn vrp_signal(
    firm_id: FirmId,
    date: NaiveDate,
    forecast_var: f64,
    iv_annualized: f64,
    form: VrpForm,
    made_at: FiltrationStamp,
) -> Result<VrpSignal> {
    let (rv_forecast_vol, iv_daily, signal) = vrp_value(forecast_var, iv_annualized, form)?;
    Ok(VrpSignal { firm_id, date, rv_forecast_vol, iv_daily, signal, form, made_at })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn examples() {
        let iv = 0.02 * 250f64.sqrt();
        let (rv, ivd, s) = vrp_value(0.0004, iv, VrpForm::LogRatio).unwrap();
        assert!((rv - 0.02).abs() < 1e-15 && (ivd - 0.02).abs() < 1e-15 && s.abs() < 1e-12);
        let (_, ivd, _) = vrp_value(1e-4, 0.3274, VrpForm::Ratio).unwrap();
        assert!((ivd - 0.020707).abs() < 1e-6);
        let (_, _, s) = vrp_value(0.0004, 0.025 * 250f64.sqrt(), VrpForm::Difference).unwrap();
        assert!((s + 0.005).abs() < 1e-12);
    }

    #[test]
    fn log_and_ratio_need_positive_inputs() {
        assert!(vrp_value(0.0, 0.3, VrpForm::LogRatio).is_err());
        assert!(vrp_value(1e-4, 0.0, VrpForm::Ratio).is_err());
        assert!(vrp_value(1e-4, 0.0, VrpForm::Difference).is_ok());
        assert!(vrp_value(-1.0, 0.3, VrpForm::Difference).is_err());
        assert_eq!("log_ratio".parse::<VrpForm>().unwrap(), VrpForm::default());
    }
}
