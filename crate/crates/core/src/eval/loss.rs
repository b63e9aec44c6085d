//! Per-cell forecast losses.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum LossKind {
    Mse,
    Mae,
    /// `ln(yhat) + y / yhat`.
    Qlike,
}

/// Loss of forecast `yhat` against realized variance `y`. RMSE is the square
/// root of an aggregated [`LossKind::Mse`], never a per-cell quantity.
pub fn forecast_loss(y: f64, yhat: f64, kind: LossKind) -> Result<f64> {
    if !(y >= 0.0) || !y.is_finite() || !yhat.is_finite() {
        return Err(Error::Domain(format!("loss needs finite y >= 0 and finite yhat, got y={y} yhat={yhat}")));
    }
    Ok(match kind {
        LossKind::Mse => (y - yhat) * (y - yhat),
        LossKind::Mae => (y - yhat).abs(),
        LossKind::Qlike => {
            if yhat <= 0.0 {
                return Err(Error::Domain(format!("QLIKE needs a positive forecast, got {yhat}")));
            }
            yhat.ln() + y / yhat
        }
    })
}
