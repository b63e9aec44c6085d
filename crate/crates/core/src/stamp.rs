//! Information-set timestamps.
//!
//! Every daily quantity carries a stamp `(date, marker)`. Predictors measured
//! intraday are stamped at 15:55; full-session quantities (the close, the
//! full-day realized variance) are stamped at the 16:00 close.

use std::fmt;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

/// Intraday point at which a value becomes known.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum StampMarker {
    /// 15:55 ET, when predictors are measured and forecasts are made.
    Predictor,
    /// 16:00 ET close.
    Close,
}

impl StampMarker {
    pub fn as_str(self) -> &'static str {
        match self {
            StampMarker::Predictor => "15:55",
            StampMarker::Close => "16:00",
        }
    }
}

/// A point in the filtration, ordered by date then marker.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct FiltrationStamp {
    pub date: NaiveDate,
    pub marker: StampMarker,
}

impl FiltrationStamp {
    pub fn predictor(date: NaiveDate) -> Self {
        Self { date, marker: StampMarker::Predictor }
    }

    pub fn close(date: NaiveDate) -> Self {
        Self { date, marker: StampMarker::Close }
    }
}

impl fmt::Display for FiltrationStamp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {}", self.date, self.marker.as_str())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn predictor_precedes_close_on_same_day() {
        let d = NaiveDate::from_ymd_opt(2020, 1, 2).unwrap();
        assert!(FiltrationStamp::predictor(d) < FiltrationStamp::close(d));
        let next = d.succ_opt().unwrap();
        assert!(FiltrationStamp::close(d) < FiltrationStamp::predictor(next));
    }
}
