//! Read access to the panel as of a forecast origin.

use std::ops::Range;

use chrono::NaiveDate;

use crate::error::{Error, Result};
use crate::panel_data::{DailyPanel, FirmId};
use crate::stamp::{FiltrationStamp, StampMarker};

/// The panel as seen at (origin date, 15:55). Fields measured by 15:55
/// (`rv_355`, `ret_355`, presence) are visible through the origin date;
/// close-stamped fields (`rv_day`, `ret_full_day`) only through the previous
/// date. Any later access is a [`Error::Leakage`].
#[derive(Debug, Clone, Copy)]
pub struct FiltrationView<'a> {
    panel: &'a DailyPanel,
    origin: usize,
}

impl<'a> FiltrationView<'a> {
    pub fn new(panel: &'a DailyPanel, origin: usize) -> Self {
        assert!(origin < panel.n_dates(), "origin outside the panel");
        FiltrationView { panel, origin }
    }

    pub fn origin(&self) -> usize {
        self.origin
    }

    pub fn cutoff(&self) -> FiltrationStamp {
        FiltrationStamp::predictor(self.panel.dates()[self.origin])
    }

    /// The trading calendar, which is public information.
    pub fn dates(&self) -> &'a [NaiveDate] {
        self.panel.dates()
    }

    pub fn firms(&self) -> &'a [FirmId] {
        self.panel.firms()
    }

    pub fn n_firms(&self) -> usize {
        self.panel.n_firms()
    }

    fn check(&self, date: usize, marker: StampMarker) -> Result<()> {
        let visible = match marker {
            StampMarker::Predictor => date <= self.origin,
            StampMarker::Close => date < self.origin,
        };
        if visible {
            Ok(())
        } else {
            let stamp = FiltrationStamp { date: self.panel.dates()[date], marker };
            Err(Error::Leakage(format!("value stamped {stamp} requested with cutoff {}", self.cutoff())))
        }
    }

    pub fn is_present(&self, firm: usize, date: usize) -> Result<bool> {
        self.check(date, StampMarker::Predictor)?;
        Ok(self.panel.get(firm, date).is_some())
    }

    pub fn rv_355(&self, firm: usize, date: usize) -> Result<Option<f64>> {
        self.check(date, StampMarker::Predictor)?;
        Ok(self.panel.get(firm, date).map(|v| v.rv_355))
    }

    pub fn ret_355(&self, firm: usize, date: usize) -> Result<Option<f64>> {
        self.check(date, StampMarker::Predictor)?;
        Ok(self.panel.get(firm, date).map(|v| v.ret_355))
    }

    pub fn rv_day(&self, firm: usize, date: usize) -> Result<Option<f64>> {
        self.check(date, StampMarker::Close)?;
        Ok(self.panel.get(firm, date).map(|v| v.rv_day))
    }

    pub fn ret_full_day(&self, firm: usize, date: usize) -> Result<Option<f64>> {
        self.check(date, StampMarker::Close)?;
        Ok(self.panel.get(firm, date).map(|v| v.ret_full_day))
    }

    fn series(&self, firm: usize, dates: Range<usize>, get: impl Fn(usize) -> Result<Option<f64>>) -> Result<Vec<f64>> {
        dates
            .map(|d| {
                get(d)?.ok_or_else(|| {
                    Error::insufficient(format!("{} has no record on {}", self.panel.firms()[firm], self.panel.dates()[d]))
                })
            })
            .collect()
    }

    /// Contiguous `rv_355` values; a missing day is an insufficient-data error.
    pub fn rv_355_series(&self, firm: usize, dates: Range<usize>) -> Result<Vec<f64>> {
        self.series(firm, dates, |d| self.rv_355(firm, d))
    }

    pub fn ret_355_series(&self, firm: usize, dates: Range<usize>) -> Result<Vec<f64>> {
        self.series(firm, dates, |d| self.ret_355(firm, d))
    }

    pub fn rv_day_series(&self, firm: usize, dates: Range<usize>) -> Result<Vec<f64>> {
        self.series(firm, dates, |d| self.rv_day(firm, d))
    }

    pub fn ret_full_day_series(&self, firm: usize, dates: Range<usize>) -> Result<Vec<f64>> {
        self.series(firm, dates, |d| self.ret_full_day(firm, d))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::panel_data::DailyRecord;

    fn panel() -> DailyPanel {
        let d0 = NaiveDate::from_ymd_opt(2020, 1, 6).unwrap();
        DailyPanel::from_records((0..4).map(|k| DailyRecord {
            firm_id: FirmId::from("A"),
            date: d0 + chrono::Days::new(k),
            ret_full_day: 0.01,
            rv_day: 1e-4,
            rv_355: 9e-5,
            ret_355: 0.008,
        }))
        .unwrap()
    }

    #[test]
    fn close_fields_end_the_day_before() {
        let p = panel();
        let v = FiltrationView::new(&p, 2);
        assert_eq!(v.rv_355(0, 2).unwrap(), Some(9e-5));
        assert_eq!(v.rv_day(0, 1).unwrap(), Some(1e-4));
        assert!(matches!(v.rv_day(0, 2), Err(Error::Leakage(_))));
        assert!(matches!(v.ret_full_day(0, 2), Err(Error::Leakage(_))));
        assert!(matches!(v.rv_355(0, 3), Err(Error::Leakage(_))));
        assert_eq!(v.rv_day_series(0, 0..2).unwrap().len(), 2);
        assert!(matches!(v.rv_day_series(0, 0..3), Err(Error::Leakage(_))));
    }
}
