//! The unbalanced firm-by-date daily panel.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use chrono::NaiveDate;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Opaque firm identifier. Cheap to clone.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct FirmId(Arc<str>);

impl FirmId {
    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl From<&str> for FirmId {
    fn from(s: &str) -> Self {
        FirmId(Arc::from(s))
    }
}

impl From<String> for FirmId {
    fn from(s: String) -> Self {
        FirmId(Arc::from(s))
    }
}

impl fmt::Display for FirmId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl fmt::Debug for FirmId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", &*self.0)
    }
}

impl Serialize for FirmId {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.0)
    }
}

impl<'de> Deserialize<'de> for FirmId {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        String::deserialize(d).map(FirmId::from)
    }
}

/// Per firm-date measurements.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DailyValues {
    /// Close-to-close log return (includes the overnight move).
    pub ret_full_day: f64,
    /// Realized variance over the full 09:30-16:00 session.
    pub rv_day: f64,
    /// Realized variance over intervals ending at or before 15:55.
    pub rv_355: f64,
    /// Open-to-15:55 log return.
    pub ret_355: f64,
}

/// One row of the daily panel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DailyRecord {
    pub firm_id: FirmId,
    pub date: NaiveDate,
    pub ret_full_day: f64,
    pub rv_day: f64,
    pub rv_355: f64,
    pub ret_355: f64,
}

impl DailyRecord {
    pub fn values(&self) -> DailyValues {
        DailyValues {
            ret_full_day: self.ret_full_day,
            rv_day: self.rv_day,
            rv_355: self.rv_355,
            ret_355: self.ret_355,
        }
    }

    fn validate(&self) -> std::result::Result<(), String> {
        let fields = [
            ("ret_full_day", self.ret_full_day),
            ("rv_day", self.rv_day),
            ("rv_355", self.rv_355),
            ("ret_355", self.ret_355),
        ];
        if let Some((name, _)) = fields.iter().find(|(_, v)| !v.is_finite()) {
            return Err(format!("{name} is not finite"));
        }
        if self.rv_day < 0.0 {
            return Err(format!("negative rv_day {}", self.rv_day));
        }
        if self.rv_355 < 0.0 {
            return Err(format!("negative rv_355 {}", self.rv_355));
        }
        Ok(())
    }
}

/// Dense storage of an unbalanced panel. Absent firm-days are `None`; they
/// are never imputed.
#[derive(Debug, Clone, PartialEq)]
pub struct DailyPanel {
    firms: Vec<FirmId>,
    dates: Vec<NaiveDate>,
    cells: Vec<Option<DailyValues>>,
}

impl DailyPanel {
    pub fn builder() -> DailyPanelBuilder {
        DailyPanelBuilder::default()
    }

    /// Builds a panel, rejecting duplicate (firm, date) keys and invalid rows.
    pub fn from_records<I: IntoIterator<Item = DailyRecord>>(records: I) -> Result<Self> {
        let mut b = DailyPanelBuilder::default();
        for (i, r) in records.into_iter().enumerate() {
            b.insert_row(i + 1, r)?;
        }
        Ok(b.build())
    }

    /// Firms in ascending id order.
    pub fn firms(&self) -> &[FirmId] {
        &self.firms
    }

    /// Trading dates in ascending order.
    pub fn dates(&self) -> &[NaiveDate] {
        &self.dates
    }

    pub fn n_firms(&self) -> usize {
        self.firms.len()
    }

    pub fn n_dates(&self) -> usize {
        self.dates.len()
    }

    pub fn firm_index(&self, firm: &FirmId) -> Option<usize> {
        self.firms.binary_search(firm).ok()
    }

    pub fn date_index(&self, date: NaiveDate) -> Option<usize> {
        self.dates.binary_search(&date).ok()
    }

    #[inline]
    pub fn get(&self, firm: usize, date: usize) -> Option<&DailyValues> {
        self.cells[firm * self.dates.len() + date].as_ref()
    }

    /// Overwrites (or removes) one cell.
    pub fn set(&mut self, firm: usize, date: usize, values: Option<DailyValues>) {
        let n = self.dates.len();
        self.cells[firm * n + date] = values;
    }

    pub fn record(&self, firm: &FirmId, date: NaiveDate) -> Option<DailyRecord> {
        let (f, d) = (self.firm_index(firm)?, self.date_index(date)?);
        self.get(f, d).map(|v| self.to_record(f, d, v))
    }

    fn to_record(&self, f: usize, d: usize, v: &DailyValues) -> DailyRecord {
        DailyRecord {
            firm_id: self.firms[f].clone(),
            date: self.dates[d],
            ret_full_day: v.ret_full_day,
            rv_day: v.rv_day,
            rv_355: v.rv_355,
            ret_355: v.ret_355,
        }
    }

    /// Number of populated firm-days.
    pub fn len(&self) -> usize {
        self.cells.iter().filter(|c| c.is_some()).count()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// All records ordered by firm then date.
    pub fn records(&self) -> impl Iterator<Item = DailyRecord> + '_ {
        (0..self.firms.len()).flat_map(move |f| {
            (0..self.dates.len()).filter_map(move |d| self.get(f, d).map(|v| self.to_record(f, d, v)))
        })
    }
}

/// Single-writer panel construction.
#[derive(Debug, Default)]
pub struct DailyPanelBuilder {
    rows: BTreeMap<(FirmId, NaiveDate), DailyValues>,
}

impl DailyPanelBuilder {
    pub fn insert(&mut self, record: DailyRecord) -> Result<()> {
        let row = self.rows.len() + 1;
        self.insert_row(row, record)
    }

    pub(crate) fn insert_row(&mut self, row: usize, record: DailyRecord) -> Result<()> {
        record.validate().map_err(|m| Error::format(row, m))?;
        let key = (record.firm_id.clone(), record.date);
        if self.rows.contains_key(&key) {
            return Err(Error::format(
                row,
                format!("duplicate record for firm {} on {}", record.firm_id, record.date),
            ));
        }
        self.rows.insert(key, record.values());
        Ok(())
    }

    pub fn build(self) -> DailyPanel {
        let mut firms: Vec<FirmId> = self.rows.keys().map(|(f, _)| f.clone()).collect();
        firms.dedup();
        let mut dates: Vec<NaiveDate> = self.rows.keys().map(|(_, d)| *d).collect();
        dates.sort();
        dates.dedup();
        let mut cells = vec![None; firms.len() * dates.len()];
        for ((f, d), v) in self.rows {
            let fi = firms.binary_search(&f).expect("firm indexed");
            let di = dates.binary_search(&d).expect("date indexed");
            cells[fi * dates.len() + di] = Some(v);
        }
        DailyPanel { firms, dates, cells }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn rec(firm: &str, day: u32, rv: f64) -> DailyRecord {
        DailyRecord {
            firm_id: FirmId::from(firm),
            date: NaiveDate::from_ymd_opt(2020, 1, day).unwrap(),
            ret_full_day: 0.001,
            rv_day: rv,
            rv_355: rv * 0.98,
            ret_355: 0.0009,
        }
    }

    #[test]
    fn unbalanced_panel_indexes_firms_and_dates() {
        let panel = DailyPanel::from_records(vec![
            rec("B", 3, 1e-4),
            rec("A", 2, 2e-4),
            rec("A", 3, 3e-4),
            rec("B", 6, 4e-4),
        ])
        .unwrap();
        assert_eq!(panel.n_firms(), 2);
        assert_eq!(panel.n_dates(), 3);
        assert_eq!(panel.len(), 4);
        assert!(panel.get(1, 0).is_none());
        assert_eq!(panel.record(&FirmId::from("A"), rec("A", 3, 0.0).date).unwrap().rv_day, 3e-4);
        let firms: Vec<_> = panel.records().map(|r| r.firm_id.to_string()).collect();
        assert_eq!(firms, vec!["A", "A", "B", "B"]);
    }

    #[test]
    fn duplicate_key_is_rejected_with_row() {
        let err = DailyPanel::from_records(vec![rec("A", 2, 1e-4), rec("A", 2, 2e-4)]).unwrap_err();
        assert!(matches!(err, Error::Format { row: 2, .. }), "{err}");
    }

    #[test]
    fn negative_variance_is_rejected() {
        assert!(DailyPanel::from_records(vec![rec("A", 2, -1e-4)]).is_err());
    }
}
