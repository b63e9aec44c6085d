//! Out-of-sample forecast collections and their CSV schema.

use std::collections::BTreeMap;
use std::path::Path;

use chrono::NaiveDate;

use crate::error::{Error, Result};
use crate::panel_data::FirmId;
use crate::stamp::FiltrationStamp;
use crate::VARIANCE_FLOOR;

pub const FORECAST_HEADER: [&str; 5] = ["model", "firm_id", "target_date", "forecast_var", "made_at_date"];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ForecastEntry {
    pub value: f64,
    pub made_at: FiltrationStamp,
}

/// Forecasts keyed by (model, firm, target date), iterated in that order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ForecastSet {
    pub entries: BTreeMap<(String, FirmId, NaiveDate), ForecastEntry>,
}

impl ForecastSet {
    pub fn new() -> Self {
        Self::default()
    }

    /// Inserts a forecast, enforcing the floor and that it was made before
    /// the target date.
    pub fn insert(&mut self, model: &str, firm: FirmId, target: NaiveDate, value: f64, made_at: FiltrationStamp) -> Result<()> {
        if made_at.date >= target {
            return Err(Error::Leakage(format!("forecast for {target} stamped {made_at}")));
        }
        if !value.is_finite() {
            return Err(Error::Data(format!("non-finite forecast for {firm} on {target}")));
        }
        self.entries
            .insert((model.to_string(), firm, target), ForecastEntry { value: value.max(VARIANCE_FLOOR), made_at });
        Ok(())
    }

    pub fn get(&self, model: &str, firm: &FirmId, target: NaiveDate) -> Option<&ForecastEntry> {
        self.entries.get(&(model.to_string(), firm.clone(), target))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn models(&self) -> Vec<String> {
        let mut m: Vec<String> = self.entries.keys().map(|k| k.0.clone()).collect();
        m.dedup();
        m
    }

    /// Entries of one model.
    pub fn model_entries<'a>(&'a self, model: &'a str) -> impl Iterator<Item = (&'a FirmId, NaiveDate, &'a ForecastEntry)> + 'a {
        self.entries
            .iter()
            .filter(move |((m, _, _), _)| m == model)
            .map(|((_, f, d), e)| (f, *d, e))
    }
}

pub fn write_forecasts_csv(set: &ForecastSet, path: impl AsRef<Path>) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(FORECAST_HEADER)?;
    for ((model, firm, target), e) in &set.entries {
        w.write_record([model.clone(), firm.to_string(), target.to_string(), e.value.to_string(), e.made_at.date.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

pub fn load_forecasts_csv(path: impl AsRef<Path>) -> Result<ForecastSet> {
    use crate::panel_data::io::{date_field, field, open_reader};
    let mut rdr = open_reader(path.as_ref(), &FORECAST_HEADER)?;
    let mut set = ForecastSet::new();
    let mut firms: BTreeMap<String, FirmId> = BTreeMap::new();
    for (i, rec) in rdr.records().enumerate() {
        let row = i + 2;
        let rec = rec?;
        let model = rec.get(0).unwrap_or("").trim().to_string();
        let firm_raw = rec.get(1).unwrap_or("").trim();
        if model.is_empty() || firm_raw.is_empty() {
            return Err(Error::format(row, "empty model or firm_id"));
        }
        let firm = firms.entry(firm_raw.to_string()).or_insert_with(|| FirmId::from(firm_raw)).clone();
        let target = date_field(&rec, 2, row)?;
        let value: f64 = field(&rec, 3, "forecast_var", row)?;
        let made = date_field(&rec, 4, row)?;
        if !(value > 0.0 && value.is_finite()) {
            return Err(Error::format(row, "forecast_var must be positive"));
        }
        if set.entries.contains_key(&(model.clone(), firm.clone(), target)) {
            return Err(Error::format(row, "duplicate (model, firm_id, target_date)"));
        }
        set.insert(&model, firm, target, value, FiltrationStamp::predictor(made))
            .map_err(|e| Error::format(row, e.to_string()))?;
    }
    Ok(set)
}

/// Writes `model,weight` rows.
pub fn write_combination_weights_csv(weights: &[(String, f64)], path: impl AsRef<Path>) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["model", "weight"])?;
    for (m, v) in weights {
        w.write_record([m.clone(), v.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floor_and_stamp_rules() {
        let d = NaiveDate::from_ymd_opt(2020, 2, 3).unwrap();
        let next = d.succ_opt().unwrap();
        let mut set = ForecastSet::new();
        set.insert("har", FirmId::from("A"), next, -1.0, FiltrationStamp::predictor(d)).unwrap();
        assert_eq!(set.get("har", &FirmId::from("A"), next).unwrap().value, VARIANCE_FLOOR);
        assert!(matches!(
            set.insert("har", FirmId::from("A"), d, 1e-4, FiltrationStamp::predictor(d)),
            Err(Error::Leakage(_))
        ));
    }

    #[test]
    fn csv_round_trip() {
        let d = NaiveDate::from_ymd_opt(2020, 2, 3).unwrap();
        let mut set = ForecastSet::new();
        for (m, f, v) in [("har", "A", 1.5e-4), ("har", "B", 2.25e-4), ("lasso", "A", 3.125e-4)] {
            set.insert(m, FirmId::from(f), d.succ_opt().unwrap(), v, FiltrationStamp::predictor(d)).unwrap();
        }
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("f.csv");
        write_forecasts_csv(&set, &p).unwrap();
        assert_eq!(load_forecasts_csv(&p).unwrap(), set);
        assert_eq!(set.models(), vec!["har".to_string(), "lasso".to_string()]);
    }
}
