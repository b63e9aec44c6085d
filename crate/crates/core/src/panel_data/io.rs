//! CSV schemas for prints, the daily panel, simulator truth and daily ranges.

use std::collections::BTreeMap;
use std::path::Path;
use std::str::FromStr;

use chrono::NaiveDate;

use super::panel::{DailyPanel, DailyPanelBuilder, DailyRecord, FirmId};
use super::prints::{format_time, parse_time, IntradayPrint};
use crate::error::{Error, Result};

pub const PANEL_HEADER: [&str; 6] = ["firm_id", "date", "ret_full_day", "rv_day", "rv_355", "ret_355"];
pub const PRINTS_HEADER: [&str; 6] = ["firm_id", "date", "time", "price", "size", "cond"];
pub const TRUTH_HEADER: [&str; 3] = ["firm_id", "date", "true_ivar"];
pub const RANGES_HEADER: [&str; 4] = ["firm_id", "date", "high", "low"];

/// True integrated variance keyed by firm and date.
pub type TruthMap = BTreeMap<(FirmId, NaiveDate), f64>;

/// Daily high/low used to bound intraday prints.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DailyRange {
    pub high: f64,
    pub low: f64,
}

pub(crate) fn open_reader(path: &Path, header: &[&str]) -> Result<csv::Reader<std::fs::File>> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_path(path)?;
    let found: Vec<String> = rdr.headers()?.iter().map(|h| h.trim().to_string()).collect();
    if found != header {
        return Err(Error::format(1, format!("expected header '{}', found '{}'", header.join(","), found.join(","))));
    }
    Ok(rdr)
}

pub(crate) fn field<T: FromStr>(rec: &csv::StringRecord, idx: usize, name: &str, row: usize) -> Result<T> {
    let raw = rec.get(idx).ok_or_else(|| Error::format(row, format!("missing field {name}")))?;
    raw.trim()
        .parse()
        .map_err(|_| Error::format(row, format!("malformed {name} '{raw}'")))
}

pub(crate) fn date_field(rec: &csv::StringRecord, idx: usize, row: usize) -> Result<NaiveDate> {
    let raw = rec.get(idx).ok_or_else(|| Error::format(row, "missing field date"))?;
    NaiveDate::parse_from_str(raw.trim(), "%Y-%m-%d").map_err(|_| Error::format(row, format!("malformed date '{raw}'")))
}

pub(crate) fn finite(v: f64, name: &str, row: usize) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::format(row, format!("{name} is not finite")))
    }
}

/// Loads the daily panel. Rows must be sorted by (firm_id, date) with no
/// duplicates; row numbers in errors count the header as row 1.
pub fn load_panel_csv(path: impl AsRef<Path>) -> Result<DailyPanel> {
    let mut rdr = open_reader(path.as_ref(), &PANEL_HEADER)?;
    let mut builder = DailyPanelBuilder::default();
    let mut prev: Option<(FirmId, NaiveDate)> = None;
    for (i, rec) in rdr.records().enumerate() {
        let row = i + 2;
        let rec = rec?;
        let firm = FirmId::from(rec.get(0).unwrap_or("").trim());
        if firm.as_str().is_empty() {
            return Err(Error::format(row, "empty firm_id"));
        }
        let date = date_field(&rec, 1, row)?;
        let record = DailyRecord {
            firm_id: firm.clone(),
            date,
            ret_full_day: finite(field(&rec, 2, "ret_full_day", row)?, "ret_full_day", row)?,
            rv_day: finite(field(&rec, 3, "rv_day", row)?, "rv_day", row)?,
            rv_355: finite(field(&rec, 4, "rv_355", row)?, "rv_355", row)?,
            ret_355: finite(field(&rec, 5, "ret_355", row)?, "ret_355", row)?,
        };
        let key = (firm, date);
        if let Some(p) = &prev {
            if *p == key {
                return Err(Error::format(row, format!("duplicate record for firm {} on {}", key.0, key.1)));
            }
            if *p > key {
                return Err(Error::format(row, "rows are not sorted by (firm_id, date)"));
            }
        }
        builder.insert_row(row, record)?;
        prev = Some(key);
    }
    Ok(builder.build())
}

pub fn write_panel_csv(panel: &DailyPanel, path: impl AsRef<Path>) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(PANEL_HEADER)?;
    for r in panel.records() {
        w.write_record([
            r.firm_id.to_string(),
            r.date.to_string(),
            r.ret_full_day.to_string(),
            r.rv_day.to_string(),
            r.rv_355.to_string(),
            r.ret_355.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Loads trade prints. Rows must be sorted by (firm_id, date, time); repeated
/// timestamps are allowed and are merged later by the cleaning rules.
pub fn load_prints_csv(path: impl AsRef<Path>) -> Result<Vec<IntradayPrint>> {
    let mut rdr = open_reader(path.as_ref(), &PRINTS_HEADER)?;
    let mut out: Vec<IntradayPrint> = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let row = i + 2;
        let rec = rec?;
        let firm_raw = rec.get(0).unwrap_or("").trim();
        if firm_raw.is_empty() {
            return Err(Error::format(row, "empty firm_id"));
        }
        let firm = match out.last() {
            Some(p) if p.firm_id.as_str() == firm_raw => p.firm_id.clone(),
            _ => FirmId::from(firm_raw),
        };
        let time_raw = rec.get(2).ok_or_else(|| Error::format(row, "missing field time"))?;
        let time = parse_time(time_raw).map_err(|e| Error::format(row, e.to_string()))?;
        let cond = rec.get(5).map(str::trim).filter(|c| !c.is_empty()).map(str::to_string);
        let p = IntradayPrint {
            firm_id: firm,
            date: date_field(&rec, 1, row)?,
            time,
            price: finite(field(&rec, 3, "price", row)?, "price", row)?,
            size: field(&rec, 4, "size", row)?,
            condition_code: cond,
        };
        if let Some(prev) = out.last() {
            if (&prev.firm_id, prev.date, prev.time) > (&p.firm_id, p.date, p.time) {
                return Err(Error::format(row, "rows are not sorted by (firm_id, date, time)"));
            }
        }
        out.push(p);
    }
    Ok(out)
}

pub fn write_prints_csv(prints: &[IntradayPrint], path: impl AsRef<Path>) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(PRINTS_HEADER)?;
    for p in prints {
        w.write_record([
            p.firm_id.to_string(),
            p.date.to_string(),
            format_time(p.time),
            p.price.to_string(),
            p.size.to_string(),
            p.condition_code.clone().unwrap_or_default(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn load_truth_csv(path: impl AsRef<Path>) -> Result<TruthMap> {
    let mut rdr = open_reader(path.as_ref(), &TRUTH_HEADER)?;
    let mut out = TruthMap::new();
    for (i, rec) in rdr.records().enumerate() {
        let row = i + 2;
        let rec = rec?;
        let firm = FirmId::from(rec.get(0).unwrap_or("").trim());
        let date = date_field(&rec, 1, row)?;
        let v: f64 = finite(field(&rec, 2, "true_ivar", row)?, "true_ivar", row)?;
        if v < 0.0 {
            return Err(Error::format(row, "negative true_ivar"));
        }
        if out.insert((firm, date), v).is_some() {
            return Err(Error::format(row, "duplicate (firm_id, date)"));
        }
    }
    Ok(out)
}

pub fn write_truth_csv(truth: &TruthMap, path: impl AsRef<Path>) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(TRUTH_HEADER)?;
    for ((f, d), v) in truth {
        w.write_record([f.to_string(), d.to_string(), v.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

pub fn load_ranges_csv(path: impl AsRef<Path>) -> Result<BTreeMap<(FirmId, NaiveDate), DailyRange>> {
    let mut rdr = open_reader(path.as_ref(), &RANGES_HEADER)?;
    let mut out = BTreeMap::new();
    for (i, rec) in rdr.records().enumerate() {
        let row = i + 2;
        let rec = rec?;
        let firm = FirmId::from(rec.get(0).unwrap_or("").trim());
        let date = date_field(&rec, 1, row)?;
        let high: f64 = field(&rec, 2, "high", row)?;
        let low: f64 = field(&rec, 3, "low", row)?;
        if !(low <= high) {
            return Err(Error::format(row, "low exceeds high"));
        }
        if out.insert((firm, date), DailyRange { high, low }).is_some() {
            return Err(Error::format(row, "duplicate (firm_id, date)"));
        }
    }
    Ok(out)
}

pub fn write_ranges_csv(ranges: &BTreeMap<(FirmId, NaiveDate), DailyRange>, path: impl AsRef<Path>) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(RANGES_HEADER)?;
    for ((f, d), r) in ranges {
        w.write_record([f.to_string(), d.to_string(), r.high.to_string(), r.low.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write(content: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(content.as_bytes()).unwrap();
        f
    }

    const HEADER: &str = "firm_id,date,ret_full_day,rv_day,rv_355,ret_355\n";

    #[test]
    fn well_formed_panel_loads() {
        let mut s = HEADER.to_string();
        for firm in ["AAA", "BBB"] {
            for day in 2..5 {
                s.push_str(&format!("{firm},2020-01-0{day},0.001,0.0002,0.00019,0.0009\n"));
            }
        }
        let f = write(&s);
        let panel = load_panel_csv(f.path()).unwrap();
        assert_eq!((panel.n_firms(), panel.n_dates()), (2, 3));
    }

    #[test]
    fn duplicate_row_is_reported_with_row_number() {
        let f = write(&format!(
            "{HEADER}AAA,2020-01-02,0.001,0.0002,0.00019,0.0009\nAAA,2020-01-02,0.001,0.0002,0.00019,0.0009\n"
        ));
        let err = load_panel_csv(f.path()).unwrap_err();
        assert!(matches!(err, Error::Format { row: 3, .. }), "{err}");
        assert!(err.to_string().contains("duplicate"));
    }

    #[test]
    fn negative_rv_is_a_format_error() {
        let f = write(&format!("{HEADER}AAA,2020-01-02,0.001,-0.0002,0.00019,0.0009\n"));
        assert!(matches!(load_panel_csv(f.path()), Err(Error::Format { row: 2, .. })));
    }

    #[test]
    fn malformed_and_unsorted_rows_are_rejected() {
        let f = write(&format!("{HEADER}AAA,2020-01-02,abc,0.0002,0.00019,0.0009\n"));
        assert!(matches!(load_panel_csv(f.path()), Err(Error::Format { row: 2, .. })));
        let f = write(&format!(
            "{HEADER}BBB,2020-01-02,0.001,0.0002,0.00019,0.0009\nAAA,2020-01-02,0.001,0.0002,0.00019,0.0009\n"
        ));
        let err = load_panel_csv(f.path()).unwrap_err();
        assert!(err.to_string().contains("sorted"), "{err}");
        let f = write("firm,date\n");
        assert!(matches!(load_panel_csv(f.path()), Err(Error::Format { row: 1, .. })));
    }

    #[test]
    fn prints_load_and_check_order() {
        let f = write(
            "firm_id,date,time,price,size,cond\nAAA,2020-01-02,09:30:00,10.0,100,\nAAA,2020-01-02,09:30:00,10.1,200,@F\nAAA,2020-01-02,09:35:00,10.2,100,T\n",
        );
        let prints = load_prints_csv(f.path()).unwrap();
        assert_eq!(prints.len(), 3);
        assert_eq!(prints[1].condition_code.as_deref(), Some("@F"));
        assert_eq!(prints[0].condition_code, None);
        let f = write("firm_id,date,time,price,size,cond\nAAA,2020-01-02,09:35:00,10.0,100,\nAAA,2020-01-02,09:30:00,10.1,200,\n");
        assert!(matches!(load_prints_csv(f.path()), Err(Error::Format { row: 3, .. })));
        let f = write("firm_id,date,time,price,size,cond\nAAA,2020-01-02,9h30,10.0,100,\n");
        assert!(matches!(load_prints_csv(f.path()), Err(Error::Format { row: 2, .. })));
    }
}
