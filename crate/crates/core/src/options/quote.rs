//! Option quote records, the quotes CSV schema and midpoint pricing.

use std::path::Path;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::panel_data::FirmId;

pub const QUOTES_HEADER: [&str; 12] = [
    "firm_id", "date", "expiry", "strike", "cp_flag", "bid", "ask", "delta", "iv", "stock_bid", "stock_ask",
    "stock_close",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum OptionRight {
    Call,
    Put,
}

impl OptionRight {
    pub fn flag(self) -> &'static str {
        match self {
            OptionRight::Call => "C",
            OptionRight::Put => "P",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.trim() {
            "C" | "c" | "call" => Some(OptionRight::Call),
            "P" | "p" | "put" => Some(OptionRight::Put),
            _ => None,
        }
    }
}

/// End-of-day quote on one option contract.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptionQuote {
    pub firm_id: FirmId,
    pub date: NaiveDate,
    pub expiry: NaiveDate,
    pub strike: f64,
    pub cp_flag: OptionRight,
    pub bid: f64,
    pub ask: f64,
    pub delta: f64,
    /// Annualized implied volatility.
    pub iv: f64,
    pub underlying_bid: f64,
    pub underlying_ask: f64,
    pub underlying_close: f64,
}

/// Identifies one contract across dates.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ContractKey {
    pub firm_id: FirmId,
    pub expiry: NaiveDate,
    /// Strike in hundredths of a currency unit, so the key is hashable.
    pub strike_cents: i64,
    pub cp_flag: OptionRight,
}

impl OptionQuote {
    pub fn contract(&self) -> ContractKey {
        ContractKey {
            firm_id: self.firm_id.clone(),
            expiry: self.expiry,
            strike_cents: (self.strike * 100.0).round() as i64,
            cp_flag: self.cp_flag,
        }
    }

    pub fn mid(&self) -> Result<f64> {
        midpoint_price(self.bid, self.ask)
    }
}

/// Average of bid and ask.
pub fn midpoint_price(bid: f64, ask: f64) -> Result<f64> {
    if bid > ask {
        return Err(Error::CrossedQuote { bid, ask });
    }
    if bid < 0.0 || !bid.is_finite() || !ask.is_finite() {
        return Err(Error::Domain(format!("invalid quote ({bid}, {ask})")));
    }
    Ok(0.5 * (bid + ask))
}

pub fn load_quotes_csv(path: impl AsRef<Path>) -> Result<Vec<OptionQuote>> {
    use crate::panel_data::io::{date_field, field, open_reader};
    let mut rdr = open_reader(path.as_ref(), &QUOTES_HEADER)?;
    let mut out: Vec<OptionQuote> = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let row = i + 2;
        let rec = rec?;
        let firm_raw = rec.get(0).unwrap_or("").trim();
        if firm_raw.is_empty() {
            return Err(Error::format(row, "empty firm_id"));
        }
        let firm_id = match out.last() {
            Some(q) if q.firm_id.as_str() == firm_raw => q.firm_id.clone(),
            _ => FirmId::from(firm_raw),
        };
        let cp = rec.get(4).unwrap_or("");
        let q = OptionQuote {
            firm_id,
            date: date_field(&rec, 1, row)?,
            expiry: date_field(&rec, 2, row)?,
            strike: field(&rec, 3, "strike", row)?,
            cp_flag: OptionRight::parse(cp).ok_or_else(|| Error::format(row, format!("malformed cp_flag '{cp}'")))?,
            bid: field(&rec, 5, "bid", row)?,
            ask: field(&rec, 6, "ask", row)?,
            delta: field(&rec, 7, "delta", row)?,
            iv: field(&rec, 8, "iv", row)?,
            underlying_bid: field(&rec, 9, "stock_bid", row)?,
            underlying_ask: field(&rec, 10, "stock_ask", row)?,
            underlying_close: field(&rec, 11, "stock_close", row)?,
        };
        let nums = [q.strike, q.bid, q.ask, q.delta, q.iv, q.underlying_bid, q.underlying_ask, q.underlying_close];
        if nums.iter().any(|v| !v.is_finite()) {
            return Err(Error::format(row, "non-finite field"));
        }
        if q.expiry <= q.date {
            return Err(Error::format(row, "expiry must be after the quote date"));
        }
        out.push(q);
    }
    Ok(out)
}

pub fn write_quotes_csv(quotes: &[OptionQuote], path: impl AsRef<Path>) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(QUOTES_HEADER)?;
    for q in quotes {
        w.write_record([
            q.firm_id.to_string(),
            q.date.to_string(),
            q.expiry.to_string(),
            q.strike.to_string(),
            q.cp_flag.flag().to_string(),
            q.bid.to_string(),
            q.ask.to_string(),
            q.delta.to_string(),
            q.iv.to_string(),
            q.underlying_bid.to_string(),
            q.underlying_ask.to_string(),
            q.underlying_close.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
