//! Fixed-interval sampling of cleaned prints and daily record construction.

use std::collections::BTreeMap;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use super::io::DailyRange;
use super::panel::{DailyPanel, DailyRecord, FirmId};
use super::prints::{filter_intraday_prints, IntradayPrint, PREDICTOR_CUTOFF_SECS, SESSION_CLOSE_SECS, SESSION_OPEN_SECS};
use super::rv::{compute_log_returns, realized_variance};
use crate::error::{Error, Result};

/// Interval closing prices for one firm-date, starting with the 09:30 close.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntradayBarSeries {
    pub firm_id: FirmId,
    pub date: NaiveDate,
    pub prices: Vec<f64>,
    pub delta_minutes: u32,
}

impl IntradayBarSeries {
    /// Index of the last close at or before 15:55.
    pub fn predictor_cutoff_index(&self) -> usize {
        ((PREDICTOR_CUTOFF_SECS - SESSION_OPEN_SECS) / (self.delta_minutes * 60)) as usize
    }
}

fn check_delta(delta_minutes: u32) -> Result<u32> {
    let session = (SESSION_CLOSE_SECS - SESSION_OPEN_SECS) / 60;
    if delta_minutes == 0 || session % delta_minutes != 0 {
        return Err(Error::config(format!(
            "sampling interval {delta_minutes} min must divide the {session}-minute session"
        )));
    }
    Ok(session / delta_minutes)
}

/// Samples cleaned, time-sorted prints on the `delta_minutes` grid from 09:30
/// to 16:00. Each close is the last print at or before the interval end; an
/// empty interval repeats the previous close. Grid points before the first
/// print take the first print's price.
pub fn build_bar_series(
    firm_id: FirmId,
    date: NaiveDate,
    prints: &[IntradayPrint],
    delta_minutes: u32,
) -> Result<IntradayBarSeries> {
    let n_intervals = check_delta(delta_minutes)?;
    let first = prints
        .first()
        .ok_or_else(|| Error::insufficient(format!("no usable prints for {firm_id} on {date}")))?;
    let mut prices = Vec::with_capacity(n_intervals as usize + 1);
    let mut last = first.price;
    let mut next = 0;
    for k in 0..=n_intervals {
        let boundary = SESSION_OPEN_SECS + k * delta_minutes * 60;
        while next < prints.len() && prints[next].time <= boundary {
            last = prints[next].price;
            next += 1;
        }
        prices.push(last);
    }
    Ok(IntradayBarSeries { firm_id, date, prices, delta_minutes })
}

/// Daily record from a full grid of interval closes (09:30 through 16:00).
///
/// `prev_close` is the previous trading day's 16:00 close; without it the
/// full-day return falls back to open-to-close.
pub fn daily_record_from_closes(bars: &IntradayBarSeries, prev_close: Option<f64>) -> Result<DailyRecord> {
    let n_intervals = check_delta(bars.delta_minutes)? as usize;
    if bars.prices.len() != n_intervals + 1 {
        return Err(Error::Data(format!(
            "expected {} interval closes, got {}",
            n_intervals + 1,
            bars.prices.len()
        )));
    }
    let cut = bars.predictor_cutoff_index();
    let returns = compute_log_returns(&bars.prices)?;
    let rv_day = realized_variance(&returns)?;
    let rv_355 = realized_variance(&returns[..cut])?;
    let open = bars.prices[0];
    let close = bars.prices[n_intervals];
    let ret_355 = (bars.prices[cut] / open).ln();
    let base = match prev_close {
        Some(p) if p > 0.0 => p,
        Some(p) => return Err(Error::Domain(format!("non-positive previous close {p}"))),
        None => open,
    };
    Ok(DailyRecord {
        firm_id: bars.firm_id.clone(),
        date: bars.date,
        ret_full_day: (close / base).ln(),
        rv_day,
        rv_355,
        ret_355,
    })
}

/// Cleans one firm-date of raw prints, samples it and builds the daily record.
pub fn daily_record_from_prints(
    prints: &[IntradayPrint],
    daily_high: f64,
    daily_low: f64,
    prev_close: Option<f64>,
    delta_minutes: u32,
) -> Result<(DailyRecord, IntradayBarSeries)> {
    let first = prints.first().ok_or_else(|| Error::insufficient("no prints"))?;
    let (firm, date) = (first.firm_id.clone(), first.date);
    let clean = filter_intraday_prints(prints, daily_high, daily_low);
    let bars = build_bar_series(firm, date, &clean, delta_minutes)?;
    let record = daily_record_from_closes(&bars, prev_close)?;
    Ok((record, bars))
}

/// Result of rebuilding a daily panel from raw prints.
#[derive(Debug, Clone, PartialEq)]
pub struct PanelBuild {
    pub panel: DailyPanel,
    /// Firm-dates that produced no record, with the reason.
    pub failures: Vec<(FirmId, NaiveDate, String)>,
}

/// Builds the daily panel from raw prints. Each firm-date is cleaned against
/// its daily range (or, when the range is missing, the range of its own
/// prints) and sampled every `delta_minutes`. The previous close is the
/// firm's last close on an earlier date with a record.
pub fn panel_from_prints(
    prints: &[IntradayPrint],
    ranges: &BTreeMap<(FirmId, NaiveDate), DailyRange>,
    delta_minutes: u32,
) -> Result<PanelBuild> {
    let mut groups: BTreeMap<(FirmId, NaiveDate), Vec<IntradayPrint>> = BTreeMap::new();
    for p in prints {
        groups.entry((p.firm_id.clone(), p.date)).or_default().push(p.clone());
    }
    let mut builder = DailyPanel::builder();
    let mut failures = Vec::new();
    let mut last_close: Option<(FirmId, f64)> = None;
    for ((firm, date), mut day) in groups {
        day.sort_by_key(|p| p.time);
        let (high, low) = match ranges.get(&(firm.clone(), date)) {
            Some(r) => (r.high, r.low),
            None => day.iter().fold((f64::NEG_INFINITY, f64::INFINITY), |(h, l), p| (h.max(p.price), l.min(p.price))),
        };
        let prev = last_close.as_ref().filter(|(f, _)| *f == firm).map(|(_, c)| *c);
        match daily_record_from_prints(&day, high, low, prev, delta_minutes) {
            Ok((record, bars)) => {
                last_close = Some((firm, *bars.prices.last().expect("non-empty bars")));
                builder.insert(record)?;
            }
            Err(e) => failures.push((firm, date, e.to_string())),
        }
    }
    Ok(PanelBuild { panel: builder.build(), failures })
}
