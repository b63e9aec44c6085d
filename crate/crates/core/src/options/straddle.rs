//! At-the-money delta-neutral straddles and their daily returns.

use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use chrono::{Datelike, NaiveDate, Weekday};

use super::filters::{apply_option_filters, flag_reversals, RejectReason};
use super::quote::{ContractKey, OptionQuote, OptionRight};
use crate::error::{Error, Result};
use crate::panel_data::io::{date_field, field, open_reader};
use crate::panel_data::FirmId;

/// Options closer to expiry than this many trading days are not used.
pub const MIN_TRADING_DAYS_TO_EXPIRY: usize = 10;

/// Weekdays in `(from, to]`.
pub fn trading_days_between(from: NaiveDate, to: NaiveDate) -> usize {
    from.iter_days()
        .skip(1)
        .take_while(|d| *d <= to)
        .filter(|d| !matches!(d.weekday(), Weekday::Sat | Weekday::Sun))
        .count()
}

/// Why no straddle was formed for a firm-date.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum StraddleSkip {
    NoQualifyingExpiry,
    NoCall,
    NoMatchingPut,
    DegenerateDelta,
    MissingNextQuote,
}

impl StraddleSkip {
    pub fn code(self) -> &'static str {
        match self {
            StraddleSkip::NoQualifyingExpiry => "NO_EXPIRY",
            StraddleSkip::NoCall => "NO_CALL",
            StraddleSkip::NoMatchingPut => "NO_MATCHING_PUT",
            StraddleSkip::DegenerateDelta => "DEGENERATE_DELTA",
            StraddleSkip::MissingNextQuote => "MISSING_NEXT_QUOTE",
        }
    }
}

/// Picks the call with delta nearest 0.5 (lower strike on ties) in the
/// shortest expiry with at least ten trading days left, and the put with the
/// same strike and expiry. `quotes` are one firm's filtered quotes for one date.
pub fn select_atm_straddle(quotes: &[OptionQuote]) -> std::result::Result<(OptionQuote, OptionQuote), StraddleSkip> {
    let expiry = quotes
        .iter()
        .filter(|q| trading_days_between(q.date, q.expiry) >= MIN_TRADING_DAYS_TO_EXPIRY)
        .map(|q| q.expiry)
        .min()
        .ok_or(StraddleSkip::NoQualifyingExpiry)?;
    // Distances within 1e-12 count as ties.
    let call = quotes
        .iter()
        .filter(|q| q.expiry == expiry && q.cp_flag == OptionRight::Call && q.delta.is_finite())
        .fold(None::<&OptionQuote>, |best, q| match best {
            Some(b) => {
                let (db, dq) = ((b.delta - 0.5).abs(), (q.delta - 0.5).abs());
                if dq < db - 1e-12 || ((dq - db).abs() <= 1e-12 && q.strike < b.strike) {
                    Some(q)
                } else {
                    Some(b)
                }
            }
            None => Some(q),
        })
        .ok_or(StraddleSkip::NoCall)?;
    let key = call.contract();
    let put = quotes
        .iter()
        .find(|q| {
            q.cp_flag == OptionRight::Put && q.expiry == expiry && q.contract().strike_cents == key.strike_cents
        })
        .ok_or(StraddleSkip::NoMatchingPut)?;
    Ok((call.clone(), put.clone()))
}

/// One call plus `n_put` puts, sized so the position has zero delta.
#[derive(Debug, Clone, PartialEq)]
pub struct StraddlePosition {
    pub firm_id: FirmId,
    pub formation_date: NaiveDate,
    pub expiry: NaiveDate,
    pub strike: f64,
    pub n_call: f64,
    pub n_put: f64,
    pub w_call: f64,
    pub w_put: f64,
    pub call_mid: f64,
    pub put_mid: f64,
    pub call_delta: f64,
    pub put_delta: f64,
    /// Annualized implied volatility of the position.
    pub straddle_iv: f64,
}

impl StraddlePosition {
    pub fn call_key(&self) -> ContractKey {
        self.key(OptionRight::Call)
    }

    pub fn put_key(&self) -> ContractKey {
        self.key(OptionRight::Put)
    }

    fn key(&self, cp_flag: OptionRight) -> ContractKey {
        ContractKey {
            firm_id: self.firm_id.clone(),
            expiry: self.expiry,
            strike_cents: (self.strike * 100.0).round() as i64,
            cp_flag,
        }
    }

    pub fn portfolio_delta(&self) -> f64 {
        self.n_call * self.call_delta + self.n_put * self.put_delta
    }
}

/// `n_put = -delta_call / delta_put`, value `V = C + n_put * P`, weights
/// `C / V` and `n_put * P / V`. The straddle IV uses the same weights.
pub fn delta_neutral_weights(call: &OptionQuote, put: &OptionQuote) -> Result<StraddlePosition> {
    if call.cp_flag != OptionRight::Call || put.cp_flag != OptionRight::Put {
        return Err(Error::Data("straddle needs one call and one put".into()));
    }
    if !(put.delta < 0.0) || !(call.delta > 0.0) {
        return Err(Error::DegenerateDelta(format!("call delta {} and put delta {}", call.delta, put.delta)));
    }
    let (c, p) = (call.mid()?, put.mid()?);
    if !(c > 0.0 && p > 0.0) {
        return Err(Error::Domain(format!("non-positive midpoint (call {c}, put {p})")));
    }
    let n_put = -call.delta / put.delta;
    let v = c + n_put * p;
    let mut pos = StraddlePosition {
        firm_id: call.firm_id.clone(),
        formation_date: call.date,
        expiry: call.expiry,
        strike: call.strike,
        n_call: 1.0,
        n_put,
        w_call: c / v,
        w_put: n_put * p / v,
        call_mid: c,
        put_mid: p,
        call_delta: call.delta,
        put_delta: put.delta,
        straddle_iv: f64::NAN,
    };
    pos.straddle_iv = straddle_implied_vol(&pos, call.iv, put.iv)?;
    Ok(pos)
}

pub fn straddle_implied_vol(position: &StraddlePosition, call_iv: f64, put_iv: f64) -> Result<f64> {
    if !(call_iv > 0.0 && put_iv > 0.0) || !call_iv.is_finite() || !put_iv.is_finite() {
        return Err(Error::Data(format!("implied vols must be positive, got {call_iv} and {put_iv}")));
    }
    Ok(position.w_call * call_iv + position.w_put * put_iv)
}

/// Simple return of each leg between two midpoints.
pub fn leg_return(mid_start: f64, mid_end: f64) -> f64 {
    mid_end / mid_start - 1.0
}

/// `w_call * R_call + w_put * R_put - rf`, where `rf` is the risk-free rate
/// over the holding period.
pub fn straddle_excess_return(position: &StraddlePosition, call_return: f64, put_return: f64, rf: f64) -> f64 {
    position.w_call * call_return + position.w_put * put_return - rf
}

/// Straddle excess return from next-day midpoints.
pub fn straddle_return(position: &StraddlePosition, call_mid_next: f64, put_mid_next: f64, rf: f64) -> f64 {
    straddle_excess_return(
        position,
        leg_return(position.call_mid, call_mid_next),
        leg_return(position.put_mid, put_mid_next),
        rf,
    )
}

/// A per-calendar-day rate accrued from `from` to `to`.
pub fn calendar_prorated_rf(rf_daily: f64, from: NaiveDate, to: NaiveDate) -> f64 {
    rf_daily * (to - from).num_days() as f64
}

/// Excess return of an option hedged with `-delta` shares: the portfolio
/// `V = O - delta * S` earns `(O/V)(R_O - rf) - (delta*S/V)(R_S - rf)`.
pub fn delta_hedged_excess_return(
    option_mid_t0: f64,
    option_mid_t1: f64,
    delta_t0: f64,
    spot_t0: f64,
    spot_t1: f64,
    rf: f64,
) -> Result<f64> {
    let hedge = delta_t0 * spot_t0;
    let v = option_mid_t0 - hedge;
    if v.abs() <= f64::EPSILON * option_mid_t0.abs().max(hedge.abs()) {
        return Err(Error::DegeneratePortfolio("hedged position has zero value".into()));
    }
    if !(option_mid_t0 > 0.0 && spot_t0 > 0.0) {
        return Err(Error::Domain("option and spot prices must be positive".into()));
    }
    let r_o = option_mid_t1 / option_mid_t0 - 1.0;
    let r_s = spot_t1 / spot_t0 - 1.0;
    Ok(option_mid_t0 / v * (r_o - rf) - hedge / v * (r_s - rf))
}

/// One day's holding-period result for a straddle formed at the close.
#[derive(Debug, Clone, PartialEq)]
pub struct StraddleReturn {
    pub position: StraddlePosition,
    pub evaluation_date: NaiveDate,
    pub call_return: f64,
    pub put_return: f64,
    pub excess_return: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct StraddleBook {
    /// Ordered by (formation date, firm).
    pub returns: Vec<StraddleReturn>,
    pub rejected_quotes: BTreeMap<RejectReason, usize>,
    pub skipped: BTreeMap<StraddleSkip, usize>,
    /// Returns dropped by the reversal rule.
    pub reversals: usize,
}

/// Forms a straddle for every firm-date with usable quotes and holds it to
/// the next quote date. Filters apply at both ends of the holding period;
/// `rf_daily` accrues per calendar day.
pub fn build_straddle_returns(quotes: &[OptionQuote], rf_daily: f64) -> StraddleBook {
    let mut book = StraddleBook::default();
    let mut groups: BTreeMap<(NaiveDate, FirmId), Vec<OptionQuote>> = BTreeMap::new();
    for q in quotes {
        groups.entry((q.date, q.firm_id.clone())).or_default().push(q.clone());
    }
    let mut kept: BTreeMap<(NaiveDate, FirmId), Vec<OptionQuote>> = BTreeMap::new();
    for (key, qs) in groups {
        let out = apply_option_filters(&qs);
        for (_, r) in &out.rejected {
            *book.rejected_quotes.entry(*r).or_default() += 1;
        }
        kept.insert(key, out.kept);
    }
    let calendar: Vec<NaiveDate> = {
        let mut d: Vec<NaiveDate> = kept.keys().map(|k| k.0).collect();
        d.dedup();
        d
    };
    let next_date: HashMap<NaiveDate, NaiveDate> = calendar.windows(2).map(|w| (w[0], w[1])).collect();
    let mut formed = Vec::new();
    for ((date, firm), qs) in &kept {
        let Some(&next) = next_date.get(date) else { continue };
        let pos = match select_atm_straddle(qs) {
            Ok((c, p)) => match delta_neutral_weights(&c, &p) {
                Ok(pos) => pos,
                Err(_) => {
                    *book.skipped.entry(StraddleSkip::DegenerateDelta).or_default() += 1;
                    continue;
                }
            },
            Err(s) => {
                *book.skipped.entry(s).or_default() += 1;
                continue;
            }
        };
        let later = kept.get(&(next, firm.clone())).map(Vec::as_slice).unwrap_or(&[]);
        let mid = |key: ContractKey| later.iter().find(|q| q.contract() == key).and_then(|q| q.mid().ok());
        let (Some(c1), Some(p1)) = (mid(pos.call_key()), mid(pos.put_key())) else {
            *book.skipped.entry(StraddleSkip::MissingNextQuote).or_default() += 1;
            continue;
        };
        let (rc, rp) = (leg_return(pos.call_mid, c1), leg_return(pos.put_mid, p1));
        let rf = calendar_prorated_rf(rf_daily, *date, next);
        formed.push(StraddleReturn {
            excess_return: straddle_excess_return(&pos, rc, rp, rf),
            position: pos,
            evaluation_date: next,
            call_return: rc,
            put_return: rp,
        });
    }
    // Reversals are judged on each firm's consecutive leg returns.
    let day_index: HashMap<NaiveDate, usize> = calendar.iter().enumerate().map(|(i, d)| (*d, i)).collect();
    let mut by_firm: BTreeMap<FirmId, Vec<usize>> = BTreeMap::new();
    for (i, r) in formed.iter().enumerate() {
        by_firm.entry(r.position.firm_id.clone()).or_default().push(i);
    }
    let mut drop = vec![false; formed.len()];
    for idx in by_firm.values() {
        let first = day_index[&formed[idx[0]].position.formation_date];
        let last = day_index[&formed[*idx.last().expect("non-empty")].position.formation_date];
        let mut slots: Vec<Option<usize>> = vec![None; last - first + 1];
        for &i in idx {
            slots[day_index[&formed[i].position.formation_date] - first] = Some(i);
        }
        for leg in [|r: &StraddleReturn| r.call_return, |r: &StraddleReturn| r.put_return] {
            let series: Vec<Option<f64>> = slots.iter().map(|s| s.map(|i| leg(&formed[i]))).collect();
            for (slot, flagged) in slots.iter().zip(flag_reversals(&series)) {
                if let (Some(i), true) = (slot, flagged) {
                    drop[*i] = true;
                }
            }
        }
    }
    book.reversals = drop.iter().filter(|d| **d).count();
    book.returns = formed.into_iter().zip(drop).filter(|(_, d)| !d).map(|(r, _)| r).collect();
    book
}

pub const STRADDLE_HEADER: [&str; 16] = [
    "firm_id",
    "formation_date",
    "evaluation_date",
    "expiry",
    "strike",
    "n_put",
    "w_call",
    "w_put",
    "call_mid",
    "put_mid",
    "call_delta",
    "put_delta",
    "straddle_iv",
    "call_return",
    "put_return",
    "excess_return",
];

pub fn write_straddle_returns_csv(returns: &[StraddleReturn], path: impl AsRef<Path>) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(STRADDLE_HEADER)?;
    for r in returns {
        let p = &r.position;
        w.write_record([
            p.firm_id.to_string(),
            p.formation_date.to_string(),
            r.evaluation_date.to_string(),
            p.expiry.to_string(),
            p.strike.to_string(),
            p.n_put.to_string(),
            p.w_call.to_string(),
            p.w_put.to_string(),
            p.call_mid.to_string(),
            p.put_mid.to_string(),
            p.call_delta.to_string(),
            p.put_delta.to_string(),
            p.straddle_iv.to_string(),
            r.call_return.to_string(),
            r.put_return.to_string(),
            r.excess_return.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn load_straddle_returns_csv(path: impl AsRef<Path>) -> Result<Vec<StraddleReturn>> {
    let mut rdr = open_reader(path.as_ref(), &STRADDLE_HEADER)?;
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let row = i + 2;
        let rec = rec.map_err(|e| Error::format(row, e.to_string()))?;
        let num = |idx: usize| field::<f64>(&rec, idx, STRADDLE_HEADER[idx], row);
        let position = StraddlePosition {
            firm_id: FirmId::from(rec[0].to_string()),
            formation_date: date_field(&rec, 1, row)?,
            expiry: date_field(&rec, 3, row)?,
            strike: num(4)?,
            n_call: 1.0,
            n_put: num(5)?,
            w_call: num(6)?,
            w_put: num(7)?,
            call_mid: num(8)?,
            put_mid: num(9)?,
            call_delta: num(10)?,
            put_delta: num(11)?,
            straddle_iv: num(12)?,
        };
        let evaluation_date = date_field(&rec, 2, row)?;
        if evaluation_date <= position.formation_date {
            return Err(Error::format(row, "evaluation_date must follow formation_date"));
        }
        out.push(StraddleReturn { position, evaluation_date, call_return: num(13)?, put_return: num(14)?, excess_return: num(15)? });
    }
    Ok(out)
}
