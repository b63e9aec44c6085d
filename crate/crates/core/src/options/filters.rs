//! Liquidity, sanity and arbitrage-bound filters on option quotes.

use std::fmt;

use super::quote::{OptionQuote, OptionRight};

/// Reason a quote or a return was excluded.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum RejectReason {
    /// Bid above ask, or a spread wider than min(10, stock close).
    Reasonable,
    /// Midpoint below 0.1.
    MinPrice,
    /// Spread wider than half the midpoint.
    Spread,
    /// Call bid above the stock ask.
    ArbBound1,
    /// Call ask below exercise value at the stock bid.
    ArbBound2,
    /// Put bid above the strike.
    ArbBound3,
    /// Put ask below exercise value at the stock ask.
    ArbBound4,
    /// Return on or after an apparent price error.
    Reversal,
}

impl RejectReason {
    pub fn code(self) -> &'static str {
        match self {
            RejectReason::Reasonable => "REASONABLE",
            RejectReason::MinPrice => "MIN_PRICE",
            RejectReason::Spread => "SPREAD",
            RejectReason::ArbBound1 => "ARB_BOUND_1",
            RejectReason::ArbBound2 => "ARB_BOUND_2",
            RejectReason::ArbBound3 => "ARB_BOUND_3",
            RejectReason::ArbBound4 => "ARB_BOUND_4",
            RejectReason::Reversal => "REVERSAL",
        }
    }
}

impl fmt::Display for RejectReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

pub const MIN_OPTION_PRICE: f64 = 0.1;
pub const MAX_ABSOLUTE_SPREAD: f64 = 10.0;
/// Leg returns above this (2000%) or below [`REVERSAL_LOW`] are extreme.
pub const REVERSAL_HIGH: f64 = 20.0;
pub const REVERSAL_LOW: f64 = -0.95;

/// First filter a quote fails, checked in the order reasonable quotes,
/// minimum price, spread, then the four arbitrage bounds.
pub fn quote_rejection(q: &OptionQuote) -> Option<RejectReason> {
    let finite = [q.bid, q.ask, q.strike, q.underlying_bid, q.underlying_ask, q.underlying_close]
        .iter()
        .all(|v| v.is_finite());
    let spread = q.ask - q.bid;
    if !finite || q.bid < 0.0 || q.bid > q.ask || spread > MAX_ABSOLUTE_SPREAD.min(q.underlying_close) {
        return Some(RejectReason::Reasonable);
    }
    let mid = 0.5 * (q.bid + q.ask);
    if mid < MIN_OPTION_PRICE {
        return Some(RejectReason::MinPrice);
    }
    if spread > 0.5 * mid {
        return Some(RejectReason::Spread);
    }
    match q.cp_flag {
        OptionRight::Call if q.bid > q.underlying_ask => Some(RejectReason::ArbBound1),
        OptionRight::Call if q.ask < (q.underlying_bid - q.strike).max(0.0) => Some(RejectReason::ArbBound2),
        OptionRight::Put if q.bid > q.strike => Some(RejectReason::ArbBound3),
        OptionRight::Put if q.ask < (q.strike - q.underlying_ask).max(0.0) => Some(RejectReason::ArbBound4),
        _ => None,
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct FilterOutcome {
    pub kept: Vec<OptionQuote>,
    pub rejected: Vec<(OptionQuote, RejectReason)>,
}

/// Splits quotes into kept and rejected, preserving input order.
pub fn apply_option_filters(quotes: &[OptionQuote]) -> FilterOutcome {
    let mut out = FilterOutcome::default();
    for q in quotes {
        match quote_rejection(q) {
            None => out.kept.push(q.clone()),
            Some(r) => out.rejected.push((q.clone(), r)),
        }
    }
    out
}

fn extreme_high(r: f64) -> bool {
    r > REVERSAL_HIGH
}

fn extreme_low(r: f64) -> bool {
    r < REVERSAL_LOW
}

/// Marks reversals in a consecutive return series: an extreme return
/// followed by an extreme return of the opposite sign. Both the return on the
/// day of the apparent error and the one after are flagged.
pub fn flag_reversals(returns: &[Option<f64>]) -> Vec<bool> {
    let mut flagged = vec![false; returns.len()];
    for i in 0..returns.len().saturating_sub(1) {
        if let (Some(a), Some(b)) = (returns[i], returns[i + 1]) {
            if (extreme_high(a) && extreme_low(b)) || (extreme_low(a) && extreme_high(b)) {
                flagged[i] = true;
                flagged[i + 1] = true;
            }
        }
    }
    flagged
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::NaiveDate;

    fn quote(cp: OptionRight, bid: f64, ask: f64) -> OptionQuote {
        let d = NaiveDate::from_ymd_opt(2020, 3, 2).unwrap();
        OptionQuote {
            firm_id: "F1".into(),
            date: d,
            expiry: d + chrono::Days::new(30),
            strike: 50.0,
            cp_flag: cp,
            bid,
            ask,
            delta: if cp == OptionRight::Call { 0.5 } else { -0.5 },
            iv: 0.3,
            underlying_bid: 49.99,
            underlying_ask: 50.01,
            underlying_close: 50.0,
        }
    }

    #[test]
    fn rule_examples() {
        assert_eq!(quote_rejection(&quote(OptionRight::Call, 0.04, 0.06)), Some(RejectReason::MinPrice));
        assert_eq!(quote_rejection(&quote(OptionRight::Call, 1.0, 1.8)), Some(RejectReason::Spread));
        assert_eq!(quote_rejection(&quote(OptionRight::Call, 2.0, 1.0)), Some(RejectReason::Reasonable));
        assert_eq!(quote_rejection(&quote(OptionRight::Call, 2.0, 2.2)), None);
        let mut q = quote(OptionRight::Call, 55.0, 56.0);
        q.underlying_ask = 50.0;
        assert_eq!(quote_rejection(&q), Some(RejectReason::ArbBound1));
    }

    #[test]
    fn wide_absolute_spreads_are_unreasonable() {
        let mut q = quote(OptionRight::Call, 30.0, 41.0);
        q.underlying_close = 200.0;
        q.underlying_ask = 200.0;
        assert_eq!(quote_rejection(&q), Some(RejectReason::Reasonable));
        let mut q = quote(OptionRight::Call, 1.0, 1.5);
        q.underlying_close = 0.4;
        assert_eq!(quote_rejection(&q), Some(RejectReason::Reasonable));
    }

    #[test]
    fn remaining_arbitrage_bounds() {
        let mut q = quote(OptionRight::Call, 4.0, 4.5);
        q.strike = 40.0;
        assert_eq!(quote_rejection(&q), Some(RejectReason::ArbBound2));
        let mut q = quote(OptionRight::Put, 4.0, 4.5);
        q.strike = 3.9;
        assert_eq!(quote_rejection(&q), Some(RejectReason::ArbBound3));
        let mut q = quote(OptionRight::Put, 4.0, 4.5);
        q.strike = 60.0;
        assert_eq!(quote_rejection(&q), Some(RejectReason::ArbBound4));
    }

    #[test]
    fn outcome_partitions_input() {
        let qs = vec![quote(OptionRight::Call, 2.0, 2.2), quote(OptionRight::Put, 0.01, 0.02), quote(OptionRight::Put, 2.0, 2.1)];
        let out = apply_option_filters(&qs);
        assert_eq!(out.kept.len(), 2);
        assert_eq!(out.rejected.len(), 1);
        assert_eq!(out.rejected[0].1.code(), "MIN_PRICE");
    }

    #[test]
    fn reversals_flag_both_days() {
        let r = [Some(0.1), Some(25.0), Some(-0.97), Some(0.2), Some(-0.99), Some(0.5)];
        assert_eq!(flag_reversals(&r), vec![false, true, true, false, false, false]);
        assert_eq!(flag_reversals(&[Some(25.0), None, Some(-0.97)]), vec![false; 3]);
    }
}
