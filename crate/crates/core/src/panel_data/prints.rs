//! Trade prints and the cleaning rules applied before interval sampling.

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use super::panel::FirmId;
use crate::error::{Error, Result};

/// 09:30:00 in seconds since midnight.
pub const SESSION_OPEN_SECS: u32 = 9 * 3600 + 30 * 60;
/// 16:00:00 in seconds since midnight.
pub const SESSION_CLOSE_SECS: u32 = 16 * 3600;
/// 15:55:00 in seconds since midnight; predictors are measured here.
pub const PREDICTOR_CUTOFF_SECS: u32 = 15 * 3600 + 55 * 60;

/// Sale-condition codes whose prints are discarded.
pub const EXCLUDED_CONDITIONS: [char; 9] = ['B', 'G', 'J', 'K', 'L', 'O', 'T', 'W', 'Z'];

/// Condition token that marks a corrected (cancelled or amended) order.
const CORRECTED_TOKEN: &str = "CORR";

/// A single transaction print.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntradayPrint {
    pub firm_id: FirmId,
    pub date: NaiveDate,
    /// Seconds since midnight, exchange local time.
    pub time: u32,
    pub price: f64,
    pub size: u64,
    /// Condition tokens separated by `;` or whitespace. Single-letter sale
    /// conditions may also be packed into one token (e.g. `"@FT"`).
    pub condition_code: Option<String>,
}

impl IntradayPrint {
    fn tokens(&self) -> impl Iterator<Item = &str> {
        self.condition_code
            .as_deref()
            .unwrap_or("")
            .split(|c: char| c == ';' || c.is_whitespace())
            .filter(|t| !t.is_empty())
    }

    /// True when the print is flagged as a corrected order.
    pub fn is_corrected(&self) -> bool {
        self.tokens().any(|t| t.eq_ignore_ascii_case(CORRECTED_TOKEN))
    }

    /// True when any sale-condition code is in the excluded set.
    pub fn has_excluded_condition(&self) -> bool {
        self.tokens()
            .filter(|t| !t.eq_ignore_ascii_case(CORRECTED_TOKEN))
            .any(|t| t.chars().any(|c| EXCLUDED_CONDITIONS.contains(&c.to_ascii_uppercase())))
    }
}

/// Parses `HH:MM:SS` into seconds since midnight.
pub fn parse_time(s: &str) -> Result<u32> {
    let mut parts = s.trim().split(':');
    let mut next = |name: &str, max: u32| -> Result<u32> {
        let v: u32 = parts
            .next()
            .ok_or_else(|| Error::Domain(format!("time '{s}' is missing {name}")))?
            .parse()
            .map_err(|_| Error::Domain(format!("time '{s}' has a malformed {name}")))?;
        if v > max {
            return Err(Error::Domain(format!("time '{s}' has {name} out of range")));
        }
        Ok(v)
    };
    let h = next("hours", 23)?;
    let m = next("minutes", 59)?;
    let sec = next("seconds", 59)?;
    if parts.next().is_some() {
        return Err(Error::Domain(format!("time '{s}' has trailing fields")));
    }
    Ok(h * 3600 + m * 60 + sec)
}

/// Formats seconds since midnight as `HH:MM:SS`.
pub fn format_time(secs: u32) -> String {
    format!("{:02}:{:02}:{:02}", secs / 3600, (secs / 60) % 60, secs % 60)
}

/// Median of the multiset in which each price appears `size` times.
///
/// For an even total size the two central elements are averaged.
pub fn size_weighted_median(prices_sizes: &[(f64, u64)]) -> Option<f64> {
    let total: u64 = prices_sizes.iter().map(|&(_, s)| s).sum();
    if total == 0 {
        return None;
    }
    let mut sorted: Vec<(f64, u64)> = prices_sizes.iter().copied().filter(|&(_, s)| s > 0).collect();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
    // 1-based ranks of the central element(s)
    let (lo_rank, hi_rank) = if total % 2 == 1 {
        (total / 2 + 1, total / 2 + 1)
    } else {
        (total / 2, total / 2 + 1)
    };
    let nth = |rank: u64| {
        let mut cum = 0u64;
        for &(p, s) in &sorted {
            cum += s;
            if cum >= rank {
                return p;
            }
        }
        unreachable!("rank within total size")
    };
    let (lo, hi) = (nth(lo_rank), nth(hi_rank));
    Some(if lo == hi { lo } else { 0.5 * (lo + hi) })
}

/// Applies the trade-cleaning rules to the prints of one firm-date.
///
/// Rules, in order: zero price or size; excluded condition codes and corrected
/// orders; prints outside the regular session; prints outside
/// `[daily_low, daily_high]`; identical timestamps collapsed to their
/// size-weighted median price; transaction-to-transaction reversals of 25% or
/// more in log terms, removed repeatedly until none remain.
///
/// Input must be sorted by time. An empty result is legal.
pub fn filter_intraday_prints(prints: &[IntradayPrint], daily_high: f64, daily_low: f64) -> Vec<IntradayPrint> {
    let kept: Vec<&IntradayPrint> = prints
        .iter()
        .filter(|p| p.price > 0.0 && p.price.is_finite() && p.size > 0)
        .filter(|p| !p.is_corrected() && !p.has_excluded_condition())
        .filter(|p| (SESSION_OPEN_SECS..=SESSION_CLOSE_SECS).contains(&p.time))
        .filter(|p| p.price >= daily_low && p.price <= daily_high)
        .collect();

    let mut merged: Vec<IntradayPrint> = Vec::with_capacity(kept.len());
    let mut i = 0;
    while i < kept.len() {
        let mut j = i + 1;
        while j < kept.len() && kept[j].time == kept[i].time {
            j += 1;
        }
        if j - i == 1 {
            merged.push(kept[i].clone());
        } else {
            let group: Vec<(f64, u64)> = kept[i..j].iter().map(|p| (p.price, p.size)).collect();
            let price = size_weighted_median(&group).expect("sizes are positive");
            merged.push(IntradayPrint {
                firm_id: kept[i].firm_id.clone(),
                date: kept[i].date,
                time: kept[i].time,
                price,
                size: group.iter().map(|&(_, s)| s).sum(),
                condition_code: None,
            });
        }
        i = j;
    }

    remove_reversals(merged)
}

fn remove_reversals(mut prints: Vec<IntradayPrint>) -> Vec<IntradayPrint> {
    let threshold = 1.25f64.ln();
    loop {
        let mut drop = vec![false; prints.len()];
        let mut any = false;
        let mut j = 1;
        while j + 1 < prints.len() {
            let into = (prints[j].price / prints[j - 1].price).ln();
            let out = (prints[j + 1].price / prints[j].price).ln();
            if into.abs() >= threshold && out.abs() >= threshold && into.signum() != out.signum() {
                drop[j] = true;
                any = true;
                // the neighbour cannot also be a spike against a removed print
                j += 2;
            } else {
                j += 1;
            }
        }
        if !any {
            return prints;
        }
        let mut idx = 0;
        prints.retain(|_| {
            let keep = !drop[idx];
            idx += 1;
            keep
        });
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn print(time: u32, price: f64, size: u64, cond: Option<&str>) -> IntradayPrint {
        IntradayPrint {
            firm_id: FirmId::from("AAA"),
            date: NaiveDate::from_ymd_opt(2020, 3, 2).unwrap(),
            time,
            price,
            size,
            condition_code: cond.map(str::to_string),
        }
    }

    fn path(prices: &[f64]) -> Vec<IntradayPrint> {
        prices
            .iter()
            .enumerate()
            .map(|(i, &p)| print(SESSION_OPEN_SECS + 60 * i as u32, p, 100, None))
            .collect()
    }

    #[test]
    fn zero_size_print_is_removed() {
        let mut prints = path(&[10.0, 10.1, 10.2]);
        prints[1].size = 0;
        let out = filter_intraday_prints(&prints, f64::INFINITY, 0.0);
        assert_eq!(out.len(), 2);
        assert!(out.iter().all(|p| p.size > 0));
    }

    #[test]
    fn zero_price_print_is_removed() {
        let mut prints = path(&[10.0, 10.1, 10.2]);
        prints[2].price = 0.0;
        assert_eq!(filter_intraday_prints(&prints, f64::INFINITY, 0.0).len(), 2);
    }

    #[test]
    fn clean_monotone_path_is_unchanged() {
        let prints = path(&[10.0, 10.05, 10.1, 10.2, 10.3]);
        assert_eq!(filter_intraday_prints(&prints, 11.0, 9.0), prints);
    }

    #[test]
    fn identical_timestamps_collapse_to_size_weighted_median() {
        let t = SESSION_OPEN_SECS + 300;
        let prints = vec![print(t, 10.0, 100, None), print(t, 10.2, 300, None)];
        let out = filter_intraday_prints(&prints, f64::INFINITY, 0.0);
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].price, 10.2);
        assert_eq!(out[0].size, 400);
    }

    #[test]
    fn weighted_median_matches_expanded_multiset() {
        let group = [(10.0, 3u64), (10.5, 1), (9.5, 2)];
        let mut expanded: Vec<f64> = group
            .iter()
            .flat_map(|&(p, s)| std::iter::repeat_n(p, s as usize))
            .collect();
        expanded.sort_by(f64::total_cmp);
        let n = expanded.len();
        let oracle = if n % 2 == 1 { expanded[n / 2] } else { 0.5 * (expanded[n / 2 - 1] + expanded[n / 2]) };
        assert_eq!(size_weighted_median(&group), Some(oracle));
    }

    #[test]
    fn excluded_condition_codes_and_corrections_are_removed() {
        let mut prints = path(&[10.0, 10.0, 10.0, 10.0, 10.0]);
        prints[1].condition_code = Some("T".into());
        prints[2].condition_code = Some("@FZ".into());
        prints[3].condition_code = Some("CORR".into());
        prints[4].condition_code = Some("@F".into());
        let out = filter_intraday_prints(&prints, f64::INFINITY, 0.0);
        assert_eq!(out.len(), 2);
        assert_eq!(out[1].condition_code.as_deref(), Some("@F"));
    }

    #[test]
    fn prints_outside_daily_range_or_session_are_removed() {
        let mut prints = path(&[10.0, 12.0, 10.1]);
        prints.push(print(SESSION_CLOSE_SECS + 1, 10.1, 100, None));
        let out = filter_intraday_prints(&prints, 11.0, 9.0);
        assert_eq!(out.iter().map(|p| p.price).collect::<Vec<_>>(), vec![10.0, 10.1]);
    }

    #[test]
    fn reversal_spike_is_removed() {
        let prints = path(&[10.0, 10.0, 13.0, 10.0, 10.1]);
        let out = filter_intraday_prints(&prints, f64::INFINITY, 0.0);
        assert_eq!(out.iter().map(|p| p.price).collect::<Vec<_>>(), vec![10.0, 10.0, 10.0, 10.1]);
    }

    #[test]
    fn persistent_jump_is_not_a_reversal() {
        let prints = path(&[10.0, 13.0, 13.1, 13.2]);
        assert_eq!(filter_intraday_prints(&prints, f64::INFINITY, 0.0).len(), 4);
    }

    #[test]
    fn time_round_trip() {
        assert_eq!(parse_time("09:30:00").unwrap(), SESSION_OPEN_SECS);
        assert_eq!(format_time(PREDICTOR_CUTOFF_SECS), "15:55:00");
        assert!(parse_time("25:00:00").is_err());
        assert!(parse_time("10:00").is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn arb_prints() -> impl Strategy<Value = Vec<IntradayPrint>> {
            prop::collection::vec(
                (0u32..40, 1.0f64..20.0, 0u64..500, prop::option::of(prop::sample::select(vec!["T", "@F", "CORR", "Z", "E"]))),
                0..60,
            )
            .prop_map(|mut raw| {
                raw.sort_by_key(|r| r.0);
                raw.into_iter()
                    .map(|(slot, price, size, cond)| print(SESSION_OPEN_SECS + 30 * slot, price, size, cond))
                    .collect()
            })
        }

        proptest! {
            #[test]
            fn cleaning_is_idempotent(prints in arb_prints(), low in 0.0f64..5.0, high in 10.0f64..25.0) {
                let once = filter_intraday_prints(&prints, high, low);
                let twice = filter_intraday_prints(&once, high, low);
                prop_assert_eq!(once, twice);
            }
        }
    }
}
