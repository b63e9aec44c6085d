//! Walk-forward splits and the balanced-window universe filter.

use std::ops::RangeInclusive;

use chrono::NaiveDate;

use crate::error::{Error, Result};
use crate::panel_data::{DailyPanel, FirmId};

/// One walk-forward step at origin position `t`.
///
/// Training pairs are (x_s, y_{s+1}) for origins s in `train_origins`
/// = [t - W, t - 2]; the pair (x_{t-1}, y_t) is excluded because y_t is not
/// observed by the origin's cutoff; the test pair is (x_t, y_{t+1}).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitSpec {
    pub origin: usize,
    pub origin_date: NaiveDate,
    pub train_origins: RangeInclusive<usize>,
    /// First and last training target dates.
    pub train_targets: (NaiveDate, NaiveDate),
    pub excluded_target: NaiveDate,
    pub forecast_target: NaiveDate,
}

/// Splits for every feasible origin t in [W, T - 2].
pub fn make_walkforward_splits(dates: &[NaiveDate], window_w: usize) -> Result<Vec<SplitSpec>> {
    if window_w < 2 {
        return Err(Error::config("window must be at least 2"));
    }
    if dates.len() <= window_w + 1 {
        return Err(Error::insufficient(format!("{} dates for a window of {window_w}", dates.len())));
    }
    if dates.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Data("dates must be strictly increasing".into()));
    }
    Ok((window_w..=dates.len() - 2)
        .map(|t| SplitSpec {
            origin: t,
            origin_date: dates[t],
            train_origins: t - window_w..=t - 2,
            train_targets: (dates[t - window_w + 1], dates[t - 1]),
            excluded_target: dates[t],
            forecast_target: dates[t + 1],
        })
        .collect())
}

/// Indices of firms with a record on every date position in `window`.
pub fn balanced_firm_indices(panel: &DailyPanel, window: RangeInclusive<usize>) -> Vec<usize> {
    (0..panel.n_firms())
        .filter(|&f| window.clone().all(|d| panel.get(f, d).is_some()))
        .collect()
}

/// Firms with a record on every panel date inside `window` (inclusive).
pub fn balanced_window_filter(panel: &DailyPanel, window: RangeInclusive<NaiveDate>) -> Result<Vec<FirmId>> {
    let dates = panel.dates();
    let lo = dates.partition_point(|d| d < window.start());
    let hi = dates.partition_point(|d| d <= window.end());
    if lo >= hi {
        return Err(Error::config(format!("no panel dates in {} ..= {}", window.start(), window.end())));
    }
    let firms: Vec<FirmId> = balanced_firm_indices(panel, lo..=hi - 1)
        .into_iter()
        .map(|f| panel.firms()[f].clone())
        .collect();
    if firms.is_empty() {
        return Err(Error::EmptyUniverse(format!("no firm is present throughout {} ..= {}", window.start(), window.end())));
    }
    Ok(firms)
}

/// Per-firm running count of present days, for O(1) balanced checks.
#[derive(Debug, Clone)]
pub(crate) struct PresenceIndex {
    n_dates: usize,
    prefix: Vec<u32>,
}

impl PresenceIndex {
    pub fn new(panel: &DailyPanel) -> Self {
        let n_dates = panel.n_dates();
        let mut prefix = vec![0u32; panel.n_firms() * (n_dates + 1)];
        for f in 0..panel.n_firms() {
            let base = f * (n_dates + 1);
            for d in 0..n_dates {
                prefix[base + d + 1] = prefix[base + d] + panel.get(f, d).is_some() as u32;
            }
        }
        PresenceIndex { n_dates, prefix }
    }

    pub fn balanced(&self, firm: usize, window: RangeInclusive<usize>) -> bool {
        let base = firm * (self.n_dates + 1);
        let (a, b) = (*window.start(), *window.end());
        (self.prefix[base + b + 1] - self.prefix[base + a]) as usize == b + 1 - a
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::panel_data::DailyRecord;
    use proptest::prelude::*;

    fn day(k: u64) -> NaiveDate {
        NaiveDate::from_ymd_opt(2021, 1, 4).unwrap() + chrono::Days::new(k)
    }

    fn panel(presence: &[(&str, Vec<u64>)]) -> DailyPanel {
        DailyPanel::from_records(presence.iter().flat_map(|(f, days)| {
            days.iter().map(move |&k| DailyRecord {
                firm_id: FirmId::from(*f),
                date: day(k),
                ret_full_day: 0.0,
                rv_day: 1e-4,
                rv_355: 1e-4,
                ret_355: 0.0,
            })
        }))
        .unwrap()
    }

    #[test]
    fn six_dates_window_three() {
        let dates: Vec<NaiveDate> = (0..6).map(day).collect();
        let splits = make_walkforward_splits(&dates, 3).unwrap();
        assert_eq!(splits.len(), 2);
        // Origin at the 4th date: train on (x1,y2), (x2,y3); exclude y4; forecast y5.
        assert_eq!(splits[0].train_origins, 0..=1);
        assert_eq!(splits[0].train_targets, (dates[1], dates[2]));
        assert_eq!(splits[0].excluded_target, dates[3]);
        assert_eq!(splits[0].forecast_target, dates[4]);
        assert_eq!(splits[1].train_origins, 1..=2);
        assert_eq!(splits[1].train_targets, (dates[2], dates[3]));
        assert_eq!(splits[1].excluded_target, dates[4]);
        assert_eq!(splits[1].forecast_target, dates[5]);
        for s in &splits {
            assert!(s.train_targets.1 < s.forecast_target);
            assert!(s.train_targets.1 < s.excluded_target);
        }
    }

    #[test]
    fn too_few_dates() {
        let dates: Vec<NaiveDate> = (0..4).map(day).collect();
        assert!(matches!(make_walkforward_splits(&dates[..3], 3), Err(Error::InsufficientData(_))));
        assert!(matches!(make_walkforward_splits(&dates, 3), Err(Error::InsufficientData(_))));
    }

    #[test]
    fn filter_rules() {
        let p = panel(&[("A", (0..10).collect()), ("B", vec![0, 1, 2, 3, 5, 6, 7, 8, 9]), ("C", (4..10).collect())]);
        assert_eq!(balanced_window_filter(&p, day(0)..=day(9)).unwrap(), vec![FirmId::from("A")]);
        assert_eq!(balanced_window_filter(&p, day(5)..=day(9)).unwrap().len(), 3);
        let q = panel(&[("A", (0..5).collect()), ("B", (5..10).collect())]);
        assert!(matches!(balanced_window_filter(&q, day(3)..=day(6)), Err(Error::EmptyUniverse(_))));
    }

    proptest! {
        #[test]
        fn shrinking_the_window_never_shrinks_the_universe(
            holes in prop::collection::vec((0usize..4, 0u64..30), 0..20),
            a in 0u64..15, len in 1u64..15, trim in 0u64..5,
        ) {
            let firms = ["A", "B", "C", "D"];
            let presence: Vec<(&str, Vec<u64>)> = firms
                .iter()
                .enumerate()
                .map(|(i, f)| (*f, (0..30).filter(|k| !holes.contains(&(i, *k))).collect()))
                .collect();
            let p = panel(&presence);
            let idx = PresenceIndex::new(&p);
            let (lo, hi) = (a as usize, (a + len).min(29) as usize);
            let inner = (lo + trim as usize).min(hi)..=hi;
            let outer = balanced_firm_indices(&p, lo..=hi);
            let inner_set = balanced_firm_indices(&p, inner);
            for f in &outer {
                prop_assert!(inner_set.contains(f));
                prop_assert!(idx.balanced(*f, lo..=hi));
            }
        }
    }
}
