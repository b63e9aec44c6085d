//! Portfolio sorts on a lagged signal and their performance statistics.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use chrono::NaiveDate;

use super::signal::{vrp_signal, VrpForm};
use super::straddle::StraddleReturn;
use crate::error::{Error, Result};
use crate::eval::moment_summary;
use crate::models::ForecastSet;
use crate::panel_data::FirmId;
use crate::stamp::FiltrationStamp;

/// One firm's signal at formation and its return over the following period.
#[derive(Debug, Clone, PartialEq)]
pub struct SortObservation {
    pub firm_id: FirmId,
    pub formation_date: NaiveDate,
    pub return_date: NaiveDate,
    pub signal: f64,
    pub signal_stamp: FiltrationStamp,
    pub excess_return: f64,
}

/// Bin sizes for `n` assets in `n_bins` bins; sizes differ by at most one,
/// with the extra assets going to the lowest bins.
pub fn bin_sizes(n: usize, n_bins: usize) -> Vec<usize> {
    let (base, extra) = (n / n_bins, n % n_bins);
    (0..n_bins).map(|b| base + usize::from(b < extra)).collect()
}

/// Bin index (0 = lowest signal) of each observation. Ties keep firm-id order.
pub fn assign_bins(obs: &[&SortObservation], n_bins: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..obs.len()).collect();
    order.sort_by(|&a, &b| obs[a].signal.total_cmp(&obs[b].signal).then_with(|| obs[a].firm_id.cmp(&obs[b].firm_id)));
    let mut bins = vec![0; obs.len()];
    let mut pos = 0;
    for (b, size) in bin_sizes(obs.len(), n_bins).into_iter().enumerate() {
        for &i in &order[pos..pos + size] {
            bins[i] = b;
        }
        pos += size;
    }
    bins
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PerformanceStats {
    pub n: usize,
    pub mean: f64,
    pub sd: f64,
    /// NaN with fewer than four observations.
    pub skew: f64,
    pub excess_kurtosis: f64,
    /// `mean / sd`, daily and unannualized.
    pub sharpe: f64,
    pub t_stat: f64,
}

pub fn performance_stats(series: &[f64]) -> Result<PerformanceStats> {
    let n = series.len();
    if n < 2 {
        return Err(Error::insufficient(format!("performance statistics need 2 observations, got {n}")));
    }
    let mean = series.iter().sum::<f64>() / n as f64;
    let sd = (series.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt();
    if !(sd > 0.0) {
        return Err(Error::DegenerateSeries("zero return volatility".into()));
    }
    let (skew, excess_kurtosis) = match moment_summary(series) {
        Ok(m) => (m.skew, m.excess_kurtosis),
        Err(_) => (f64::NAN, f64::NAN),
    };
    let sharpe = mean / sd;
    Ok(PerformanceStats { n, mean, sd, skew, excess_kurtosis, sharpe, t_stat: sharpe * (n as f64).sqrt() })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SortReport {
    pub n_bins: usize,
    /// Return dates of the rows.
    pub dates: Vec<NaiveDate>,
    /// Equal-weighted bin returns per row, lowest signal first.
    pub bins: Vec<Vec<f64>>,
    /// Top bin minus bottom bin.
    pub hml: Vec<f64>,
    /// Dates left out, with the reason.
    pub skipped: Vec<(NaiveDate, String)>,
}

impl SortReport {
    pub fn bin_series(&self, b: usize) -> Vec<f64> {
        self.bins.iter().map(|row| row[b]).collect()
    }

    /// Column labels and statistics, bins first then `hml`.
    pub fn stats(&self) -> Vec<(String, Result<PerformanceStats>)> {
        let mut out: Vec<(String, Result<PerformanceStats>)> =
            (0..self.n_bins).map(|b| (format!("q{}", b + 1), performance_stats(&self.bin_series(b)))).collect();
        out.push(("hml".into(), performance_stats(&self.hml)));
        out
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_string())?;
        Ok(())
    }
}

/// Row per date, then a `#`-prefixed block with one line per statistic.
impl fmt::Display for SortReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let labels: Vec<String> = (1..=self.n_bins).map(|b| format!("q{b}")).collect();
        writeln!(f, "date,{},hml", labels.join(","))?;
        for ((d, row), h) in self.dates.iter().zip(&self.bins).zip(&self.hml) {
            let cells: Vec<String> = row.iter().map(f64::to_string).collect();
            writeln!(f, "{d},{},{h}", cells.join(","))?;
        }
        let stats = self.stats();
        writeln!(f, "# stat,{},hml", labels.join(","))?;
        let fields: [(&str, fn(&PerformanceStats) -> f64); 7] = [
            ("n", |s| s.n as f64),
            ("mean", |s| s.mean),
            ("sd", |s| s.sd),
            ("skew", |s| s.skew),
            ("excess_kurtosis", |s| s.excess_kurtosis),
            ("sharpe", |s| s.sharpe),
            ("t_stat", |s| s.t_stat),
        ];
        for (name, get) in fields {
            let cells: Vec<String> =
                stats.iter().map(|(_, s)| s.as_ref().map_or("NaN".to_string(), |s| get(s).to_string())).collect();
            writeln!(f, "# {name},{}", cells.join(","))?;
        }
        writeln!(f, "# skipped_dates,{}", self.skipped.len())
    }
}

/// Sorts each formation date's observations into `n_bins` equal-weighted
/// portfolios. Every signal must be known by the close of its formation
/// date, when the return interval starts; a later stamp is leakage.
pub fn sort_portfolios(obs: &[SortObservation], n_bins: usize) -> Result<SortReport> {
    if n_bins < 2 {
        return Err(Error::config("need at least two bins"));
    }
    let mut by_date: BTreeMap<NaiveDate, Vec<&SortObservation>> = BTreeMap::new();
    for o in obs {
        let start = FiltrationStamp::close(o.formation_date);
        if o.signal_stamp > start || o.return_date <= o.formation_date {
            return Err(Error::Leakage(format!(
                "signal for {} stamped {} but its return starts {start}",
                o.firm_id, o.signal_stamp
            )));
        }
        if o.signal.is_finite() && o.excess_return.is_finite() {
            by_date.entry(o.formation_date).or_default().push(o);
        }
    }
    let mut report = SortReport { n_bins, dates: vec![], bins: vec![], hml: vec![], skipped: vec![] };
    for (date, group) in by_date {
        if group.len() < n_bins {
            report.skipped.push((date, format!("{} firms for {n_bins} bins", group.len())));
            continue;
        }
        let bins = assign_bins(&group, n_bins);
        let mut sums = vec![0.0; n_bins];
        let mut counts = vec![0usize; n_bins];
        for (o, &b) in group.iter().zip(&bins) {
            sums[b] += o.excess_return;
            counts[b] += 1;
        }
        let means: Vec<f64> = sums.iter().zip(&counts).map(|(s, &c)| s / c as f64).collect();
        report.hml.push(means[n_bins - 1] - means[0]);
        report.bins.push(means);
        report.dates.push(group.iter().map(|o| o.return_date).max().expect("non-empty group"));
    }
    if report.dates.is_empty() {
        return Err(Error::insufficient("no date had enough firms to sort"));
    }
    Ok(report)
}

/// Signals from `model`'s forecast of each straddle's holding-day variance
/// and the straddle's implied volatility at formation. Straddles without a
/// forecast are dropped and counted.
pub fn vrp_sort_observations(
    straddles: &[StraddleReturn],
    forecasts: &ForecastSet,
    model: &str,
    form: VrpForm,
) -> Result<(Vec<SortObservation>, usize)> {
    let mut out = Vec::with_capacity(straddles.len());
    let mut missing = 0;
    for s in straddles {
        let p = &s.position;
        let Some(f) = forecasts.get(model, &p.firm_id, s.evaluation_date) else {
            missing += 1;
            continue;
        };
        let stamp = f.made_at.max(FiltrationStamp::close(p.formation_date));
        match vrp_signal(p.firm_id.clone(), p.formation_date, f.value, p.straddle_iv, form, stamp) {
            Ok(sig) => out.push(SortObservation {
                firm_id: sig.firm_id,
                formation_date: p.formation_date,
                return_date: s.evaluation_date,
                signal: sig.signal,
                signal_stamp: sig.made_at,
                excess_return: s.excess_return,
            }),
            Err(_) => missing += 1,
        }
    }
    Ok((out, missing))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn obs(firm: usize, signal: f64, ret: f64) -> SortObservation {
        let d = NaiveDate::from_ymd_opt(2020, 1, 6).unwrap();
        SortObservation {
            firm_id: format!("F{firm:02}").into(),
            formation_date: d,
            return_date: d.succ_opt().unwrap(),
            signal,
            signal_stamp: FiltrationStamp::predictor(d),
            excess_return: ret,
        }
    }

    #[test]
    fn bin_sizes_put_extras_low() {
        assert_eq!(bin_sizes(12, 5), vec![3, 3, 2, 2, 2]);
        assert_eq!(bin_sizes(10, 5), vec![2; 5]);
    }

    #[test]
    fn perfect_signal_orders_the_bins() {
        let rets = [0.03, -0.02, 0.05, 0.0, -0.04, 0.01, 0.02, -0.01, 0.04, -0.03];
        let o: Vec<SortObservation> = rets.iter().enumerate().map(|(i, &r)| obs(i, r, r)).collect();
        let rep = sort_portfolios(&o, 5).unwrap();
        let row = &rep.bins[0];
        assert!(row.windows(2).all(|w| w[0] < w[1]));
        let best = (0..5).flat_map(|a| (0..5).map(move |b| (a, b))).map(|(a, b)| row[b] - row[a]).fold(f64::MIN, f64::max);
        assert_eq!(rep.hml[0], best);
        let universe = rets.iter().sum::<f64>() / 10.0;
        assert!((row.iter().sum::<f64>() / 5.0 - universe).abs() < 1e-15);
    }

    #[test]
    fn equal_signals_split_in_firm_order() {
        let o: Vec<SortObservation> = (0..10).map(|i| obs(i, 1.0, i as f64)).collect();
        let rep = sort_portfolios(&o, 5).unwrap();
        assert_eq!(rep.bins[0], vec![0.5, 2.5, 4.5, 6.5, 8.5]);
    }

    #[test]
    fn thin_dates_are_skipped_and_late_signals_abort() {
        let o: Vec<SortObservation> = (0..4).map(|i| obs(i, i as f64, 0.0)).collect();
        assert!(sort_portfolios(&o, 5).is_err());
        let mut late = obs(0, 1.0, 0.0);
        late.signal_stamp = FiltrationStamp::predictor(late.return_date);
        assert!(matches!(sort_portfolios(&[late], 5), Err(Error::Leakage(_))));
    }

    #[test]
    fn stats_examples() {
        let s = performance_stats(&[0.01, 0.03]).unwrap();
        assert!((s.mean - 0.02).abs() < 1e-15);
        assert!((s.sd - 0.014142135623730951).abs() < 1e-12);
        assert!((s.sharpe - 1.4142135623730951).abs() < 1e-9);
        assert!(matches!(performance_stats(&[0.01; 5]), Err(Error::DegenerateSeries(_))));
    }

    proptest! {
        #[test]
        fn monotone_transforms_keep_membership(sig in prop::collection::vec(-5.0..5.0f64, 5..40)) {
            let o: Vec<SortObservation> = sig.iter().enumerate().map(|(i, &s)| obs(i, s, (i as f64).sin())).collect();
            let t: Vec<SortObservation> = o.iter().map(|x| SortObservation { signal: x.signal.exp() * 3.0 + 1.0, ..x.clone() }).collect();
            let a = sort_portfolios(&o, 5).unwrap();
            let b = sort_portfolios(&t, 5).unwrap();
            prop_assert_eq!(&a.bins, &b.bins);
            let refs: Vec<&SortObservation> = o.iter().collect();
            let bins = assign_bins(&refs, 5);
            let mut counts = [0usize; 5];
            for b in &bins { counts[*b] += 1; }
            prop_assert_eq!(counts.iter().sum::<usize>(), o.len());
            prop_assert_eq!(counts.to_vec(), bin_sizes(o.len(), 5));
        }
    }
}
