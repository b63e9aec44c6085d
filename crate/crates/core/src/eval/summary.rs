//! Moment summaries of returns and realized variances.

use std::collections::BTreeMap;
use std::fmt;

use super::aggregate::Aggregation;
use crate::error::{Error, Result};
use crate::panel_data::DailyPanel;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Moments {
    pub mean: f64,
    /// Sample standard deviation (n - 1 denominator).
    pub sd: f64,
    pub skew: f64,
    pub excess_kurtosis: f64,
}

/// Mean, sample sd, and skewness and excess kurtosis standardized by the
/// population second moment.
pub fn moment_summary(series: &[f64]) -> Result<Moments> {
    let n = series.len();
    if n < 4 {
        return Err(Error::insufficient(format!("moment summary needs 4 observations, got {n}")));
    }
    if series.iter().any(|v| !v.is_finite()) {
        return Err(Error::Domain("non-finite value in series".into()));
    }
    let nf = n as f64;
    let mean = series.iter().sum::<f64>() / nf;
    let (mut m2, mut m3, mut m4) = (0.0, 0.0, 0.0);
    for v in series {
        let d = v - mean;
        let d2 = d * d;
        m2 += d2;
        m3 += d2 * d;
        m4 += d2 * d2;
    }
    let sd = (m2 / (nf - 1.0)).sqrt();
    let (m2, m3, m4) = (m2 / nf, m3 / nf, m4 / nf);
    if !(m2 > f64::EPSILON * f64::EPSILON * mean * mean) || m2 == 0.0 {
        return Err(Error::DegenerateSeries("zero variance".into()));
    }
    Ok(Moments { mean, sd, skew: m3 / m2.powf(1.5), excess_kurtosis: m4 / (m2 * m2) - 3.0 })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub scheme: Aggregation,
    pub variable: &'static str,
    pub moments: Moments,
    /// Groups averaged; groups too short or constant are left out.
    pub n_groups: usize,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SummaryTable {
    pub rows: Vec<SummaryRow>,
}

impl fmt::Display for SummaryTable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "panel,variable,mean,sd,skew,excess_kurtosis,groups")?;
        for r in &self.rows {
            let m = r.moments;
            writeln!(f, "{},{},{},{},{},{},{}", r.scheme, r.variable, m.mean, m.sd, m.skew, m.excess_kurtosis, r.n_groups)?;
        }
        Ok(())
    }
}

fn average(groups: impl Iterator<Item = Vec<f64>>) -> Option<(Moments, usize)> {
    let fits: Vec<Moments> = groups.filter_map(|g| moment_summary(&g).ok()).collect();
    if fits.is_empty() {
        return None;
    }
    let k = fits.len() as f64;
    let avg = |f: fn(&Moments) -> f64| fits.iter().map(f).sum::<f64>() / k;
    Some((
        Moments { mean: avg(|m| m.mean), sd: avg(|m| m.sd), skew: avg(|m| m.skew), excess_kurtosis: avg(|m| m.excess_kurtosis) },
        fits.len(),
    ))
}

/// Moments of full-day returns and realized variances for an average firm
/// (per-firm time series, averaged over firms) and an average cross-section
/// (per-date cross-sections, averaged over dates).
pub fn summary_statistics(panel: &DailyPanel) -> Result<SummaryTable> {
    let vars: [(&'static str, fn(&crate::panel_data::DailyValues) -> f64); 2] =
        [("ret_full_day", |v| v.ret_full_day), ("rv_day", |v| v.rv_day)];
    let mut table = SummaryTable::default();
    for scheme in [Aggregation::AverageFirm, Aggregation::AverageCrossSection] {
        for (name, get) in vars {
            let mut groups: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
            for f in 0..panel.n_firms() {
                for d in 0..panel.n_dates() {
                    if let Some(v) = panel.get(f, d) {
                        let key = if scheme == Aggregation::AverageFirm { f } else { d };
                        groups.entry(key).or_default().push(get(v));
                    }
                }
            }
            let (moments, n_groups) = average(groups.into_values())
                .ok_or_else(|| Error::insufficient(format!("no usable {} groups for {name}", scheme)))?;
            table.rows.push(SummaryRow { scheme, variable: name, moments, n_groups });
        }
    }
    Ok(table)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    #[test]
    fn symmetric_clusters_have_no_skew() {
        let s: Vec<f64> = (0..40).map(|i| if i % 2 == 0 { 1.5 } else { -1.5 }).collect();
        let m = moment_summary(&s).unwrap();
        assert!(m.skew.abs() < 1e-12);
        assert!((m.excess_kurtosis + 2.0).abs() < 1e-12);
    }

    #[test]
    fn hand_computed_moments() {
        let m = moment_summary(&[1.0, 2.0, 3.0, 10.0]).unwrap();
        assert_eq!(m.mean, 4.0);
        assert!((m.sd - (50.0f64 / 3.0).sqrt()).abs() < 1e-12);
        let m2 = 12.5;
        let m3 = (-27.0 - 8.0 - 1.0 + 216.0) / 4.0;
        assert!((m.skew - m3 / f64::powf(m2, 1.5)).abs() < 1e-12);
    }

    #[test]
    fn constant_series_is_degenerate() {
        assert!(matches!(moment_summary(&[2.0; 10]), Err(Error::DegenerateSeries(_))));
        assert!(matches!(moment_summary(&[1.0, 2.0, 3.0]), Err(Error::InsufficientData(_))));
    }

    #[test]
    fn normal_draws_have_no_excess_kurtosis() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let s: Vec<f64> = (0..100_000).map(|_| { let z: f64 = StandardNormal.sample(&mut rng); z }).collect();
        let m = moment_summary(&s).unwrap();
        assert!(m.excess_kurtosis.abs() < 0.1);
        assert!(m.skew.abs() < 0.05);
    }

    #[test]
    fn panel_summary_has_both_schemes() {
        let sim = crate::panel_data::simulate_panel(&crate::panel_data::SimConfig {
            n_firms: 5,
            n_days: 60,
            emit_prints: false,
            options: None,
            ..Default::default()
        })
        .unwrap();
        let t = summary_statistics(&sim.panel).unwrap();
        assert_eq!(t.rows.len(), 4);
        assert_eq!(t.rows[0].n_groups, 5);
        assert!(t.rows.iter().all(|r| r.moments.sd > 0.0));
        assert!(t.to_string().starts_with("panel,variable"));
    }
}
