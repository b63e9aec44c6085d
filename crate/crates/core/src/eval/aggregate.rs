//! Scored forecast cells and panel error aggregation.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use chrono::NaiveDate;

use super::loss::{forecast_loss, LossKind};
use super::mz::{mz_fit, MzFit};
use crate::error::{Error, Result};
use crate::models::ForecastSet;
use crate::panel_data::{DailyPanel, FirmId, TruthMap};

/// One forecast paired with its realized outcome.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoredCell {
    pub model: String,
    pub firm_id: FirmId,
    pub target_date: NaiveDate,
    pub y: f64,
    pub yhat: f64,
}

/// Pairs every forecast with its realized value; forecasts without one are
/// dropped. Cells come out ordered by (model, firm, date).
pub fn score_forecasts(forecasts: &ForecastSet, realized: &TruthMap) -> Vec<ScoredCell> {
    forecasts
        .entries
        .iter()
        .filter_map(|((model, firm, date), e)| {
            realized.get(&(firm.clone(), *date)).map(|&y| ScoredCell {
                model: model.clone(),
                firm_id: firm.clone(),
                target_date: *date,
                y,
                yhat: e.value,
            })
        })
        .collect()
}

/// Full-day realized variance of every panel cell, keyed like a truth file.
pub fn realized_from_panel(panel: &DailyPanel) -> TruthMap {
    panel.records().map(|r| ((r.firm_id, r.date), r.rv_day)).collect()
}

/// MZ regression over a set of cells.
pub fn mz_regression(cells: &[ScoredCell]) -> Result<MzFit> {
    let y: Vec<f64> = cells.iter().map(|c| c.y).collect();
    let yhat: Vec<f64> = cells.iter().map(|c| c.yhat).collect();
    mz_fit(&y, &yhat)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Aggregation {
    /// Per-firm time-series statistics averaged over firms.
    AverageFirm,
    /// Per-date cross-sectional statistics averaged over dates.
    AverageCrossSection,
    /// One statistic over all cells.
    Pooled,
}

impl Aggregation {
    pub const ALL: [Aggregation; 3] = [Aggregation::AverageFirm, Aggregation::AverageCrossSection, Aggregation::Pooled];

    pub fn name(self) -> &'static str {
        match self {
            Aggregation::AverageFirm => "average_firm",
            Aggregation::AverageCrossSection => "average_cross_section",
            Aggregation::Pooled => "pooled",
        }
    }
}

impl FromStr for Aggregation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Aggregation::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| Error::Usage(format!("unknown aggregation '{s}'; use average_firm, average_cross_section or pooled")))
    }
}

impl fmt::Display for Aggregation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ErrorRow {
    pub model: String,
    pub aggregation: Aggregation,
    pub rmse: f64,
    pub mae: f64,
    pub qlike: f64,
    /// Mean of the per-group MZ fits; `None` when every group was skipped.
    pub mz: Option<MzFit>,
    pub n_cells: usize,
    pub n_groups: usize,
    /// Groups left out of the MZ average (fewer than 3 cells or a degenerate fit).
    pub mz_skipped: usize,
}

pub const ERROR_REPORT_HEADER: [&str; 8] = ["model", "aggregation", "rmse", "mae", "qlike", "mz_r2", "mz_alpha", "mz_beta"];

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ErrorReport {
    pub rows: Vec<ErrorRow>,
}

impl ErrorReport {
    pub fn row(&self, model: &str, aggregation: Aggregation) -> Option<&ErrorRow> {
        self.rows.iter().find(|r| r.model == model && r.aggregation == aggregation)
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_string())?;
        Ok(())
    }
}

/// CSV rows followed by `#` footer lines recording skipped MZ groups.
impl fmt::Display for ErrorReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{}", ERROR_REPORT_HEADER.join(","))?;
        for r in &self.rows {
            let (r2, a, b) = r.mz.map_or((f64::NAN, f64::NAN, f64::NAN), |m| (m.r2, m.alpha, m.beta));
            writeln!(f, "{},{},{},{},{},{},{},{}", r.model, r.aggregation, r.rmse, r.mae, r.qlike, r2, a, b)?;
        }
        for r in &self.rows {
            writeln!(
                f,
                "# mz_skipped model={} aggregation={} skipped={} groups={}",
                r.model, r.aggregation, r.mz_skipped, r.n_groups
            )?;
        }
        Ok(())
    }
}

fn score_group(cells: &[&ScoredCell]) -> Result<[f64; 3]> {
    let mut sums = [0.0; 3];
    for c in cells {
        sums[0] += forecast_loss(c.y, c.yhat, LossKind::Mse)?;
        sums[1] += forecast_loss(c.y, c.yhat, LossKind::Mae)?;
        sums[2] += forecast_loss(c.y, c.yhat, LossKind::Qlike)?;
    }
    let n = cells.len() as f64;
    Ok([(sums[0] / n).sqrt(), sums[1] / n, sums[2] / n])
}

/// One report row per model under `scheme`. Group statistics are averaged
/// with equal weight per group.
pub fn aggregate_panel_errors(cells: &[ScoredCell], scheme: Aggregation) -> Result<ErrorReport> {
    if cells.is_empty() {
        return Err(Error::insufficient("no scored cells"));
    }
    let mut by_model: BTreeMap<&str, BTreeMap<(Option<&FirmId>, Option<NaiveDate>), Vec<&ScoredCell>>> = BTreeMap::new();
    for c in cells {
        let key = match scheme {
            Aggregation::AverageFirm => (Some(&c.firm_id), None),
            Aggregation::AverageCrossSection => (None, Some(c.target_date)),
            Aggregation::Pooled => (None, None),
        };
        by_model.entry(c.model.as_str()).or_default().entry(key).or_default().push(c);
    }
    let mut report = ErrorReport::default();
    for (model, groups) in by_model {
        let mut stats = [0.0; 3];
        let mut mz_sum = [0.0; 3];
        let mut mz_ok = 0usize;
        for group in groups.values() {
            let s = score_group(group)?;
            for (acc, v) in stats.iter_mut().zip(s) {
                *acc += v;
            }
            let y: Vec<f64> = group.iter().map(|c| c.y).collect();
            let yhat: Vec<f64> = group.iter().map(|c| c.yhat).collect();
            if let Ok(m) = mz_fit(&y, &yhat) {
                mz_sum[0] += m.alpha;
                mz_sum[1] += m.beta;
                mz_sum[2] += m.r2;
                mz_ok += 1;
            }
        }
        let g = groups.len() as f64;
        let k = mz_ok as f64;
        report.rows.push(ErrorRow {
            model: model.to_string(),
            aggregation: scheme,
            rmse: stats[0] / g,
            mae: stats[1] / g,
            qlike: stats[2] / g,
            mz: (mz_ok > 0).then(|| MzFit { alpha: mz_sum[0] / k, beta: mz_sum[1] / k, r2: mz_sum[2] / k }),
            n_cells: groups.values().map(Vec::len).sum(),
            n_groups: groups.len(),
            mz_skipped: groups.len() - mz_ok,
        });
    }
    Ok(report)
}
