//! Time-ordered cross-validation for hyperparameter selection.

use std::ops::Range;

use crate::error::{Error, Result};

/// Validation loss used when scoring candidates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ValidationLoss {
    /// Squared error on the variance scale.
    Mse,
    Qlike,
}

impl ValidationLoss {
    pub fn score(self, y: f64, yhat: f64) -> f64 {
        match self {
            ValidationLoss::Mse => (y - yhat).powi(2),
            ValidationLoss::Qlike => {
                let f = yhat.max(crate::VARIANCE_FLOOR);
                f.ln() + y / f
            }
        }
    }
}

/// Cross-validation policy shared by the penalized models.
#[derive(Debug, Clone, PartialEq)]
pub struct TuningPolicy {
    /// Number of validation blocks.
    pub folds: usize,
    pub loss: ValidationLoss,
    /// Points on the log-spaced penalty grid.
    pub grid_size: usize,
    /// Smallest grid penalty as a fraction of the largest.
    pub grid_ratio: f64,
}

impl Default for TuningPolicy {
    fn default() -> Self {
        TuningPolicy { folds: 5, loss: ValidationLoss::Mse, grid_size: 20, grid_ratio: 1e-4 }
    }
}

impl TuningPolicy {
    pub fn validate(&self) -> Result<()> {
        if self.folds < 2 {
            return Err(Error::config("at least two validation folds are required"));
        }
        if self.grid_size == 0 || !(self.grid_ratio > 0.0 && self.grid_ratio <= 1.0) {
            return Err(Error::config("grid_size must be positive and grid_ratio in (0, 1]"));
        }
        Ok(())
    }

    /// Forward-chaining folds over `n_rows` time-ordered rows: the rows are cut
    /// into `folds + 1` contiguous chunks and fold k fits on chunks 0..k and
    /// validates on chunk k.
    pub fn folds(&self, n_rows: usize) -> Result<Vec<(Range<usize>, Range<usize>)>> {
        let chunks = self.folds + 1;
        if n_rows < chunks {
            return Err(Error::insufficient(format!("{n_rows} rows for {} validation folds", self.folds)));
        }
        let bound = |c: usize| c * n_rows / chunks;
        Ok((1..chunks).map(|k| (0..bound(k), bound(k)..bound(k + 1))).collect())
    }
}

/// Picks the candidate with the lowest mean validation loss across the
/// policy's folds. `evaluate(candidate, fit_rows, validation_rows)` returns
/// that fold's mean loss; a candidate failing on any fold is dropped. Ties go
/// to the earlier candidate, so grids should be listed from most to least
/// regularized.
pub fn tune_hyperparameters<C: Clone>(
    n_rows: usize,
    candidates: &[C],
    policy: &TuningPolicy,
    mut evaluate: impl FnMut(&C, Range<usize>, Range<usize>) -> Result<f64>,
) -> Result<C> {
    match candidates.len() {
        0 => return Err(Error::Tuning("empty candidate grid".into())),
        1 => return Ok(candidates[0].clone()),
        _ => {}
    }
    policy.validate()?;
    let folds = policy.folds(n_rows)?;
    let mut best: Option<(usize, f64)> = None;
    let mut last_err = None;
    'cand: for (i, c) in candidates.iter().enumerate() {
        let mut total = 0.0;
        for (fit, val) in &folds {
            match evaluate(c, fit.clone(), val.clone()) {
                Ok(l) if l.is_finite() => total += l,
                Ok(_) => continue 'cand,
                Err(e @ Error::Leakage(_)) => return Err(e),
                Err(e) => {
                    last_err = Some(e);
                    continue 'cand;
                }
            }
        }
        let mean = total / folds.len() as f64;
        if best.is_none_or(|(_, b)| mean < b) {
            best = Some((i, mean));
        }
    }
    best.map(|(i, _)| candidates[i].clone()).ok_or_else(|| {
        Error::Tuning(match last_err {
            Some(e) => format!("every candidate failed; last error: {e}"),
            None => "every candidate produced a non-finite loss".into(),
        })
    })
}
