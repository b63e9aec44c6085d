//! Built-in base forecasters.

use std::collections::BTreeMap;
use std::sync::Mutex;

use nalgebra::DMatrix;

use super::engine::{FittedModel, ForecastModel, OriginContext};
use super::view::FiltrationView;
use crate::error::{Error, Result};
use crate::models::har::fit_har_rows;
use crate::models::{
    fit_factor_model, har_regressors, lambda_grid, rolling_sd_squared_forecast, FactorPanel, FactorSpec,
    PenalizedFit, PenalizedOptions, PenalizedProblem, PenaltySpec, HAR_WARMUP,
};
use crate::backtest::tuning::tune_hyperparameters;
use crate::VARIANCE_FLOOR;

/// Forecasts computed at fit time, one per firm.
struct PerFirm(BTreeMap<usize, f64>);

impl FittedModel for PerFirm {
    fn forecast(&self, ctx: &OriginContext, firm: usize) -> Result<f64> {
        self.0
            .get(&firm)
            .copied()
            .ok_or_else(|| Error::insufficient(format!("no fit for {} at this origin", ctx.view.firms()[firm])))
    }
}

fn keep_going<T>(r: Result<T>) -> Result<Option<T>> {
    match r {
        Ok(v) => Ok(Some(v)),
        Err(e @ Error::Leakage(_)) => Err(e),
        Err(_) => Ok(None),
    }
}

/// Squared rolling standard deviation of close-to-close returns.
#[derive(Debug, Clone, Copy)]
pub struct RollingSdModel {
    pub window: usize,
}

struct RollingSdFitted(usize);

impl FittedModel for RollingSdFitted {
    fn forecast(&self, ctx: &OriginContext, firm: usize) -> Result<f64> {
        let t = ctx.origin();
        if t < self.0 {
            return Err(Error::insufficient("origin inside the first rolling window"));
        }
        let r = ctx.view.ret_full_day_series(firm, t - self.0..t)?;
        rolling_sd_squared_forecast(&r, self.0)
    }
}

impl ForecastModel for RollingSdModel {
    fn name(&self) -> &str {
        "rolling_sd"
    }

    fn fit(&self, _ctx: &OriginContext) -> Result<Box<dyn FittedModel>> {
        Ok(Box::new(RollingSdFitted(self.window)))
    }
}

/// First training origin for a window ending at `t`, given the history start.
fn first_train_origin(ctx: &OriginContext) -> usize {
    (ctx.origin().saturating_sub(ctx.window)).max(ctx.history_start() + HAR_WARMUP)
}

/// Per-firm HAR on 15:55 predictors with full-day targets.
#[derive(Debug, Clone, Copy)]
pub struct HarModel;

fn har_firm_forecast(ctx: &OriginContext, firm: usize) -> Result<f64> {
    let t = ctx.origin();
    let start = ctx.history_start();
    let pred = ctx.view.rv_355_series(firm, start..t + 1)?;
    let target = ctx.view.rv_day_series(firm, start..t)?;
    let rows: Vec<([f64; 3], f64)> = (first_train_origin(ctx)..t.saturating_sub(1))
        .filter_map(|s| Some((har_regressors(&pred, s - start)?, target[s + 1 - start])))
        .collect();
    let (coef, _) = fit_har_rows(&rows, ctx.min_fit_rows)?;
    let x = har_regressors(&pred, t - start).ok_or_else(|| Error::insufficient("HAR warm-up at the origin"))?;
    Ok(coef.predict(x).max(VARIANCE_FLOOR))
}

impl ForecastModel for HarModel {
    fn name(&self) -> &str {
        "har"
    }

    fn fit(&self, ctx: &OriginContext) -> Result<Box<dyn FittedModel>> {
        let mut out = BTreeMap::new();
        for &f in ctx.universe {
            if let Some(v) = keep_going(har_firm_forecast(ctx, f))? {
                out.insert(f, v);
            }
        }
        Ok(Box::new(PerFirm(out)))
    }
}

/// Cross-firm LASSO: each firm's next-day RV regressed on the daily, weekly
/// and monthly 15:55 RV and 15:55 return averages of every firm in the
/// estimation universe, with the penalty chosen by forward cross-validation.
#[derive(Debug, Clone, Copy)]
pub struct LassoModel {
    pub retrain_every: usize,
}

/// Six regressors per predictor firm at date position `at`.
fn lasso_row(view: &FiltrationView, predictors: &[usize], at: usize) -> Result<Vec<f64>> {
    let from = at.checked_sub(HAR_WARMUP).ok_or_else(|| Error::insufficient("LASSO warm-up"))?;
    let mut row = Vec::with_capacity(6 * predictors.len());
    for &j in predictors {
        let rv = view.rv_355_series(j, from..at + 1)?;
        let ret = view.ret_355_series(j, from..at + 1)?;
        row.extend(har_regressors(&rv, HAR_WARMUP).expect("22 observations"));
        row.extend(har_regressors(&ret, HAR_WARMUP).expect("22 observations"));
    }
    Ok(row)
}

struct LassoFitted {
    origin: usize,
    predictors: Vec<usize>,
    fits: BTreeMap<usize, PenalizedFit>,
    row_cache: Mutex<Option<(usize, Vec<f64>)>>,
}

impl FittedModel for LassoFitted {
    fn is_valid_for(&self, ctx: &OriginContext) -> Result<bool> {
        for &j in &self.predictors {
            for d in self.origin + 1..=ctx.origin() {
                if !ctx.view.is_present(j, d)? {
                    return Ok(false);
                }
            }
        }
        Ok(true)
    }

    fn forecast(&self, ctx: &OriginContext, firm: usize) -> Result<f64> {
        let fit = self
            .fits
            .get(&firm)
            .ok_or_else(|| Error::insufficient("firm outside the LASSO estimation universe"))?;
        let t = ctx.origin();
        let mut cache = self.row_cache.lock().unwrap_or_else(|p| p.into_inner());
        if cache.as_ref().is_none_or(|(at, _)| *at != t) {
            *cache = Some((t, lasso_row(&ctx.view, &self.predictors, t)?));
        }
        let row = &cache.as_ref().expect("filled above").1;
        Ok(fit.predict(row).max(VARIANCE_FLOOR))
    }
}

impl LassoModel {
    fn fit_firm(
        &self,
        ctx: &OriginContext,
        x: &DMatrix<f64>,
        full: &PenalizedProblem,
        folds: &[(std::ops::Range<usize>, PenalizedProblem)],
        y: &[f64],
    ) -> Result<PenalizedFit> {
        let policy = ctx.tuning;
        let r = full.response(y)?;
        let lmax = full.lambda_max(&r);
        let grid = if lmax > 0.0 { lambda_grid(lmax, policy.grid_size, policy.grid_ratio) } else { vec![0.0] };
        let base = PenaltySpec::default();
        // Validation loss per (fold, grid point). A non-converged or
        // saturated fit fails that point and every smaller penalty.
        let mut losses: BTreeMap<usize, Vec<Option<f64>>> = BTreeMap::new();
        for (val, problem) in folds {
            let fit_rows = val.start;
            let rf = problem.response(&y[..fit_rows])?;
            let mut warm: Option<Vec<f64>> = None;
            let mut fold_losses = vec![None; grid.len()];
            for (g, &l) in grid.iter().enumerate() {
                let Ok(sol) = problem.solve(&rf, &PenaltySpec { lambda_l1: l, ..base }, warm.as_deref()) else { break };
                let fit = problem.to_fit(&rf, &sol);
                if fit.n_nonzero + 1 >= fit_rows {
                    break;
                }
                let loss: f64 = val
                    .clone()
                    .map(|i| {
                        let row: Vec<f64> = x.row(i).iter().copied().collect();
                        policy.loss.score(y[i], fit.predict(&row).max(VARIANCE_FLOOR))
                    })
                    .sum();
                fold_losses[g] = Some(loss / val.len() as f64);
                warm = Some(sol.beta);
            }
            losses.insert(fit_rows, fold_losses);
        }
        let candidates: Vec<usize> = (0..grid.len()).collect();
        let chosen = tune_hyperparameters(y.len(), &candidates, policy, |&g, fit, _| {
            losses
                .get(&fit.end)
                .and_then(|l| l[g])
                .ok_or_else(|| Error::Tuning("penalty failed on this fold".into()))
        })?;
        let mut warm: Option<Vec<f64>> = None;
        let mut sol = None;
        for &l in &grid[..=chosen] {
            let s = full.solve(&r, &PenaltySpec { lambda_l1: l, ..base }, warm.as_deref())?;
            warm = Some(s.beta.clone());
            sol = Some(s);
        }
        let fit = full.to_fit(&r, &sol.expect("non-empty grid"));
        if fit.n_nonzero + 1 >= y.len() {
            return Err(Error::insufficient("LASSO fit saturated"));
        }
        Ok(fit)
    }
}

impl ForecastModel for LassoModel {
    fn name(&self) -> &str {
        "lasso"
    }

    fn retrain_every(&self) -> usize {
        self.retrain_every
    }

    fn fit(&self, ctx: &OriginContext) -> Result<Box<dyn FittedModel>> {
        let t = ctx.origin();
        let predictors = ctx.universe.to_vec();
        let origins: Vec<usize> = (first_train_origin(ctx)..t.saturating_sub(1)).collect();
        if origins.len() < ctx.min_fit_rows.max(ctx.tuning.folds + 1) {
            return Err(Error::insufficient(format!("{} LASSO training rows", origins.len())));
        }
        let rows = origins.iter().map(|&s| lasso_row(&ctx.view, &predictors, s)).collect::<Result<Vec<_>>>()?;
        let x = DMatrix::from_fn(rows.len(), rows[0].len(), |i, j| rows[i][j]);
        let full = PenalizedProblem::new(&x, PenalizedOptions::default())?;
        let folds = ctx
            .tuning
            .folds(rows.len())?
            .into_iter()
            .map(|(fit, val)| Ok((val, PenalizedProblem::new(&x.rows(0, fit.end).into_owned(), PenalizedOptions::default())?)))
            .collect::<Result<Vec<_>>>()?;
        let mut fits = BTreeMap::new();
        for &i in &predictors {
            let y = origins
                .iter()
                .map(|&s| ctx.view.rv_day(i, s + 1)?.ok_or_else(|| Error::insufficient("missing target")))
                .collect::<Result<Vec<f64>>>()?;
            if let Some(fit) = keep_going(self.fit_firm(ctx, &x, &full, &folds, &y))? {
                fits.insert(i, fit);
            }
        }
        if fits.is_empty() {
            return Err(Error::Tuning("no firm produced a LASSO fit".into()));
        }
        Ok(Box::new(LassoFitted { origin: t, predictors, fits, row_cache: Mutex::new(None) }))
    }
}

/// Principal-component factor model on the 15:55 RV panel, optionally with
/// each firm's own HAR terms nested in the loading regression.
#[derive(Debug, Clone, Copy)]
pub struct PcaModel {
    pub k: usize,
    pub nested_har: bool,
}

impl ForecastModel for PcaModel {
    fn name(&self) -> &str {
        if self.nested_har {
            "pca_har"
        } else {
            "pca"
        }
    }

    fn fit(&self, ctx: &OriginContext) -> Result<Box<dyn FittedModel>> {
        let t = ctx.origin();
        let start = ctx.history_start();
        let h = t + 1 - start;
        let n = ctx.universe.len();
        if n <= self.k {
            return Err(Error::insufficient(format!("{n} firms for {} factors", self.k)));
        }
        let mut predictors = DMatrix::zeros(n, h);
        let mut responses = DMatrix::zeros(n, h);
        for (r, &f) in ctx.universe.iter().enumerate() {
            let p = ctx.view.rv_355_series(f, start..t + 1)?;
            let y = ctx.view.rv_day_series(f, start..t)?;
            for c in 0..h {
                predictors[(r, c)] = p[c];
            }
            for c in 0..h - 1 {
                responses[(r, c)] = y[c];
            }
        }
        let spec = FactorSpec {
            k: self.k,
            window: ctx.window.min(h),
            nested_har: self.nested_har,
            residual_forecast: true,
            force_zero_loadings: false,
            min_rows: ctx.min_fit_rows,
        };
        let data = FactorPanel { predictors: &predictors, responses: &responses, n_response_cols: h - 1 };
        let model = fit_factor_model(&spec, &data)?;
        let values = model.forecast(&data, None);
        Ok(Box::new(PerFirm(ctx.universe.iter().copied().zip(values).filter(|(_, v)| v.is_finite()).collect())))
    }
}
