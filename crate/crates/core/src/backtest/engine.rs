//! The walk-forward engine.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::path::Path;

use nalgebra::DMatrix;
use rayon::prelude::*;

use super::builtin::{HarModel, LassoModel, PcaModel, RollingSdModel};
use super::splits::{make_walkforward_splits, PresenceIndex};
use super::tuning::{tune_hyperparameters, TuningPolicy};
use super::view::FiltrationView;
use crate::error::{Error, Result};
use crate::models::{average_forecasts, egalitarian_combine, egalitarian_lambda_max, lambda_grid, ForecastSet, HAR_WARMUP};
use crate::panel_data::DailyPanel;
use crate::stamp::FiltrationStamp;
use crate::VARIANCE_FLOOR;

pub const BASE_MODELS: [&str; 5] = ["rolling_sd", "har", "lasso", "pca", "pca_har"];
pub const COMBINATION_MODELS: [&str; 3] = ["avg", "elasso", "pelasso"];

/// Everything a model may use at one forecast origin.
#[derive(Debug, Clone, Copy)]
pub struct OriginContext<'a> {
    pub view: FiltrationView<'a>,
    /// Estimation window W.
    pub window: usize,
    /// Firms present on every day of [t - W - 21, t].
    pub universe: &'a [usize],
    pub min_fit_rows: usize,
    pub tuning: &'a TuningPolicy,
}

impl OriginContext<'_> {
    pub fn origin(&self) -> usize {
        self.view.origin()
    }

    /// First date position of the balanced history window.
    pub fn history_start(&self) -> usize {
        self.origin().saturating_sub(self.window + HAR_WARMUP)
    }
}

/// A forecaster the engine can re-estimate at each origin.
pub trait ForecastModel: Send + Sync {
    fn name(&self) -> &str;

    /// Origins between re-estimations; coefficients are held in between.
    fn retrain_every(&self) -> usize {
        1
    }

    fn fit(&self, ctx: &OriginContext) -> Result<Box<dyn FittedModel>>;
}

/// Estimated state produced by [`ForecastModel::fit`].
pub trait FittedModel: Send + Sync {
    /// Whether the state can still be used at `ctx`'s origin; returning
    /// false forces a re-estimation.
    fn is_valid_for(&self, _ctx: &OriginContext) -> Result<bool> {
        Ok(true)
    }

    /// Variance forecast for the day after the origin. Errors other than
    /// leakage become gaps.
    fn forecast(&self, ctx: &OriginContext, firm: usize) -> Result<f64>;
}

#[derive(Debug, Clone, PartialEq)]
pub struct BacktestConfig {
    pub window_w: usize,
    pub models: Vec<String>,
    pub hyper_cv: TuningPolicy,
    pub rolling_window: usize,
    pub pca_k: usize,
    pub min_fit_rows: usize,
    pub penalized_retrain_every: usize,
    /// Per-model replacement for `window_w`.
    pub window_overrides: BTreeMap<String, usize>,
    /// Members of the combination models; defaults to every enabled base model.
    pub combination_members: Option<Vec<String>>,
}

impl Default for BacktestConfig {
    fn default() -> Self {
        BacktestConfig {
            window_w: 250,
            models: vec!["rolling_sd".into(), "har".into()],
            hyper_cv: TuningPolicy::default(),
            rolling_window: 22,
            pca_k: 3,
            min_fit_rows: crate::models::MIN_FIT_ROWS,
            penalized_retrain_every: 20,
            window_overrides: BTreeMap::new(),
            combination_members: None,
        }
    }
}

pub fn valid_model_names() -> String {
    BASE_MODELS.iter().chain(COMBINATION_MODELS.iter()).copied().collect::<Vec<_>>().join(", ")
}

impl BacktestConfig {
    pub fn window_for(&self, model: &str) -> usize {
        self.window_overrides.get(model).copied().unwrap_or(self.window_w)
    }

    pub fn validate(&self) -> Result<()> {
        if self.models.is_empty() {
            return Err(Error::config("no models selected"));
        }
        for m in self.models.iter().chain(self.window_overrides.keys()) {
            if !BASE_MODELS.contains(&m.as_str()) && !COMBINATION_MODELS.contains(&m.as_str()) {
                return Err(Error::Usage(format!("unknown model '{m}'; valid models: {}", valid_model_names())));
            }
        }
        let mut seen = std::collections::BTreeSet::new();
        if let Some(m) = self.models.iter().find(|m| !seen.insert(m.as_str())) {
            return Err(Error::config(format!("model '{m}' listed twice")));
        }
        for m in &self.models {
            if self.window_for(m) < self.min_fit_rows.max(2) {
                return Err(Error::config(format!(
                    "window {} for {m} is below the minimum fit rows {}",
                    self.window_for(m),
                    self.min_fit_rows
                )));
            }
        }
        if self.rolling_window == 0 || self.pca_k == 0 || self.penalized_retrain_every == 0 {
            return Err(Error::config("rolling_window, pca_k and penalized_retrain_every must be positive"));
        }
        self.hyper_cv.validate()?;
        if self.models.iter().any(|m| COMBINATION_MODELS.contains(&m.as_str())) {
            let members = self.members();
            if members.len() < 1 {
                return Err(Error::config("combination models need at least one base model"));
            }
            for m in &members {
                if !self.models.contains(m) || !BASE_MODELS.contains(&m.as_str()) {
                    return Err(Error::config(format!("combination member '{m}' is not an enabled base model")));
                }
            }
        }
        Ok(())
    }

    pub fn members(&self) -> Vec<String> {
        self.combination_members.clone().unwrap_or_else(|| {
            self.models.iter().filter(|m| BASE_MODELS.contains(&m.as_str())).cloned().collect()
        })
    }

    /// Built-in model objects for the enabled base models.
    pub fn build_models(&self) -> Vec<Box<dyn ForecastModel>> {
        self.models
            .iter()
            .filter_map(|m| -> Option<Box<dyn ForecastModel>> {
                match m.as_str() {
                    "rolling_sd" => Some(Box::new(RollingSdModel { window: self.rolling_window })),
                    "har" => Some(Box::new(HarModel)),
                    "lasso" => Some(Box::new(LassoModel { retrain_every: self.penalized_retrain_every })),
                    "pca" => Some(Box::new(PcaModel { k: self.pca_k, nested_har: false })),
                    "pca_har" => Some(Box::new(PcaModel { k: self.pca_k, nested_har: true })),
                    _ => None,
                }
            })
            .collect()
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct BacktestResult {
    pub forecasts: ForecastSet,
    /// Firm-origins in the universe without a forecast, per model.
    pub gaps: BTreeMap<String, usize>,
    /// Firm-origins in the universe, per model.
    pub attempted: BTreeMap<String, usize>,
    /// Weights from the last estimation of each egalitarian combination.
    pub combination_weights: BTreeMap<String, Vec<(String, f64)>>,
}

/// Forecasts of one model: (firm, origin) -> value.
type ModelOutput = (BTreeMap<(usize, usize), f64>, usize);

struct Shared<'a> {
    panel: &'a DailyPanel,
    presence: PresenceIndex,
    origins: Vec<usize>,
    config: &'a BacktestConfig,
}

impl Shared<'_> {
    fn universe(&self, origin: usize, window: usize) -> Vec<usize> {
        let start = origin.saturating_sub(window + HAR_WARMUP);
        (0..self.panel.n_firms()).filter(|&f| self.presence.balanced(f, start..=origin)).collect()
    }
}

fn forecast_universe(
    fitted: &dyn FittedModel,
    ctx: &OriginContext,
    out: &mut BTreeMap<(usize, usize), f64>,
) -> Result<()> {
    for &f in ctx.universe {
        match fitted.forecast(ctx, f) {
            Ok(v) if v.is_finite() => {
                out.insert((f, ctx.origin()), v.max(VARIANCE_FLOOR));
            }
            Ok(_) => {}
            Err(e @ Error::Leakage(_)) => return Err(e),
            Err(_) => {}
        }
    }
    Ok(())
}

fn run_model(shared: &Shared, model: &dyn ForecastModel) -> Result<ModelOutput> {
    let window = shared.config.window_for(model.name());
    let min_rows = shared.config.min_fit_rows;
    let tuning = &shared.config.hyper_cv;
    let one_origin = |t: usize, universe: &[usize]| -> Result<BTreeMap<(usize, usize), f64>> {
        let ctx = OriginContext { view: FiltrationView::new(shared.panel, t), window, universe, min_fit_rows: min_rows, tuning };
        let mut out = BTreeMap::new();
        match model.fit(&ctx) {
            Ok(fitted) => forecast_universe(fitted.as_ref(), &ctx, &mut out)?,
            Err(e @ Error::Leakage(_)) => return Err(e),
            Err(_) => {}
        }
        Ok(out)
    };
    let retrain = model.retrain_every().max(1);
    let mut out = BTreeMap::new();
    let mut attempted = 0;
    if retrain == 1 {
        let parts: Vec<Result<(usize, BTreeMap<(usize, usize), f64>)>> = shared
            .origins
            .par_iter()
            .map(|&t| {
                let universe = shared.universe(t, window);
                Ok((universe.len(), one_origin(t, &universe)?))
            })
            .collect();
        for p in parts {
            let (n, m) = p?;
            attempted += n;
            out.extend(m);
        }
        return Ok((out, attempted));
    }
    let mut state: Option<(usize, Box<dyn FittedModel>)> = None;
    for &t in &shared.origins {
        let universe = shared.universe(t, window);
        attempted += universe.len();
        if universe.is_empty() {
            continue;
        }
        let ctx = OriginContext {
            view: FiltrationView::new(shared.panel, t),
            window,
            universe: &universe,
            min_fit_rows: min_rows,
            tuning,
        };
        let reuse = match &state {
            Some((t0, fitted)) if t - t0 < retrain => fitted.is_valid_for(&ctx)?,
            _ => false,
        };
        if !reuse {
            state = match model.fit(&ctx) {
                Ok(f) => Some((t, f)),
                Err(e @ Error::Leakage(_)) => return Err(e),
                Err(_) => None,
            };
        }
        if let Some((_, fitted)) = &state {
            forecast_universe(fitted.as_ref(), &ctx, &mut out)?;
        }
    }
    Ok((out, attempted))
}

/// Combination forecasts built from member forecasts.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CombinationKind {
    Average,
    Egalitarian,
    PartialEgalitarian,
}

impl CombinationKind {
    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "avg" => Some(CombinationKind::Average),
            "elasso" => Some(CombinationKind::Egalitarian),
            "pelasso" => Some(CombinationKind::PartialEgalitarian),
            _ => None,
        }
    }
}

type MemberForecasts<'a> = Vec<&'a BTreeMap<(usize, usize), f64>>;

/// Member forecasts for (firm, target position) made at the previous origin.
fn member_values(members: &MemberForecasts, firm: usize, origin: usize) -> Vec<Option<f64>> {
    members.iter().map(|m| m.get(&(firm, origin)).copied()).collect()
}

fn run_combination(
    shared: &Shared,
    kind: CombinationKind,
    members: &MemberForecasts,
    member_names: &[String],
) -> Result<(ModelOutput, Option<Vec<(String, f64)>>)> {
    let window = shared.config.window_w;
    let mut out = BTreeMap::new();
    let mut attempted = 0;
    let mut weights: Option<(usize, Vec<f64>)> = None;
    let retrain = shared.config.penalized_retrain_every;
    for &t in &shared.origins {
        let universe = shared.universe(t, window);
        attempted += universe.len();
        if kind == CombinationKind::Average {
            for &f in &universe {
                if let Ok(v) = average_forecasts(&member_values(members, f, t)) {
                    out.insert((f, t), v.max(VARIANCE_FLOOR));
                }
            }
            continue;
        }
        let view = FiltrationView::new(shared.panel, t);
        if weights.as_ref().is_none_or(|(t0, _)| t - t0 >= retrain) {
            weights = estimate_egalitarian(shared, &view, kind, members, window)?.map(|w| (t, w));
        }
        let Some((_, w)) = &weights else { continue };
        for &f in &universe {
            let vals = member_values(members, f, t);
            let needed = w.iter().zip(&vals).all(|(wk, v)| *wk == 0.0 || v.is_some());
            if needed {
                let v: f64 = w.iter().zip(&vals).map(|(wk, v)| wk * v.unwrap_or(0.0)).sum();
                if v.is_finite() {
                    out.insert((f, t), v.max(VARIANCE_FLOOR));
                }
            }
        }
    }
    let final_weights = weights.map(|(_, w)| member_names.iter().cloned().zip(w).collect());
    Ok(((out, attempted), final_weights))
}

/// Pooled trailing history of (member forecasts, realized rv_day) for
/// targets in [t - W + 1, t - 1], ordered by date then firm.
fn estimate_egalitarian(
    shared: &Shared,
    view: &FiltrationView,
    kind: CombinationKind,
    members: &MemberForecasts,
    window: usize,
) -> Result<Option<Vec<f64>>> {
    let t = view.origin();
    let k = members.len();
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut realized = Vec::new();
    for target in (t + 1).saturating_sub(window).max(1)..t {
        for f in 0..shared.panel.n_firms() {
            let vals = member_values(members, f, target - 1);
            if vals.iter().any(Option::is_none) {
                continue;
            }
            if let Some(y) = view.rv_day(f, target)? {
                rows.push(vals.into_iter().flatten().collect());
                realized.push(y);
            }
        }
    }
    if rows.len() < shared.config.min_fit_rows.max(k + 1) {
        return Ok(None);
    }
    let x = DMatrix::from_fn(rows.len(), k, |i, j| rows[i][j]);
    let partial = kind == CombinationKind::PartialEgalitarian;
    let lmax = egalitarian_lambda_max(&x, &realized);
    let grid = if lmax > 0.0 {
        lambda_grid(lmax, shared.config.hyper_cv.grid_size, shared.config.hyper_cv.grid_ratio)
    } else {
        vec![0.0]
    };
    let policy = &shared.config.hyper_cv;
    let lambda = tune_hyperparameters(rows.len(), &grid, policy, |&l, fit, val| {
        let xf = x.rows(fit.start, fit.len()).into_owned();
        let w = egalitarian_combine(&xf, &realized[fit.clone()], l, partial)?;
        let loss: f64 = val
            .clone()
            .map(|i| policy.loss.score(realized[i], w.combine(&rows[i]).max(VARIANCE_FLOOR)))
            .sum();
        Ok(loss / val.len() as f64)
    });
    let lambda = match lambda {
        Ok(l) => l,
        Err(e @ Error::Leakage(_)) => return Err(e),
        Err(_) => return Ok(None),
    };
    Ok(egalitarian_combine(&x, &realized, lambda, partial).ok().map(|w| w.weights))
}

/// Runs the built-in models named in `config`.
pub fn run_backtest(panel: &DailyPanel, config: &BacktestConfig) -> Result<BacktestResult> {
    config.validate()?;
    run_backtest_with(panel, config, config.build_models())
}

/// Runs `models` (plus any combination models named in `config`) over every
/// walk-forward origin. Leakage aborts the run; other model failures are
/// recorded as gaps.
pub fn run_backtest_with(
    panel: &DailyPanel,
    config: &BacktestConfig,
    models: Vec<Box<dyn ForecastModel>>,
) -> Result<BacktestResult> {
    if models.is_empty() {
        return Err(Error::config("no base models to run"));
    }
    let max_window = models.iter().map(|m| config.window_for(m.name())).chain([config.window_w]).max().unwrap_or(0);
    let splits = make_walkforward_splits(panel.dates(), max_window)?;
    let shared = Shared {
        panel,
        presence: PresenceIndex::new(panel),
        origins: splits.iter().map(|s| s.origin).collect(),
        config,
    };
    let outputs: Vec<Result<ModelOutput>> = models.par_iter().map(|m| run_model(&shared, m.as_ref())).collect();
    let mut per_model: Vec<(String, ModelOutput)> = Vec::new();
    for (m, o) in models.iter().zip(outputs) {
        per_model.push((m.name().to_string(), o?));
    }

    let mut combination_weights = BTreeMap::new();
    let combos: Vec<(&String, CombinationKind)> =
        config.models.iter().filter_map(|m| CombinationKind::from_name(m).map(|k| (m, k))).collect();
    if !combos.is_empty() {
        let names = config.members();
        let index: HashMap<&str, usize> = per_model.iter().enumerate().map(|(i, (n, _))| (n.as_str(), i)).collect();
        let members: MemberForecasts = names
            .iter()
            .map(|n| index.get(n.as_str()).map(|&i| &per_model[i].1 .0))
            .collect::<Option<_>>()
            .ok_or_else(|| Error::config("combination member was not run"))?;
        let mut combined = Vec::new();
        for (name, kind) in combos {
            let (o, w) = run_combination(&shared, kind, &members, &names)?;
            if let Some(w) = w {
                combination_weights.insert(name.clone(), w);
            }
            combined.push((name.clone(), o));
        }
        per_model.extend(combined);
    }

    let mut result = BacktestResult { combination_weights, ..Default::default() };
    let dates = panel.dates();
    for (name, (values, attempted)) in per_model {
        result.gaps.insert(name.clone(), attempted - values.len());
        result.attempted.insert(name.clone(), attempted);
        for ((f, t), v) in values {
            result.forecasts.insert(&name, panel.firms()[f].clone(), dates[t + 1], v, FiltrationStamp::predictor(dates[t]))?;
        }
    }
    if result.forecasts.is_empty() {
        return Err(Error::Backtest("no forecasts were produced".into()));
    }
    Ok(result)
}

/// Plain-text run manifest: config echo, model list and per-model gap counts.
pub fn write_run_manifest(
    path: impl AsRef<Path>,
    config: &BacktestConfig,
    result: &BacktestResult,
    extra: &[(&str, String)],
) -> Result<()> {
    let mut s = String::new();
    for (k, v) in extra {
        let _ = writeln!(s, "{k}={v}");
    }
    let _ = writeln!(s, "window_w={}", config.window_w);
    let _ = writeln!(s, "models={}", config.models.join(","));
    let _ = writeln!(s, "rolling_window={}", config.rolling_window);
    let _ = writeln!(s, "pca_k={}", config.pca_k);
    let _ = writeln!(s, "min_fit_rows={}", config.min_fit_rows);
    let _ = writeln!(s, "penalized_retrain_every={}", config.penalized_retrain_every);
    let _ = writeln!(s, "cv_folds={}", config.hyper_cv.folds);
    let _ = writeln!(s, "cv_grid_size={}", config.hyper_cv.grid_size);
    let _ = writeln!(s, "cv_grid_ratio={}", config.hyper_cv.grid_ratio);
    let _ = writeln!(s, "cv_loss={:?}", config.hyper_cv.loss);
    for (m, w) in &config.window_overrides {
        let _ = writeln!(s, "window_override.{m}={w}");
    }
    for (m, g) in &result.gaps {
        let _ = writeln!(
            s,
            "model.{m}: forecasts={} gaps={} attempted={}",
            result.attempted[m] - g,
            g,
            result.attempted[m]
        );
    }
    std::fs::write(path, s)?;
    Ok(())
}
