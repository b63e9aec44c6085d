//! Batch command-line front end.
//!
//! Each subcommand reads CSV inputs, writes CSV artifacts and a
//! `manifest_<stage>.txt` into `--out-dir`, and logs one line per event with
//! a `key=value` tail. Settings come from flags, then `--config`, then
//! defaults. Usage errors exit with status 2, data errors with status 1.

mod settings;

use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::PathBuf;

use chrono::NaiveDate;
use clap::{Args, Parser, Subcommand};

pub use settings::Settings;

use crate::backtest::{run_backtest, write_run_manifest, BacktestConfig, TuningPolicy, ValidationLoss};
use crate::error::{Error, Result};
use crate::eval::{aggregate_panel_errors, realized_from_panel, score_forecasts, summary_statistics, Aggregation, ErrorReport};
use crate::models::{load_forecasts_csv, write_combination_weights_csv, write_forecasts_csv};
use crate::options::{
    build_straddle_returns, load_quotes_csv, load_straddle_returns_csv, sort_portfolios, vrp_sort_observations,
    write_quotes_csv, write_straddle_returns_csv, VrpForm,
};
use crate::panel_data::{
    load_panel_csv, load_prints_csv, load_ranges_csv, load_truth_csv, panel_from_prints, simulate_panel,
    write_panel_csv, write_prints_csv, write_ranges_csv, write_truth_csv, OptionSimConfig, SimConfig,
};

#[derive(Debug, Parser)]
#[command(name = "rvforecast", version, about = "Realized variance forecasting and straddle portfolio backtests")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    /// Plain-text key=value settings; flags override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Directory for every artifact this command writes.
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Simulate prints, a daily panel, true variances and option quotes.
    Simulate(SimulateArgs),
    /// Rebuild the daily panel from raw prints.
    ComputeRv(ComputeRvArgs),
    /// Walk-forward forecasts for the selected models.
    Backtest(BacktestArgs),
    /// Score forecasts against realized or true variance.
    Evaluate(EvaluateArgs),
    /// Filter quotes and compute daily delta-neutral straddle returns.
    Straddles(StraddlesArgs),
    /// Sort straddle returns into portfolios on the volatility spread.
    Sort(SortArgs),
    /// Summary statistics of the panel plus any error and sort reports.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
struct SimulateArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    firms: Option<usize>,
    #[arg(long)]
    days: Option<usize>,
    /// Skip writing raw prints.
    #[arg(long)]
    no_prints: bool,
    /// Skip the option quote feed.
    #[arg(long)]
    no_options: bool,
}

#[derive(Debug, Args)]
struct ComputeRvArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    prints: Option<PathBuf>,
    /// Daily high/low file used by the range filter.
    #[arg(long)]
    ranges: Option<PathBuf>,
    #[arg(long)]
    interval_minutes: Option<u32>,
}

#[derive(Debug, Args)]
struct BacktestArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    panel: Option<PathBuf>,
    /// Comma-separated model names.
    #[arg(long)]
    models: Option<String>,
    /// Estimation window in days.
    #[arg(long)]
    window: Option<usize>,
    #[arg(long)]
    rolling_window: Option<usize>,
    #[arg(long)]
    pca_k: Option<usize>,
    #[arg(long)]
    min_fit_rows: Option<usize>,
    #[arg(long)]
    retrain_every: Option<usize>,
    #[arg(long)]
    cv_folds: Option<usize>,
    #[arg(long)]
    cv_grid_size: Option<usize>,
    #[arg(long)]
    cv_grid_ratio: Option<f64>,
    /// mse or qlike.
    #[arg(long)]
    cv_loss: Option<String>,
    /// Comma-separated members of the combination models.
    #[arg(long)]
    members: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Debug, Args)]
struct EvaluateArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    forecasts: Option<PathBuf>,
    /// Score against this truth file instead of the panel's realized variance.
    #[arg(long)]
    truth: Option<PathBuf>,
    #[arg(long)]
    panel: Option<PathBuf>,
    /// average_firm, average_cross_section, pooled or all.
    #[arg(long)]
    aggregation: Option<String>,
}

#[derive(Debug, Args)]
struct StraddlesArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    quotes: Option<PathBuf>,
    /// Risk-free rate per calendar day.
    #[arg(long)]
    rf: Option<f64>,
}

#[derive(Debug, Args)]
struct SortArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    straddles: Option<PathBuf>,
    #[arg(long)]
    forecasts: Option<PathBuf>,
    /// Forecast model supplying the signal.
    #[arg(long)]
    model: Option<String>,
    /// difference, ratio or log_ratio.
    #[arg(long)]
    form: Option<String>,
    #[arg(long)]
    bins: Option<usize>,
}

#[derive(Debug, Args)]
struct ReportArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    panel: Option<PathBuf>,
}

fn log(event: &str, fields: &[(&str, String)]) {
    let mut line = event.to_string();
    for (k, v) in fields {
        let _ = write!(line, " {k}={v}");
    }
    println!("{line}");
}

/// Output directory and settings shared by every command.
struct Stage {
    out_dir: PathBuf,
    settings: Settings,
    manifest: Vec<(String, String)>,
    name: &'static str,
}

impl Stage {
    fn new(name: &'static str, common: &Common, keys: &[&str]) -> Result<Self> {
        let settings = Settings::load(common.config.as_deref())?;
        let mut allowed = vec!["out_dir"];
        allowed.extend_from_slice(keys);
        settings.check_keys(&allowed)?;
        let out_dir = settings.pick_path(common.out_dir.clone(), "out_dir").unwrap_or_else(|| PathBuf::from("out"));
        Ok(Stage { out_dir, settings, manifest: vec![("stage".into(), name.into())], name })
    }

    /// An input path: the flag, the config key, or `default` in the output directory.
    fn input(&self, flag: &Option<PathBuf>, key: &str, default: &str) -> PathBuf {
        self.settings.pick_path(flag.clone(), key).unwrap_or_else(|| self.out_dir.join(default))
    }

    fn output(&mut self, name: &str) -> Result<PathBuf> {
        std::fs::create_dir_all(&self.out_dir)?;
        let path = self.out_dir.join(name);
        self.manifest.push(("output".into(), path.display().to_string()));
        Ok(path)
    }

    fn note(&mut self, key: &str, value: impl ToString) {
        self.manifest.push((key.into(), value.to_string()));
    }

    fn finish(mut self) -> Result<()> {
        let path = self.output(&format!("manifest_{}.txt", self.name))?;
        let mut text = String::new();
        for (k, v) in &self.manifest {
            let _ = writeln!(text, "{k}={v}");
        }
        std::fs::write(&path, text)?;
        log("done", &[("stage", self.name.into()), ("manifest", path.display().to_string())]);
        Ok(())
    }
}

fn parse_list(s: &str) -> Vec<String> {
    s.split(',').map(str::trim).filter(|s| !s.is_empty()).map(String::from).collect()
}

const SIM_KEYS: [&str; 21] = [
    "seed",
    "firms",
    "days",
    "factors",
    "vol_of_vol",
    "leverage_rho",
    "mean_daily_var",
    "persistence",
    "factor_share",
    "firm_dispersion",
    "intervals_per_day",
    "turnover",
    "start_date",
    "prints",
    "options",
    "iv_bias",
    "iv_noise",
    "spread_frac",
    "n_strikes",
    "strike_step_frac",
    "expiry_cycle",
];

fn simulate(args: SimulateArgs) -> Result<()> {
    let mut stage = Stage::new("simulate", &args.common, &SIM_KEYS)?;
    let s = &stage.settings;
    let d = SimConfig::default();
    let o = OptionSimConfig::default();
    let options = s.pick(args.no_options.then_some(false), "options", true)?;
    let config = SimConfig {
        n_firms: s.pick(args.firms, "firms", d.n_firms)?,
        n_days: s.pick(args.days, "days", d.n_days)?,
        seed: s.pick(args.seed, "seed", d.seed)?,
        k_common_factors: s.pick(None, "factors", d.k_common_factors)?,
        vol_of_vol: s.pick(None, "vol_of_vol", d.vol_of_vol)?,
        leverage_rho: s.pick(None, "leverage_rho", d.leverage_rho)?,
        mean_daily_var: s.pick(None, "mean_daily_var", d.mean_daily_var)?,
        persistence: s.pick(None, "persistence", d.persistence)?,
        factor_share: s.pick(None, "factor_share", d.factor_share)?,
        firm_dispersion: s.pick(None, "firm_dispersion", d.firm_dispersion)?,
        intervals_per_day: s.pick(None, "intervals_per_day", d.intervals_per_day)?,
        turnover: s.pick(None, "turnover", d.turnover)?,
        start_date: s.pick::<NaiveDate>(None, "start_date", d.start_date)?,
        emit_prints: s.pick(args.no_prints.then_some(false), "prints", true)?,
        options: options
            .then(|| -> Result<OptionSimConfig> {
                Ok(OptionSimConfig {
                    iv_bias: s.pick(None, "iv_bias", o.iv_bias)?,
                    iv_noise: s.pick(None, "iv_noise", o.iv_noise)?,
                    spread_frac: s.pick(None, "spread_frac", o.spread_frac)?,
                    n_strikes: s.pick(None, "n_strikes", o.n_strikes)?,
                    strike_step_frac: s.pick(None, "strike_step_frac", o.strike_step_frac)?,
                    expiry_cycle: s.pick(None, "expiry_cycle", o.expiry_cycle)?,
                })
            })
            .transpose()?,
    };
    config.validate()?;
    let out = simulate_panel(&config)?;
    stage.note("seed", config.seed);
    stage.note("firms", config.n_firms);
    stage.note("days", config.n_days);
    let path = stage.output("panel.csv")?;
    write_panel_csv(&out.panel, &path)?;
    log("wrote", &[("file", path.display().to_string()), ("rows", out.panel.len().to_string())]);
    let path = stage.output("truth.csv")?;
    write_truth_csv(&out.truth, &path)?;
    log("wrote", &[("file", path.display().to_string()), ("rows", out.truth.len().to_string())]);
    let path = stage.output("ranges.csv")?;
    write_ranges_csv(&out.ranges, &path)?;
    if let Some(prints) = &out.prints {
        let path = stage.output("prints.csv")?;
        write_prints_csv(prints, &path)?;
        log("wrote", &[("file", path.display().to_string()), ("rows", prints.len().to_string())]);
    }
    if config.options.is_some() {
        let path = stage.output("quotes.csv")?;
        write_quotes_csv(&out.quotes, &path)?;
        log("wrote", &[("file", path.display().to_string()), ("rows", out.quotes.len().to_string())]);
    }
    stage.finish()
}

fn compute_rv(args: ComputeRvArgs) -> Result<()> {
    let mut stage = Stage::new("compute_rv", &args.common, &["prints", "ranges", "interval_minutes"])?;
    let minutes = stage.settings.pick(args.interval_minutes, "interval_minutes", 5u32)?;
    if minutes == 0 || 390 % minutes != 0 {
        return Err(Error::Usage(format!("interval_minutes {minutes} must divide the 390-minute session")));
    }
    let prints_path = stage.input(&args.prints, "prints", "prints.csv");
    let ranges_path = stage.settings.pick_path(args.ranges.clone(), "ranges").or_else(|| {
        let p = stage.out_dir.join("ranges.csv");
        p.exists().then_some(p)
    });
    let prints = load_prints_csv(&prints_path)?;
    let ranges = match &ranges_path {
        Some(p) => load_ranges_csv(p)?,
        None => Default::default(),
    };
    let built = panel_from_prints(&prints, &ranges, minutes)?;
    for (firm, date, why) in &built.failures {
        log("skipped", &[("firm_id", firm.to_string()), ("date", date.to_string()), ("reason", format!("{why:?}"))]);
    }
    stage.note("prints", prints_path.display());
    stage.note("ranges", ranges_path.map_or("none".into(), |p| p.display().to_string()));
    stage.note("interval_minutes", minutes);
    stage.note("skipped_firm_days", built.failures.len());
    let path = stage.output("panel.csv")?;
    write_panel_csv(&built.panel, &path)?;
    log("wrote", &[("file", path.display().to_string()), ("rows", built.panel.len().to_string())]);
    stage.finish()
}

const BACKTEST_KEYS: [&str; 14] = [
    "panel",
    "models",
    "window",
    "rolling_window",
    "pca_k",
    "min_fit_rows",
    "retrain_every",
    "cv_folds",
    "cv_grid_size",
    "cv_grid_ratio",
    "cv_loss",
    "members",
    "seed",
    "window_overrides",
];

fn backtest(args: BacktestArgs) -> Result<()> {
    let mut stage = Stage::new("backtest", &args.common, &BACKTEST_KEYS)?;
    let s = &stage.settings;
    let d = BacktestConfig::default();
    let p = TuningPolicy::default();
    let loss = match s.pick(args.cv_loss.clone(), "cv_loss", "mse".to_string())?.as_str() {
        "mse" => ValidationLoss::Mse,
        "qlike" => ValidationLoss::Qlike,
        other => return Err(Error::Usage(format!("unknown cv_loss '{other}'; use mse or qlike"))),
    };
    let mut window_overrides = std::collections::BTreeMap::new();
    if let Some(spec) = s.pick_opt::<String>(None, "window_overrides")? {
        for item in parse_list(&spec) {
            let (m, w) = item
                .split_once(':')
                .ok_or_else(|| Error::Usage(format!("window override '{item}' should be model:days")))?;
            let w = w.parse().map_err(|_| Error::Usage(format!("bad window in override '{item}'")))?;
            window_overrides.insert(m.to_string(), w);
        }
    }
    let config = BacktestConfig {
        window_w: s.pick(args.window, "window", d.window_w)?,
        models: parse_list(&s.pick(args.models.clone(), "models", "rolling_sd,har,avg".to_string())?),
        hyper_cv: TuningPolicy {
            folds: s.pick(args.cv_folds, "cv_folds", p.folds)?,
            loss,
            grid_size: s.pick(args.cv_grid_size, "cv_grid_size", p.grid_size)?,
            grid_ratio: s.pick(args.cv_grid_ratio, "cv_grid_ratio", p.grid_ratio)?,
        },
        rolling_window: s.pick(args.rolling_window, "rolling_window", d.rolling_window)?,
        pca_k: s.pick(args.pca_k, "pca_k", d.pca_k)?,
        min_fit_rows: s.pick(args.min_fit_rows, "min_fit_rows", d.min_fit_rows)?,
        penalized_retrain_every: s.pick(args.retrain_every, "retrain_every", d.penalized_retrain_every)?,
        window_overrides,
        combination_members: s.pick_opt(args.members.clone(), "members")?.map(|m: String| parse_list(&m)),
    };
    let seed = s.pick(args.seed, "seed", 0u64)?;
    config.validate()?;
    let panel_path = stage.input(&args.panel, "panel", "panel.csv");
    let panel = load_panel_csv(&panel_path)?;
    log("loaded", &[("file", panel_path.display().to_string()), ("firms", panel.n_firms().to_string()), ("dates", panel.n_dates().to_string())]);
    let result = run_backtest(&panel, &config)?;
    for (m, g) in &result.gaps {
        log("model", &[("name", m.clone()), ("forecasts", (result.attempted[m] - g).to_string()), ("gaps", g.to_string())]);
    }
    let path = stage.output("forecasts.csv")?;
    write_forecasts_csv(&result.forecasts, &path)?;
    log("wrote", &[("file", path.display().to_string()), ("rows", result.forecasts.len().to_string())]);
    for (m, w) in &result.combination_weights {
        let path = stage.output(&format!("combination_weights_{m}.csv"))?;
        write_combination_weights_csv(w, &path)?;
    }
    let path = stage.output("manifest_backtest_run.txt")?;
    write_run_manifest(&path, &config, &result, &[("seed", seed.to_string()), ("panel", panel_path.display().to_string())])?;
    stage.note("seed", seed);
    stage.note("panel", panel_path.display());
    stage.finish()
}

fn evaluate(args: EvaluateArgs) -> Result<()> {
    let mut stage = Stage::new("evaluate", &args.common, &["forecasts", "truth", "panel", "aggregation"])?;
    let schemes = match stage.settings.pick(args.aggregation.clone(), "aggregation", "all".to_string())?.as_str() {
        "all" => Aggregation::ALL.to_vec(),
        one => vec![one.parse::<Aggregation>()?],
    };
    let forecasts_path = stage.input(&args.forecasts, "forecasts", "forecasts.csv");
    let forecasts = load_forecasts_csv(&forecasts_path)?;
    let (realized, source) = match stage.settings.pick_path(args.truth.clone(), "truth") {
        Some(t) => (load_truth_csv(&t)?, t),
        None => {
            let p = stage.input(&args.panel, "panel", "panel.csv");
            (realized_from_panel(&load_panel_csv(&p)?), p)
        }
    };
    let cells = score_forecasts(&forecasts, &realized);
    let mut report = ErrorReport::default();
    for scheme in schemes {
        report.rows.extend(aggregate_panel_errors(&cells, scheme)?.rows);
    }
    for r in &report.rows {
        log("score", &[
            ("model", r.model.clone()),
            ("aggregation", r.aggregation.to_string()),
            ("rmse", r.rmse.to_string()),
            ("qlike", r.qlike.to_string()),
        ]);
    }
    stage.note("forecasts", forecasts_path.display());
    stage.note("realized", source.display());
    stage.note("cells", cells.len());
    let path = stage.output("errors.csv")?;
    report.write_csv(&path)?;
    log("wrote", &[("file", path.display().to_string()), ("rows", report.rows.len().to_string())]);
    stage.finish()
}

fn straddles(args: StraddlesArgs) -> Result<()> {
    let mut stage = Stage::new("straddles", &args.common, &["quotes", "rf"])?;
    let rf = stage.settings.pick(args.rf, "rf", 0.0)?;
    if !rf.is_finite() {
        return Err(Error::Usage("rf must be finite".into()));
    }
    let quotes_path = stage.input(&args.quotes, "quotes", "quotes.csv");
    let quotes = load_quotes_csv(&quotes_path)?;
    let book = build_straddle_returns(&quotes, rf);
    stage.note("quotes", quotes_path.display());
    stage.note("rf_per_calendar_day", rf);
    for (reason, n) in &book.rejected_quotes {
        stage.note(&format!("rejected.{}", reason.code()), n);
    }
    for (skip, n) in &book.skipped {
        stage.note(&format!("skipped.{}", skip.code()), n);
    }
    stage.note("rejected.REVERSAL", book.reversals);
    let path = stage.output("straddles.csv")?;
    write_straddle_returns_csv(&book.returns, &path)?;
    log("wrote", &[("file", path.display().to_string()), ("rows", book.returns.len().to_string())]);
    stage.finish()
}

fn sort(args: SortArgs) -> Result<()> {
    let mut stage = Stage::new("sort", &args.common, &["straddles", "forecasts", "model", "form", "bins"])?;
    let model = stage.settings.pick(args.model.clone(), "model", "har".to_string())?;
    let form: VrpForm = stage.settings.pick(args.form.clone(), "form", "log_ratio".to_string())?.parse()?;
    let bins = stage.settings.pick(args.bins, "bins", 5usize)?;
    if bins < 2 {
        return Err(Error::Usage("bins must be at least 2".into()));
    }
    let straddles = load_straddle_returns_csv(stage.input(&args.straddles, "straddles", "straddles.csv"))?;
    let forecasts = load_forecasts_csv(stage.input(&args.forecasts, "forecasts", "forecasts.csv"))?;
    if !forecasts.models().contains(&model) {
        return Err(Error::Usage(format!("no forecasts for model '{model}'; available: {}", forecasts.models().join(", "))));
    }
    let (obs, missing) = vrp_sort_observations(&straddles, &forecasts, &model, form)?;
    let report = sort_portfolios(&obs, bins)?;
    stage.note("model", &model);
    stage.note("form", form.name());
    stage.note("bins", bins);
    stage.note("straddles_without_signal", missing);
    stage.note("skipped_dates", report.skipped.len());
    if let Some((_, Ok(hml))) = report.stats().last() {
        log("hml", &[("mean", hml.mean.to_string()), ("sharpe", hml.sharpe.to_string()), ("t_stat", hml.t_stat.to_string())]);
    }
    let path = stage.output("sort_report.csv")?;
    report.write_csv(&path)?;
    log("wrote", &[("file", path.display().to_string()), ("rows", report.dates.len().to_string())]);
    stage.finish()
}

fn report(args: ReportArgs) -> Result<()> {
    let mut stage = Stage::new("report", &args.common, &["panel"])?;
    let panel_path = stage.input(&args.panel, "panel", "panel.csv");
    let table = summary_statistics(&load_panel_csv(&panel_path)?)?;
    let path = stage.output("summary_stats.csv")?;
    std::fs::write(&path, table.to_string())?;
    let mut text = format!("# summary statistics\n{table}");
    for name in ["errors.csv", "sort_report.csv"] {
        let p = stage.out_dir.join(name);
        if let Ok(body) = std::fs::read_to_string(&p) {
            let body: String = if name == "sort_report.csv" {
                body.lines().filter(|l| l.starts_with('#')).map(|l| format!("{l}\n")).collect()
            } else {
                body
            };
            let _ = write!(text, "\n# {name}\n{body}");
            stage.note("included", p.display());
        }
    }
    let path = stage.output("report.txt")?;
    std::fs::write(&path, text)?;
    log("wrote", &[("file", path.display().to_string())]);
    stage.finish()
}

fn execute(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate(a) => simulate(a),
        Command::ComputeRv(a) => compute_rv(a),
        Command::Backtest(a) => backtest(a),
        Command::Evaluate(a) => evaluate(a),
        Command::Straddles(a) => straddles(a),
        Command::Sort(a) => sort(a),
        Command::Report(a) => report(a),
    }
}

/// Exit status for an error: 2 for usage problems, 1 otherwise.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Usage(_) => 2,
        _ => 1,
    }
}

/// Parses `args` (including the program name), runs the command and returns
/// the process exit status.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match execute(cli) {
        Ok(()) => 0,
        Err(e) => {
            let code = exit_code(&e);
            eprintln!("error: {} status={code}", e.to_string().replace('\n', " "));
            code
        }
    }
}


