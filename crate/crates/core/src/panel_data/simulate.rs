//! Deterministic stochastic-volatility panel simulator.
//!
//! Log daily variance of firm i on day t is
//! `mu_i + vol_of_vol * (sqrt(s) * b_i . f_t + sqrt(1 - s) * u_it)`, where the
//! K common factors `f` and the idiosyncratic parts `u` are unit-variance AR(1)
//! processes. Shocks to next-day variance load on the day's standardized
//! return with correlation `leverage_rho` (the first factor loads on the
//! cross-sectional average shock). Within a day the price follows a GBM with
//! constant variance, so the day's true integrated variance is exactly the
//! day's variance state.

use std::collections::BTreeMap;

use chrono::{Datelike, Days, NaiveDate, Weekday};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::bars::{daily_record_from_closes, IntradayBarSeries};
use super::io::{DailyRange, TruthMap};
use super::panel::{DailyPanel, DailyPanelBuilder, FirmId};
use super::prints::{IntradayPrint, SESSION_CLOSE_SECS, SESSION_OPEN_SECS};
use crate::error::{Error, Result};
use crate::options::{black_scholes, OptionQuote, OptionRight};
use crate::TRADING_DAYS_PER_YEAR;

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub n_firms: usize,
    pub n_days: usize,
    pub seed: u64,
    pub k_common_factors: usize,
    /// Stationary standard deviation of log variance.
    pub vol_of_vol: f64,
    pub leverage_rho: f64,
    pub mean_daily_var: f64,
    /// AR(1) coefficient of every log-variance component.
    pub persistence: f64,
    /// Share of log-variance variation driven by the common factors.
    pub factor_share: f64,
    /// Cross-sectional standard deviation of firm mean log variance.
    pub firm_dispersion: f64,
    pub intervals_per_day: usize,
    /// Fraction of firms that list late or delist early.
    pub turnover: f64,
    pub start_date: NaiveDate,
    pub emit_prints: bool,
    pub options: Option<OptionSimConfig>,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            n_firms: 20,
            n_days: 600,
            seed: 0,
            k_common_factors: 3,
            vol_of_vol: 0.6,
            leverage_rho: -0.5,
            mean_daily_var: 4e-4,
            persistence: 0.97,
            factor_share: 0.6,
            firm_dispersion: 0.3,
            intervals_per_day: 78,
            turnover: 0.2,
            start_date: NaiveDate::from_ymd_opt(2010, 1, 4).expect("valid date"),
            emit_prints: true,
            options: Some(OptionSimConfig::default()),
        }
    }
}

/// Synthetic option feed settings. Quoted implied volatility is
/// `sqrt(250 * ivar_{t+1}) * exp(iv_bias + iv_noise * xi)` with `xi` drawn
/// afresh per firm-date, so the noise is a transient, recoverable mispricing.
#[derive(Debug, Clone, PartialEq)]
pub struct OptionSimConfig {
    pub iv_bias: f64,
    pub iv_noise: f64,
    /// Quoted spread as a fraction of the model price (minimum one cent).
    pub spread_frac: f64,
    pub n_strikes: usize,
    /// Strike spacing as a fraction of the firm's initial price.
    pub strike_step_frac: f64,
    /// Trading days between consecutive expiries.
    pub expiry_cycle: usize,
}

impl Default for OptionSimConfig {
    fn default() -> Self {
        OptionSimConfig {
            iv_bias: 0.1,
            iv_noise: 0.1,
            spread_frac: 0.05,
            n_strikes: 7,
            strike_step_frac: 0.025,
            expiry_cycle: 20,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::config(m.to_string()));
        if self.n_firms == 0 {
            return bad("n_firms must be positive");
        }
        if self.n_days == 0 {
            return bad("n_days must be positive");
        }
        if self.k_common_factors > self.n_firms.min(10) {
            return bad("k_common_factors must be at most min(n_firms, 10)");
        }
        if !(self.vol_of_vol >= 0.0 && self.vol_of_vol.is_finite()) {
            return bad("vol_of_vol must be non-negative");
        }
        if !(-1.0..=0.0).contains(&self.leverage_rho) {
            return bad("leverage_rho must lie in [-1, 0]");
        }
        if !(self.mean_daily_var > 0.0 && self.mean_daily_var.is_finite()) {
            return bad("mean_daily_var must be positive");
        }
        if !(0.0..1.0).contains(&self.persistence) {
            return bad("persistence must lie in [0, 1)");
        }
        if !(0.0..=1.0).contains(&self.factor_share) {
            return bad("factor_share must lie in [0, 1]");
        }
        if !(self.firm_dispersion >= 0.0 && self.firm_dispersion.is_finite()) {
            return bad("firm_dispersion must be non-negative");
        }
        let session_min = ((SESSION_CLOSE_SECS - SESSION_OPEN_SECS) / 60) as usize;
        if self.intervals_per_day < 2 || session_min % self.intervals_per_day != 0 {
            return bad("intervals_per_day must divide the 390-minute session");
        }
        if !(0.0..=1.0).contains(&self.turnover) {
            return bad("turnover must lie in [0, 1]");
        }
        if let Some(o) = &self.options {
            if !(o.iv_noise >= 0.0 && o.iv_bias.is_finite()) {
                return bad("iv_noise must be non-negative and iv_bias finite");
            }
            if !(0.0..0.5).contains(&o.spread_frac) {
                return bad("spread_frac must lie in [0, 0.5)");
            }
            if o.n_strikes == 0 {
                return bad("n_strikes must be positive");
            }
            if !(o.strike_step_frac > 0.0 && o.strike_step_frac < 0.5) {
                return bad("strike_step_frac must lie in (0, 0.5)");
            }
            if o.expiry_cycle < 10 {
                return bad("expiry_cycle must be at least 10 trading days");
            }
        }
        Ok(())
    }
}

pub struct SimOutput {
    /// Raw prints, including junk records the cleaning rules must remove.
    pub prints: Option<Vec<IntradayPrint>>,
    pub panel: DailyPanel,
    pub truth: TruthMap,
    pub ranges: BTreeMap<(FirmId, NaiveDate), DailyRange>,
    pub quotes: Vec<OptionQuote>,
}

/// `n_steps + 1` closes of a GBM with constant daily variance `daily_var`
/// spread evenly over the day.
pub fn simulate_gbm_closes<R: Rng + ?Sized>(rng: &mut R, initial_price: f64, daily_var: f64, n_steps: usize) -> Vec<f64> {
    let step_var = daily_var / n_steps as f64;
    let (drift, sd) = (-0.5 * step_var, step_var.sqrt());
    let mut out = Vec::with_capacity(n_steps + 1);
    let mut p = initial_price;
    out.push(p);
    for _ in 0..n_steps {
        let z: f64 = rng.sample(StandardNormal);
        p *= (drift + sd * z).exp();
        out.push(p);
    }
    out
}

pub(crate) fn weekdays_from(start: NaiveDate, n: usize) -> Vec<NaiveDate> {
    let mut out = Vec::with_capacity(n);
    let mut d = start;
    while out.len() < n {
        if !matches!(d.weekday(), Weekday::Sat | Weekday::Sun) {
            out.push(d);
        }
        d = d + Days::new(1);
    }
    out
}

fn normal<R: Rng>(rng: &mut R) -> f64 {
    rng.sample(StandardNormal)
}

struct FirmState {
    id: FirmId,
    mu: f64,
    loadings: Vec<f64>,
    idio: f64,
    price: f64,
    strike_step: f64,
    active: (usize, usize),
}

/// Runs the simulator. Identical configs give identical outputs.
pub fn simulate_panel(config: &SimConfig) -> Result<SimOutput> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let n = config.n_firms;
    let k = config.k_common_factors;
    let phi = config.persistence;
    let innov = (1.0 - phi * phi).sqrt();
    let rho = config.leverage_rho;
    let rho_c = (1.0 - rho * rho).sqrt();
    let share = if k == 0 { 0.0 } else { config.factor_share };
    let (w_f, w_u) = (share.sqrt(), (1.0 - share).sqrt());
    let vov = config.vol_of_vol;
    let n_steps = config.intervals_per_day;
    let delta_minutes = (390 / n_steps) as u32;
    let step_secs = delta_minutes * 60;

    // Extra trailing dates label expiries beyond the sample.
    let cycle = config.options.as_ref().map_or(0, |o| o.expiry_cycle);
    let all_dates = weekdays_from(config.start_date, config.n_days + 2 * cycle + 1);
    let dates = &all_dates[..config.n_days];
    let width = (n.max(2) - 1).to_string().len();

    let mut firms: Vec<FirmState> = (0..n)
        .map(|i| {
            let mut loadings: Vec<f64> = (0..k)
                .map(|j| if j == 0 { 1.0 + 0.5 * normal(&mut rng) } else { 0.7 * normal(&mut rng) })
                .collect();
            let norm = loadings.iter().map(|b| b * b).sum::<f64>().sqrt();
            if norm > 0.0 {
                loadings.iter_mut().for_each(|b| *b /= norm);
            }
            let mu = config.mean_daily_var.ln() + config.firm_dispersion * normal(&mut rng) - 0.5 * vov * vov;
            let price = 50.0 * (0.3 * normal(&mut rng)).exp();
            let mut active = (0, config.n_days);
            if rng.random::<f64>() < config.turnover {
                let quarter = (config.n_days / 4).max(1);
                if rng.random::<bool>() {
                    active.0 = rng.random_range(1..=quarter).min(config.n_days - 1);
                } else {
                    active.1 = config.n_days - rng.random_range(1..=quarter).min(config.n_days - 1);
                }
            }
            let step = config.options.as_ref().map_or(1.0, |o| {
                ((price * o.strike_step_frac * 2.0).round() / 2.0).max(0.5)
            });
            FirmState {
                id: FirmId::from(format!("F{i:0width$}")),
                mu,
                loadings,
                idio: normal(&mut rng),
                price,
                strike_step: step,
                active,
            }
        })
        .collect();
    let mut factors: Vec<f64> = (0..k).map(|_| normal(&mut rng)).collect();

    let log_var = |f: &FirmState, factors: &[f64]| -> f64 {
        let common: f64 = f.loadings.iter().zip(factors).map(|(b, x)| b * x).sum();
        f.mu + vov * (w_f * common + w_u * f.idio)
    };

    let mut builder = DailyPanelBuilder::default();
    let mut truth = TruthMap::new();
    let mut ranges = BTreeMap::new();
    let mut prints = config.emit_prints.then(Vec::new);
    // Per-day (firm, close, variance) kept for option quoting, which needs the
    // next day's variance.
    let mut day_vars: Vec<Vec<f64>> = Vec::with_capacity(config.n_days + 1);
    let mut day_closes: Vec<Vec<f64>> = Vec::with_capacity(config.n_days);
    let mut z = vec![0.0; n];

    for (t, &date) in dates.iter().enumerate() {
        let vars: Vec<f64> = firms.iter().map(|f| log_var(f, &factors).exp()).collect();
        let mut closes_today = Vec::with_capacity(n);
        for (i, firm) in firms.iter_mut().enumerate() {
            let v = vars[i];
            let prev_close = firm.price;
            let closes = simulate_gbm_closes(&mut rng, prev_close, v, n_steps);
            let last = closes[n_steps];
            z[i] = if v > 0.0 { ((last / prev_close).ln() + 0.5 * v) / v.sqrt() } else { 0.0 };
            firm.price = last;
            closes_today.push(last);
            if t < firm.active.0 || t >= firm.active.1 {
                continue;
            }
            let prev = (t > firm.active.0).then_some(prev_close);
            let bars = IntradayBarSeries { firm_id: firm.id.clone(), date, prices: closes, delta_minutes };
            let record = daily_record_from_closes(&bars, prev)?;
            builder.insert(record)?;
            truth.insert((firm.id.clone(), date), v);
            let hi = bars.prices.iter().cloned().fold(f64::MIN, f64::max);
            let lo = bars.prices.iter().cloned().fold(f64::MAX, f64::min);
            ranges.insert((firm.id.clone(), date), DailyRange { high: hi, low: lo });
            if let Some(out) = prints.as_mut() {
                emit_prints(&mut rng, out, &bars, step_secs);
            }
        }
        day_vars.push(vars);
        day_closes.push(closes_today);

        let zm = z.iter().sum::<f64>() / (n as f64).sqrt();
        for (j, f) in factors.iter_mut().enumerate() {
            let shock = if j == 0 { rho * zm + rho_c * normal(&mut rng) } else { normal(&mut rng) };
            *f = phi * *f + innov * shock;
        }
        for (i, firm) in firms.iter_mut().enumerate() {
            let shock = rho * z[i] + rho_c * normal(&mut rng);
            firm.idio = phi * firm.idio + innov * shock;
        }
    }
    day_vars.push(firms.iter().map(|f| log_var(f, &factors).exp()).collect());

    let mut quotes = Vec::new();
    if let Some(opt) = &config.options {
        for (t, &date) in dates.iter().enumerate() {
            for (i, firm) in firms.iter().enumerate() {
                let xi = normal(&mut rng);
                if t < firm.active.0 || t >= firm.active.1 {
                    continue;
                }
                let vol = (TRADING_DAYS_PER_YEAR * day_vars[t + 1][i]).sqrt() * (opt.iv_bias + opt.iv_noise * xi).exp();
                quote_chain(&mut quotes, opt, firm, date, t, &all_dates, day_closes[t][i], vol);
            }
        }
    }

    if let Some(p) = prints.as_mut() {
        p.sort_by(|a, b| (&a.firm_id, a.date, a.time).cmp(&(&b.firm_id, b.date, b.time)));
    }
    Ok(SimOutput { prints, panel: builder.build(), truth, ranges, quotes })
}

#[allow(clippy::too_many_arguments)]
fn quote_chain(
    out: &mut Vec<OptionQuote>,
    opt: &OptionSimConfig,
    firm: &FirmState,
    date: NaiveDate,
    t: usize,
    all_dates: &[NaiveDate],
    spot: f64,
    vol: f64,
) {
    let cycle = opt.expiry_cycle;
    let first = (t / cycle + 1) * cycle;
    let h = firm.strike_step;
    let centre = (spot / h).round() as i64;
    let half = (opt.n_strikes / 2) as i64;
    let lo = centre - half;
    let hi = lo + opt.n_strikes as i64 - 1;
    for e in [first, first + cycle] {
        let years = (e - t) as f64 / TRADING_DAYS_PER_YEAR;
        for s in lo..=hi {
            let strike = s as f64 * h;
            if strike <= 0.0 {
                continue;
            }
            for right in [OptionRight::Call, OptionRight::Put] {
                let (price, delta) = black_scholes(right, spot, strike, vol, years);
                let spread = (opt.spread_frac * price).max(0.01);
                let bid = round_cents((price - 0.5 * spread).max(0.0));
                let ask = round_cents(price + 0.5 * spread);
                out.push(OptionQuote {
                    firm_id: firm.id.clone(),
                    date,
                    expiry: all_dates[e],
                    strike,
                    cp_flag: right,
                    bid,
                    ask,
                    delta,
                    iv: vol,
                    underlying_bid: spot - 0.01,
                    underlying_ask: spot + 0.01,
                    underlying_close: spot,
                });
            }
        }
    }
}

fn round_cents(x: f64) -> f64 {
    (x * 100.0).round() / 100.0
}

/// Prints for one firm-date: one print exactly at each grid boundary, an
/// intermediate print inside each interval, and occasional duplicates and
/// junk records (zero size, excluded condition code at an off-range price).
fn emit_prints<R: Rng>(rng: &mut R, out: &mut Vec<IntradayPrint>, bars: &IntradayBarSeries, step_secs: u32) {
    let mk = |time: u32, price: f64, size: u64, cond: Option<&str>| IntradayPrint {
        firm_id: bars.firm_id.clone(),
        date: bars.date,
        time,
        price,
        size,
        condition_code: cond.map(str::to_string),
    };
    for (k, &close) in bars.prices.iter().enumerate() {
        let boundary = SESSION_OPEN_SECS + k as u32 * step_secs;
        if k > 0 {
            let prev = bars.prices[k - 1];
            let mid_time = boundary - step_secs / 2;
            out.push(mk(mid_time, (prev * close).sqrt(), rng.random_range(1..=10) * 100, None));
        }
        out.push(mk(boundary, close, rng.random_range(1..=10) * 100, None));
        let u: f64 = rng.random();
        if u < 0.05 {
            out.push(mk(boundary, close, rng.random_range(1..=5) * 100, Some("@F")));
        } else if u < 0.07 {
            out.push(mk(boundary, close * 1.5, 100, Some("Z")));
        } else if u < 0.09 {
            out.push(mk(boundary, close * 0.5, 0, None));
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::panel_data::{compute_log_returns, realized_variance};

    fn small(seed: u64) -> SimConfig {
        SimConfig { n_firms: 4, n_days: 30, seed, ..SimConfig::default() }
    }

    #[test]
    fn invalid_configs_are_rejected() {
        for cfg in [
            SimConfig { n_firms: 0, ..small(1) },
            SimConfig { leverage_rho: 0.3, ..small(1) },
            SimConfig { vol_of_vol: -0.1, ..small(1) },
            SimConfig { mean_daily_var: 0.0, ..small(1) },
            SimConfig { intervals_per_day: 77, ..small(1) },
        ] {
            assert!(matches!(simulate_panel(&cfg), Err(Error::Config(_))));
        }
    }

    #[test]
    fn same_seed_same_output() {
        let a = simulate_panel(&small(7)).unwrap();
        let b = simulate_panel(&small(7)).unwrap();
        assert_eq!(a.panel, b.panel);
        assert_eq!(a.truth, b.truth);
        assert_eq!(a.prints, b.prints);
        assert_eq!(a.quotes, b.quotes);
        let c = simulate_panel(&small(8)).unwrap();
        assert_ne!(a.panel, c.panel);
    }

    #[test]
    fn zero_vol_of_vol_gives_constant_variance() {
        let out = simulate_panel(&SimConfig { vol_of_vol: 0.0, ..small(3) }).unwrap();
        let mut per_firm: BTreeMap<&FirmId, Vec<f64>> = BTreeMap::new();
        for ((f, _), v) in &out.truth {
            per_firm.entry(f).or_default().push(*v);
        }
        for vs in per_firm.values() {
            assert!(vs.iter().all(|v| *v == vs[0]));
        }
    }

    #[test]
    fn panel_rv_matches_grid_closes() {
        let out = simulate_panel(&SimConfig { turnover: 0.0, ..small(11) }).unwrap();
        let prints = out.prints.unwrap();
        let firm = out.panel.firms()[0].clone();
        let date = out.panel.dates()[3];
        let closes: Vec<f64> = prints
            .iter()
            .filter(|p| p.firm_id == firm && p.date == date && p.size > 0 && p.condition_code.is_none())
            .filter(|p| (p.time - SESSION_OPEN_SECS) % 300 == 0)
            .map(|p| p.price)
            .collect();
        assert_eq!(closes.len(), 79);
        let rv = realized_variance(&compute_log_returns(&closes).unwrap()).unwrap();
        assert_eq!(out.panel.record(&firm, date).unwrap().rv_day, rv);
    }

    #[test]
    fn prints_rebuild_the_panel_exactly() {
        let out = simulate_panel(&SimConfig { n_firms: 4, turnover: 0.5, ..small(12) }).unwrap();
        let built = crate::panel_data::panel_from_prints(&out.prints.unwrap(), &out.ranges, 5).unwrap();
        assert!(built.failures.is_empty(), "{:?}", built.failures);
        assert_eq!(built.panel, out.panel);
    }

    #[test]
    fn turnover_makes_the_panel_unbalanced() {
        let out = simulate_panel(&SimConfig { n_firms: 20, turnover: 1.0, emit_prints: false, ..small(5) }).unwrap();
        assert!(out.panel.len() < 20 * 30);
    }

    #[test]
    fn option_quotes_cover_two_expiries_and_are_well_formed() {
        let out = simulate_panel(&small(2)).unwrap();
        assert!(!out.quotes.is_empty());
        for q in &out.quotes {
            assert!(q.bid <= q.ask && q.expiry > q.date);
            match q.cp_flag {
                OptionRight::Call => assert!(q.delta > 0.0 && q.delta < 1.0),
                OptionRight::Put => assert!(q.delta > -1.0 && q.delta < 0.0),
            }
        }
        let first = &out.quotes[0];
        let expiries: std::collections::BTreeSet<_> = out
            .quotes
            .iter()
            .filter(|q| q.firm_id == first.firm_id && q.date == first.date)
            .map(|q| q.expiry)
            .collect();
        assert_eq!(expiries.len(), 2);
    }

    #[test]
    fn gbm_closes_have_requested_length() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let c = simulate_gbm_closes(&mut rng, 10.0, 4e-4, 78);
        assert_eq!(c.len(), 79);
        assert_eq!(c[0], 10.0);
        let flat = simulate_gbm_closes(&mut rng, 10.0, 0.0, 5);
        assert!(flat.iter().all(|p| *p == 10.0));
    }
}
