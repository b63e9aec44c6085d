//! Principal-component factor models of the cross-section of realized
//! variances.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use super::har::{fit_har_rows, har_regressors, HAR_WARMUP, MIN_FIT_ROWS};
use super::ols::fit_ols;
use crate::error::{Error, Result};
use crate::VARIANCE_FLOOR;

/// Eigen-decomposition of the covariance of a firms x days window.
#[derive(Debug, Clone, PartialEq)]
pub struct PcaFactors {
    pub k: usize,
    /// Per-firm mean over the window.
    pub mean: Vec<f64>,
    /// All eigenvalues, descending, clamped at zero.
    pub eigenvalues: Vec<f64>,
    /// All eigenvectors as columns, in eigenvalue order.
    pub eigenvectors: DMatrix<f64>,
    /// Retained factor series (k x days): projections of the demeaned data.
    pub factors: DMatrix<f64>,
}

impl PcaFactors {
    pub fn retained(&self) -> DMatrix<f64> {
        self.eigenvectors.columns(0, self.k).into_owned()
    }

    /// Cumulative explained-variance shares for 1..=N components.
    pub fn explained_share(&self) -> Vec<f64> {
        let total: f64 = self.eigenvalues.iter().sum();
        let mut acc = 0.0;
        self.eigenvalues
            .iter()
            .map(|l| {
                acc += l;
                if total > 0.0 { acc / total } else { 1.0 }
            })
            .collect()
    }

    /// Retained-factor values of one cross-section `column`.
    pub fn project(&self, column: &[f64]) -> Vec<f64> {
        (0..self.k)
            .map(|j| {
                let q = self.eigenvectors.column(j);
                column.iter().zip(&self.mean).zip(q.iter()).map(|((v, m), q)| (v - m) * q).sum()
            })
            .collect()
    }
}

/// Covariance eigen-decomposition of the demeaned `rv_window` (rows are
/// firms, columns are days), keeping the top `k` components.
pub fn extract_pca_factors(rv_window: &DMatrix<f64>, k: usize) -> Result<PcaFactors> {
    let (n, t) = rv_window.shape();
    if k == 0 || k > n.min(t) {
        return Err(Error::config(format!("k = {k} must lie in 1..={}", n.min(t))));
    }
    if t < 2 {
        return Err(Error::insufficient("covariance needs at least two days"));
    }
    if rv_window.iter().any(|v| !v.is_finite()) {
        return Err(Error::Data("non-finite entry in the PCA window".into()));
    }
    let mean: Vec<f64> = (0..n).map(|i| rv_window.row(i).mean()).collect();
    let mut d = rv_window.clone();
    for i in 0..n {
        d.row_mut(i).add_scalar_mut(-mean[i]);
    }
    let cov = (&d * d.transpose()) / (t as f64 - 1.0);
    let eig = SymmetricEigen::new(cov);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let eigenvalues: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i].max(0.0)).collect();
    let mut eigenvectors = DMatrix::zeros(n, n);
    for (c, &i) in order.iter().enumerate() {
        let mut v: DVector<f64> = eig.eigenvectors.column(i).into_owned();
        // Sign convention: the largest-magnitude entry is positive.
        let pivot = v.iter().copied().fold(0.0f64, |a, x| if x.abs() > a.abs() { x } else { a });
        if pivot < 0.0 {
            v.neg_mut();
        }
        eigenvectors.set_column(c, &v);
    }
    let factors = eigenvectors.columns(0, k).transpose() * &d;
    Ok(PcaFactors { k, mean, eigenvalues, eigenvectors, factors })
}

#[derive(Debug, Clone, PartialEq)]
pub struct FactorSpec {
    pub k: usize,
    /// Extraction and estimation window W in days.
    pub window: usize,
    /// Add each firm's own HAR regressors to its loading regression.
    pub nested_har: bool,
    pub residual_forecast: bool,
    pub force_zero_loadings: bool,
    pub min_rows: usize,
}

impl Default for FactorSpec {
    fn default() -> Self {
        FactorSpec { k: 3, window: 250, nested_har: false, residual_forecast: true, force_zero_loadings: false, min_rows: MIN_FIT_ROWS }
    }
}

/// Aligned firms x days inputs for a factor forecast.
///
/// Column `H - 1` is the forecast origin t. `predictors` holds values measured
/// by the origin (the 15:55 RV series); `responses` holds the forecast target
/// series, of which only the first `n_response_cols` columns are observable.
#[derive(Debug, Clone, Copy)]
pub struct FactorPanel<'a> {
    pub predictors: &'a DMatrix<f64>,
    pub responses: &'a DMatrix<f64>,
    pub n_response_cols: usize,
}

impl<'a> FactorPanel<'a> {
    /// Predictors and responses are the same, fully observed series.
    pub fn single(series: &'a DMatrix<f64>) -> Self {
        FactorPanel { predictors: series, responses: series, n_response_cols: series.ncols() }
    }
}

/// Fitted factor model.
#[derive(Debug, Clone, PartialEq)]
pub struct FactorModel {
    pub pca: PcaFactors,
    /// Factor values for every column of the input panel (k x H).
    pub factor_series: DMatrix<f64>,
    pub loadings_a: Vec<f64>,
    /// N x k loadings.
    pub loadings_b: DMatrix<f64>,
    /// Per-firm coefficients on own HAR regressors (nested model only).
    pub har_coeffs: Option<Vec<[f64; 3]>>,
    /// Per factor (a, b_d, b_w, b_m).
    pub factor_forecast_coeffs: Vec<[f64; 4]>,
    /// Per firm (phi0, phi1, phi2, phi3); slopes are zero when the residual
    /// history was too short and the intercept-only forecast was used.
    pub residual_forecast_coeffs: Vec<[f64; 4]>,
    /// Residual forecast for the target, per firm.
    pub residual_forecast: Vec<f64>,
    /// Steps between the last observed residual and the target.
    pub residual_horizon: usize,
    nested: bool,
}

fn har_rows(series: &[f64], origins: impl Iterator<Item = usize>, horizon: usize) -> Vec<([f64; 3], f64)> {
    origins
        .filter_map(|s| Some((har_regressors(series, s)?, *series.get(s + horizon)?)))
        .collect()
}

/// Fits the factor model on `data`.
pub fn fit_factor_model(spec: &FactorSpec, data: &FactorPanel) -> Result<FactorModel> {
    let (n, h) = data.predictors.shape();
    let w = spec.window;
    if data.responses.shape() != (n, h) {
        return Err(Error::Data("predictor and response panels differ in shape".into()));
    }
    if w < 2 || w > h {
        return Err(Error::insufficient(format!("window {w} with {h} columns")));
    }
    let last_resp = data
        .n_response_cols
        .checked_sub(1)
        .filter(|&c| c < h && c >= h - w)
        .ok_or_else(|| Error::config("responses must be observed inside the window"))?;
    let first = h - w;
    if spec.nested_har && first < HAR_WARMUP + 1 {
        return Err(Error::insufficient("nested model needs 22 days of history before the window"));
    }
    let window = data.predictors.columns(first, w).into_owned();
    let pca = extract_pca_factors(&window, spec.k)?;
    let mut centred = data.predictors.clone();
    for i in 0..n {
        centred.row_mut(i).add_scalar_mut(-pca.mean[i]);
    }
    let factor_series = pca.retained().transpose() * centred;

    // Factor dynamics: F(s + 1) on (d, w, m) averages of F ending at s.
    let k = spec.k;
    let mut factor_forecast_coeffs = Vec::with_capacity(k);
    for j in 0..k {
        let f: Vec<f64> = factor_series.row(j).iter().copied().collect();
        let rows = har_rows(&f, first.max(HAR_WARMUP)..=h - 2, 1);
        let (c, _) = fit_har_rows(&rows, spec.min_rows.min(w - 1))
            .map_err(|e| match e {
                Error::InsufficientData(m) => Error::insufficient(format!("factor history: {m}")),
                e => e,
            })?;
        factor_forecast_coeffs.push([c.c, c.beta_d, c.beta_w, c.beta_m]);
    }

    // Contemporaneous loadings, optionally with the firm's lagged HAR regressors.
    let rows: Vec<usize> = (first..=last_resp).collect();
    let n_f = if spec.force_zero_loadings { 0 } else { k };
    let n_cols = n_f + if spec.nested_har { 3 } else { 0 };
    let mut loadings_a = vec![0.0; n];
    let mut loadings_b = DMatrix::zeros(n, k);
    let mut har_coeffs = spec.nested_har.then(|| vec![[0.0; 3]; n]);
    let mut residuals: Vec<Vec<f64>> = Vec::with_capacity(n);
    for i in 0..n {
        let pred: Vec<f64> = data.predictors.row(i).iter().copied().collect();
        let x = DMatrix::from_fn(rows.len(), n_cols, |r, c| {
            let s = rows[r];
            if c < n_f {
                factor_series[(c, s)]
            } else {
                har_regressors(&pred, s - 1).expect("warm-up checked")[c - n_f]
            }
        });
        let y: Vec<f64> = rows.iter().map(|&s| data.responses[(i, s)]).collect();
        let fit = fit_ols(&x, &y)?;
        loadings_a[i] = fit.intercept;
        for c in 0..n_f {
            loadings_b[(i, c)] = fit.slopes[c];
        }
        if let Some(g) = har_coeffs.as_mut() {
            g[i] = [fit.slopes[n_f], fit.slopes[n_f + 1], fit.slopes[n_f + 2]];
        }
        let resid: Vec<f64> = (0..rows.len())
            .map(|r| y[r] - fit.predict(&x.row(r).iter().copied().collect::<Vec<_>>()))
            .collect();
        residuals.push(resid);
    }

    // Residual forecasts at horizon h = H - last_resp from their own lags.
    let horizon = h - last_resp;
    let mut residual_forecast_coeffs = vec![[0.0; 4]; n];
    let mut residual_forecast = vec![0.0; n];
    if spec.residual_forecast {
        for i in 0..n {
            let e = &residuals[i];
            let rows = har_rows(e, HAR_WARMUP..=e.len().saturating_sub(horizon + 1), horizon);
            let last = e.len() - 1;
            let fitted = (rows.len() >= spec.min_rows).then(|| fit_har_rows(&rows, spec.min_rows).ok()).flatten();
            match (fitted, har_regressors(e, last)) {
                (Some((c, _)), Some(x)) => {
                    residual_forecast_coeffs[i] = [c.c, c.beta_d, c.beta_w, c.beta_m];
                    residual_forecast[i] = c.predict(x);
                }
                _ => {
                    let mean = e.iter().sum::<f64>() / e.len() as f64;
                    residual_forecast_coeffs[i] = [mean, 0.0, 0.0, 0.0];
                    residual_forecast[i] = mean;
                }
            }
        }
    }

    Ok(FactorModel {
        pca,
        factor_series,
        loadings_a,
        loadings_b,
        har_coeffs,
        factor_forecast_coeffs,
        residual_forecast_coeffs,
        residual_forecast,
        residual_horizon: horizon,
        nested: spec.nested_har,
    })
}

impl FactorModel {
    /// One-step factor forecasts from the factors' own (d, w, m) lags at the
    /// last column.
    pub fn factor_forecast(&self) -> Vec<f64> {
        let last = self.factor_series.ncols() - 1;
        (0..self.factor_series.nrows())
            .map(|j| {
                let f: Vec<f64> = self.factor_series.row(j).iter().copied().collect();
                let c = self.factor_forecast_coeffs[j];
                let x = har_regressors(&f, last).expect("factor history checked at fit");
                c[0] + c[1] * x[0] + c[2] * x[1] + c[3] * x[2]
            })
            .collect()
    }

    /// Per-firm forecasts for the column after the origin. `oracle_factors`
    /// replaces the factor forecast with supplied values.
    pub fn forecast(&self, data: &FactorPanel, oracle_factors: Option<&[f64]>) -> Vec<f64> {
        let f_hat = oracle_factors.map_or_else(|| self.factor_forecast(), <[f64]>::to_vec);
        let last = data.predictors.ncols() - 1;
        (0..self.loadings_a.len())
            .map(|i| {
                let mut v = self.loadings_a[i] + self.residual_forecast[i];
                v += (0..f_hat.len()).map(|j| self.loadings_b[(i, j)] * f_hat[j]).sum::<f64>();
                if self.nested {
                    let pred: Vec<f64> = data.predictors.row(i).iter().copied().collect();
                    let x = har_regressors(&pred, last).expect("warm-up checked at fit");
                    let g = self.har_coeffs.as_ref().expect("nested")[i];
                    v += g[0] * x[0] + g[1] * x[1] + g[2] * x[2];
                }
                v.max(VARIANCE_FLOOR)
            })
            .collect()
    }
}

/// Fits and forecasts in one step.
pub fn factor_model_forecast(spec: &FactorSpec, data: &FactorPanel) -> Result<(FactorModel, Vec<f64>)> {
    let model = fit_factor_model(spec, data)?;
    let f = model.forecast(data, None);
    Ok((model, f))
}
