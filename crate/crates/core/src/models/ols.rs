//! Ordinary least squares via a QR factorization of the centred, column-scaled
//! design.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Relative threshold on the diagonal of R below which the design is treated
/// as rank deficient.
const RANK_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct OlsFit {
    pub intercept: f64,
    pub slopes: Vec<f64>,
    /// Standard errors of (intercept, slopes...) under homoskedastic errors.
    pub std_errors: Vec<f64>,
    /// Residual sum of squares.
    pub sse: f64,
    /// Total sum of squares of the response about its mean.
    pub sst: f64,
    pub n_obs: usize,
}

impl OlsFit {
    pub fn predict(&self, row: &[f64]) -> f64 {
        self.intercept + self.slopes.iter().zip(row).map(|(b, x)| b * x).sum::<f64>()
    }

    /// `1 - SSE/SST`; NaN when the response is constant.
    pub fn r_squared(&self) -> f64 {
        1.0 - self.sse / self.sst
    }
}

/// Regresses `y` on the columns of `x` with an intercept.
///
/// Rank-deficient designs (including constant or duplicated columns) are an
/// error; no pseudo-inverse is attempted.
pub fn fit_ols(x: &DMatrix<f64>, y: &[f64]) -> Result<OlsFit> {
    let (n, p) = x.shape();
    if n != y.len() {
        return Err(Error::Data(format!("design has {n} rows but response has {}", y.len())));
    }
    if n < p + 1 {
        return Err(Error::insufficient(format!("{n} rows for {p} predictors plus intercept")));
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::Data("non-finite value in regression inputs".into()));
    }
    let y_mean = y.iter().sum::<f64>() / n as f64;
    let yc = DVector::from_iterator(n, y.iter().map(|v| v - y_mean));
    let sst = yc.norm_squared();
    if p == 0 {
        let se = (sst / (n as f64 - 1.0) / n as f64).sqrt();
        return Ok(OlsFit { intercept: y_mean, slopes: vec![], std_errors: vec![se], sse: sst, sst, n_obs: n });
    }
    let means: Vec<f64> = (0..p).map(|j| x.column(j).mean()).collect();
    let mut xc = x.clone();
    let mut norms = vec![0.0; p];
    for j in 0..p {
        let mut col = xc.column_mut(j);
        col.add_scalar_mut(-means[j]);
        norms[j] = col.norm();
        if norms[j] == 0.0 {
            return Err(Error::SingularDesign(format!("predictor {j} has no variation")));
        }
        col /= norms[j];
    }
    let qr = xc.clone().qr();
    let r = qr.r();
    for j in 0..p {
        if r[(j, j)].abs() < RANK_TOL {
            return Err(Error::SingularDesign(format!("predictor {j} is collinear with earlier predictors")));
        }
    }
    let qty = qr.q().transpose() * &yc;
    let b = r
        .solve_upper_triangular(&qty)
        .ok_or_else(|| Error::SingularDesign("triangular solve failed".into()))?;
    let slopes: Vec<f64> = (0..p).map(|j| b[j] / norms[j]).collect();
    let intercept = y_mean - slopes.iter().zip(&means).map(|(s, m)| s * m).sum::<f64>();
    let resid = &yc - &xc * &b;
    let sse = resid.norm_squared();

    // Var(b_scaled) = s^2 (R'R)^{-1}; R^{-1} is upper triangular.
    let dof = n as f64 - p as f64 - 1.0;
    let s2 = if dof > 0.0 { sse / dof } else { f64::NAN };
    let r_inv = r
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::SingularDesign("R is not invertible".into()))?;
    let cov_scaled = &r_inv * r_inv.transpose();
    let mut std_errors = Vec::with_capacity(p + 1);
    // Intercept variance: s^2 (1/n + m' C m) with m the means on the scaled axis.
    let m_scaled = DVector::from_iterator(p, (0..p).map(|j| means[j] / norms[j]));
    let int_var = s2 * (1.0 / n as f64 + (m_scaled.transpose() * &cov_scaled * &m_scaled)[(0, 0)]);
    std_errors.push(int_var.sqrt());
    for j in 0..p {
        std_errors.push((s2 * cov_scaled[(j, j)]).sqrt() / norms[j]);
    }
    Ok(OlsFit { intercept, slopes, std_errors, sse, sst, n_obs: n })
}
