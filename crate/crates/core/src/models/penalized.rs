//! Elastic-net regression by cyclic coordinate descent on the Gram matrix.
//!
//! Objective: `RSS + lambda_l1 * |b|_1 + lambda_l2 * |b|_2^2` with an
//! unpenalized intercept, on predictors standardized to zero mean and unit
//! (population) variance. Coefficients are reported on the original scale.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PenaltySpec {
    pub lambda_l1: f64,
    pub lambda_l2: f64,
    pub max_iter: usize,
    /// Convergence threshold on the largest coefficient change, measured in
    /// units of the response's standard deviation on the standardized scale.
    pub tol: f64,
}

impl Default for PenaltySpec {
    fn default() -> Self {
        PenaltySpec { lambda_l1: 0.0, lambda_l2: 0.0, max_iter: 10_000, tol: 1e-7 }
    }
}

impl PenaltySpec {
    pub fn lasso(lambda: f64) -> Self {
        PenaltySpec { lambda_l1: lambda, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda_l1 >= 0.0 && self.lambda_l2 >= 0.0) || !self.lambda_l1.is_finite() || !self.lambda_l2.is_finite() {
            return Err(Error::config("penalties must be finite and non-negative"));
        }
        if !(self.tol > 0.0) {
            return Err(Error::config("tol must be positive"));
        }
        if self.max_iter == 0 {
            return Err(Error::config("max_iter must be positive"));
        }
        Ok(())
    }
}

/// Centring and scaling of the design.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PenalizedOptions {
    /// Fit an unpenalized intercept (predictors and response are centred).
    pub intercept: bool,
    /// Scale predictors to unit root-mean-square after centring.
    pub standardize: bool,
}

impl Default for PenalizedOptions {
    fn default() -> Self {
        PenalizedOptions { intercept: true, standardize: true }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PenalizedFit {
    pub intercept: f64,
    /// Nonzero coefficients on the original predictor scale, by column index.
    pub coefficients: Vec<(usize, f64)>,
    pub n_nonzero: usize,
    pub n_predictors: usize,
    /// (centre, scale) applied to each predictor before fitting.
    pub predictor_scaling: Vec<(f64, f64)>,
    pub iterations: usize,
}

impl PenalizedFit {
    pub fn dense(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.n_predictors];
        for &(j, b) in &self.coefficients {
            out[j] = b;
        }
        out
    }

    pub fn coefficient(&self, j: usize) -> f64 {
        self.coefficients.iter().find(|(k, _)| *k == j).map_or(0.0, |(_, b)| *b)
    }

    pub fn predict(&self, row: &[f64]) -> f64 {
        self.intercept + self.coefficients.iter().map(|&(j, b)| b * row[j]).sum::<f64>()
    }
}

/// A design prepared once (scaling and Gram matrix) and solved for any number
/// of responses and penalties.
#[derive(Debug, Clone)]
pub struct PenalizedProblem {
    n: usize,
    p: usize,
    options: PenalizedOptions,
    centres: Vec<f64>,
    scales: Vec<f64>,
    usable: Vec<bool>,
    z: DMatrix<f64>,
    gram: DMatrix<f64>,
}

/// Response-dependent quantities for one solve.
#[derive(Debug, Clone)]
pub struct PenalizedResponse {
    y_centre: f64,
    zty: Vec<f64>,
    y_scale: f64,
}

impl PenalizedResponse {
    pub fn y_centre(&self) -> f64 {
        self.y_centre
    }
}

/// Standardized-scale solution with its iteration count.
#[derive(Debug, Clone, PartialEq)]
pub struct PenalizedSolution {
    pub beta: Vec<f64>,
    pub iterations: usize,
}

fn soft_threshold(z: f64, t: f64) -> f64 {
    if z > t {
        z - t
    } else if z < -t {
        z + t
    } else {
        0.0
    }
}

impl PenalizedProblem {
    pub fn new(x: &DMatrix<f64>, options: PenalizedOptions) -> Result<Self> {
        let (n, p) = x.shape();
        if n == 0 {
            return Err(Error::insufficient("penalized regression needs at least one row"));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::Data("non-finite value in design".into()));
        }
        let mut z = x.clone();
        let mut centres = vec![0.0; p];
        let mut scales = vec![1.0; p];
        let mut usable = vec![true; p];
        for j in 0..p {
            let mut col = z.column_mut(j);
            if options.intercept {
                centres[j] = col.mean();
                col.add_scalar_mut(-centres[j]);
            }
            let ss = col.norm_squared();
            // Columns with no variation (relative to their level) are dropped.
            let level = centres[j].abs().max(f64::MIN_POSITIVE);
            if ss == 0.0 || (options.intercept && (ss / n as f64).sqrt() <= 1e-13 * level) {
                usable[j] = false;
                col.fill(0.0);
                continue;
            }
            if options.standardize {
                scales[j] = (ss / n as f64).sqrt();
                col /= scales[j];
            }
        }
        let gram = z.transpose() * &z;
        Ok(PenalizedProblem { n, p, options, centres, scales, usable, z, gram })
    }

    pub fn n_rows(&self) -> usize {
        self.n
    }

    pub fn n_predictors(&self) -> usize {
        self.p
    }

    pub fn response(&self, y: &[f64]) -> Result<PenalizedResponse> {
        if y.len() != self.n {
            return Err(Error::Data(format!("design has {} rows but response has {}", self.n, y.len())));
        }
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::Data("non-finite response".into()));
        }
        let y_centre = if self.options.intercept { y.iter().sum::<f64>() / self.n as f64 } else { 0.0 };
        let yc: Vec<f64> = y.iter().map(|v| v - y_centre).collect();
        let y_scale = (yc.iter().map(|v| v * v).sum::<f64>() / self.n as f64).sqrt();
        let zty = (0..self.p)
            .map(|j| self.z.column(j).iter().zip(&yc).map(|(a, b)| a * b).sum())
            .collect();
        Ok(PenalizedResponse { y_centre, zty, y_scale })
    }

    /// Smallest `lambda_l1` at which every slope is zero: `max_j |2 z_j'(y - ybar)|`.
    pub fn lambda_max(&self, r: &PenalizedResponse) -> f64 {
        r.zty.iter().map(|v| 2.0 * v.abs()).fold(0.0, f64::max)
    }

    fn kkt_gap(&self, beta: &[f64], c: &[f64], spec: &PenaltySpec) -> f64 {
        (0..self.p)
            .filter(|&j| self.usable[j])
            .map(|j| {
                let g = -2.0 * c[j] + 2.0 * spec.lambda_l2 * beta[j];
                if beta[j] != 0.0 {
                    (g + spec.lambda_l1 * beta[j].signum()).abs()
                } else {
                    (g.abs() - spec.lambda_l1).max(0.0)
                }
            })
            .fold(0.0, f64::max)
    }

    /// Coordinate descent from `warm` (or zero). Converged when the largest
    /// change in any fitted component is below `tol` response standard
    /// deviations.
    pub fn solve(&self, r: &PenalizedResponse, spec: &PenaltySpec, warm: Option<&[f64]>) -> Result<PenalizedSolution> {
        spec.validate()?;
        let p = self.p;
        let mut beta = match warm {
            Some(w) if w.len() == p => w.iter().enumerate().map(|(j, b)| if self.usable[j] { *b } else { 0.0 }).collect(),
            _ => vec![0.0; p],
        };
        // c = Z'(y - Z beta)
        let mut c = vec![0.0; p];
        self.refresh_gradient(r, &beta, &mut c);
        let threshold = spec.tol * r.y_scale;
        let half_l1 = 0.5 * spec.lambda_l1;
        let n = self.n as f64;
        let mut iterations = 0;
        // Updates beta[j]; `c` is refreshed only at the indices in `targets`.
        let update = |j: usize, beta: &mut [f64], c: &mut [f64], targets: Option<&[usize]>| -> f64 {
            let gjj = self.gram[(j, j)];
            let old = beta[j];
            let new = soft_threshold(c[j] + gjj * old, half_l1) / (gjj + spec.lambda_l2);
            let d = new - old;
            if d != 0.0 {
                beta[j] = new;
                let col = self.gram.column(j);
                match targets {
                    Some(t) => {
                        for &k in t {
                            c[k] -= col[k] * d;
                        }
                    }
                    None => {
                        for k in 0..p {
                            c[k] -= col[k] * d;
                        }
                    }
                }
            }
            d.abs() * (gjj / n).sqrt()
        };
        loop {
            let mut max_d: f64 = 0.0;
            for j in 0..p {
                if self.usable[j] {
                    max_d = max_d.max(update(j, &mut beta, &mut c, None));
                }
            }
            iterations += 1;
            if max_d <= threshold {
                return Ok(PenalizedSolution { beta, iterations });
            }
            // Iterate on the active set until it settles, then rebuild the
            // full gradient and re-check every coordinate.
            let active: Vec<usize> = (0..p).filter(|&j| beta[j] != 0.0).collect();
            let mut inner_sweeps = 0usize;
            loop {
                if iterations >= spec.max_iter {
                    self.refresh_gradient(r, &beta, &mut c);
                    return Err(Error::Convergence { iterations, gap: self.kkt_gap(&beta, &c, spec) });
                }
                // Plain CD crawls on near-collinear columns; every so often
                // try the exact solution for the current sign pattern.
                if inner_sweeps % 10 == 5 {
                    self.sign_consistent_solve(r, spec, &active, &mut beta, &mut c);
                }
                inner_sweeps += 1;
                let mut inner: f64 = 0.0;
                for &j in &active {
                    inner = inner.max(update(j, &mut beta, &mut c, Some(&active)));
                }
                iterations += 1;
                if inner <= threshold {
                    break;
                }
            }
            self.refresh_gradient(r, &beta, &mut c);
            if iterations >= spec.max_iter {
                return Err(Error::Convergence { iterations, gap: self.kkt_gap(&beta, &c, spec) });
            }
        }
    }

    /// Moves toward the exact minimiser for the current sign pattern on
    /// `active`, stopping at the first coefficient that would cross zero and
    /// dropping it; the objective falls at every step.
    fn sign_consistent_solve(
        &self,
        r: &PenalizedResponse,
        spec: &PenaltySpec,
        active: &[usize],
        beta: &mut [f64],
        c: &mut [f64],
    ) {
        let mut set: Vec<usize> = active.iter().copied().filter(|&j| beta[j] != 0.0).collect();
        while !set.is_empty() {
            let m = set.len();
            let a = DMatrix::from_fn(m, m, |i, k| {
                self.gram[(set[i], set[k])] + if i == k { spec.lambda_l2 } else { 0.0 }
            });
            let rhs = nalgebra::DVector::from_fn(m, |i, _| r.zty[set[i]] - 0.5 * spec.lambda_l1 * beta[set[i]].signum());
            let Some(chol) = a.cholesky() else { break };
            let target = chol.solve(&rhs);
            if target.iter().any(|v| !v.is_finite()) {
                break;
            }
            // Largest step in [0, 1] that keeps every sign.
            let mut step = 1.0;
            let mut blocking = None;
            for (i, &j) in set.iter().enumerate() {
                let (from, to) = (beta[j], target[i]);
                if to == 0.0 || to.signum() != from.signum() {
                    let s = from / (from - to);
                    if s < step {
                        step = s;
                        blocking = Some(i);
                    }
                }
            }
            for (i, &j) in set.iter().enumerate() {
                beta[j] += step * (target[i] - beta[j]);
            }
            match blocking {
                Some(i) => {
                    beta[set[i]] = 0.0;
                    set.remove(i);
                }
                None => break,
            }
        }
        for &k in active {
            c[k] = r.zty[k] - active.iter().map(|&j| self.gram[(k, j)] * beta[j]).sum::<f64>();
        }
    }

    /// `c = Z'y - G beta` from scratch.
    fn refresh_gradient(&self, r: &PenalizedResponse, beta: &[f64], c: &mut [f64]) {
        c.copy_from_slice(&r.zty);
        for (k, &b) in beta.iter().enumerate() {
            if b != 0.0 {
                let col = self.gram.column(k);
                for (cj, g) in c.iter_mut().zip(col.iter()) {
                    *cj -= g * b;
                }
            }
        }
    }

    /// Maps a standardized-scale solution back to the original predictors.
    pub fn to_fit(&self, r: &PenalizedResponse, sol: &PenalizedSolution) -> PenalizedFit {
        let mut coefficients = Vec::new();
        let mut intercept = r.y_centre;
        for j in 0..self.p {
            let b = sol.beta[j];
            if b != 0.0 {
                let orig = b / self.scales[j];
                intercept -= orig * self.centres[j];
                coefficients.push((j, orig));
            }
        }
        if !self.options.intercept {
            intercept = 0.0;
        }
        PenalizedFit {
            intercept,
            n_nonzero: coefficients.len(),
            coefficients,
            n_predictors: self.p,
            predictor_scaling: self.centres.iter().copied().zip(self.scales.iter().copied()).collect(),
            iterations: sol.iterations,
        }
    }

    /// Solves along `lambdas` (any order), warm-starting each from the last.
    pub fn path(&self, r: &PenalizedResponse, lambdas: &[f64], base: &PenaltySpec) -> Result<Vec<PenalizedFit>> {
        let mut warm: Option<Vec<f64>> = None;
        let mut out = Vec::with_capacity(lambdas.len());
        for &l in lambdas {
            let spec = PenaltySpec { lambda_l1: l, ..*base };
            let sol = self.solve(r, &spec, warm.as_deref())?;
            out.push(self.to_fit(r, &sol));
            warm = Some(sol.beta);
        }
        Ok(out)
    }
}

/// One-shot elastic-net fit with standardized predictors and an intercept.
pub fn fit_penalized(x: &DMatrix<f64>, y: &[f64], spec: &PenaltySpec) -> Result<PenalizedFit> {
    spec.validate()?;
    let problem = PenalizedProblem::new(x, PenalizedOptions::default())?;
    let r = problem.response(y)?;
    let sol = problem.solve(&r, spec, None)?;
    Ok(problem.to_fit(&r, &sol))
}

/// `n` log-spaced penalties from `lambda_max` down to `lambda_max * ratio`.
pub fn lambda_grid(lambda_max: f64, n: usize, ratio: f64) -> Vec<f64> {
    match n {
        0 => vec![],
        1 => vec![lambda_max],
        _ => (0..n)
            .map(|i| lambda_max * ratio.powf(i as f64 / (n - 1) as f64))
            .collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::fit_ols;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn random_problem(seed: u64, n: usize, p: usize) -> (DMatrix<f64>, Vec<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = DMatrix::from_fn(n, p, |_, j| (j as f64 + 1.0) * { let z: f64 = StandardNormal.sample(&mut rng); z } + j as f64);
        let y = (0..n)
            .map(|i| 0.5 + 2.0 * x[(i, 0)] - 0.7 * x[(i, 1 % p)] + { let z: f64 = StandardNormal.sample(&mut rng); z })
            .collect();
        (x, y)
    }

    #[test]
    fn unpenalized_limit_matches_ols() {
        let (x, y) = random_problem(1, 80, 5);
        let spec = PenaltySpec { tol: 1e-12, ..PenaltySpec::default() };
        let fit = fit_penalized(&x, &y, &spec).unwrap();
        let ols = fit_ols(&x, &y).unwrap();
        assert!((fit.intercept - ols.intercept).abs() < 1e-6);
        for j in 0..5 {
            assert!((fit.coefficient(j) - ols.slopes[j]).abs() < 1e-6);
        }
    }

    #[test]
    fn lambda_max_zeros_every_slope() {
        let (x, y) = random_problem(2, 50, 8);
        let problem = PenalizedProblem::new(&x, PenalizedOptions::default()).unwrap();
        let r = problem.response(&y).unwrap();
        // Oracle: compute max |2 z_j'(y - ybar)| from an independently standardized copy.
        let n = x.nrows() as f64;
        let ybar = y.iter().sum::<f64>() / n;
        let oracle = (0..8)
            .map(|j| {
                let col: Vec<f64> = x.column(j).iter().copied().collect();
                let m = col.iter().sum::<f64>() / n;
                let sd = (col.iter().map(|v| (v - m).powi(2)).sum::<f64>() / n).sqrt();
                (2.0 * col.iter().zip(&y).map(|(a, b)| (a - m) / sd * (b - ybar)).sum::<f64>()).abs()
            })
            .fold(0.0, f64::max);
        let lmax = problem.lambda_max(&r);
        assert!((lmax - oracle).abs() <= 1e-10 * oracle);
        let fit = fit_penalized(&x, &y, &PenaltySpec::lasso(lmax)).unwrap();
        assert_eq!(fit.n_nonzero, 0);
        assert!((fit.intercept - ybar).abs() < 1e-12);
        let fit = fit_penalized(&x, &y, &PenaltySpec::lasso(0.99 * lmax)).unwrap();
        assert!(fit.n_nonzero > 0);
    }

    #[test]
    fn single_predictor_is_soft_thresholded_ols() {
        let (x, y) = random_problem(3, 60, 1);
        let n = 60.0;
        let ols = fit_ols(&x, &y).unwrap().slopes[0];
        let m = x.column(0).mean();
        let sd = (x.column(0).iter().map(|v| (v - m).powi(2)).sum::<f64>() / n).sqrt();
        for lambda in [0.0, 5.0, 40.0, 150.0, 1e4] {
            let fit = fit_penalized(&x, &y, &PenaltySpec { tol: 1e-13, ..PenaltySpec::lasso(lambda) }).unwrap();
            // Stationarity in 1-D on the standardized scale: b_std = S(n * b_ols_std, lambda/2) / n.
            let b_std = ols * sd;
            let expected = soft_threshold(b_std, lambda / (2.0 * n)) / sd;
            assert!((fit.coefficient(0) - expected).abs() < 1e-9, "lambda {lambda}");
        }
    }

    #[test]
    fn orthonormal_design_soft_thresholds_each_coefficient() {
        // Centred columns with equal norms and zero cross products.
        let x = DMatrix::from_row_slice(4, 2, &[1.0, 1.0, 1.0, -1.0, -1.0, 1.0, -1.0, -1.0]);
        let y = [3.0, 1.0, -0.5, -2.5];
        let ols = fit_ols(&x, &y).unwrap();
        let n = 4.0;
        for lambda in [0.0, 1.0, 4.0, 9.0, 30.0] {
            let fit = fit_penalized(&x, &y, &PenaltySpec { tol: 1e-14, ..PenaltySpec::lasso(lambda) }).unwrap();
            for j in 0..2 {
                let b = ols.slopes[j];
                let expected = b.signum() * (b.abs() - lambda / (2.0 * n)).max(0.0);
                assert!((fit.coefficient(j) - expected).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn zero_variance_predictor_gets_zero() {
        let (mut x, y) = random_problem(4, 30, 3);
        x.column_mut(1).fill(2.5);
        let fit = fit_penalized(&x, &y, &PenaltySpec::lasso(0.1)).unwrap();
        assert_eq!(fit.coefficient(1), 0.0);
    }

    #[test]
    fn more_predictors_than_rows() {
        let (x, y) = random_problem(5, 20, 60);
        let fit = fit_penalized(&x, &y, &PenaltySpec::lasso(5.0)).unwrap();
        assert!(fit.n_nonzero <= 20);
    }

    #[test]
    fn non_convergence_reports_gap() {
        let (x, y) = random_problem(6, 40, 6);
        let err = fit_penalized(&x, &y, &PenaltySpec { max_iter: 1, tol: 1e-15, ..PenaltySpec::default() }).unwrap_err();
        match err {
            Error::Convergence { iterations, gap } => {
                assert_eq!(iterations, 1);
                assert!(gap > 0.0);
            }
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn ridge_penalty_matches_closed_form() {
        let (x, y) = random_problem(7, 50, 3);
        let problem = PenalizedProblem::new(&x, PenalizedOptions::default()).unwrap();
        let r = problem.response(&y).unwrap();
        let l2 = 12.0;
        let sol = problem.solve(&r, &PenaltySpec { lambda_l2: l2, tol: 1e-14, ..PenaltySpec::default() }, None).unwrap();
        // (Z'Z + l2 I) b = Z'y on the standardized scale.
        let mut a = problem.gram.clone();
        for j in 0..3 {
            a[(j, j)] += l2;
        }
        let b = a.lu().solve(&nalgebra::DVector::from_vec(r.zty.clone())).unwrap();
        for j in 0..3 {
            assert!((sol.beta[j] - b[j]).abs() < 1e-9);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn path_solutions_satisfy_kkt_and_fit_improves(seed in 0u64..1000) {
            let (x, y) = random_problem(seed, 40, 12);
            let problem = PenalizedProblem::new(&x, PenalizedOptions::default()).unwrap();
            let r = problem.response(&y).unwrap();
            let grid = lambda_grid(problem.lambda_max(&r), 10, 1e-3);
            let mut warm: Option<Vec<f64>> = None;
            let mut last_rss = f64::INFINITY;
            for &l in &grid {
                let spec = PenaltySpec { lambda_l1: l, tol: 1e-10, ..PenaltySpec::default() };
                let sol = problem.solve(&r, &spec, warm.as_deref()).unwrap();
                let mut c = vec![0.0; problem.p];
                problem.refresh_gradient(&r, &sol.beta, &mut c);
                prop_assert!(problem.kkt_gap(&sol.beta, &c, &spec) < 1e-6 * problem.lambda_max(&r));
                let fit = problem.to_fit(&r, &sol);
                let rss: f64 = (0..y.len())
                    .map(|i| {
                        let row: Vec<f64> = x.row(i).iter().copied().collect();
                        (y[i] - fit.predict(&row)).powi(2)
                    })
                    .sum();
                prop_assert!(rss <= last_rss * (1.0 + 1e-9));
                last_rss = rss;
                warm = Some(sol.beta);
            }
        }
    }
}
