//! Forecast combination: equal-weight averages and egalitarian LASSO weights.

use nalgebra::DMatrix;

use super::penalized::{PenalizedOptions, PenalizedProblem, PenaltySpec};
use crate::error::{Error, Result};

/// Mean over the available member forecasts.
pub fn average_forecasts(forecasts: &[Option<f64>]) -> Result<f64> {
    let present: Vec<f64> = forecasts.iter().flatten().copied().collect();
    if present.is_empty() {
        return Err(Error::insufficient("no member forecast available"));
    }
    Ok(present.iter().sum::<f64>() / present.len() as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct CombinationWeights {
    pub weights: Vec<f64>,
    /// Set when the member histories were identical (or every member was
    /// discarded) and equal weights were returned instead.
    pub degenerate: bool,
}

impl CombinationWeights {
    pub fn combine(&self, forecasts: &[f64]) -> f64 {
        self.weights.iter().zip(forecasts).map(|(w, f)| w * f).sum()
    }
}

fn equal(k: usize) -> CombinationWeights {
    CombinationWeights { weights: vec![1.0 / k as f64; k], degenerate: true }
}

fn raw_lasso(x: &DMatrix<f64>, y: &[f64], lambda: f64, spec: &PenaltySpec) -> Result<Vec<f64>> {
    let problem = PenalizedProblem::new(x, PenalizedOptions { intercept: false, standardize: false })?;
    let r = problem.response(y)?;
    let sol = problem.solve(&r, &PenaltySpec { lambda_l1: lambda, ..*spec }, None)?;
    Ok(sol.beta)
}

/// Egalitarian LASSO weights `1/K + delta`, where `delta` is the LASSO fit
/// (no intercept, unscaled members) of `y - mean(yhat)` on the members.
/// With `partial`, an ordinary LASSO of `y` on the members first discards
/// members with a zero coefficient and the egalitarian step runs on the
/// survivors with the same penalty.
pub fn egalitarian_combine(
    member_history: &DMatrix<f64>,
    realized: &[f64],
    lambda: f64,
    partial: bool,
) -> Result<CombinationWeights> {
    egalitarian_combine_with(member_history, realized, lambda, partial, &PenaltySpec { tol: 1e-10, ..PenaltySpec::default() })
}

pub fn egalitarian_combine_with(
    member_history: &DMatrix<f64>,
    realized: &[f64],
    lambda: f64,
    partial: bool,
    spec: &PenaltySpec,
) -> Result<CombinationWeights> {
    let (t, k) = member_history.shape();
    if k == 0 {
        return Err(Error::insufficient("no combination members"));
    }
    if t != realized.len() {
        return Err(Error::Data(format!("{t} forecast rows but {} realized values", realized.len())));
    }
    if !(lambda >= 0.0) {
        return Err(Error::config("lambda must be non-negative"));
    }
    let identical = (1..k).all(|j| member_history.column(j) == member_history.column(0));
    if identical || t == 0 {
        return Ok(equal(k));
    }
    let survivors: Vec<usize> = if partial {
        let b = raw_lasso(member_history, realized, lambda, spec)?;
        (0..k).filter(|&j| b[j] != 0.0).collect()
    } else {
        (0..k).collect()
    };
    if survivors.is_empty() {
        return Ok(equal(k));
    }
    let ks = survivors.len();
    let x = DMatrix::from_fn(t, ks, |i, j| member_history[(i, survivors[j])]);
    let y_tilde: Vec<f64> = (0..t)
        .map(|i| realized[i] - x.row(i).iter().sum::<f64>() / ks as f64)
        .collect();
    let delta = raw_lasso(&x, &y_tilde, lambda, spec)?;
    let mut weights = vec![0.0; k];
    for (j, &m) in survivors.iter().enumerate() {
        weights[m] = 1.0 / ks as f64 + delta[j];
    }
    Ok(CombinationWeights { weights, degenerate: false })
}

/// Largest useful penalty for the egalitarian step: `max_j |2 x_j' y_tilde|`.
pub fn egalitarian_lambda_max(member_history: &DMatrix<f64>, realized: &[f64]) -> f64 {
    let (t, k) = member_history.shape();
    (0..k)
        .map(|j| {
            let s: f64 = (0..t)
                .map(|i| member_history[(i, j)] * (realized[i] - member_history.row(i).sum() / k as f64))
                .sum();
            2.0 * s.abs()
        })
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DVector;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn history(seed: u64, t: usize) -> (DMatrix<f64>, Vec<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut n = || -> f64 { StandardNormal.sample(&mut rng) };
        let mut x = DMatrix::zeros(t, 3);
        let mut y = vec![0.0; t];
        for i in 0..t {
            let signal = n();
            y[i] = signal + 0.5 * n();
            x[(i, 0)] = signal + 0.3 * n();
            x[(i, 1)] = signal + 0.6 * n();
            x[(i, 2)] = n();
        }
        (x, y)
    }

    #[test]
    fn averages() {
        assert_eq!(average_forecasts(&[Some(2e-4); 3]).unwrap(), 2e-4);
        assert!((average_forecasts(&[Some(1e-4), Some(3e-4)]).unwrap() - 2e-4).abs() < 1e-18);
        assert!((average_forecasts(&[Some(1e-4), None, Some(3e-4)]).unwrap() - 2e-4).abs() < 1e-18);
        assert!(matches!(average_forecasts(&[None, None]), Err(Error::InsufficientData(_))));
    }

    #[test]
    fn large_lambda_gives_equal_weights() {
        let (x, y) = history(1, 200);
        let l = egalitarian_lambda_max(&x, &y);
        let w = egalitarian_combine(&x, &y, l * 1.0001, false).unwrap();
        assert!(w.weights.iter().all(|v| *v == 1.0 / 3.0));
        assert!(!w.degenerate);
    }

    #[test]
    fn zero_lambda_gives_ols_combination() {
        let (x, y) = history(2, 200);
        let w = egalitarian_combine(&x, &y, 0.0, false).unwrap();
        let ols = (x.transpose() * &x).cholesky().unwrap().solve(&(x.transpose() * DVector::from_vec(y)));
        for j in 0..3 {
            assert!((w.weights[j] - ols[j]).abs() < 1e-7, "{} vs {}", w.weights[j], ols[j]);
        }
    }

    #[test]
    fn identical_members_are_degenerate() {
        let col = DVector::from_vec(vec![1.0, 2.0, 3.0, 4.0]);
        let x = DMatrix::from_columns(&[col.clone(), col.clone()]);
        let w = egalitarian_combine(&x, &[1.0, 2.0, 3.0, 4.5], 0.1, true).unwrap();
        assert!(w.degenerate);
        assert_eq!(w.weights, vec![0.5, 0.5]);
    }

    #[test]
    fn partial_discards_the_noise_member() {
        let mut dropped = 0;
        for seed in 0..50 {
            let (x, y) = history(100 + seed, 250);
            let problem = PenalizedProblem::new(&x, PenalizedOptions { intercept: false, standardize: false }).unwrap();
            let lmax = problem.lambda_max(&problem.response(&y).unwrap());
            let w = egalitarian_combine(&x, &y, 0.1 * lmax, true).unwrap();
            if w.weights[2] == 0.0 {
                dropped += 1;
            }
            assert!(w.weights[0] > 0.0);
        }
        assert!(dropped >= 48, "noise member dropped in {dropped}/50");
    }
}
