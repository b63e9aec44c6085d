//! Mincer-Zarnowitz regressions of realized on forecast variance.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MzFit {
    pub alpha: f64,
    pub beta: f64,
    pub r2: f64,
}

/// OLS of `y` on a constant and `yhat`, with `R^2 = 1 - SSE / SST`.
pub fn mz_fit(y: &[f64], yhat: &[f64]) -> Result<MzFit> {
    if y.len() != yhat.len() {
        return Err(Error::Data(format!("{} realized values for {} forecasts", y.len(), yhat.len())));
    }
    let n = y.len();
    if n < 3 {
        return Err(Error::insufficient(format!("MZ regression needs 3 cells, got {n}")));
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / n as f64;
    let (my, mx) = (mean(y), mean(yhat));
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in y.iter().zip(yhat) {
        let (dy, dx) = (a - my, b - mx);
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
    }
    let scale = yhat.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if !(sxx > (1e-12 * scale).powi(2) * n as f64) {
        return Err(Error::DegenerateRegressor("forecasts are constant".into()));
    }
    if !(syy > 0.0) {
        return Err(Error::DegenerateSeries("realized values are constant".into()));
    }
    let beta = sxy / sxx;
    let alpha = my - beta * mx;
    let sse: f64 = y.iter().zip(yhat).map(|(a, b)| (a - alpha - beta * b).powi(2)).sum();
    Ok(MzFit { alpha, beta, r2: 1.0 - sse / syy })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Exp1};

    fn series(n: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| { let e: f64 = Exp1.sample(&mut rng); 1e-4 * e }).collect()
    }

    #[test]
    fn perfect_and_halved_forecasts() {
        let y = series(200, 1);
        let fit = mz_fit(&y, &y).unwrap();
        assert!(fit.alpha.abs() < 1e-10 && (fit.beta - 1.0).abs() < 1e-10 && (fit.r2 - 1.0).abs() < 1e-10);
        let half: Vec<f64> = y.iter().map(|v| v / 2.0).collect();
        let fit = mz_fit(&y, &half).unwrap();
        assert!(fit.alpha.abs() < 1e-10 && (fit.beta - 2.0).abs() < 1e-10 && (fit.r2 - 1.0).abs() < 1e-10);
    }

    #[test]
    fn independent_noise_has_no_fit() {
        let fit = mz_fit(&series(10_000, 2), &series(10_000, 3)).unwrap();
        assert!(fit.r2.abs() < 0.02, "{}", fit.r2);
    }

    #[test]
    fn degenerate_inputs() {
        assert!(matches!(mz_fit(&[1.0, 2.0, 3.0], &[1.0; 3]), Err(Error::DegenerateRegressor(_))));
        assert!(matches!(mz_fit(&[1.0, 2.0], &[1.0, 2.0]), Err(Error::InsufficientData(_))));
        assert!(mz_fit(&[1.0, 2.0, 3.0], &[1.0, 2.0]).is_err());
    }

    proptest! {
        #[test]
        fn r2_is_invariant_to_positive_affine_maps(seed in 0u64..500, a in 0.1..10.0f64, b in -1.0..1.0f64) {
            let y = series(50, seed);
            let x = series(50, seed + 1000);
            let mapped: Vec<f64> = x.iter().map(|v| a * v + b * 1e-4).collect();
            let r0 = mz_fit(&y, &x).unwrap().r2;
            let r1 = mz_fit(&y, &mapped).unwrap().r2;
            prop_assert!((r0 - r1).abs() < 1e-9);
            prop_assert!(r0 <= 1.0);
        }
    }
}
