//! Black-Scholes prices and deltas with zero rates and no dividends.

use statrs::distribution::{ContinuousCDF, Normal};

use super::quote::OptionRight;

fn std_normal() -> Normal {
    Normal::new(0.0, 1.0).expect("unit normal")
}

fn d1(spot: f64, strike: f64, vol: f64, years: f64) -> f64 {
    ((spot / strike).ln() + 0.5 * vol * vol * years) / (vol * years.sqrt())
}

/// Price and delta of a European option. `vol` is annualized, `years` is
/// time to expiry in years.
pub fn black_scholes(right: OptionRight, spot: f64, strike: f64, vol: f64, years: f64) -> (f64, f64) {
    let n = std_normal();
    if vol <= 0.0 || years <= 0.0 {
        let intrinsic = match right {
            OptionRight::Call => (spot - strike).max(0.0),
            OptionRight::Put => (strike - spot).max(0.0),
        };
        let delta = match right {
            OptionRight::Call if spot > strike => 1.0,
            OptionRight::Put if spot < strike => -1.0,
            _ => 0.0,
        };
        return (intrinsic, delta);
    }
    let a = d1(spot, strike, vol, years);
    let b = a - vol * years.sqrt();
    match right {
        OptionRight::Call => (spot * n.cdf(a) - strike * n.cdf(b), n.cdf(a)),
        OptionRight::Put => (strike * n.cdf(-b) - spot * n.cdf(-a), n.cdf(a) - 1.0),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn put_call_parity() {
        for &(s, k, v, t) in &[(100.0, 95.0, 0.3, 0.1), (50.0, 55.0, 0.6, 0.5), (20.0, 20.0, 0.2, 0.04)] {
            let (c, dc) = black_scholes(OptionRight::Call, s, k, v, t);
            let (p, dp) = black_scholes(OptionRight::Put, s, k, v, t);
            assert!((c - p - (s - k)).abs() < 1e-9);
            assert!((dc - dp - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn atm_call_matches_reference_value() {
        // S=K=100, sigma=0.2, T=1: 100*(2N(0.1)-1) = 7.965567...
        let (c, _) = black_scholes(OptionRight::Call, 100.0, 100.0, 0.2, 1.0);
        assert!((c - 7.965567455405804).abs() < 1e-9, "{c}");
    }

    #[test]
    fn expired_option_is_intrinsic() {
        assert_eq!(black_scholes(OptionRight::Put, 90.0, 100.0, 0.3, 0.0), (10.0, -1.0));
    }
}
