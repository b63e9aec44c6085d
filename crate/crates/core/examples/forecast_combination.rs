//! Equal-weight and egalitarian LASSO combinations of three forecasters of
//! different quality.

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rvforecast::models::{average_forecasts, egalitarian_combine, egalitarian_lambda_max};

fn main() -> rvforecast::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let level = Normal::new(4e-4, 1e-4).unwrap();
    let noise = [2e-5, 6e-5, 2e-4];
    let t = 300;
    let truth: Vec<f64> = (0..t).map(|_| level.sample(&mut rng)).collect();
    let members = DMatrix::from_fn(t, 3, |i, j| truth[i] + Normal::new(0.0, noise[j]).unwrap().sample(&mut rng));

    let avg = average_forecasts(&[Some(members[(0, 0)]), Some(members[(0, 1)]), None])?;
    println!("average of the first two members on day 0: {avg:.3e}");
    let lmax = egalitarian_lambda_max(&members, &truth);
    for frac in [1.0, 0.1, 0.01, 0.001] {
        let e = egalitarian_combine(&members, &truth, frac * lmax, false)?;
        let p = egalitarian_combine(&members, &truth, frac * lmax, true)?;
        println!("lambda = {frac:<5} x max  elasso {:?}  pelasso {:?}", rounded(&e.weights), rounded(&p.weights));
    }
    Ok(())
}

fn rounded(w: &[f64]) -> Vec<f64> {
    w.iter().map(|v| (v * 1000.0).round() / 1000.0).collect()
}
