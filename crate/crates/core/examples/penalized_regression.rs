//! LASSO path on a sparse linear problem: which predictors enter as the
//! penalty falls.

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rvforecast::models::{lambda_grid, PenalizedOptions, PenalizedProblem, PenaltySpec};

fn main() -> rvforecast::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let (n, p) = (200, 30);
    let x = DMatrix::from_fn(n, p, |_, _| StandardNormal.sample(&mut rng));
    let truth = [(0, 2.0), (3, -1.5), (7, 1.0)];
    let y: Vec<f64> = (0..n)
        .map(|i| {
            let noise: f64 = StandardNormal.sample(&mut rng);
            truth.iter().map(|&(j, b)| b * x[(i, j)]).sum::<f64>() + 0.5 * noise
        })
        .collect();

    let problem = PenalizedProblem::new(&x, PenalizedOptions::default())?;
    let r = problem.response(&y)?;
    let grid = lambda_grid(problem.lambda_max(&r), 20, 1e-4);
    for (lambda, fit) in grid.iter().zip(problem.path(&r, &grid, &PenaltySpec::default())?) {
        let shown: Vec<String> = fit.coefficients.iter().take(6).map(|(j, b)| format!("x{j}={b:+.3}")).collect();
        println!("lambda {lambda:>10.3}  nonzero {:>2}  {}", fit.n_nonzero, shown.join(" "));
    }
    Ok(())
}
