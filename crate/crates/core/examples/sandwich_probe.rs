//! Randomized check of the operator inequality behind the two-sided
//! estimate: the raising-operator sandwich against the diagonal U
//! multiplier, over random symmetric degree-2 test functions.
//!
//!     cargo run --release --example sandwich_probe

use std::sync::Arc;

use asep2d::hierarchy::verify_main_estimate_sandwich;
use asep2d::momentum::Grid2d;

fn main() -> asep2d::Result<()> {
    let grid = Arc::new(Grid2d::uniform(6)?);
    let lambdas = [1e-4, 1e-6, 1e-9];
    let reports = verify_main_estimate_sandwich(1.0, 1.5, 2, &lambdas, &grid, 50, 314)?;
    println!("kappa = 1 (kappa~ = 1/2), tau = 1.5, 50 random symmetric F per lambda");
    println!("{:>10} {:>12} {:>12} {:>10}", "lambda", "worst ratio", "mean ratio", "violations");
    for r in &reports {
        println!("{:10.0e} {:12.5} {:12.5} {:10}", r.lambda, r.worst_ratio, r.mean_ratio, r.violations);
    }
    Ok(())
}
