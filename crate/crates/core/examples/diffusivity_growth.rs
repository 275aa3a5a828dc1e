//! Measure D(t) on a periodic torus along the Green-Kubo route (variance
//! of the space-summed instantaneous current) and report the Laplace
//! transform of t D(t) next to the theorem-level envelopes.
//!
//!     cargo run --release --example diffusivity_growth

use asep2d::lattice::DynamicsMode;
use asep2d::observables::{
    diffusivity_green_kubo, laplace_transform_d, measure_current_integral, SimParams,
};
use asep2d::scaling::bound_envelope;

fn main() -> asep2d::Result<()> {
    let params = SimParams {
        width: 64,
        height: 64,
        rho: 0.5,
        replicas: 200,
        seed: 42,
        mode: DynamicsMode::Full,
        canonical_k: None,
    };
    let t_grid: Vec<f64> = (1..=12).map(|i| 2.0 * i as f64).collect();
    println!("running {} replicas on {}x{} ...", params.replicas, params.width, params.height);
    let ci = measure_current_integral(&params, &t_grid)?;
    let d = diffusivity_green_kubo(&ci);
    println!("{:>8} {:>10} {:>10}", "t", "D11(t)", "se");
    for i in 0..d.t_grid.len() {
        println!("{:8.1} {:10.4} {:10.4}", d.t_grid[i], d.values[i], d.errors[i]);
    }

    let lambda = 0.2;
    let lap = laplace_transform_d(&d, lambda)?;
    println!(
        "\nint e^(-{lambda} t) t D(t) dt = {:.4}  (tail fraction {:.3}, truncated: {})",
        lap.value, lap.tail_fraction, lap.truncated
    );
    let env = bound_envelope(&[lambda], 0.5)?;
    let (_, lo, hi) = env[0];
    println!("envelope at lambda = {lambda}: [{lo:.3}, {hi:.3}] (x lambda^2: [{:.3}, {:.3}])",
        lo * lambda * lambda, hi * lambda * lambda);
    Ok(())
}
