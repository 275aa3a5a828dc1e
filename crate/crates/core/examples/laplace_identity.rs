//! Close the loop between simulation and exact linear algebra: the Laplace
//! transform of t D11(t) measured by Monte Carlo on a small torus equals
//! 1/(2 lambda^2) + 2 chi^-1 lambda^-2 <<w, (lambda - L)^-1 w>> with the
//! resolvent computed from the explicit generator matrix.
//!
//!     cargo run --release --example laplace_identity

use asep2d::lattice::DynamicsMode;
use asep2d::observables::{
    diffusivity_green_kubo, laplace_transform_d, measure_current_integral, SimParams,
};
use asep2d::oracle::build_generator;

fn main() -> asep2d::Result<()> {
    let (width, height, k) = (4, 3, 6);
    let params = SimParams {
        width,
        height,
        rho: k as f64 / (width * height) as f64,
        replicas: 1500,
        seed: 11,
        mode: DynamicsMode::Full,
        canonical_k: Some(k),
    };
    let chi = params.chi();
    let t_grid: Vec<f64> = (1..=60).map(|i| 0.5 * i as f64).collect();
    println!("simulating {} replicas to t = {} ...", params.replicas, t_grid.last().unwrap());
    let ci = measure_current_integral(&params, &t_grid)?;
    let d = diffusivity_green_kubo(&ci);

    let gen = build_generator(width, height, k)?;
    println!("{:>8} {:>12} {:>12} {:>8}", "lambda", "monte-carlo", "resolvent", "ratio");
    for lambda in [1.0, 0.5, 0.2] {
        let mc = laplace_transform_d(&d, lambda)?;
        let rv = gen.exact_resolvent(lambda)?;
        let exact = 0.5 / (lambda * lambda) + 2.0 / (chi * lambda * lambda) * rv.value;
        println!("{lambda:8.2} {:12.5} {exact:12.5} {:8.4}", mc.value, mc.value / exact);
    }
    Ok(())
}
