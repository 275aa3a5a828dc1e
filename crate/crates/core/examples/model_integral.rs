//! The scalar model integral over the shrinking disc: the `1 - kappa/2`
//! exponent law, checked as a ratio band across three orders of lambda.
//!
//!     cargo run --release --example model_integral

use asep2d::hierarchy::{k_integral, KIntegralSpec};

fn main() -> asep2d::Result<()> {
    let tau = 1.5;
    println!("{:>6} {:>10} {:>12} {:>12}", "kappa", "lambda", "K", "K/|log|^e");
    for kappa in [0.0, 0.5, 2.0 / 3.0, 1.0] {
        let e = 1.0 - kappa / 2.0;
        for lambda in [1e-6, 1e-9, 1e-12] {
            let k = k_integral(&KIntegralSpec::new(kappa, tau, 0.0, 0.0, lambda))?;
            let scale: f64 = lambda.ln().abs();
            println!("{kappa:6.3} {lambda:10.0e} {k:12.4} {:12.4}", k / scale.powf(e));
        }
    }
    println!("\noff-center (a^2 + b^2 = |log lambda|^(-4 tau)):");
    for lambda in [1e-6f64, 1e-9, 1e-12] {
        let ab = lambda.ln().abs().powf(-4.0 * tau);
        let k = k_integral(&KIntegralSpec::new(0.5, tau, ab / 2.0, ab / 2.0, lambda))?;
        let scale = (lambda + ab).ln().abs();
        println!("  lambda = {lambda:7.0e}: K = {k:8.4}, K/|log(lambda+a2+b2)|^0.75 = {:.4}",
            k / scale.powf(0.75));
    }
    Ok(())
}
