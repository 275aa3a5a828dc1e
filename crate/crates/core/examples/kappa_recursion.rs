//! The exact rational exponent schedule: the recursion kappa <- 1 - kappa/2,
//! its pinned tail (0, 1, 1/2, 3/4, ...), and convergence to the fixed
//! point 2/3 at rate 2^-n.
//!
//!     cargo run --example kappa_recursion

use asep2d::scaling::{iterate_kappa, kappa_schedule, rational_to_f64};

fn main() -> asep2d::Result<()> {
    let n = 5;
    for alternate in [false, true] {
        let s = kappa_schedule(n, alternate)?;
        println!("{} schedule, N = {n} ({} entries):",
            if alternate { "alternate" } else { "primary" }, s.values.len());
        for (i, v) in s.values.iter().enumerate() {
            println!("  kappa_{:<2} = {v:>10}  ~ {:.6}", i + 1, rational_to_f64(v));
        }
        assert!(s.check_recursion().is_none());
        println!("  adjacent recursion kappa_(n-1) = 1 - kappa_n/2: exact\n");
    }

    println!("fixed-point iteration from 0:");
    let path = iterate_kappa(0.0, 20);
    for (i, k) in path.iter().enumerate().step_by(5) {
        println!("  step {i:2}: {k:.8} (error {:.2e})", (k - 2.0 / 3.0).abs());
    }
    Ok(())
}
