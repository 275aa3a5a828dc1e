//! Truncated-hierarchy resolvents in momentum space: interlacing of the
//! degree-3/4/5 truncations, grid-refinement deltas, and the diagonal
//! upper/lower substitution modes bracketing the exact value.
//!
//!     cargo run --release --example nested_resolvent

use std::sync::Arc;

use asep2d::hierarchy::{
    resolvent_degree_two_diagonal, resolvent_truncated, NestedMode, NestedResolventSpec, UVParams,
};
use asep2d::momentum::{Grid1d, Grid2d};

fn grid(lambda: f64, points_per_side: usize) -> asep2d::Result<Arc<Grid2d>> {
    let p_min = lambda.sqrt().min(std::f64::consts::PI / 4.0);
    Ok(Arc::new(Grid2d::new(Grid1d::geometric(p_min, points_per_side)?)))
}

fn main() -> asep2d::Result<()> {
    let lambda = 1e-3;
    let g = grid(lambda, 2)?;
    println!("lambda = {lambda}, log-spaced axis with {} points", g.axis.len());

    let v2 = resolvent_degree_two_diagonal(&g, lambda)?;
    let v3 = resolvent_truncated(&NestedResolventSpec::exact(3, lambda, g.clone()))?;
    let v4 = resolvent_truncated(&NestedResolventSpec::exact(4, lambda, g.clone()))?;
    // degree 5 is far more expensive per digit; six digits are plenty here
    let mut spec5 = NestedResolventSpec::exact(5, lambda, g.clone());
    spec5.tol = 1e-6;
    let v5 = resolvent_truncated(&spec5)?;
    println!("  v2 (diagonal bound) = {v2:.5}");
    for (n, v) in [(3, &v3), (4, &v4), (5, &v5)] {
        println!("  v{n} = {:.5}  ({} iterations, residual {:.1e})", v.value, v.iterations, v.residual);
    }
    println!("  interlacing v3 <= v5 <= v4 <= v2: {}",
        v3.value <= v5.value && v5.value <= v4.value && v4.value <= v2);

    // the interlacing above holds on any common grid; a converged value
    // needs a much finer axis, affordable at degree 3
    let v3c = resolvent_truncated(&NestedResolventSpec::exact(3, lambda, grid(lambda, 16)?))?;
    let v3f = resolvent_truncated(&NestedResolventSpec::exact(3, lambda, grid(lambda, 20)?))?;
    println!("  converged degree-3 value: {:.5} (refinement delta {:.2}%)",
        v3f.value, 100.0 * (v3f.value - v3c.value).abs() / v3c.value);

    let uv = UVParams::new(2.0 / 3.0, 1.5, lambda)?;
    let mut spec = NestedResolventSpec::exact(3, lambda, g);
    spec.uv = Some(uv);
    spec.mode = NestedMode::DiagonalU;
    let low = resolvent_truncated(&spec)?;
    spec.mode = NestedMode::DiagonalV;
    let high = resolvent_truncated(&spec)?;
    println!("  diagonal bracket: {:.5} <= {:.5} <= {:.5}", low.value, v3.value, high.value);
    Ok(())
}
