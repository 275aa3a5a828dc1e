//! Momentum-space representation of the hard-core-free duality hierarchy.
//!
//! Degree-n objects are complex functions of n momenta on the 2-torus
//! constrained to `sum_j p_j = 0`; the constraint is eliminated by storing
//! only the first n-1 momenta on a product grid, the last momentum being
//! computed.  The raising operator merges two momentum slots with the
//! kernel coefficient `-i (sin r_j + sin r_m)` — the symmetrization of
//! the ordered-pair kernel `-(e^{i r_j} - e^{-i r_m})`, exact on the
//! symmetric functions the hierarchy lives on; merged momenta are
//! generally off-grid and are resolved by bilinear interpolation, and the
//! lowering operator is defined as minus the adjoint of the discretized
//! raising operator under the weighted inner product, so the adjoint
//! identity holds to machine precision by construction.
//!
//! Quadrature normalization: each 1-D axis carries weights `cell / 2pi`
//! summing to 1, so `int dp = 1` per momentum and the degree-two
//! calibration `<w, w> = 1/2` holds exactly.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{Error, Result};

pub const TWO_PI: f64 = 2.0 * PI;

/// Reduce an angle to [-pi, pi).
pub fn wrap_angle(x: f64) -> f64 {
    let y = x - TWO_PI * ((x + PI) / TWO_PI).floor();
    if y >= PI {
        y - TWO_PI
    } else if y < -PI {
        y + TWO_PI
    } else {
        y
    }
}

/// One-axis dispersion `2 - 2 cos x`.
pub fn omega_axis(x: f64) -> f64 {
    2.0 - 2.0 * x.cos()
}

/// Two-dimensional dispersion `omega(p) = (2-2cos r) + (2-2cos s)`.
pub fn omega(r: f64, s: f64) -> f64 {
    omega_axis(r) + omega_axis(s)
}

/// Points on one momentum axis with periodic quadrature weights.
///
/// Invariants: sorted, contained in [-pi, pi), closed under negation
/// (mod 2pi), containing 0; weights are midpoint cells / 2pi and sum to 1.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid1d {
    points: Vec<f64>,
    weights: Vec<f64>,
}

/// Interpolation stencil on one axis: one exact point or two bracketing
/// points with convex coefficients.
#[derive(Debug, Clone, Copy)]
pub struct Stencil1 {
    pub a: (usize, f64),
    pub b: Option<(usize, f64)>,
}

const SNAP_TOL: f64 = 1e-9;

impl Grid1d {
    fn from_points(mut points: Vec<f64>) -> Result<Self> {
        points.sort_by(|a, b| a.partial_cmp(b).unwrap());
        points.dedup_by(|a, b| (*a - *b).abs() < SNAP_TOL);
        let m = points.len();
        if m < 2 {
            return Err(Error::parameter("momentum axis needs at least 2 points"));
        }
        // periodic midpoint cells
        let mut weights = vec![0.0; m];
        for i in 0..m {
            let prev = if i == 0 { points[m - 1] - TWO_PI } else { points[i - 1] };
            let next = if i == m - 1 { points[0] + TWO_PI } else { points[i + 1] };
            weights[i] = (next - prev) / 2.0 / TWO_PI;
        }
        Ok(Grid1d { points, weights })
    }

    /// Equally spaced axis with `m` points (m even), containing 0 and -pi.
    pub fn uniform(m: usize) -> Result<Self> {
        if m < 2 || m % 2 != 0 {
            return Err(Error::parameter(format!("uniform axis size {m} must be even and >= 2")));
        }
        let pts = (0..m).map(|k| -PI + TWO_PI * k as f64 / m as f64).collect();
        Self::from_points(pts)
    }

    /// Geometric (log-spaced) axis: 0, -pi, and `points_per_side` points
    /// from `p_min` to just under pi on each sign, so small-momentum
    /// structure at scale sqrt(lambda) is resolved with few points.
    pub fn geometric(p_min: f64, points_per_side: usize) -> Result<Self> {
        if !(p_min > 0.0 && p_min < PI / 2.0) {
            return Err(Error::parameter(format!("p_min {p_min} outside (0, pi/2)")));
        }
        if points_per_side < 2 {
            return Err(Error::parameter("need at least 2 points per side"));
        }
        let n = points_per_side;
        let ratio = (PI / p_min).powf(1.0 / n as f64);
        let mut pts = vec![0.0, -PI];
        let mut p = p_min;
        for _ in 0..n {
            if p < PI - SNAP_TOL {
                pts.push(p);
                pts.push(-p);
            }
            p *= ratio;
        }
        Self::from_points(pts)
    }

    /// Lambda-adapted axis: geometric from `sqrt(lambda)` with about
    /// `per_octave` points per factor of 2.
    pub fn graded(lambda: f64, per_octave: f64) -> Result<Self> {
        if lambda <= 0.0 {
            return Err(Error::parameter("lambda must be positive"));
        }
        let p_min = lambda.sqrt().min(PI / 4.0);
        let octaves = (PI / p_min).log2();
        let n = (octaves * per_octave).ceil().max(2.0) as usize;
        Self::geometric(p_min, n)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn point(&self, i: usize) -> f64 {
        self.points[i]
    }

    pub fn weight(&self, i: usize) -> f64 {
        self.weights[i]
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    /// Exact index of a grid angle, if `x` coincides with one.
    pub fn index_of(&self, x: f64) -> Option<usize> {
        let x = wrap_angle(x);
        match self.points.binary_search_by(|p| p.partial_cmp(&x).unwrap()) {
            Ok(i) => Some(i),
            Err(i) => {
                if i < self.points.len() && (self.points[i] - x).abs() < SNAP_TOL {
                    Some(i)
                } else if i > 0 && (self.points[i - 1] - x).abs() < SNAP_TOL {
                    Some(i - 1)
                } else if i == self.points.len() && (self.points[0] + TWO_PI - x).abs() < SNAP_TOL {
                    Some(0)
                } else {
                    None
                }
            }
        }
    }

    /// Linear interpolation stencil at an arbitrary angle (periodic).
    pub fn locate(&self, x: f64) -> Stencil1 {
        if let Some(i) = self.index_of(x) {
            return Stencil1 { a: (i, 1.0), b: None };
        }
        let x = wrap_angle(x);
        let m = self.points.len();
        let hi = self.points.partition_point(|&p| p <= x);
        let (lo, hi, xlo, xhi) = if hi == 0 || hi == m {
            // between the last point and the first (through the seam)
            (m - 1, 0, self.points[m - 1], self.points[0] + TWO_PI)
        } else {
            (hi - 1, hi, self.points[hi - 1], self.points[hi])
        };
        let x = if x < xlo { x + TWO_PI } else { x };
        let t = (x - xlo) / (xhi - xlo);
        Stencil1 { a: (lo, 1.0 - t), b: Some((hi, t)) }
    }
}

/// Product grid for one 2-D momentum, same axis in both directions.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid2d {
    pub axis: Grid1d,
}

impl Grid2d {
    pub fn new(axis: Grid1d) -> Self {
        Grid2d { axis }
    }

    pub fn uniform(m: usize) -> Result<Self> {
        Ok(Self::new(Grid1d::uniform(m)?))
    }

    pub fn graded(lambda: f64, per_octave: f64) -> Result<Self> {
        Ok(Self::new(Grid1d::graded(lambda, per_octave)?))
    }

    pub fn len(&self) -> usize {
        self.axis.len() * self.axis.len()
    }

    pub fn is_empty(&self) -> bool {
        self.axis.is_empty()
    }

    pub fn index(&self, ir: usize, is: usize) -> usize {
        ir * self.axis.len() + is
    }

    pub fn split(&self, i: usize) -> (usize, usize) {
        (i / self.axis.len(), i % self.axis.len())
    }

    /// (r, s) angles of a grid point.
    pub fn point(&self, i: usize) -> (f64, f64) {
        let (ir, is) = self.split(i);
        (self.axis.point(ir), self.axis.point(is))
    }

    pub fn weight(&self, i: usize) -> f64 {
        let (ir, is) = self.split(i);
        self.axis.weight(ir) * self.axis.weight(is)
    }

    pub fn omega(&self, i: usize) -> f64 {
        let (r, s) = self.point(i);
        omega(r, s)
    }
}

/// Symmetric degree-n function on the constraint slice, stored over the
/// first n-1 momenta (grid indices); the n-th momentum is `-sum` and is
/// computed, never stored.
#[derive(Debug, Clone)]
pub struct DegreeFn {
    pub grid: Arc<Grid2d>,
    pub degree: usize,
    pub values: Vec<Complex64>,
}

pub const MAX_DEGREE: usize = 5;

/// Number of stored slice points for a degree on a grid.
pub fn slice_len(grid: &Grid2d, degree: usize) -> usize {
    grid.len().pow(degree as u32 - 1)
}

impl DegreeFn {
    pub fn zeros(grid: Arc<Grid2d>, degree: usize) -> Result<Self> {
        if degree == 0 || degree > MAX_DEGREE {
            return Err(Error::capacity(format!("degree {degree} outside 1..={MAX_DEGREE}")));
        }
        let len = slice_len(&grid, degree);
        Ok(DegreeFn { grid, degree, values: vec![Complex64::default(); len] })
    }

    pub fn from_fn(
        grid: Arc<Grid2d>,
        degree: usize,
        mut f: impl FnMut(&[(f64, f64)]) -> Complex64,
    ) -> Result<Self> {
        let mut out = Self::zeros(grid, degree)?;
        let g = out.grid.clone();
        let nfree = degree - 1;
        let mut tuple = vec![(0.0, 0.0); degree];
        for idx in 0..out.values.len() {
            decode_tuple(&g, nfree, idx, &mut tuple);
            out.values[idx] = f(&tuple);
        }
        Ok(out)
    }

    pub fn nfree(&self) -> usize {
        self.degree - 1
    }

    /// Product of the quadrature weights of the free momenta.
    pub fn weight_of(&self, idx: usize) -> f64 {
        let g = self.grid.len();
        let mut w = 1.0;
        let mut rest = idx;
        for _ in 0..self.nfree() {
            w *= self.grid.weight(rest % g);
            rest /= g;
        }
        w
    }

    /// `lambda + sum_{j=1}^{n} omega(p_j)` at a slice point, including the
    /// determined momentum.
    pub fn omega_sum(&self, idx: usize) -> f64 {
        let mut tuple = vec![(0.0, 0.0); self.degree];
        decode_tuple(&self.grid, self.nfree(), idx, &mut tuple);
        tuple.iter().map(|&(r, s)| omega(r, s)).sum()
    }
}

/// Fill `tuple` with the n momenta of slice point `idx` (free momenta from
/// the grid, the last determined by the zero-sum constraint).
pub fn decode_tuple(grid: &Grid2d, nfree: usize, idx: usize, tuple: &mut [(f64, f64)]) {
    debug_assert_eq!(tuple.len(), nfree + 1);
    let g = grid.len();
    let (mut sr, mut ss) = (0.0, 0.0);
    let mut rest = idx;
    for slot in tuple.iter_mut().take(nfree) {
        let (r, s) = grid.point(rest % g);
        *slot = (r, s);
        sr += r;
        ss += s;
        rest /= g;
    }
    tuple[nfree] = (wrap_angle(-sr), wrap_angle(-ss));
}

/// `(1/n!) sum conj(F) G prod(weights)` — the discretization of the
/// slice measure inner product.
pub fn inner_product(f: &DegreeFn, g: &DegreeFn) -> Result<Complex64> {
    if f.degree != g.degree || !Arc::ptr_eq(&f.grid, &g.grid) && f.grid.as_ref() != g.grid.as_ref()
    {
        return Err(Error::parameter("inner product needs matching degree and grid"));
    }
    let fact: f64 = (1..=f.degree).map(|k| k as f64).product();
    let mut acc = Complex64::default();
    for idx in 0..f.values.len() {
        acc += f.values[idx].conj() * g.values[idx] * f.weight_of(idx);
    }
    Ok(acc / fact)
}

/// The weighted dot used by iterative solvers on degree-n containers
/// (same as [`inner_product`] without the 1/n! — solvers only need a
/// consistent Hermitian form).
pub fn weighted_dot(f: &DegreeFn, a: &[Complex64], b: &[Complex64]) -> Complex64 {
    let mut acc = Complex64::default();
    for idx in 0..a.len() {
        acc += a[idx].conj() * b[idx] * f.weight_of(idx);
    }
    acc
}

/// Degree-two current representative `w(p, -p) = e^{-i r_2} = e^{i r_1}`.
pub fn w_hat(grid: Arc<Grid2d>) -> DegreeFn {
    DegreeFn::from_fn(grid, 2, |t| Complex64::new(0.0, t[0].0).exp())
        .expect("degree 2 always within cap")
}

/// One raising-kernel term: a target read of the degree-n input with an
/// interpolation weight folded into the coefficient.
pub(crate) struct Term {
    pub(crate) src: usize,
    pub(crate) coef: Complex64,
}

/// Enumerate the kernel terms `-i (sin r_j + sin r_m) F(..., p_j+p_m,
/// ..., p_m dropped, ...)` for output slice point `t` of degree n+1,
/// reading from degree-n storage.
pub(crate) fn raising_terms(
    grid: &Grid2d,
    out_nfree: usize, // = n, the input degree
    t: usize,
    terms: &mut Vec<Term>,
) {
    terms.clear();
    let g = grid.len();
    let m1 = grid.axis.len();
    let n = out_nfree; // input degree; output has n+1 slots
    // decode output free coords (grid indices) and momenta
    let mut qi = [0usize; 4];
    let mut qr = [0.0f64; 5];
    let mut qs = [0.0f64; 5];
    let mut rest = t;
    let (mut sr, mut ss) = (0.0, 0.0);
    for k in 0..n {
        qi[k] = rest % g;
        rest /= g;
        let (r, s) = grid.point(qi[k]);
        qr[k] = r;
        qs[k] = s;
        sr += r;
        ss += s;
    }
    qr[n] = wrap_angle(-sr);
    qs[n] = wrap_angle(-ss);

    let in_nfree = n - 1;
    // pairs (j, m) with both slots free in the output
    for j in 0..n {
        for m in (j + 1)..n {
            let coef0 = Complex64::new(0.0, -(qr[j].sin() + qr[m].sin()));
            if coef0.norm_sqr() == 0.0 {
                continue;
            }
            let str = grid.axis.locate(qr[j] + qr[m]);
            let sts = grid.axis.locate(qs[j] + qs[m]);
            // free coords of the input read: merged replaces slot j, slot m
            // dropped, others keep their positions
            let mut base = [0usize; 4];
            let mut pos = 0;
            let mut merged_pos = 0;
            for k in 0..n {
                if k == m {
                    continue;
                }
                if k == j {
                    merged_pos = pos;
                }
                base[pos] = qi[k];
                pos += 1;
            }
            debug_assert_eq!(pos, in_nfree);
            let stride = g.pow(merged_pos as u32);
            // index with the merged slot zeroed (little-endian packing)
            let mut idx0 = 0usize;
            let mut mult = 1usize;
            for (k, &b) in base.iter().enumerate().take(in_nfree) {
                if k != merged_pos {
                    idx0 += b * mult;
                }
                mult *= g;
            }
            for &(ia, wa) in std::iter::once(&str.a).chain(str.b.iter()) {
                for &(ib, wb) in std::iter::once(&sts.a).chain(sts.b.iter()) {
                    let merged_idx = ia * m1 + ib;
                    terms.push(Term {
                        src: idx0 + merged_idx * stride,
                        coef: coef0 * (wa * wb),
                    });
                }
            }
        }
    }
    // pairs (j, n): partner is the determined slot; the merged momentum
    // becomes the input's determined slot, so the read is exact
    for j in 0..n {
        let coef0 = Complex64::new(0.0, -(qr[j].sin() + qr[n].sin()));
        if coef0.norm_sqr() == 0.0 {
            continue;
        }
        let mut idx0 = 0usize;
        let mut mult = 1usize;
        for k in 0..n {
            if k == j {
                continue;
            }
            idx0 += qi[k] * mult;
            mult *= g;
        }
        terms.push(Term { src: idx0, coef: coef0 });
    }
}

/// Raising operator: degree n -> degree n+1.
pub fn apply_a_plus(f: &DegreeFn) -> Result<DegreeFn> {
    let n = f.degree;
    if n + 1 > MAX_DEGREE {
        return Err(Error::capacity(format!("degree {} exceeds cap {MAX_DEGREE}", n + 1)));
    }
    let mut out = DegreeFn::zeros(f.grid.clone(), n + 1)?;
    let grid = f.grid.clone();
    let mut terms = Vec::new();
    for t in 0..out.values.len() {
        raising_terms(&grid, n, t, &mut terms);
        let mut acc = Complex64::default();
        for term in &terms {
            acc += term.coef * f.values[term.src];
        }
        out.values[t] = acc;
    }
    Ok(out)
}

/// Lowering operator, defined as minus the adjoint of [`apply_a_plus`]
/// under the weighted inner products (matrix-free scatter).
pub fn apply_a_minus(gfun: &DegreeFn) -> Result<DegreeFn> {
    let np1 = gfun.degree;
    if np1 < 2 {
        return Err(Error::parameter("cannot lower a degree-1 function"));
    }
    let n = np1 - 1;
    let mut out = DegreeFn::zeros(gfun.grid.clone(), n)?;
    let grid = gfun.grid.clone();
    let mut terms = Vec::new();
    for t in 0..gfun.values.len() {
        let wt = gfun.weight_of(t);
        let gv = gfun.values[t] * wt;
        if gv.norm_sqr() == 0.0 {
            continue;
        }
        raising_terms(&grid, n, t, &mut terms);
        for term in &terms {
            out.values[term.src] += gv * term.coef.conj();
        }
    }
    let scale = -1.0 / (n as f64 + 1.0);
    for s in 0..out.values.len() {
        let ws = out.weight_of(s);
        out.values[s] *= scale / ws;
    }
    Ok(out)
}

/// Full symmetrization over all n momentum slots (slot values involving
/// the determined momentum are resolved by interpolation).  Idempotent up
/// to interpolation error; exact on uniform grids.
pub fn symmetrize(f: &DegreeFn) -> DegreeFn {
    let n = f.degree;
    let nfree = f.nfree();
    let mut out = DegreeFn::zeros(f.grid.clone(), n).expect("same degree");
    let grid = f.grid.clone();
    let perms = permutations(n);
    let mut tuple = vec![(0.0, 0.0); n];
    for idx in 0..f.values.len() {
        decode_tuple(&grid, nfree, idx, &mut tuple);
        let mut acc = Complex64::default();
        for perm in &perms {
            // evaluate F at the permuted tuple: free coords = first n-1
            // permuted slots, interpolated where off-grid
            acc += eval_at(f, &perm.iter().map(|&k| tuple[k]).collect::<Vec<_>>());
        }
        out.values[idx] = acc / perms.len() as f64;
    }
    out
}

/// Evaluate a stored degree-n function at an arbitrary zero-sum tuple by
/// tensor-product linear interpolation over its free coordinates.
pub fn eval_at(f: &DegreeFn, tuple: &[(f64, f64)]) -> Complex64 {
    debug_assert_eq!(tuple.len(), f.degree);
    let grid = &f.grid;
    let g = grid.len();
    let m1 = grid.axis.len();
    // accumulate tensor stencil over the free coordinates
    let mut idxs = vec![0usize];
    let mut coefs = vec![1.0f64];
    for (k, &(r, s)) in tuple.iter().enumerate().take(f.nfree()) {
        let sr = grid.axis.locate(r);
        let ss = grid.axis.locate(s);
        let stride = g.pow(k as u32);
        let mut nidx = Vec::with_capacity(idxs.len() * 4);
        let mut ncoef = Vec::with_capacity(idxs.len() * 4);
        for &(ia, wa) in std::iter::once(&sr.a).chain(sr.b.iter()) {
            for &(ib, wb) in std::iter::once(&ss.a).chain(ss.b.iter()) {
                let pidx = ia * m1 + ib;
                for (i, &base) in idxs.iter().enumerate() {
                    nidx.push(base + pidx * stride);
                    ncoef.push(coefs[i] * wa * wb);
                }
            }
        }
        idxs = nidx;
        coefs = ncoef;
    }
    let mut acc = Complex64::default();
    for (i, &idx) in idxs.iter().enumerate() {
        acc += f.values[idx] * coefs[i];
    }
    acc
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut items: Vec<usize> = (0..n).collect();
    heap_permute(&mut items, n, &mut out);
    out
}

fn heap_permute(items: &mut Vec<usize>, k: usize, out: &mut Vec<Vec<usize>>) {
    if k == 1 {
        out.push(items.clone());
        return;
    }
    for i in 0..k {
        heap_permute(items, k - 1, out);
        if k % 2 == 0 {
            items.swap(i, k - 1);
        } else {
            items.swap(0, k - 1);
        }
    }
}

/// Number of kernel terms per output point for input degree n (one per
/// slot pair of the degree-(n+1) output): n(n+1)/2.
pub fn raising_pair_count(n: usize) -> usize {
    n * (n + 1) / 2
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cx(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn wrap_and_omega() {
        assert!((wrap_angle(3.0 * PI) - (-PI)).abs() < 1e-12);
        assert!((wrap_angle(-PI) - (-PI)).abs() < 1e-12);
        assert_eq!(omega(0.0, 0.0), 0.0);
        assert!((omega(PI, PI) - 8.0).abs() < 1e-12);
        // sqrt(omega)/|sin| -> 1 near 0
        for &x in &[0.1, 0.01, 0.001] {
            let ratio = omega_axis(x).sqrt() / x.sin().abs();
            assert!((ratio - 1.0).abs() < x * x, "ratio {ratio} at {x}");
        }
    }

    #[test]
    fn uniform_axis_properties() {
        let g = Grid1d::uniform(8).unwrap();
        assert_eq!(g.len(), 8);
        assert!((g.weights.iter().sum::<f64>() - 1.0).abs() < 1e-14);
        assert!(g.index_of(0.0).is_some());
        for i in 0..g.len() {
            // closed under negation
            assert!(g.index_of(-g.point(i)).is_some(), "negation of point {i}");
            assert_eq!(g.index_of(g.point(i)), Some(i));
        }
    }

    #[test]
    fn graded_axis_properties() {
        let g = Grid1d::graded(1e-6, 2.0).unwrap();
        assert!((g.weights.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(g.index_of(0.0).is_some());
        assert!(g.index_of(-PI).is_some());
        for i in 0..g.len() {
            assert!(g.index_of(-g.point(i)).is_some(), "negation of point {i}");
        }
        // resolves sqrt(lambda)
        assert!(g.points.iter().any(|&p| p > 0.0 && p < 2e-3));
    }

    #[test]
    fn locate_interpolates_linearly() {
        let g = Grid1d::uniform(8).unwrap();
        let x = g.point(2) * 0.25 + g.point(3) * 0.75;
        let st = g.locate(x);
        assert_eq!(st.a.0, 2);
        let (ib, wb) = st.b.unwrap();
        assert_eq!(ib, 3);
        assert!((st.a.1 - 0.25).abs() < 1e-12 && (wb - 0.75).abs() < 1e-12);
        // seam between the largest point and -pi (periodic)
        let largest = g.point(g.len() - 1);
        let st = g.locate(largest + 0.1);
        assert_eq!(st.a.0, g.len() - 1);
        assert_eq!(st.b.unwrap().0, 0);
    }

    #[test]
    fn w_calibration_is_half() {
        for grid in [Grid2d::uniform(8).unwrap(), Grid2d::graded(1e-4, 2.0).unwrap()] {
            let g = Arc::new(grid);
            let w = w_hat(g);
            let ip = inner_product(&w, &w).unwrap();
            assert!((ip.re - 0.5).abs() < 1e-12 && ip.im.abs() < 1e-14, "{ip}");
        }
    }

    #[test]
    fn parseval_degree_two() {
        // real-space symmetric degree-2 function with small support vs its
        // transform on a uniform grid (exact for trig polynomials)
        let support: Vec<((i64, i64), (i64, i64), f64)> = vec![
            ((0, 0), (1, 0), 1.0),
            ((0, 0), (0, 1), -0.5),
            ((1, 1), (2, 0), 0.25),
        ];
        // real-space <F,F> = sum_z (1/2!) sum_{x1,x2} F(x)F(x+z) with F
        // symmetrized over the two slots
        let mut fmap = std::collections::HashMap::new();
        for &(a, b, c) in &support {
            *fmap.entry((a, b)).or_insert(0.0) += c / 2.0;
            *fmap.entry((b, a)).or_insert(0.0) += c / 2.0;
        }
        let mut real_ip = 0.0;
        for (&(a1, a2), &ca) in &fmap {
            for (&(b1, b2), &cb) in &fmap {
                // translation-summed pairing: the common offset z with
                // (a1+z, a2+z) == (b1, b2), if any
                let z1 = (b1.0 - a1.0, b1.1 - a1.1);
                let z2 = (b2.0 - a2.0, b2.1 - a2.1);
                if z1 == z2 {
                    real_ip += ca * cb / 2.0;
                }
            }
        }
        let g = Arc::new(Grid2d::uniform(16).unwrap());
        let f = DegreeFn::from_fn(g, 2, |t| {
            let (r, s) = t[0];
            let (r2, s2) = t[1];
            let mut acc = Complex64::default();
            for (&(a, b), &c) in &fmap {
                let phase = -(r * a.0 as f64 + s * a.1 as f64 + r2 * b.0 as f64 + s2 * b.1 as f64);
                acc += c * cx(0.0, phase).exp();
            }
            acc
        })
        .unwrap();
        let ip = inner_product(&f, &f).unwrap();
        assert!((ip.re - real_ip).abs() < 1e-10 * real_ip.abs().max(1.0), "{} vs {real_ip}", ip.re);
        assert!(ip.im.abs() < 1e-12);
    }

    #[test]
    fn raising_constant_degree_one_vanishes() {
        let g = Arc::new(Grid2d::uniform(8).unwrap());
        let mut c = DegreeFn::zeros(g, 1).unwrap();
        c.values[0] = cx(1.0, 0.0);
        let up = apply_a_plus(&c).unwrap();
        let worst = up.values.iter().fold(0.0f64, |m, v| m.max(v.norm()));
        // single pair term -(e^{ir1} - e^{-ir2}) with r2 = -r1 cancels
        assert!(worst < 1e-12, "worst {worst}");
    }

    #[test]
    fn pair_counts() {
        assert_eq!(raising_pair_count(1), 1);
        assert_eq!(raising_pair_count(2), 3);
        assert_eq!(raising_pair_count(3), 6);
        assert_eq!(raising_pair_count(4), 10);
        // (n(n+1)/2)^2 is the term count of the squared expansion
        assert_eq!(raising_pair_count(3).pow(2), 36);
    }

    fn random_fn(grid: &Arc<Grid2d>, degree: usize, seed: u64) -> DegreeFn {
        let mut state = seed;
        let mut rand = move || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (state >> 11) as f64 / (1u64 << 53) as f64 - 0.5
        };
        DegreeFn::from_fn(grid.clone(), degree, |_| cx(rand(), rand())).unwrap()
    }

    #[test]
    fn adjoint_identity_machine_precision() {
        for grid in [Grid2d::uniform(6).unwrap(), Grid2d::graded(1e-3, 1.5).unwrap()] {
            let g = Arc::new(grid);
            let f = random_fn(&g, 2, 11);
            let gg = random_fn(&g, 3, 22);
            let up = apply_a_plus(&f).unwrap();
            let down = apply_a_minus(&gg).unwrap();
            let lhs = inner_product(&gg, &up).unwrap();
            let rhs = inner_product(&down, &f).unwrap();
            let scale = lhs.norm().max(rhs.norm()).max(1e-30);
            assert!((lhs + rhs).norm() < 1e-10 * scale, "lhs {lhs} rhs {rhs}");
        }
    }

    #[test]
    fn lowering_zero_is_zero() {
        let g = Arc::new(Grid2d::uniform(6).unwrap());
        let z = DegreeFn::zeros(g, 3).unwrap();
        let down = apply_a_minus(&z).unwrap();
        assert!(down.values.iter().all(|v| v.norm() == 0.0));
    }

    #[test]
    fn symmetrize_idempotent_and_commutes_with_raising() {
        let g = Arc::new(Grid2d::uniform(6).unwrap());
        let f = random_fn(&g, 2, 33);
        let s1 = symmetrize(&f);
        let s2 = symmetrize(&s1);
        let worst = s1
            .values
            .iter()
            .zip(&s2.values)
            .fold(0.0f64, |m, (a, b)| m.max((a - b).norm()));
        assert!(worst < 1e-11, "idempotence {worst}");
        // raising a symmetric function yields a symmetric function
        // (exactly on a uniform grid where all reads are exact)
        let up = apply_a_plus(&s1).unwrap();
        let up_s = symmetrize(&up);
        let scale = up.values.iter().fold(0.0f64, |m, v| m.max(v.norm()));
        let worst = up
            .values
            .iter()
            .zip(&up_s.values)
            .fold(0.0f64, |m, (a, b)| m.max((a - b).norm()));
        assert!(worst < 1e-10 * scale.max(1.0), "symmetry {worst} scale {scale}");
    }

    #[test]
    fn raising_has_zero_mean() {
        let g = Arc::new(Grid2d::uniform(8).unwrap());
        let f = symmetrize(&random_fn(&g, 2, 44));
        let up = apply_a_plus(&f).unwrap();
        let mut ones = DegreeFn::zeros(g, 3).unwrap();
        for v in ones.values.iter_mut() {
            *v = cx(1.0, 0.0);
        }
        let mean = inner_product(&ones, &up).unwrap();
        let scale = up.values.iter().fold(0.0f64, |m, v| m.max(v.norm())).max(1.0);
        assert!(mean.norm() < 1e-10 * scale, "mean {mean}");
    }

    #[test]
    fn eval_at_matches_storage_on_grid() {
        let g = Arc::new(Grid2d::uniform(6).unwrap());
        let f = random_fn(&g, 3, 55);
        let mut tuple = vec![(0.0, 0.0); 3];
        for idx in [0usize, 7, 20, f.values.len() - 1] {
            decode_tuple(&f.grid, 2, idx, &mut tuple);
            let v = eval_at(&f, &tuple);
            assert!((v - f.values[idx]).norm() < 1e-12);
        }
    }

    #[test]
    fn inner_product_positivity_and_mismatch() {
        let g = Arc::new(Grid2d::uniform(6).unwrap());
        let f = random_fn(&g, 2, 66);
        let ip = inner_product(&f, &f).unwrap();
        assert!(ip.re >= 0.0 && ip.im.abs() < 1e-14);
        let g2 = Arc::new(Grid2d::uniform(8).unwrap());
        let h = random_fn(&g2, 2, 66);
        assert!(inner_product(&f, &h).is_err());
    }
}
