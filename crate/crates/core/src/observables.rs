//! Equilibrium statistics from simulation trajectories: the structure
//! function S(x,t), compressibility and velocity sum rules, the diffusion
//! coefficient D(t) along two independent routes (second moments of S and
//! the Green-Kubo current variance), and Laplace transforms of t D(t).
//!
//! All error bars are replica-level jackknife estimates; replicas are
//! independent trajectories on distinct RNG streams.

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::lattice::{Configuration, DynamicsMode, RngStream};

/// Simulation ensemble description shared by the measurement drivers.
#[derive(Debug, Clone)]
pub struct SimParams {
    pub width: usize,
    pub height: usize,
    /// Nominal density; also the centering used in the observables.
    pub rho: f64,
    pub replicas: usize,
    pub seed: u64,
    pub mode: DynamicsMode,
    /// `Some(k)`: start from the uniform fixed-count ensemble (matches the
    /// exact oracle). `None`: Bernoulli product initial data.
    pub canonical_k: Option<usize>,
}

impl SimParams {
    pub fn volume(&self) -> usize {
        self.width * self.height
    }

    pub fn chi(&self) -> f64 {
        self.rho * (1.0 - self.rho)
    }

    fn initial(&self, rng: &mut rand_chacha::ChaCha8Rng) -> Result<Configuration> {
        match self.canonical_k {
            Some(k) => Configuration::sample_canonical(k, self.width, self.height, rng),
            None => Configuration::sample_bernoulli(self.rho, self.width, self.height, rng),
        }
    }
}

/// Spatial moments of one structure-function snapshot (minimal-image
/// coordinates on the torus).
#[derive(Debug, Clone, Copy, Default)]
pub struct Moments {
    pub total: f64,
    pub first_x1: f64,
    pub first_x2: f64,
    pub second_x1: f64,
    pub second_x2: f64,
    /// Signed S mass outside the central L/4 box (wrap-around indicator).
    pub far: f64,
}

/// Translation-averaged structure function on a grid of sample times,
/// with per-replica moments retained for jackknife errors.
#[derive(Debug, Clone)]
pub struct CorrelationField {
    pub width: usize,
    pub height: usize,
    pub rho: f64,
    pub t_grid: Vec<f64>,
    /// Replica-averaged field, `[time][site]`, site = y * width + x.
    pub mean: Vec<Vec<f64>>,
    /// `[replica][time]` moments.
    pub replica_moments: Vec<Vec<Moments>>,
}

fn fft2(data: &mut [Complex64], width: usize, height: usize, inverse: bool) {
    let mut planner = FftPlanner::new();
    let dir = if inverse { rustfft::FftDirection::Inverse } else { rustfft::FftDirection::Forward };
    let row_fft = planner.plan_fft(width, dir);
    for y in 0..height {
        row_fft.process(&mut data[y * width..(y + 1) * width]);
    }
    let col_fft = planner.plan_fft(height, dir);
    let mut col = vec![Complex64::default(); height];
    for x in 0..width {
        for y in 0..height {
            col[y] = data[y * width + x];
        }
        col_fft.process(&mut col);
        for y in 0..height {
            data[y * width + x] = col[y];
        }
    }
}

fn minimal_image(i: usize, len: usize) -> f64 {
    let i = i as i64;
    let len = len as i64;
    let m = if 2 * i > len { i - len } else { i };
    m as f64
}

fn moments_of(field: &[f64], width: usize, height: usize) -> Moments {
    let mut m = Moments::default();
    for (s, &v) in field.iter().enumerate() {
        let x1 = minimal_image(s % width, width);
        let x2 = minimal_image(s / width, height);
        m.total += v;
        m.first_x1 += x1 * v;
        m.first_x2 += x2 * v;
        m.second_x1 += x1 * x1 * v;
        m.second_x2 += x2 * x2 * v;
        if x1.abs() > width as f64 / 4.0 || x2.abs() > height as f64 / 4.0 {
            m.far += v;
        }
    }
    m
}

/// Estimate `S(x,t) = (1/V) sum_y <(eta_{y+x}(t) - rho)(eta_y(0) - rho)>`
/// by FFT cross-correlation, averaged over replicas.
pub fn measure_structure_function(p: &SimParams, t_grid: &[f64]) -> Result<CorrelationField> {
    if p.replicas < 2 {
        return Err(Error::parameter("need at least 2 replicas for error estimates"));
    }
    if t_grid.windows(2).any(|w| w[1] <= w[0]) || t_grid.first().is_some_and(|&t| t < 0.0) {
        return Err(Error::parameter("t_grid must be non-negative and strictly increasing"));
    }
    let v = p.volume();
    let vf = v as f64;
    let mut mean = vec![vec![0.0f64; v]; t_grid.len()];
    let mut replica_moments = Vec::with_capacity(p.replicas);
    for r in 0..p.replicas {
        let mut rng = RngStream::new(p.seed, r as u64).rng();
        let mut cfg = p.initial(&mut rng)?;
        let mut a0: Vec<Complex64> = cfg
            .occupancy_f64()
            .into_iter()
            .map(|e| Complex64::new(e - p.rho, 0.0))
            .collect();
        fft2(&mut a0, p.width, p.height, false);
        let mut t_now = 0.0;
        let mut per_t = Vec::with_capacity(t_grid.len());
        for (ti, &t) in t_grid.iter().enumerate() {
            cfg.step_ctmc_with(t_now, t, p.mode, &mut rng, |_, _, _, _| {});
            t_now = t;
            let mut at: Vec<Complex64> = cfg
                .occupancy_f64()
                .into_iter()
                .map(|e| Complex64::new(e - p.rho, 0.0))
                .collect();
            fft2(&mut at, p.width, p.height, false);
            for (c, &b) in at.iter_mut().zip(&a0) {
                *c *= b.conj();
            }
            fft2(&mut at, p.width, p.height, true);
            // unnormalized FFT round trip contributes V, the spatial
            // average another V
            let field: Vec<f64> = at.iter().map(|c| c.re / (vf * vf)).collect();
            for (acc, &s) in mean[ti].iter_mut().zip(&field) {
                *acc += s / p.replicas as f64;
            }
            per_t.push(moments_of(&field, p.width, p.height));
        }
        replica_moments.push(per_t);
    }
    Ok(CorrelationField {
        width: p.width,
        height: p.height,
        rho: p.rho,
        t_grid: t_grid.to_vec(),
        mean,
        replica_moments,
    })
}

impl CorrelationField {
    /// Signed S mass outside the central L/4 box at the latest sampled
    /// time, with jackknife SE — a wrap-around bias indicator (noise-level
    /// when the correlation spread stays well inside the torus).
    pub fn wrap_bias(&self) -> (f64, f64) {
        let last = self.t_grid.len() - 1;
        let stats: Vec<Vec<f64>> =
            self.replica_moments.iter().map(|per_t| vec![per_t[last].far]).collect();
        jackknife(&stats, |s| s[0])
    }
}

/// Jackknife over replicas: `stats[r]` is one replica's vector of
/// accumulated statistics and `f` maps the replica-averaged vector to the
/// estimate. Returns (estimate, standard error).
pub fn jackknife<F: Fn(&[f64]) -> f64>(stats: &[Vec<f64>], f: F) -> (f64, f64) {
    let n = stats.len();
    assert!(n >= 2, "jackknife needs at least two replicas");
    let m = stats[0].len();
    let mut total = vec![0.0f64; m];
    for s in stats {
        for (t, &x) in total.iter_mut().zip(s) {
            *t += x;
        }
    }
    let full: Vec<f64> = total.iter().map(|t| t / n as f64).collect();
    let estimate = f(&full);
    let mut acc = 0.0;
    let mut thetas = Vec::with_capacity(n);
    for s in stats {
        let loo: Vec<f64> = total.iter().zip(s).map(|(t, x)| (t - x) / (n - 1) as f64).collect();
        thetas.push(f(&loo));
    }
    let theta_bar: f64 = thetas.iter().sum::<f64>() / n as f64;
    for th in &thetas {
        acc += (th - theta_bar) * (th - theta_bar);
    }
    let se = ((n - 1) as f64 / n as f64 * acc).sqrt();
    (estimate, se)
}

/// D(t) estimates on a time grid with jackknife standard errors.
#[derive(Debug, Clone)]
pub struct DiffusivityCurve {
    pub t_grid: Vec<f64>,
    pub values: Vec<f64>,
    pub errors: Vec<f64>,
}

/// Second-moment route: `D_aa(t) = (1/t){ sum_x x_a^2 S / chi - (v_a t)^2 }`
/// with the velocity taken from the measured first moment.
pub fn diffusivity_from_moments(corr: &CorrelationField, axis: usize) -> Result<DiffusivityCurve> {
    let chi = corr.rho * (1.0 - corr.rho);
    let (far, far_se) = corr.wrap_bias();
    if far.abs() > 3.0 * far_se + 0.05 * chi {
        return Err(Error::resolution(format!(
            "structure function mass wraps past L/4 ({far:.4} +- {far_se:.4}); increase L or reduce t"
        )));
    }
    if chi <= 0.0 {
        return Err(Error::parameter("chi vanishes at rho in {0,1}"));
    }
    let mut t_grid = Vec::new();
    let mut values = Vec::new();
    let mut errors = Vec::new();
    for (ti, &t) in corr.t_grid.iter().enumerate() {
        if t == 0.0 {
            continue; // division by t
        }
        let stats: Vec<Vec<f64>> = corr
            .replica_moments
            .iter()
            .map(|per_t| {
                let m = &per_t[ti];
                let (first, second) = match axis {
                    1 => (m.first_x1, m.second_x1),
                    2 => (m.first_x2, m.second_x2),
                    _ => panic!("axis must be 1 or 2"),
                };
                vec![first, second]
            })
            .collect();
        let (d, se) = jackknife(&stats, |s| {
            let vt = s[0] / chi;
            (s[1] / chi - vt * vt) / t
        });
        t_grid.push(t);
        values.push(d);
        errors.push(se);
    }
    Ok(DiffusivityCurve { t_grid, values, errors })
}

/// Velocity estimate `v_1` from the first-moment sum rule at the latest
/// sampled time (returns value and jackknife SE).
pub fn velocity_from_first_moment(corr: &CorrelationField) -> (f64, f64) {
    let chi = corr.rho * (1.0 - corr.rho);
    let last = corr.t_grid.len() - 1;
    let t = corr.t_grid[last];
    let stats: Vec<Vec<f64>> =
        corr.replica_moments.iter().map(|per_t| vec![per_t[last].first_x1]).collect();
    jackknife(&stats, |s| s[0] / (chi * t))
}

/// Space-summed degree-two current `W = sum_s (eta_s - rho)(eta_{s+e1} - rho)`.
pub fn space_summed_current(cfg: &Configuration, rho: f64) -> f64 {
    let mut w = 0.0;
    for s in 0..cfg.sites() {
        let a = if cfg.occupied(s) { 1.0 } else { 0.0 };
        let b = if cfg.occupied(cfg.neighbor_right(s)) { 1.0 } else { 0.0 };
        w += (a - rho) * (b - rho);
    }
    w
}

/// Change of the space-summed current when the particle at `from` jumps to
/// the empty site `to`; only the bonds touching the two sites contribute.
pub(crate) fn current_jump_delta(cfg: &Configuration, from: usize, to: usize, rho: f64) -> f64 {
    let eta_old = |s: usize| if cfg.occupied(s) { 1.0 } else { 0.0 };
    let eta_new = |s: usize| {
        if s == from {
            0.0
        } else if s == to {
            1.0
        } else {
            eta_old(s)
        }
    };
    let mut bonds = [cfg.neighbor_left(from), from, cfg.neighbor_left(to), to];
    bonds.sort_unstable();
    let mut delta = 0.0;
    let mut prev = usize::MAX;
    for &s in &bonds {
        if s == prev {
            continue;
        }
        prev = s;
        let r = cfg.neighbor_right(s);
        delta += (eta_new(s) - rho) * (eta_new(r) - rho) - (eta_old(s) - rho) * (eta_old(r) - rho);
    }
    delta
}

/// Time-integrated space-summed current `J(t) = int_0^t W(eta_s) ds`,
/// sampled at the grid times for every replica, accumulated exactly
/// between jump events.
#[derive(Debug, Clone)]
pub struct CurrentIntegral {
    pub t_grid: Vec<f64>,
    pub volume: usize,
    pub rho: f64,
    /// `[replica][time]` samples of J.
    pub j: Vec<Vec<f64>>,
}

pub fn measure_current_integral(p: &SimParams, t_grid: &[f64]) -> Result<CurrentIntegral> {
    if p.replicas < 2 {
        return Err(Error::parameter("need at least 2 replicas for error estimates"));
    }
    if t_grid.is_empty() || t_grid[0] <= 0.0 || t_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::parameter("t_grid must be positive and strictly increasing"));
    }
    // replicas ride independent RNG streams, so the parallel map is
    // deterministic regardless of the thread count
    let j = (0..p.replicas)
        .into_par_iter()
        .map(|r| {
            let mut rng = RngStream::new(p.seed, r as u64).rng();
            let mut cfg = p.initial(&mut rng)?;
            let mut w = space_summed_current(&cfg, p.rho);
            let mut integral = 0.0;
            let mut last_t = 0.0;
            let mut t_now = 0.0;
            let mut samples = Vec::with_capacity(t_grid.len());
            for &t in t_grid {
                cfg.step_ctmc_with(t_now, t, p.mode, &mut rng, |c, t_ev, from, to| {
                    integral += w * (t_ev - last_t);
                    last_t = t_ev;
                    w += current_jump_delta(c, from, to, p.rho);
                });
                integral += w * (t - last_t);
                last_t = t;
                t_now = t;
                samples.push(integral);
            }
            Ok(samples)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(CurrentIntegral { t_grid: t_grid.to_vec(), volume: p.volume(), rho: p.rho, j })
}

/// Green-Kubo route: `D_11(t) = 1/2 + Var[J(t)] / (chi V t)`.
pub fn diffusivity_green_kubo(ci: &CurrentIntegral) -> DiffusivityCurve {
    let chi = ci.rho * (1.0 - ci.rho);
    let vf = ci.volume as f64;
    let mut values = Vec::new();
    let mut errors = Vec::new();
    for (ti, &t) in ci.t_grid.iter().enumerate() {
        let stats: Vec<Vec<f64>> =
            ci.j.iter().map(|per_t| vec![per_t[ti], per_t[ti] * per_t[ti]]).collect();
        let (d, se) = jackknife(&stats, |s| {
            let var = s[1] - s[0] * s[0];
            0.5 + var / (chi * vf * t)
        });
        values.push(d);
        errors.push(se);
    }
    DiffusivityCurve { t_grid: ci.t_grid.clone(), values, errors }
}

/// Normalized current variance `Var[t^{-1/2} J(t)] / (chi V)` with
/// jackknife SE — the left side of the resolvent bound.
pub fn normalized_current_variance(ci: &CurrentIntegral, ti: usize) -> (f64, f64) {
    let chi = ci.rho * (1.0 - ci.rho);
    let vf = ci.volume as f64;
    let t = ci.t_grid[ti];
    let stats: Vec<Vec<f64>> =
        ci.j.iter().map(|per_t| vec![per_t[ti], per_t[ti] * per_t[ti]]).collect();
    jackknife(&stats, |s| (s[1] - s[0] * s[0]) / (t * chi * vf))
}

/// Numerical Laplace transform of `t D(t)`.
#[derive(Debug, Clone, Copy)]
pub struct LaplaceValue {
    pub value: f64,
    /// Contribution of the constant-D tail extrapolation beyond t_max.
    pub tail_fraction: f64,
    /// True when `lambda * t_max < 5` (truncation error likely material).
    pub truncated: bool,
}

/// `int_0^infty e^{-lambda t} t D(t) dt` by trapezoid over the sampled
/// grid plus a constant-D exponential tail beyond the last sample.
pub fn laplace_transform_d(curve: &DiffusivityCurve, lambda: f64) -> Result<LaplaceValue> {
    if lambda <= 0.0 {
        return Err(Error::parameter("lambda must be positive"));
    }
    if curve.t_grid.is_empty() {
        return Err(Error::parameter("empty diffusivity curve"));
    }
    // integrand vanishes at t=0; prepend it if the grid starts later
    let mut ts = vec![0.0];
    let mut fs = vec![0.0];
    for (&t, &d) in curve.t_grid.iter().zip(&curve.values) {
        ts.push(t);
        fs.push((-lambda * t).exp() * t * d);
    }
    let mut value = 0.0;
    for i in 1..ts.len() {
        value += 0.5 * (fs[i] + fs[i - 1]) * (ts[i] - ts[i - 1]);
    }
    let t_max = *curve.t_grid.last().unwrap();
    let d_tail = *curve.values.last().unwrap();
    // int_T^infty e^{-lt} t dt = e^{-lT} (T/l + 1/l^2)
    let tail = d_tail * (-lambda * t_max).exp() * (t_max / lambda + 1.0 / (lambda * lambda));
    value += tail;
    Ok(LaplaceValue {
        value,
        tail_fraction: if value != 0.0 { tail / value } else { 0.0 },
        truncated: lambda * t_max < 5.0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::DynamicsMode;

    fn params(width: usize, height: usize, rho: f64, replicas: usize, seed: u64) -> SimParams {
        SimParams { width, height, rho, replicas, seed, mode: DynamicsMode::Full, canonical_k: None }
    }

    #[test]
    fn structure_function_at_t_zero() {
        let p = params(16, 16, 0.5, 80, 101);
        let corr = measure_structure_function(&p, &[0.0]).unwrap();
        let s0 = corr.mean[0][0];
        assert!((s0 - 0.25).abs() < 0.01, "S(0,0) = {s0}");
        // off-origin sites vanish within a loose multiple of the expected
        // sampling noise
        let worst =
            corr.mean[0].iter().skip(1).fold(0.0f64, |m, &v| m.max(v.abs()));
        assert!(worst < 0.02, "off-origin max {worst}");
    }

    #[test]
    fn compressibility_sum_rule() {
        let p = params(16, 16, 0.5, 100, 77);
        let corr = measure_structure_function(&p, &[0.0, 1.0, 3.0]).unwrap();
        for ti in 0..3 {
            let stats: Vec<Vec<f64>> =
                corr.replica_moments.iter().map(|m| vec![m[ti].total]).collect();
            let (total, se) = jackknife(&stats, |s| s[0]);
            assert!((total - 0.25).abs() < 3.0 * se + 0.01, "sum {total} +- {se} at t index {ti}");
        }
    }

    #[test]
    fn symmetric_only_diffusivity_is_flat() {
        let mut p = params(32, 32, 0.5, 40, 303);
        p.mode = DynamicsMode::SymmetricOnly;
        let corr = measure_structure_function(&p, &[1.0, 2.0, 4.0, 8.0]).unwrap();
        let d = diffusivity_from_moments(&corr, 2).unwrap();
        for (i, &v) in d.values.iter().enumerate() {
            assert!((v - 1.0).abs() < 3.0 * d.errors[i] + 0.05, "D22({}) = {v}", d.t_grid[i]);
        }
    }

    #[test]
    fn current_delta_matches_recomputation() {
        let mut rng = RngStream::new(5, 0).rng();
        let mut cfg = Configuration::sample_bernoulli(0.5, 6, 6, &mut rng).unwrap();
        let rho = 0.5;
        for step in 0..200 {
            let mut delta_seen = None;
            let mut before = space_summed_current(&cfg, rho);
            cfg.step_ctmc_with(step as f64, step as f64 + 0.2, DynamicsMode::Full, &mut rng, |c, _, from, to| {
                let d = current_jump_delta(c, from, to, rho);
                delta_seen = Some(match delta_seen {
                    None => d,
                    Some(acc) => acc + d,
                });
            });
            let after = space_summed_current(&cfg, rho);
            let predicted = before + delta_seen.unwrap_or(0.0);
            assert!((predicted - after).abs() < 1e-12);
            before = after;
            let _ = before;
        }
    }

    #[test]
    fn green_kubo_short_time_intercept() {
        let p = params(12, 12, 0.5, 120, 909);
        let ci = measure_current_integral(&p, &[0.05, 0.1]).unwrap();
        let d = diffusivity_green_kubo(&ci);
        // Var[J] = O(t^2), so D -> 1/2 + O(t)
        assert!((d.values[0] - 0.5).abs() < 0.02, "D(0.05) = {}", d.values[0]);
    }

    #[test]
    fn laplace_of_constant_curve() {
        let t_grid: Vec<f64> = (1..=400).map(|i| i as f64 * 0.25).collect();
        let curve = DiffusivityCurve {
            values: vec![3.0; t_grid.len()],
            errors: vec![0.0; t_grid.len()],
            t_grid,
        };
        let lambda = 0.3;
        let lv = laplace_transform_d(&curve, lambda).unwrap();
        let exact = 3.0 / (lambda * lambda);
        assert!(!lv.truncated);
        assert!((lv.value - exact).abs() < 0.01 * exact, "{} vs {exact}", lv.value);
    }

    #[test]
    fn laplace_flags_truncation() {
        let curve = DiffusivityCurve {
            t_grid: vec![1.0, 2.0],
            values: vec![1.0, 1.0],
            errors: vec![0.0, 0.0],
        };
        assert!(laplace_transform_d(&curve, 0.1).unwrap().truncated);
        assert!(laplace_transform_d(&curve, -1.0).is_err());
    }

    #[test]
    fn jackknife_linear_matches_standard_error() {
        let vals: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64]).collect();
        let (mean, se) = jackknife(&vals, |s| s[0]);
        assert!((mean - 4.5).abs() < 1e-12);
        // SE of the mean of 0..9: sd/sqrt(n) with sd^2 = 55/6
        let expect = (55.0f64 / 6.0 / 10.0).sqrt();
        assert!((se - expect).abs() < 1e-9, "{se} vs {expect}");
    }
}
