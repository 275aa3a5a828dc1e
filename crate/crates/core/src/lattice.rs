//! Configurations on a finite torus and the exact continuous-time dynamics.
//!
//! The process is the totally asymmetric exclusion process along x (jump to
//! the right at rate 1 when the target is empty) combined with a symmetric
//! exclusion along y (rate 1/2 up and 1/2 down).  The chain is simulated by
//! exact thinning (uniformization): exponential clocks ring at the constant
//! total rate 2 * particle_count, a (particle, direction) pair is proposed
//! proportionally to the capped rates, and the jump is accepted iff the
//! target site is empty.  Rejected proposals are null events, which leaves
//! the law of the trajectory exactly that of the generator.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Reproducible RNG stream: identical `(seed, stream_id)` reproduce
/// identical trajectories bit-for-bit.  Replicas get distinct stream ids.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RngStream {
    pub seed: u64,
    pub stream_id: u64,
}

impl RngStream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        RngStream { seed, stream_id }
    }

    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream_id);
        rng
    }
}

/// Per-particle rate cap used by the thinning scheme.
///
/// Each particle can attempt at most rate 1 to the right plus 1/2 up plus
/// 1/2 down, so 2.0 caps the instantaneous jump rate of any configuration.
#[derive(Debug, Clone, Copy)]
pub struct RateBound {
    pub per_particle_cap: f64,
}

impl RateBound {
    pub fn full() -> Self {
        RateBound { per_particle_cap: 2.0 }
    }

    pub fn symmetric_only() -> Self {
        RateBound { per_particle_cap: 1.0 }
    }

    pub fn total_cap(&self, particle_count: usize) -> f64 {
        self.per_particle_cap * particle_count as f64
    }
}

/// Which jumps are enabled.  `Full` is the process of interest;
/// `SymmetricOnly` disables the x-jumps and is used as a control with
/// ordinary (bounded) diffusivity.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DynamicsMode {
    Full,
    SymmetricOnly,
}

/// Occupancy field on an `L_x x L_y` torus, bit-packed, plus a particle
/// list for O(1) proposal in the thinning loop.
#[derive(Debug, Clone)]
pub struct Configuration {
    width: usize,
    height: usize,
    occ: Vec<u64>,
    /// Site index of each particle.
    particles: Vec<u32>,
    /// Inverse map: particle index occupying a site, or `EMPTY`.
    site_particle: Vec<u32>,
}

const EMPTY: u32 = u32::MAX;

impl Configuration {
    pub fn empty(width: usize, height: usize) -> Result<Self> {
        if width < 2 || height < 2 {
            return Err(Error::parameter(format!(
                "degenerate lattice {width}x{height}: both sides must be >= 2"
            )));
        }
        let n = width * height;
        Ok(Configuration {
            width,
            height,
            occ: vec![0u64; n.div_ceil(64)],
            particles: Vec::new(),
            site_particle: vec![EMPTY; n],
        })
    }

    /// Bernoulli product measure: each site independently occupied with
    /// probability `rho`.
    pub fn sample_bernoulli(rho: f64, width: usize, height: usize, rng: &mut ChaCha8Rng) -> Result<Self> {
        if !(0.0..=1.0).contains(&rho) {
            return Err(Error::parameter(format!("density {rho} outside [0, 1]")));
        }
        let mut cfg = Self::empty(width, height)?;
        for site in 0..width * height {
            if rng.gen::<f64>() < rho {
                cfg.insert_particle(site);
            }
        }
        Ok(cfg)
    }

    /// Uniform configuration with exactly `k` particles (the stationary
    /// measure of the canonical oracle ensembles).
    pub fn sample_canonical(k: usize, width: usize, height: usize, rng: &mut ChaCha8Rng) -> Result<Self> {
        let n = width * height;
        if k > n {
            return Err(Error::parameter(format!("{k} particles do not fit on {n} sites")));
        }
        let mut cfg = Self::empty(width, height)?;
        // Floyd-style sampling of a uniform k-subset.
        let mut sites: Vec<usize> = (0..n).collect();
        for i in 0..k {
            let j = rng.gen_range(i..n);
            sites.swap(i, j);
            cfg.insert_particle(sites[i]);
        }
        Ok(cfg)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn sites(&self) -> usize {
        self.width * self.height
    }

    pub fn particle_count(&self) -> usize {
        self.particles.len()
    }

    pub fn occupied(&self, site: usize) -> bool {
        self.occ[site / 64] >> (site % 64) & 1 == 1
    }

    /// Occupancy as 0.0/1.0, indexed `y * width + x`.
    pub fn occupancy_f64(&self) -> Vec<f64> {
        (0..self.sites()).map(|s| if self.occupied(s) { 1.0 } else { 0.0 }).collect()
    }

    pub fn site(&self, x: usize, y: usize) -> usize {
        (y % self.height) * self.width + (x % self.width)
    }

    pub fn neighbor_right(&self, site: usize) -> usize {
        let (x, y) = (site % self.width, site / self.width);
        y * self.width + (x + 1) % self.width
    }

    pub fn neighbor_left(&self, site: usize) -> usize {
        let (x, y) = (site % self.width, site / self.width);
        y * self.width + (x + self.width - 1) % self.width
    }

    pub fn neighbor_up(&self, site: usize) -> usize {
        let (x, y) = (site % self.width, site / self.width);
        ((y + 1) % self.height) * self.width + x
    }

    pub fn neighbor_down(&self, site: usize) -> usize {
        let (x, y) = (site % self.width, site / self.width);
        ((y + self.height - 1) % self.height) * self.width + x
    }

    fn insert_particle(&mut self, site: usize) {
        debug_assert!(!self.occupied(site));
        self.occ[site / 64] |= 1 << (site % 64);
        self.site_particle[site] = self.particles.len() as u32;
        self.particles.push(site as u32);
    }

    fn move_particle(&mut self, from: usize, to: usize) {
        debug_assert!(self.occupied(from) && !self.occupied(to));
        let p = self.site_particle[from];
        self.occ[from / 64] &= !(1 << (from % 64));
        self.occ[to / 64] |= 1 << (to % 64);
        self.site_particle[from] = EMPTY;
        self.site_particle[to] = p;
        self.particles[p as usize] = to as u32;
    }

    /// Instantaneous current across the bond `(x, x + e_axis)`:
    /// `eta_x (1 - eta_{x+e1})` along x, `(eta_{x+e2} - eta_x) / 2` along y.
    pub fn instantaneous_current(&self, site: usize, axis: usize) -> f64 {
        match axis {
            1 => {
                let right = self.neighbor_right(site);
                if self.occupied(site) && !self.occupied(right) { 1.0 } else { 0.0 }
            }
            2 => {
                let up = self.neighbor_up(site);
                let a = if self.occupied(up) { 1.0 } else { 0.0 };
                let b = if self.occupied(site) { 1.0 } else { 0.0 };
                (a - b) / 2.0
            }
            _ => panic!("axis must be 1 or 2"),
        }
    }

    /// Advance the chain to `t_target` starting from local time `t_now`;
    /// returns the (exact) time spent, which is `t_target - t_now`.
    pub fn step_ctmc(&mut self, t_now: f64, t_target: f64, rng: &mut ChaCha8Rng) {
        self.step_ctmc_with(t_now, t_target, DynamicsMode::Full, rng, |_, _, _, _| {});
    }

    /// Same as [`step_ctmc`](Self::step_ctmc) but invokes `on_jump(cfg,
    /// t_event, from, to)` immediately *before* each accepted jump is
    /// applied, so the callback sees the pre-jump configuration.  Used for
    /// event-driven accumulation of currents.
    pub fn step_ctmc_with<F>(
        &mut self,
        t_now: f64,
        t_target: f64,
        mode: DynamicsMode,
        rng: &mut ChaCha8Rng,
        mut on_jump: F,
    ) where
        F: FnMut(&Configuration, f64, usize, usize),
    {
        let k = self.particle_count();
        if k == 0 || k == self.sites() {
            return; // frozen: no allowed move can ever occur
        }
        let bound = match mode {
            DynamicsMode::Full => RateBound::full(),
            DynamicsMode::SymmetricOnly => RateBound::symmetric_only(),
        };
        let total = bound.total_cap(k);
        let mut t = t_now;
        loop {
            // exponential clock at the capped total rate; u in [0,1) so
            // 1 - u is in (0,1] and the log is finite
            let u: f64 = rng.gen();
            t += -(1.0 - u).ln() / total;
            if t >= t_target {
                return;
            }
            let p = rng.gen_range(0..k);
            let from = self.particles[p] as usize;
            let u: f64 = rng.gen();
            let to = match mode {
                DynamicsMode::Full => {
                    if u < 0.5 {
                        self.neighbor_right(from)
                    } else if u < 0.75 {
                        self.neighbor_up(from)
                    } else {
                        self.neighbor_down(from)
                    }
                }
                DynamicsMode::SymmetricOnly => {
                    if u < 0.5 {
                        self.neighbor_up(from)
                    } else {
                        self.neighbor_down(from)
                    }
                }
            };
            if !self.occupied(to) {
                on_jump(self, t, from, to);
                self.move_particle(from, to);
            }
        }
    }
}
