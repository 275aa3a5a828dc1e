//! Brute-force ground truth on tiny tori.
//!
//! The uniform measure on configurations with a fixed particle count is an
//! exact stationary measure of the torus dynamics, so enumerating all
//! C(V, k) states gives a finite-dimensional model in which stationarity,
//! the conservation law, the generator decomposition L = S + A, and the
//! resolvent `<<w, (lambda - L)^{-1} w>>` can be checked to solver
//! precision and used as an oracle for the Monte Carlo estimates.

use crate::error::{Error, Result};
use crate::solvers::bicgstab;

/// Binomial coefficient, saturating at u128 range (enough for capacity checks).
pub fn binomial(n: u64, k: u64) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
    }
    acc
}

fn occupied(mask: u64, site: usize) -> bool {
    mask >> site & 1 == 1
}

/// Jump targets on the torus, row-major site indexing `y * width + x`.
fn neighbors(site: usize, width: usize, height: usize) -> [usize; 4] {
    let (x, y) = (site % width, site / width);
    [
        y * width + (x + 1) % width,             // right
        y * width + (x + width - 1) % width,     // left
        ((y + 1) % height) * width + x,          // up
        ((y + height - 1) % height) * width + x, // down
    ]
}

/// Enumerate the allowed jumps of a configuration with their rates:
/// right at rate 1, up and down at rate 1/2 each, exclusion enforced.
fn for_each_jump(mask: u64, width: usize, height: usize, mut f: impl FnMut(usize, usize, f64)) {
    let v = width * height;
    for s in 0..v {
        if !occupied(mask, s) {
            continue;
        }
        let [right, _, up, down] = neighbors(s, width, height);
        if !occupied(mask, right) {
            f(s, right, 1.0);
        }
        if !occupied(mask, up) {
            f(s, up, 0.5);
        }
        if !occupied(mask, down) {
            f(s, down, 0.5);
        }
    }
}

/// All configurations of a `width x height` torus with exactly `k`
/// particles, as sorted bitmasks, with O(log N) index lookup.
#[derive(Debug, Clone)]
pub struct CanonicalEnsemble {
    width: usize,
    height: usize,
    k: usize,
    states: Vec<u64>,
}

pub const DEFAULT_STATE_CAP: u128 = 1_000_000;

impl CanonicalEnsemble {
    pub fn new(width: usize, height: usize, k: usize) -> Result<Self> {
        Self::with_cap(width, height, k, DEFAULT_STATE_CAP)
    }

    pub fn with_cap(width: usize, height: usize, k: usize, cap: u128) -> Result<Self> {
        let v = width * height;
        if v > 63 {
            return Err(Error::capacity(format!("{v} sites exceed the 63-bit state encoding")));
        }
        if k > v {
            return Err(Error::parameter(format!("{k} particles on {v} sites")));
        }
        let count = binomial(v as u64, k as u64);
        if count > cap {
            return Err(Error::capacity(format!("ensemble has {count} states, cap is {cap}")));
        }
        let mut states = Vec::with_capacity(count as usize);
        if k == 0 {
            states.push(0);
        } else {
            // Gosper's hack: next larger integer with the same popcount.
            let mut m: u64 = (1 << k) - 1;
            let limit: u64 = 1 << v;
            while m < limit {
                states.push(m);
                let c = m & m.wrapping_neg();
                let r = m + c;
                m = (((r ^ m) >> 2) / c) | r;
            }
        }
        Ok(CanonicalEnsemble { width, height, k, states })
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
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
        self.k
    }

    pub fn density(&self) -> f64 {
        self.k as f64 / self.sites() as f64
    }

    pub fn state(&self, i: usize) -> u64 {
        self.states[i]
    }

    pub fn index_of(&self, mask: u64) -> usize {
        self.states.binary_search(&mask).expect("configuration not in ensemble")
    }

    /// Space-summed degree-two current `W(eta) = sum_x (eta_x - rho)(eta_{x+e1} - rho)`
    /// evaluated on every state.
    pub fn current_observable(&self) -> Vec<f64> {
        let rho = self.density();
        self.states
            .iter()
            .map(|&m| {
                let mut w = 0.0;
                for s in 0..self.sites() {
                    let right = neighbors(s, self.width, self.height)[0];
                    let a = if occupied(m, s) { 1.0 } else { 0.0 };
                    let b = if occupied(m, right) { 1.0 } else { 0.0 };
                    w += (a - rho) * (b - rho);
                }
                w
            })
            .collect()
    }
}

/// Square sparse matrix in compressed-row form.
#[derive(Debug, Clone)]
pub struct SparseMatrix {
    pub n: usize,
    pub row_ptr: Vec<usize>,
    pub col_idx: Vec<usize>,
    pub vals: Vec<f64>,
}

impl SparseMatrix {
    pub fn matvec(&self, x: &[f64], out: &mut [f64]) {
        for i in 0..self.n {
            let mut acc = 0.0;
            for j in self.row_ptr[i]..self.row_ptr[i + 1] {
                acc += self.vals[j] * x[self.col_idx[j]];
            }
            out[i] = acc;
        }
    }

    pub fn transpose(&self) -> SparseMatrix {
        let mut counts = vec![0usize; self.n + 1];
        for &c in &self.col_idx {
            counts[c + 1] += 1;
        }
        for i in 0..self.n {
            counts[i + 1] += counts[i];
        }
        let row_ptr = counts.clone();
        let mut cursor = counts;
        let nnz = self.vals.len();
        let mut col_idx = vec![0usize; nnz];
        let mut vals = vec![0.0; nnz];
        for i in 0..self.n {
            for j in self.row_ptr[i]..self.row_ptr[i + 1] {
                let c = self.col_idx[j];
                col_idx[cursor[c]] = i;
                vals[cursor[c]] = self.vals[j];
                cursor[c] += 1;
            }
        }
        SparseMatrix { n: self.n, row_ptr, col_idx, vals }
    }

    /// Entry-wise linear combination `a * self + b * other` (patterns may differ).
    pub fn lin_comb(&self, a: f64, other: &SparseMatrix, b: f64) -> SparseMatrix {
        assert_eq!(self.n, other.n);
        let mut row_ptr = vec![0usize; self.n + 1];
        let mut col_idx = Vec::new();
        let mut vals = Vec::new();
        let mut dense = vec![0.0f64; self.n];
        let mut touched = Vec::new();
        for i in 0..self.n {
            for j in self.row_ptr[i]..self.row_ptr[i + 1] {
                let c = self.col_idx[j];
                if dense[c] == 0.0 {
                    touched.push(c);
                }
                dense[c] += a * self.vals[j];
            }
            for j in other.row_ptr[i]..other.row_ptr[i + 1] {
                let c = other.col_idx[j];
                if dense[c] == 0.0 {
                    touched.push(c);
                }
                dense[c] += b * other.vals[j];
            }
            touched.sort_unstable();
            touched.dedup();
            for &c in &touched {
                col_idx.push(c);
                vals.push(dense[c]);
                dense[c] = 0.0;
            }
            touched.clear();
            row_ptr[i + 1] = col_idx.len();
        }
        SparseMatrix { n: self.n, row_ptr, col_idx, vals }
    }

    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.n)
            .map(|i| self.vals[self.row_ptr[i]..self.row_ptr[i + 1]].iter().sum())
            .collect()
    }

    pub fn col_sums(&self) -> Vec<f64> {
        let mut s = vec![0.0; self.n];
        for i in 0..self.n {
            for j in self.row_ptr[i]..self.row_ptr[i + 1] {
                s[self.col_idx[j]] += self.vals[j];
            }
        }
        s
    }
}

/// Markov generator on a canonical ensemble, as a matrix acting on
/// functions of the configuration: `(L f)(eta) = sum rates [f(eta') - f(eta)]`.
#[derive(Debug, Clone)]
pub struct GeneratorMatrix {
    pub ensemble: CanonicalEnsemble,
    pub l: SparseMatrix,
}

pub fn build_generator(width: usize, height: usize, k: usize) -> Result<GeneratorMatrix> {
    let ensemble = CanonicalEnsemble::new(width, height, k)?;
    let n = ensemble.len();
    let mut row_ptr = vec![0usize; n + 1];
    let mut col_idx = Vec::new();
    let mut vals = Vec::new();
    let mut entries: Vec<(usize, f64)> = Vec::new();
    for i in 0..n {
        let mask = ensemble.state(i);
        let mut total = 0.0;
        entries.clear();
        for_each_jump(mask, width, height, |from, to, rate| {
            let target = mask & !(1u64 << from) | 1u64 << to;
            entries.push((ensemble.index_of(target), rate));
            total += rate;
        });
        entries.push((i, -total));
        entries.sort_unstable_by_key(|&(c, _)| c);
        // merge duplicate targets (possible on width-2 tori where right == left)
        let mut merged: Vec<(usize, f64)> = Vec::with_capacity(entries.len());
        for &(c, v) in &entries {
            match merged.last_mut() {
                Some(last) if last.0 == c => last.1 += v,
                _ => merged.push((c, v)),
            }
        }
        for (c, v) in &merged {
            col_idx.push(*c);
            vals.push(*v);
        }
        row_ptr[i + 1] = col_idx.len();
    }
    let l = SparseMatrix { n, row_ptr, col_idx, vals };
    Ok(GeneratorMatrix { ensemble, l })
}

impl GeneratorMatrix {
    /// Symmetric part `(L + L^T)/2` in the uniform inner product.
    pub fn symmetric_part(&self) -> SparseMatrix {
        self.l.lin_comb(0.5, &self.l.transpose(), 0.5)
    }

    /// Antisymmetric part `(L - L^T)/2`.
    pub fn antisymmetric_part(&self) -> SparseMatrix {
        self.l.lin_comb(0.5, &self.l.transpose(), -0.5)
    }

    /// Largest violation of the discrete continuity equation at site 0
    /// over all states.
    ///
    /// With the bond currents `w~_{x,x+e1} = eta_x(1 - eta_{x+e1})` and
    /// `w~_{x,x+e2} = (eta_{x+e2} - eta_x)/2`, the y-formula carries the
    /// opposite orientation to the x-formula (it is minus the net rate of
    /// transport from `x` to `x+e2`), so the exact identity is
    /// `L eta_0 = (w~_{-e1,0} - w~_{0,e1}) - (w~_{-e2,0} - w~_{0,e2})`.
    pub fn conservation_law_violation(&self) -> f64 {
        let e = &self.ensemble;
        let (w, h) = (e.width(), e.height());
        let occ0: Vec<f64> =
            (0..e.len()).map(|i| if occupied(e.state(i), 0) { 1.0 } else { 0.0 }).collect();
        let mut l_occ0 = vec![0.0; e.len()];
        self.l.matvec(&occ0, &mut l_occ0);
        let [right, left, up, down] = neighbors(0, w, h);
        let mut worst = 0.0f64;
        for i in 0..e.len() {
            let m = e.state(i);
            let eta = |s: usize| if occupied(m, s) { 1.0 } else { 0.0 };
            let wx = eta(left) * (1.0 - eta(0)) - eta(0) * (1.0 - eta(right));
            let wy = (eta(0) - eta(down)) / 2.0 - (eta(up) - eta(0)) / 2.0;
            worst = worst.max((l_occ0[i] - wx + wy).abs());
        }
        worst
    }

    /// Solve `(lambda - L) u = W - <W>` and return the space-normalized
    /// quadratic form `V^{-1} <W - <W>, u>` under the uniform measure.
    ///
    /// The current is centered because the canonical ensemble gives the
    /// space-summed degree-two current a small nonzero mean (a finite-size
    /// effect absent in infinite volume); the Monte Carlo counterpart is a
    /// variance and is centered automatically.
    pub fn exact_resolvent(&self, lambda: f64) -> Result<ResolventValue> {
        if lambda <= 0.0 {
            return Err(Error::parameter(format!("lambda = {lambda} must be positive")));
        }
        let n = self.ensemble.len();
        let w = self.ensemble.current_observable();
        let mean = w.iter().sum::<f64>() / n as f64;
        let wc: Vec<f64> = w.iter().map(|x| x - mean).collect();
        let apply = |x: &[f64], out: &mut [f64]| {
            self.l.matvec(x, out);
            for i in 0..n {
                out[i] = lambda * x[i] - out[i];
            }
        };
        let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
        let sol = bicgstab(apply, &wc, 1e-11, 20_000, dot)?;
        let value = dot(&wc, &sol.x) / (n as f64 * self.ensemble.sites() as f64);
        Ok(ResolventValue {
            lambda,
            value,
            residual: sol.residual,
            iterations: sol.iterations,
            current_mean: mean,
        })
    }
}

#[derive(Debug, Clone, Copy)]
pub struct ResolventValue {
    pub lambda: f64,
    /// `V^{-1} <W~, (lambda - L)^{-1} W~>` under the uniform measure.
    pub value: f64,
    pub residual: f64,
    pub iterations: usize,
    /// Uncentered mean of the space-summed current (finite-size artifact).
    pub current_mean: f64,
}

/// Largest deviations found when checking the degree structure of the
/// generator at density 1/2 on the full 2^V state space (all values should
/// be at machine-precision scale).
#[derive(Debug, Clone, Copy)]
pub struct DualityReport {
    /// Symmetric part mapping degree n to degree m != n.
    pub s_degree_leak: f64,
    /// Degree-preserving part of the antisymmetric piece.
    pub m_norm: f64,
    /// Antisymmetric part mapping across more than one degree.
    pub a_degree_spread: f64,
    /// `<A_+ F>` over all basis directions (mean row of A).
    pub a_plus_mean: f64,
    /// `<A_- G, F> + <G, A_+ F>` on random F, G.
    pub adjoint_residual: f64,
}

impl DualityReport {
    pub fn max_deviation(&self) -> f64 {
        self.s_degree_leak
            .max(self.m_norm)
            .max(self.a_degree_spread)
            .max(self.a_plus_mean)
            .max(self.adjoint_residual)
    }
}

/// Expand the generator of a `width x height` torus in the orthonormal
/// basis `xi_Lambda = prod_{x in Lambda} 2(eta_x - 1/2)` of the uniform
/// (density-1/2, grand) measure and verify the degree bookkeeping:
/// the symmetric part preserves degree, the antisymmetric part moves
/// degree by exactly one (no degree-preserving drift at density 1/2),
/// raising directions have zero mean, and lowering is minus the adjoint
/// of raising.
pub fn verify_duality_degree2(width: usize, height: usize) -> Result<DualityReport> {
    let v = width * height;
    if v > 14 {
        return Err(Error::capacity(format!("grand ensemble 2^{v} too large for dense expansion")));
    }
    let n = 1usize << v;
    // dense generator on all 2^V states, column-major application
    let mut lmat = vec![0.0f64; n * n]; // lmat[row * n + col]
    for (row, mask) in (0..n as u64).enumerate() {
        let mut total = 0.0;
        for_each_jump(mask, width, height, |from, to, rate| {
            let target = (mask & !(1u64 << from) | 1u64 << to) as usize;
            lmat[row * n + target] += rate;
            total += rate;
        });
        lmat[row * n + row] -= total;
    }
    // xi basis matrix: xi[state][lambda] = (-1)^{#(Lambda \ mask)}
    let sign = |state: usize, lam: usize| -> f64 {
        let missing = (lam & !state).count_ones();
        if missing % 2 == 0 { 1.0 } else { -1.0 }
    };
    // Lhat[l'][l] = 2^{-V} sum_state xi_{l'}(state) * (L xi_l)(state)
    let mut lhat = vec![0.0f64; n * n];
    let mut col = vec![0.0f64; n];
    let mut lcol = vec![0.0f64; n];
    for lam in 0..n {
        for (state, c) in col.iter_mut().enumerate() {
            *c = sign(state, lam);
        }
        for (state, out) in lcol.iter_mut().enumerate() {
            let mut acc = 0.0;
            for (target, &x) in col.iter().enumerate() {
                acc += lmat[state * n + target] * x;
            }
            *out = acc;
        }
        for lp in 0..n {
            let mut acc = 0.0;
            for state in 0..n {
                acc += sign(state, lp) * lcol[state];
            }
            lhat[lp * n + lam] = acc / n as f64;
        }
    }
    let deg = |lam: usize| lam.count_ones() as i32;
    let (mut s_leak, mut m_norm, mut a_spread, mut mean_row) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    for lp in 0..n {
        for lam in 0..n {
            let s = (lhat[lp * n + lam] + lhat[lam * n + lp]) / 2.0;
            let a = (lhat[lp * n + lam] - lhat[lam * n + lp]) / 2.0;
            let d = deg(lp) - deg(lam);
            if d != 0 {
                s_leak = s_leak.max(s.abs());
            } else {
                m_norm = m_norm.max(a.abs());
            }
            if d.abs() > 1 {
                a_spread = a_spread.max(a.abs());
            }
            if deg(lp) == 0 && d != 0 {
                mean_row = mean_row.max(a.abs());
            }
        }
    }
    // adjoint residual on random F (degree 2) and G (degree 3), using the
    // raising block of A explicitly
    let mut rng_state = 0x9e3779b97f4a7c15u64;
    let mut rand01 = move || {
        rng_state = rng_state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        (rng_state >> 11) as f64 / (1u64 << 53) as f64 - 0.5
    };
    let mut f = vec![0.0f64; n];
    let mut g = vec![0.0f64; n];
    for lam in 0..n {
        if deg(lam) == 2 {
            f[lam] = rand01();
        }
        if deg(lam) == 3 {
            g[lam] = rand01();
        }
    }
    let a_block = |lp: usize, lam: usize| (lhat[lp * n + lam] - lhat[lam * n + lp]) / 2.0;
    // <G, A_+ F> with A_+ = degree-raising block
    let mut g_apf = 0.0;
    let mut amg_f = 0.0;
    for lp in 0..n {
        for lam in 0..n {
            let d = deg(lp) - deg(lam);
            if d == 1 {
                // raising entry acts F(lam) -> lp
                g_apf += g[lp] * a_block(lp, lam) * f[lam];
            } else if d == -1 {
                // lowering entry acts G(lam) -> lp
                amg_f += f[lp] * a_block(lp, lam) * g[lam];
            }
        }
    }
    let scale = f.iter().map(|x| x * x).sum::<f64>().sqrt() * g.iter().map(|x| x * x).sum::<f64>().sqrt();
    let adjoint_residual = (amg_f + g_apf).abs() / scale.max(1e-300);
    Ok(DualityReport {
        s_degree_leak: s_leak,
        m_norm,
        a_degree_spread: a_spread,
        a_plus_mean: mean_row,
        adjoint_residual,
    })
}
