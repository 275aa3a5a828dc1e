//! Exponent bookkeeping: the kappa recursion and its fixed point 2/3,
//! power-law fits in `log |log lambda|`, and the theorem-level bound
//! envelopes for the Laplace transform of `t D(t)`.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed};

use crate::error::{Error, Result};

/// The exact rational kappa sequence.  In the primary schedule
/// `kappa_n = 2/3 + (-1)^n 2^{-2N+n} / 3` for `n = 1..2N+1`, so adjacent
/// terms satisfy `kappa_{n-1} = 1 - kappa_n / 2` exactly and the tail is
/// pinned at `kappa_{2N+1} = 0`, `kappa_{2N} = 1`, `kappa_{2N-1} = 1/2`.
/// The alternate schedule (selectable) is
/// `kappa_n = 2/3 - (-1)^n 2^{-2N+n+1} / 3` for `n = 1..2N`.
#[derive(Debug, Clone)]
pub struct KappaSchedule {
    pub n_param: usize,
    pub alternate: bool,
    pub values: Vec<BigRational>,
}

fn big(n: i64) -> BigRational {
    BigRational::from_integer(BigInt::from(n))
}

/// `2^e` as an exact rational, for possibly negative `e`.
fn pow2(e: i64) -> BigRational {
    if e >= 0 {
        BigRational::from_integer(BigInt::one() << e as usize)
    } else {
        BigRational::new(BigInt::one(), BigInt::one() << (-e) as usize)
    }
}

/// Build the exact schedule for depth parameter `N >= 1`.
pub fn kappa_schedule(n_param: usize, alternate: bool) -> Result<KappaSchedule> {
    if n_param == 0 {
        return Err(Error::parameter("depth parameter N must be >= 1"));
    }
    let two_thirds = BigRational::new(BigInt::from(2), BigInt::from(3));
    let third = BigRational::new(BigInt::one(), BigInt::from(3));
    let count = if alternate { 2 * n_param } else { 2 * n_param + 1 };
    let mut values = Vec::with_capacity(count);
    for n in 1..=count {
        let sign = if n % 2 == 0 { big(1) } else { big(-1) };
        let v = if alternate {
            &two_thirds - sign * pow2(-2 * (n_param as i64) + n as i64 + 1) * &third
        } else {
            &two_thirds + sign * pow2(-2 * (n_param as i64) + n as i64) * &third
        };
        values.push(v);
    }
    Ok(KappaSchedule { n_param, alternate, values })
}

impl KappaSchedule {
    /// 1-based accessor `kappa_n`.
    pub fn kappa(&self, n: usize) -> &BigRational {
        &self.values[n - 1]
    }

    /// Exact check of `kappa_{n-1} = 1 - kappa_n / 2` for all adjacent
    /// pairs; returns the first violating index if any.
    pub fn check_recursion(&self) -> Option<usize> {
        for n in 2..=self.values.len() {
            let expect = big(1) - self.kappa(n) / big(2);
            if *self.kappa(n - 1) != expect {
                return Some(n);
            }
        }
        None
    }

    /// Largest deviation |kappa_n - 2/3| over the schedule, as f64.
    pub fn max_deviation_from_fixed_point(&self) -> f64 {
        let two_thirds = BigRational::new(BigInt::from(2), BigInt::from(3));
        self.values
            .iter()
            .map(|v| rational_to_f64(&(v - &two_thirds).abs()))
            .fold(0.0, f64::max)
    }
}

pub fn rational_to_f64(r: &BigRational) -> f64 {
    let numer = r.numer().to_string().parse::<f64>().unwrap_or(f64::NAN);
    let denom = r.denom().to_string().parse::<f64>().unwrap_or(f64::NAN);
    numer / denom
}

/// Iterate the affine contraction `kappa <- 1 - kappa/2`; error halves
/// each step toward the fixed point 2/3.
pub fn iterate_kappa(start: f64, steps: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(steps + 1);
    let mut k = start;
    out.push(k);
    for _ in 0..steps {
        k = 1.0 - k / 2.0;
        out.push(k);
    }
    out
}

/// Result of fitting `value ~ C |log lambda|^kappa`.
#[derive(Debug, Clone)]
pub struct ScalingFit {
    /// Fitted exponent of |log lambda| (slope in log-log-log coordinates).
    pub exponent: f64,
    /// Fitted log-prefactor (intercept).
    pub log_prefactor: f64,
    /// Root-mean-square residual of the linear fit.
    pub rms_residual: f64,
    /// Exponent fitted on the first half of the window.
    pub exponent_low_half: f64,
    /// Exponent fitted on the second half of the window.
    pub exponent_high_half: f64,
    /// Set when the two half-window exponents disagree by more than 0.1:
    /// the data is not yet in its asymptotic regime.
    pub window_sensitive: bool,
}

fn least_squares_slope(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for (x, y) in xs.iter().zip(ys) {
        sxx += (x - mx) * (x - mx);
        sxy += (x - mx) * (y - my);
    }
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

/// Fit `log(value)` against `log |log lambda|`.  Demands at least six
/// decades of lambda (or t) range and at least four points.
pub fn fit_log_power(lambdas: &[f64], values: &[f64]) -> Result<ScalingFit> {
    if lambdas.len() != values.len() || lambdas.len() < 4 {
        return Err(Error::parameter("need at least 4 matched (lambda, value) points"));
    }
    if lambdas.iter().any(|&l| !(0.0..1.0).contains(&l)) {
        return Err(Error::parameter("lambdas must lie in (0, 1)"));
    }
    if values.iter().any(|&v| v <= 0.0) {
        return Err(Error::parameter("values must be positive for a log fit"));
    }
    let mut logs: Vec<f64> = lambdas.iter().map(|&l| l.ln().abs()).collect();
    let lmax = logs.iter().cloned().fold(f64::MIN, f64::max);
    let lmin = logs.iter().cloned().fold(f64::MAX, f64::min);
    let decades = (lmax - lmin) / std::f64::consts::LN_10;
    // small slack so a window of exactly six decades is not rejected for
    // floating-point round-off
    if decades < 6.0 - 1e-9 {
        return Err(Error::parameter(format!(
            "lambda window spans {decades:.1} decades; need at least 6"
        )));
    }
    for l in logs.iter_mut() {
        *l = l.ln();
    }
    let ys: Vec<f64> = values.iter().map(|v| v.ln()).collect();
    // sort jointly by abscissa for the half-window split
    let mut order: Vec<usize> = (0..logs.len()).collect();
    order.sort_by(|&a, &b| logs[a].partial_cmp(&logs[b]).unwrap());
    let xs: Vec<f64> = order.iter().map(|&i| logs[i]).collect();
    let ys: Vec<f64> = order.iter().map(|&i| ys[i]).collect();

    let (slope, intercept) = least_squares_slope(&xs, &ys);
    let mut ss = 0.0;
    for (x, y) in xs.iter().zip(&ys) {
        let r = y - (intercept + slope * x);
        ss += r * r;
    }
    let rms = (ss / xs.len() as f64).sqrt();
    let mid = xs.len() / 2;
    let (lo, _) = least_squares_slope(&xs[..mid.max(2)], &ys[..mid.max(2)]);
    let (hi, _) = least_squares_slope(&xs[mid.min(xs.len() - 2)..], &ys[mid.min(xs.len() - 2)..]);
    Ok(ScalingFit {
        exponent: slope,
        log_prefactor: intercept,
        rms_residual: rms,
        exponent_low_half: lo,
        exponent_high_half: hi,
        window_sensitive: (lo - hi).abs() > 0.1,
    })
}

/// Upper/lower envelopes `lambda^{-2} |log lambda|^{2/3}
/// e^{+-gamma |log log log lambda|^2}` on a lambda grid.
pub fn bound_envelope(lambdas: &[f64], gamma: f64) -> Result<Vec<(f64, f64, f64)>> {
    if gamma <= 0.0 {
        return Err(Error::parameter("gamma must be positive"));
    }
    let mut out = Vec::with_capacity(lambdas.len());
    for &l in lambdas {
        if !(0.0..1.0).contains(&l) {
            return Err(Error::parameter("lambdas must lie in (0, 1)"));
        }
        let log_abs = l.ln().abs();
        if log_abs.ln() <= 0.0 {
            return Err(Error::parameter("lambda too large for the triple-log envelope"));
        }
        let core = l.powi(-2) * log_abs.powf(2.0 / 3.0);
        let tri = log_abs.ln().ln().abs();
        let width = (gamma * tri * tri).exp();
        out.push((l, core / width, core * width));
    }
    Ok(out)
}
