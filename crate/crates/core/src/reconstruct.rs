//! Inversion of the coefficient-to-parameter maps.
//!
//! Each plant family relates its first few transfer-function coefficients to
//! the physical parameters through strictly monotone scalar equations, so a
//! bracketed bisection recovers the parameters without derivatives. The
//! bracket is verified monotone by sampling before the solve; a violation
//! aborts with a diagnostic rather than returning a spurious root.

use crate::error::{Error, Result};
use crate::math::factorial;

/// Recovered parameters plus solver diagnostics.
#[derive(Debug, Clone)]
pub struct ReconstructionResult {
    /// (name, value) pairs in the plant's natural order
    pub params: Vec<(&'static str, f64)>,
    /// max absolute defect of the defining equations at the solution
    pub residual: f64,
    pub iterations: usize,
}

impl ReconstructionResult {
    pub fn get(&self, name: &str) -> Option<f64> {
        self.params.iter().find(|(n, _)| *n == name).map(|(_, v)| *v)
    }
}

const ROOT_TOL: f64 = 1e-12;
const BRACKET_CAP: f64 = 1e6;

/// Find the root of a strictly increasing function on (0, cap]. The initial
/// bracket is [lo0, hi0]; the upper end doubles until the sign changes.
fn bisect_increasing<F: Fn(f64) -> f64>(
    f: F,
    lo0: f64,
    hi0: f64,
    what: &str,
) -> Result<(f64, usize)> {
    let mut lo = lo0;
    let mut hi = hi0;
    if f(lo) > 0.0 {
        return Err(Error::RootFinding(format!(
            "{what}: no root, function already positive at bracket start"
        )));
    }
    let mut guard = 0;
    while f(hi) < 0.0 {
        hi *= 2.0;
        guard += 1;
        if hi > BRACKET_CAP {
            return Err(Error::RootFinding(format!(
                "{what}: no sign change up to {BRACKET_CAP:.1e}"
            )));
        }
        if guard > 64 {
            return Err(Error::RootFinding(format!("{what}: bracket expansion stalled")));
        }
    }
    // monotonicity spot check on the final bracket
    let mut prev = f(lo);
    for i in 1..=8 {
        let x = lo + (hi - lo) * i as f64 / 8.0;
        let fx = f(x);
        if fx < prev - 1e-9 * (1.0 + fx.abs().max(prev.abs())) {
            return Err(Error::RootFinding(format!(
                "{what}: target function not increasing on the bracket"
            )));
        }
        prev = fx;
    }
    let mut iterations = 0;
    for _ in 0..200 {
        iterations += 1;
        let mid = 0.5 * (lo + hi);
        let fm = f(mid);
        if fm.abs() <= ROOT_TOL {
            return Ok((mid, iterations));
        }
        if fm > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
        if hi - lo <= ROOT_TOL * mid.max(1e-30) {
            break;
        }
    }
    Ok((0.5 * (lo + hi), iterations))
}

/// Delay plant: p0 = K, p1 = -K tau, q0 = b, q1 = a.
pub fn reconstruct_delay(p0: f64, p1: f64, q0: f64, q1: f64) -> Result<ReconstructionResult> {
    if p0.abs() <= 1e-9 {
        return Err(Error::InvalidParameter(
            "p0 is (numerically) zero: gain K unidentifiable".into(),
        ));
    }
    let k = p0;
    let tau = -p1 / p0;
    Ok(ReconstructionResult {
        params: vec![("K", k), ("tau", tau), ("a", q1), ("b", q0)],
        residual: 0.0,
        iterations: 0,
    })
}

/// sum_i (1+i) r^i / (1+2i)! — the theta-link series of the heat plant.
fn heat_q1_series(r: f64, tol: f64) -> f64 {
    let mut sum = 0.0;
    for i in 0..200 {
        let term = (1 + i) as f64 * r.powi(i as i32) / factorial(1 + 2 * i);
        sum += term;
        if i > 2 && term < tol * sum {
            break;
        }
    }
    sum
}

/// Heat plant: solve sqrt(r) sinh sqrt(r) = q0 for r = lambda / theta
/// (strictly increasing), then theta from the q1 series and lambda = r theta.
pub fn reconstruct_heat(q0: f64, q1: f64, series_tol: f64) -> Result<ReconstructionResult> {
    if !(q0 > 0.0) || !(q1 > 0.0) {
        return Err(Error::InvalidParameter(
            "heat reconstruction needs q0 > 0 and q1 > 0".into(),
        ));
    }
    if series_tol <= 0.0 {
        return Err(Error::InvalidParameter("series_tol must be positive".into()));
    }
    let f = |r: f64| r.sqrt() * r.sqrt().sinh() - q0;
    let (r, iterations) = bisect_increasing(f, 1e-9, 1.0, "heat q0 equation")?;
    let theta = heat_q1_series(r, series_tol) / q1;
    let lambda = r * theta;
    Ok(ReconstructionResult {
        params: vec![("theta", theta), ("lambda", lambda)],
        residual: f(r).abs(),
        iterations,
    })
}

/// Wave plant with EI(xi) = a + b xi: b = (1 - q1) / q2, then solve
/// (a/b) log((a+b)/a) = q1 for a (strictly increasing, range (0, 1)).
pub fn reconstruct_wave(q1: f64, q2: f64) -> Result<ReconstructionResult> {
    if !(q2 > 0.0) {
        return Err(Error::InvalidParameter("wave reconstruction needs q2 > 0".into()));
    }
    if !(q1 > 0.0 && q1 < 1.0) {
        return Err(Error::InvalidParameter(
            "wave reconstruction needs 0 < q1 < 1".into(),
        ));
    }
    let b = (1.0 - q1) / q2;
    // ln_1p keeps full precision when b/a is tiny (q1 near one)
    let g = |a: f64| (a / b) * (b / a).ln_1p() - q1;
    let (a, iterations) = bisect_increasing(g, 1e-9, 1.0, "wave q1 equation")?;
    Ok(ReconstructionResult {
        params: vec![("a", a), ("b", b)],
        residual: g(a).abs(),
        iterations,
    })
}
