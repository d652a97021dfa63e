//! The low-pass filter bank and the regressor it produces.
//!
//! The bank realizes the transfer vector `E_n(s) [1, s, .., s^n]^T` with
//! `E_n(s) = (a / (s + a))^(n+1)` and pole magnitude `a = (n+1) omega_n`,
//! as n+1 identical first-order lags in series. The cascade keeps its states
//! well scaled for large n, and because every component `s^j E_n(s)` is
//! strictly proper for j <= n, the j-th derivative of the cascade output is an
//! exact linear combination of the states (a binomial recursion), so no
//! numerical differentiation is involved anywhere.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::math::binomial;

/// Cascade of n+1 identical first-order lags with pole `a = (n+1) omega_n`.
#[derive(Debug, Clone)]
pub struct FilterBank {
    n: usize,
    pole: f64,
    /// states x1 .. x_{n+1}, the last one being the cascade output
    x: Vec<f64>,
}

/// Filtered input/output samples and their derivatives at one instant,
/// ordered `[v, v', .., v^(n), -z, -z', .., -z^(n)]`.
#[derive(Debug, Clone)]
pub struct Regressor {
    pub phi: Vec<f64>,
    pub t: f64,
}

impl Regressor {
    pub fn dim(&self) -> usize {
        self.phi.len()
    }
}

/// Build a bank at zero state. The frequency condition `(n+1) omega_n >= 1`
/// keeps the pole magnitude at or above one.
pub fn filter_init(n: usize, omega_n: f64) -> Result<FilterBank> {
    let pole = (n as f64 + 1.0) * omega_n;
    if !(pole >= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "(n+1) * omega_n = {pole} violates the frequency condition (must be >= 1)"
        )));
    }
    Ok(FilterBank {
        n,
        pole,
        x: vec![0.0; n + 1],
    })
}

impl FilterBank {
    pub fn order(&self) -> usize {
        self.n
    }

    pub fn pole(&self) -> f64 {
        self.pole
    }

    pub fn states(&self) -> &[f64] {
        &self.x
    }

    /// Overwrite the cascade states (test scaffolding).
    pub fn set_states(&mut self, x: &[f64]) {
        assert_eq!(x.len(), self.x.len());
        self.x.copy_from_slice(x);
    }

    /// Zero the cascade (fresh data collection).
    pub fn reset(&mut self) {
        self.x.iter_mut().for_each(|v| *v = 0.0);
    }

    /// Advance the cascade over one step of length `dt` with the classical
    /// fourth-order scheme, the input interpolating linearly from `u0` at the
    /// start of the step to `u1` at its end.
    pub fn step(&mut self, u0: f64, u1: f64, dt: f64) {
        let a = self.pole;
        let um = 0.5 * (u0 + u1);
        let rhs = |x: &[f64], u: f64, out: &mut [f64]| {
            out[0] = a * (u - x[0]);
            for i in 1..x.len() {
                out[i] = a * (x[i - 1] - x[i]);
            }
        };
        let m = self.x.len();
        let mut k1 = vec![0.0; m];
        let mut k2 = vec![0.0; m];
        let mut k3 = vec![0.0; m];
        let mut k4 = vec![0.0; m];
        let mut tmp = vec![0.0; m];
        rhs(&self.x, u0, &mut k1);
        for i in 0..m {
            tmp[i] = self.x[i] + 0.5 * dt * k1[i];
        }
        rhs(&tmp, um, &mut k2);
        for i in 0..m {
            tmp[i] = self.x[i] + 0.5 * dt * k2[i];
        }
        rhs(&tmp, um, &mut k3);
        for i in 0..m {
            tmp[i] = self.x[i] + dt * k3[i];
        }
        rhs(&tmp, u1, &mut k4);
        for i in 0..m {
            self.x[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
    }

    /// Derivatives of the cascade output: for j = 0 .. n,
    ///
    /// ```text
    ///     v^(j) = a^j sum_{i=0}^{j} (-1)^i C(j, i) x_{n+1-j+i}
    /// ```
    ///
    /// (states indexed 1..n+1, v = x_{n+1}). Exact because each s^j E_n(s)
    /// is strictly proper for j <= n.
    pub fn derivatives(&self) -> Vec<f64> {
        let n = self.n;
        let a = self.pole;
        let mut out = vec![0.0; n + 1];
        for (j, o) in out.iter_mut().enumerate() {
            let mut acc = 0.0;
            let mut sign = 1.0;
            for i in 0..=j {
                // x_{n+1-j+i} in 1-based indexing = self.x[n - j + i]
                acc += sign * binomial(j, i) * self.x[n - j + i];
                sign = -sign;
            }
            *o = a.powi(j as i32) * acc;
        }
        out
    }
}

/// Frequency response of the scalar base filter, `E_n(j omega)`.
pub fn en_response(n: usize, omega_n: f64, omega: f64) -> Complex64 {
    let a = (n as f64 + 1.0) * omega_n;
    (Complex64::new(a, 0.0) / Complex64::new(a, omega)).powu(n as u32 + 1)
}

/// Stack the filtered-input derivatives over the negated filtered-output
/// derivatives. Both banks must share order and pole.
pub fn regressor_assemble(u_bank: &FilterBank, y_bank: &FilterBank, t: f64) -> Result<Regressor> {
    if u_bank.n != y_bank.n || u_bank.pole != y_bank.pole {
        return Err(Error::InvalidParameter(
            "input and output banks must share (n, omega_n)".into(),
        ));
    }
    let mut phi = u_bank.derivatives();
    phi.extend(y_bank.derivatives().into_iter().map(|z| -z));
    Ok(Regressor { phi, t })
}
