//! Shared oracles for the integration tests: Fourier phasor extraction from
//! sampled signals and analytic steady-state regressor generation.

#![allow(dead_code)]

use num_complex::Complex64;

use irident::filters::en_response;

/// Phasor P of the component `Im(P e^{j omega t})` in a sampled signal,
/// extracted by trapezoidal Fourier integration over the last `periods` full
/// periods. `t0` is the absolute time of `samples[0]`.
pub fn phasor(samples: &[f64], dt: f64, t0: f64, omega: f64, periods: usize) -> Complex64 {
    assert!(omega > 0.0);
    let span = periods as f64 * 2.0 * std::f64::consts::PI / omega;
    let m = (span / dt).round() as usize;
    assert!(m + 1 <= samples.len(), "not enough samples for {periods} periods");
    let start = samples.len() - 1 - m;
    let mut acc = Complex64::new(0.0, 0.0);
    for k in 0..=m {
        let t = t0 + (start + k) as f64 * dt;
        let w = if k == 0 || k == m { 0.5 } else { 1.0 };
        acc += w * samples[start + k] * (-Complex64::i() * omega * t).exp();
    }
    acc *= dt;
    Complex64::i() * acc * 2.0 / (m as f64 * dt)
}

/// Analytic periodic steady-state regressor for the multisine input: tone
/// responses `g[m-1] = G(j m omega_n)`, rows ordered like the filter-bank
/// regressor `[v, v', .., v^(n), -z, .., -z^(n)]`.
pub fn steady_regressor(n: usize, omega_n: f64, g: &[Complex64], t: f64) -> Vec<f64> {
    assert_eq!(g.len(), n + 1);
    let mut phi = vec![0.0; 2 * n + 2];
    for m in 1..=(n + 1) {
        let w = m as f64 * omega_n;
        let e = en_response(n, omega_n, w);
        let rot = (Complex64::i() * w * t).exp();
        let s = Complex64::new(0.0, w);
        let mut sj = Complex64::new(1.0, 0.0);
        for j in 0..=n {
            phi[j] += (e * sj * rot).im;
            phi[n + 1 + j] -= (g[m - 1] * e * sj * rot).im;
            sj *= s;
        }
    }
    phi
}

/// Relative difference |a - b| / max(|b|, floor).
pub fn rel_err(a: f64, b: f64, floor: f64) -> f64 {
    (a - b).abs() / b.abs().max(floor)
}
