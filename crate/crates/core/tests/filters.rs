//! Filter-bank oracles: frequency-response conformance of every derivative
//! output, the binomial state recursion against finite differences, and the
//! truncated-residual oracle built from synthetic steady-state signals.

mod common;

use common::phasor;
use irident::coeffs::delay_closed_form;
use irident::filters::{en_response, filter_init};
use num_complex::Complex64;

/// Drive a bank with sin(omega t) from rest and record all derivative rows.
fn run_bank(n: usize, omega_n: f64, omega: f64, t_end: f64, dt: f64) -> Vec<Vec<f64>> {
    let mut bank = filter_init(n, omega_n).unwrap();
    let steps = (t_end / dt).round() as usize;
    let mut rows = vec![Vec::with_capacity(steps + 1); n + 1];
    for (j, row) in rows.iter_mut().enumerate() {
        row.push(bank.derivatives()[j]);
    }
    for k in 0..steps {
        let t = k as f64 * dt;
        bank.step((omega * t).sin(), (omega * (t + dt)).sin(), dt);
        let d = bank.derivatives();
        for (j, row) in rows.iter_mut().enumerate() {
            row.push(d[j]);
        }
    }
    rows
}

#[test]
fn frequency_response_conformance() {
    // every derivative row must match (j m omega_n)^j E_n(j m omega_n) in
    // both amplitude and phase to 1e-3 relative after ten time constants
    let n = 5;
    let omega_n = 1.0 / 6.0; // pole at 1
    let dt = 1e-3;
    let t_end = 10.0 * (n as f64 + 1.0) + 8.0 * std::f64::consts::PI / omega_n;
    for m in 1..=(n + 1) {
        let w = m as f64 * omega_n;
        let rows = run_bank(n, omega_n, w, t_end, dt);
        for (j, row) in rows.iter().enumerate() {
            let measured = phasor(row, dt, 0.0, w, 2);
            let expected = (Complex64::i() * w).powu(j as u32) * en_response(n, omega_n, w);
            assert!(
                (measured - expected).norm() <= 1e-3 * expected.norm(),
                "m = {m}, j = {j}: measured {measured}, expected {expected}"
            );
        }
    }
}

#[test]
fn last_state_amplitude_is_en_gain() {
    let n = 4;
    let omega_n = 0.3;
    let omega = 0.7;
    let dt = 1e-3;
    let rows = run_bank(n, omega_n, omega, 80.0, dt);
    let amp = phasor(&rows[0], dt, 0.0, omega, 3).norm();
    let a = (n as f64 + 1.0) * omega_n;
    let expected = (a / (a * a + omega * omega).sqrt()).powi(n as i32 + 1);
    assert!((amp - expected).abs() < 1e-3 * expected);
}

#[test]
fn derivative_rows_scale_like_omega_powers() {
    // steady state under sin(omega t): |v^(j)| = omega^j |E_n(j omega)|
    let n = 3;
    let omega_n = 0.5;
    let omega = 0.9;
    let dt = 1e-3;
    let rows = run_bank(n, omega_n, omega, 60.0, dt);
    let base = en_response(n, omega_n, omega).norm();
    for (j, row) in rows.iter().enumerate() {
        let amp = phasor(row, dt, 0.0, omega, 3).norm();
        let expected = omega.powi(j as i32) * base;
        assert!(
            (amp - expected).abs() < 1e-3 * expected,
            "j = {j}: {amp} vs {expected}"
        );
    }
}

#[test]
fn binomial_recursion_matches_finite_differences() {
    // central differences of the recorded cascade output reproduce the
    // first and second derivative rows to O(dt^2)
    let n = 6;
    let omega_n = 0.2;
    let omega = 0.8;
    let dt = 1e-3;
    let rows = run_bank(n, omega_n, omega, 50.0, dt);
    let v = &rows[0];
    let picks = [20_011usize, 23_407, 27_803, 31_207, 35_617, 39_019, 41_021,
                 42_923, 44_729, 45_631, 46_337, 47_239, 48_241, 48_647, 49_043,
                 49_139, 49_241, 49_343, 49_447, 49_549];
    for &k in &picks {
        let fd1 = (v[k + 1] - v[k - 1]) / (2.0 * dt);
        let fd2 = (v[k + 1] - 2.0 * v[k] + v[k - 1]) / (dt * dt);
        assert!((rows[1][k] - fd1).abs() < 1e-5, "j=1 at {k}: {} vs {fd1}", rows[1][k]);
        assert!((rows[2][k] - fd2).abs() < 1e-3, "j=2 at {k}: {} vs {fd2}", rows[2][k]);
    }
}

#[test]
fn truncated_residual_shrinks_with_order() {
    // feed u_ss = sin(omega t) and y_ss = |G| sin(omega t + phase) for a
    // delay plant with a fat numerator tail; the filtered truncated residual
    // sum_k<=n (q_k z^(k) - p_k v^(k)) must fall with n
    let (k_gain, a, b, tau) = (1.5, 3.0, 2.0, 0.5);
    let omega = 1.0;
    let dt = 1e-3;
    let g = delay_closed_form(k_gain, a, b, tau, omega);
    let mut rms = Vec::new();
    for n in [2usize, 4, 6, 8] {
        let omega_n = 1.0 / (n as f64 + 1.0);
        let model = irident::coeffs::delay_coeffs(k_gain, a, b, tau, n).unwrap();
        let mut u_bank = filter_init(n, omega_n).unwrap();
        let mut y_bank = filter_init(n, omega_n).unwrap();
        let t_end: f64 = 90.0;
        let steps = (t_end / dt).round() as usize;
        let mut res = Vec::new();
        for kk in 0..steps {
            let t = kk as f64 * dt;
            let u0 = (omega * t).sin();
            let u1 = (omega * (t + dt)).sin();
            let y_at = |tt: f64| g.norm() * (omega * tt + g.arg()).sin();
            u_bank.step(u0, u1, dt);
            y_bank.step(y_at(t), y_at(t + dt), dt);
            if t > 60.0 {
                let v = u_bank.derivatives();
                let z = y_bank.derivatives();
                let r: f64 = (0..=n).map(|k| model.q[k] * z[k] - model.p[k] * v[k]).sum();
                res.push(r);
            }
        }
        let ms = (res.iter().map(|r| r * r).sum::<f64>() / res.len() as f64).sqrt();
        rms.push(ms);
    }
    for w in rms.windows(2) {
        assert!(
            w[1] < 0.5 * w[0],
            "residual did not shrink: {:?}",
            rms
        );
    }
    assert!(rms[0] < 0.1, "residual at n = 2 unexpectedly large: {}", rms[0]);
    assert!(*rms.last().unwrap() < 1e-6);
}
