//! Coefficient oracles: independent series evaluations, closed forms of the
//! linear-stiffness string, nested quadrature of the propagation integrals,
//! the published bound sequences, and the selection round trip.

mod common;

use irident::coeffs::{
    bounds_for, delay_coeffs, heat_coeffs, wave_coeffs_peano, CoeffModel, EiProfile, ParamBox,
};
use proptest::prelude::*;

#[test]
fn heat_q0_q1_against_independent_sums() {
    // q0 = sqrt(r) sinh sqrt(r) evaluated directly; q1 by a plain partial sum
    let m = heat_coeffs(5.0, 1.5, 9, 1e-14).unwrap();
    let r: f64 = 0.3;
    let q0_direct = r.sqrt() * r.sqrt().sinh();
    assert!((m.q[0] - q0_direct).abs() < 1e-14);
    assert!((m.q[0] - 0.31524).abs() < 5e-5); // published rounding

    let mut q1_direct = 0.0;
    let mut fact: f64 = 1.0; // (1 + 2i)!
    for i in 0..30usize {
        if i > 0 {
            fact *= (2 * i) as f64 * (2 * i + 1) as f64;
        }
        q1_direct += (1 + i) as f64 * r.powi(i as i32) / fact;
    }
    q1_direct /= 5.0;
    assert!((m.q[1] - q1_direct).abs() < 1e-14);
    assert!((m.q[1] - 0.220454).abs() < 1e-6);
}

#[test]
fn wave_q1_q2_against_closed_forms() {
    // EI = 20 + 10 xi: q1 = (a/b) ln((a+b)/a) = 2 ln 1.5, q2 = (1 - q1)/b
    let ei = EiProfile::Linear { a: 20.0, b: 10.0 };
    let m = wave_coeffs_peano(&ei, 4, 1000).unwrap();
    let q1 = 2.0 * 1.5f64.ln();
    let q2 = (1.0 - q1) / 10.0;
    assert!((m.q[0] - 1.0).abs() < 1e-12, "q0 = {}", m.q[0]);
    assert!((m.q[1] - q1).abs() < 1e-6, "q1 = {} vs {q1}", m.q[1]);
    assert!((m.q[2] - q2).abs() < 1e-6, "q2 = {} vs {q2}", m.q[2]);
}

#[test]
fn wave_q3_against_nested_quadrature() {
    // odd-order propagation integral evaluated independently by cumulative
    // trapezoids: q3 = int_0^1 EI(0)/EI(t3) int_0^t3 int_0^t2 1/EI(t1) ...
    let ei = |x: f64| 20.0 + 10.0 * x;
    let m = 20_000usize;
    let h = 1.0 / m as f64;
    let mut f1 = vec![0.0; m + 1]; // int_0^x 1/EI
    for i in 1..=m {
        let a = 1.0 / ei((i - 1) as f64 * h);
        let b = 1.0 / ei(i as f64 * h);
        f1[i] = f1[i - 1] + 0.5 * (a + b) * h;
    }
    let mut f2 = vec![0.0; m + 1]; // int_0^x f1
    for i in 1..=m {
        f2[i] = f2[i - 1] + 0.5 * (f1[i - 1] + f1[i]) * h;
    }
    let mut q3 = 0.0;
    for i in 0..m {
        let a = 20.0 / ei(i as f64 * h) * f2[i];
        let b = 20.0 / ei((i + 1) as f64 * h) * f2[i + 1];
        q3 += 0.5 * (a + b) * h;
    }
    let model = wave_coeffs_peano(&EiProfile::Linear { a: 20.0, b: 10.0 }, 5, 1000).unwrap();
    assert!(
        (model.q[3] - q3).abs() < 1e-6,
        "propagated q3 = {:e}, quadrature = {q3:e}",
        model.q[3]
    );
}

#[test]
fn wave_tabulated_profile_matches_linear() {
    // a densely tabulated linear profile reproduces the linear family
    let samples: Vec<(f64, f64)> = (0..=100)
        .map(|i| {
            let xi = i as f64 / 100.0;
            (xi, 20.0 + 10.0 * xi)
        })
        .collect();
    let tab = wave_coeffs_peano(&EiProfile::Tabulated { samples }, 4, 1000).unwrap();
    let lin = wave_coeffs_peano(&EiProfile::Linear { a: 20.0, b: 10.0 }, 4, 1000).unwrap();
    for k in 0..=4 {
        assert!((tab.q[k] - lin.q[k]).abs() < 1e-8, "k = {k}");
    }
}

#[test]
fn delay_bounds_match_published_box() {
    let bounds = bounds_for(
        &ParamBox::Delay { k_max: 10.0, a_max: 5.0, b_max: 10.0, tau_max: 0.2 },
        12,
    )
    .unwrap();
    let mut fact: f64 = 1.0;
    for k in 0..=5usize {
        if k > 0 {
            fact *= k as f64;
        }
        assert!((bounds.p_u[k] - 10.0 * 0.2f64.powi(k as i32) / fact).abs() < 1e-15);
    }
    assert_eq!(bounds.q_u[0], 10.0);
    assert_eq!(bounds.q_u[1], 5.0);
    assert_eq!(bounds.q_u[2], 1.0);
    assert!(bounds.q_u[3..].iter().all(|&v| v == 0.0));
    assert_eq!(bounds.c0, 10.0);
    assert_eq!(bounds.c, 10.0);
}

#[test]
fn heat_bounds_match_published_box() {
    let bounds = bounds_for(&ParamBox::Heat { theta_min: 1.0, lambda_max: 5.0 }, 12).unwrap();
    let q0 = 5f64.sqrt() * 5f64.sqrt().sinh();
    assert!((bounds.q_u[0] - q0).abs() < 1e-12);
    assert!((bounds.q_u[0] - 10.341357221709991).abs() < 1e-12);
    // independent partial sum for k = 1: sum_i 5^i (1+i) / (1+2i)!
    let mut direct = 0.0;
    let mut fact: f64 = 1.0;
    for i in 0..40usize {
        if i > 0 {
            fact *= (2 * i) as f64 * (2 * i + 1) as f64;
        }
        direct += 5f64.powi(i as i32) * (1 + i) as f64 / fact;
    }
    assert!((bounds.q_u[1] - direct).abs() < 1e-12 * direct);
    assert!((bounds.c0 - 5f64.exp()).abs() < 1e-12);
    assert_eq!(bounds.c, 1.0);
    assert_eq!(bounds.p_u[0], 1.0);
    assert!(bounds.p_u[1..].iter().all(|&v| v == 0.0));
}

#[test]
fn wave_bounds_match_published_box() {
    let bounds = bounds_for(&ParamBox::Wave { ei0_max: 60.0, ei_min: 10.0 }, 12).unwrap();
    // odd k: (1/k!) (60/sqrt(10)) (1/10)^(k/2); even k > 0: (1/k!) (1/10)^(k/2)
    assert!((bounds.q_u[1] - 6.0).abs() < 1e-14);
    assert!((bounds.q_u[2] - 0.05).abs() < 1e-15);
    let q3 = 60.0 / 10f64.sqrt() * 0.1f64.powf(1.5) / 6.0;
    assert!((bounds.q_u[3] - q3).abs() < 1e-15);
    assert_eq!(bounds.c0, 60.0);
    assert_eq!(bounds.c, 1.0);
}

#[test]
fn factorial_envelope_holds_for_example_models() {
    // |p_k| + |q_k| <= c0 c^k / k! for the three studied plants under their
    // published boxes
    let cases: Vec<(CoeffModel, ParamBox)> = vec![
        (
            delay_coeffs(1.5, 0.3, 1.0, 0.1, 11).unwrap(),
            ParamBox::Delay { k_max: 10.0, a_max: 5.0, b_max: 10.0, tau_max: 0.2 },
        ),
        (
            heat_coeffs(5.0, 1.5, 9, 1e-14).unwrap(),
            ParamBox::Heat { theta_min: 1.0, lambda_max: 5.0 },
        ),
        (
            wave_coeffs_peano(&EiProfile::Linear { a: 20.0, b: 10.0 }, 16, 1000).unwrap(),
            ParamBox::Wave { ei0_max: 60.0, ei_min: 10.0 },
        ),
    ];
    for (model, pbox) in cases {
        let bounds = bounds_for(&pbox, model.n + 4).unwrap();
        let mut fact = 1.0;
        for k in 0..=model.n {
            if k > 0 {
                fact *= k as f64;
            }
            let env = bounds.c0 * bounds.c.powi(k as i32) / fact;
            let sum = model.p[k].abs() + model.q[k].abs();
            assert!(sum <= env * (1.0 + 1e-12), "k = {k}: {sum} > {env}");
            // and the caps dominate the true coefficients entrywise
            assert!(model.p[k].abs() <= bounds.p_u[k] * (1.0 + 1e-12) + 1e-300);
            assert!(model.q[k].abs() <= bounds.q_u[k] * (1.0 + 1e-12) + 1e-300);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn selection_round_trip(values in prop::collection::vec(-1e3f64..1e3, 4..20), mask_bits in prop::collection::vec(any::<bool>(), 4..20)) {
        // build a model of order n from an even-length prefix
        let n = (values.len().min(mask_bits.len()) / 2).max(2) - 1;
        let len = n + 1;
        let p: Vec<f64> = values.iter().cycle().take(len).copied().collect();
        let q: Vec<f64> = values.iter().rev().cycle().take(len).copied().collect();
        let mask: Vec<bool> = mask_bits.iter().cycle().take(2 * len).copied().collect();
        let model = CoeffModel::new(p, q, mask).unwrap();
        let beta = model.beta();
        let alpha = model.select(&beta);
        prop_assert_eq!(model.embed(&alpha), beta);
        prop_assert_eq!(alpha.len(), model.r());
    }
}
