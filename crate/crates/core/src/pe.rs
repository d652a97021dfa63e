//! Numerical verification of the excitation assumption.
//!
//! For each truncation order n the quantity of interest is the smallest
//! eigenvalue kappa_n of the steady-state windowed Gram of the unknown
//! regressor rows, and the computable ratio
//!
//! ```text
//!     rho_n^u = sum_{k>n} (p_k^u + q_k^u) (n+1)^(n+k+5/2) omega_n^(n+k)
//!               ---------------------------------------------------------
//!                                 omega_n kappa_n
//! ```
//!
//! whose smallness certifies a small asymptotic estimation error. When the
//! unknowns sit in only one of the two coefficient blocks, kappa_n follows
//! from a closed-form sum of rank-one frequency terms; with unknowns in both
//! blocks it must be measured from simulated input-output data. Tail terms
//! are summed in the log domain because the (n+1)^(n+k+5/2) factors overflow
//! doubles long before the factorially decaying bounds tame them.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::coeffs::{self, CoeffBounds, CoeffModel, ParamBox, PlantSpec};
use crate::error::{Error, Result};
use crate::filters::en_response;
use crate::identifier::GramWindow;
use crate::pipeline::Pipeline;
use crate::plants::MultiSine;

/// How kappa_n was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum PeMethod {
    #[serde(rename = "analytic-numerator")]
    AnalyticNumerator,
    #[serde(rename = "analytic-denominator")]
    AnalyticDenominator,
    #[serde(rename = "data-driven")]
    DataDriven,
}

impl std::fmt::Display for PeMethod {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            PeMethod::AnalyticNumerator => "analytic-numerator",
            PeMethod::AnalyticDenominator => "analytic-denominator",
            PeMethod::DataDriven => "data-driven",
        };
        f.write_str(s)
    }
}

/// Per-order excitation report, one row of the sweep output.
#[derive(Debug, Clone, Serialize)]
pub struct PeReport {
    pub n: usize,
    pub omega: f64,
    pub kappa: f64,
    pub tail: f64,
    pub rho_u: f64,
    pub method: PeMethod,
    /// false only for data-driven reports whose settling test never passed
    pub settled: bool,
}

/// Frequency rule omega_n = f(n) for sweeps.
#[derive(Debug, Clone, Copy)]
pub enum OmegaRule {
    /// omega_n = 1 / (n + 1), the choice used throughout.
    Reciprocal,
    Fixed(f64),
}

impl OmegaRule {
    pub fn value(&self, n: usize) -> f64 {
        match self {
            OmegaRule::Reciprocal => 1.0 / (n as f64 + 1.0),
            OmegaRule::Fixed(w) => *w,
        }
    }
}

/// Smallest eigenvalue of a symmetric matrix. The matrix must be symmetric
/// to about 1e-10 of its magnitude (it is symmetrized before solving) and
/// free of non-finite entries.
pub fn lambda_min(m: &DMatrix<f64>) -> Result<f64> {
    if m.nrows() != m.ncols() || m.is_empty() {
        return Err(Error::BadMatrix("lambda_min needs a nonempty square matrix".into()));
    }
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::BadMatrix("non-finite entries".into()));
    }
    let scale = m.iter().fold(0.0f64, |acc, v| acc.max(v.abs())).max(1e-300);
    let asym = (m - m.transpose()).iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
    if asym > 1e-10 * scale.max(1.0) {
        return Err(Error::BadMatrix(format!(
            "asymmetry {asym:.3e} exceeds tolerance for scale {scale:.3e}"
        )));
    }
    let sym = (m + m.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym);
    Ok(eig.eigenvalues.min())
}

/// Accumulate `Re sum_m h(m omega_n) h(m omega_n)^*` over the n+1 input
/// tones; `h` returns the complex response column at s = j omega. The result
/// is symmetric positive semidefinite by construction.
fn re_sum_outer<F>(h: F, tones: usize, omega_n: f64, r: usize) -> DMatrix<f64>
where
    F: Fn(f64) -> Vec<Complex64>,
{
    let mut m = DMatrix::zeros(r, r);
    for tone in 1..=tones {
        let hv = h(tone as f64 * omega_n);
        debug_assert_eq!(hv.len(), r);
        let re = DVector::from_iterator(r, hv.iter().map(|c| c.re));
        let im = DVector::from_iterator(r, hv.iter().map(|c| c.im));
        m.ger(1.0, &re, &re, 1.0);
        m.ger(1.0, &im, &im, 1.0);
    }
    m
}

/// kappa_n when every denominator coefficient is known, so the unknown rows
/// of the regressor are filtered input derivatives only.
pub fn kappa_numerator_unknown(model: &CoeffModel, omega_n: f64) -> Result<f64> {
    let n = model.n;
    let unknown = model.unknown_indices();
    if unknown.iter().any(|&i| i > n) {
        return Err(Error::InvalidParameter(
            "kappa_numerator_unknown requires all denominator coefficients known".into(),
        ));
    }
    if unknown.is_empty() {
        return Err(Error::InvalidParameter("no unknown coefficients".into()));
    }
    let h = |w: f64| -> Vec<Complex64> {
        let e = en_response(n, omega_n, w);
        let s = Complex64::new(0.0, w);
        unknown.iter().map(|&a| e * s.powu(a as u32)).collect()
    };
    let m = re_sum_outer(h, n + 1, omega_n, unknown.len());
    Ok(std::f64::consts::PI / (2.0 * omega_n) * lambda_min(&m)?)
}

/// The bound transfer function G^u(j omega): known numerator over the
/// magnitude-cap denominator with the even caps real and the odd caps
/// imaginary. By construction |G^u| <= |G| at every frequency.
pub fn gu_response(model: &CoeffModel, bounds: &CoeffBounds, omega: f64) -> Complex64 {
    let s = Complex64::new(0.0, omega);
    let mut num = Complex64::new(0.0, 0.0);
    let mut pw = Complex64::new(1.0, 0.0);
    for &pk in &model.p {
        num += pk * pw;
        pw *= s;
    }
    let mut den_re = 0.0;
    let mut den_im = 0.0;
    let mut wk = 1.0;
    for (k, &qu) in bounds.q_u.iter().enumerate() {
        let term = qu * wk;
        if k % 2 == 0 {
            den_re += term;
        } else {
            den_im += term;
        }
        wk *= omega;
        if k > 4 && term < 1e-14 * (den_re + den_im) {
            break;
        }
    }
    num / Complex64::new(den_re, den_im)
}

/// kappa_n when every numerator coefficient is known: the unknown rows are
/// filtered output derivatives, dominated through the bound response G^u.
pub fn kappa_denominator_unknown(
    model: &CoeffModel,
    bounds: &CoeffBounds,
    omega_n: f64,
) -> Result<f64> {
    let n = model.n;
    let unknown = model.unknown_indices();
    if unknown.iter().any(|&i| i <= n) {
        return Err(Error::InvalidParameter(
            "kappa_denominator_unknown requires all numerator coefficients known".into(),
        ));
    }
    if unknown.is_empty() {
        return Err(Error::InvalidParameter("no unknown coefficients".into()));
    }
    let b_exponents: Vec<usize> = unknown.iter().map(|&i| i - n - 1).collect();
    let h = |w: f64| -> Vec<Complex64> {
        let e = en_response(n, omega_n, w);
        let gu = gu_response(model, bounds, w);
        let s = Complex64::new(0.0, w);
        b_exponents.iter().map(|&b| gu * e * s.powu(b as u32)).collect()
    };
    let m = re_sum_outer(h, n + 1, omega_n, b_exponents.len());
    Ok(std::f64::consts::PI / (2.0 * omega_n) * lambda_min(&m)?)
}

/// Analytic limit of the windowed Gram of the unknown regressor rows at
/// exact periodic steady state, `(pi / omega_n) Re sum_m H H^*` with the true
/// transfer function. Supports any mask; the wave response uses the
/// truncated series with `n + 8` terms.
pub fn steady_state_gram_true(
    spec: &PlantSpec,
    model: &CoeffModel,
    omega_n: f64,
) -> Result<DMatrix<f64>> {
    let n = model.n;
    let unknown = model.unknown_indices();
    let g_of = |w: f64| -> Result<Complex64> {
        match spec {
            PlantSpec::Wave { ei } => {
                let m = coeffs::wave_coeffs_peano(ei, n + 8, 1000)?;
                Ok(m.series_tf(w))
            }
            _ => coeffs::closed_form_tf(spec, w),
        }
    };
    // precompute G at the tone frequencies
    let mut g = Vec::with_capacity(n + 1);
    for tone in 1..=(n + 1) {
        g.push(g_of(tone as f64 * omega_n)?);
    }
    let h = |w: f64| -> Vec<Complex64> {
        let e = en_response(n, omega_n, w);
        let tone = (w / omega_n).round() as usize;
        let gw = g[tone - 1];
        let s = Complex64::new(0.0, w);
        unknown
            .iter()
            .map(|&i| {
                if i <= n {
                    e * s.powu(i as u32)
                } else {
                    -gw * e * s.powu((i - n - 1) as u32)
                }
            })
            .collect()
    };
    let m = re_sum_outer(h, n + 1, omega_n, unknown.len());
    Ok(m * (std::f64::consts::PI / omega_n))
}

/// Natural log of the tail sum; `None` when every tail bound is zero.
fn tail_log(n: usize, omega_n: f64, bounds: &CoeffBounds) -> Option<f64> {
    let ln_np1 = (n as f64 + 1.0).ln();
    let ln_w = omega_n.ln();
    let mut acc: Option<f64> = None;
    let mut prev_term = f64::INFINITY;
    for k in (n + 1)..bounds.len() {
        let b = bounds.sum_bound(k);
        if b <= 0.0 {
            continue;
        }
        let lt = b.ln() + (n as f64 + k as f64 + 2.5) * ln_np1 + (n + k) as f64 * ln_w;
        acc = Some(match acc {
            None => lt,
            Some(a) => {
                let hi = a.max(lt);
                hi + ((a - hi).exp() + (lt - hi).exp()).ln()
            }
        });
        // terms eventually decay factorially; stop once negligible
        if let Some(a) = acc {
            if lt < prev_term && lt < a + (1e-16f64).ln() {
                break;
            }
        }
        prev_term = lt;
    }
    acc
}

/// Tail sum as a plain double (may underflow to zero for large n).
pub fn tail_sum(n: usize, omega_n: f64, bounds: &CoeffBounds) -> f64 {
    tail_log(n, omega_n, bounds).map_or(0.0, f64::exp)
}

/// The computable ratio rho_n^u = tail / (omega_n kappa_n), evaluated in the
/// log domain. A non-positive kappa means the excitation test failed at this
/// order and the ratio is undefined.
pub fn rho_upper(n: usize, omega_n: f64, kappa: f64, bounds: &CoeffBounds) -> Result<f64> {
    if !(kappa > 0.0) {
        return Err(Error::NotExcited { n, kappa });
    }
    match tail_log(n, omega_n, bounds) {
        None => Ok(0.0),
        Some(lt) => Ok((lt - omega_n.ln() - kappa.ln()).exp()),
    }
}

/// Result of the simulated excitation measurement.
#[derive(Debug, Clone, Copy)]
pub struct DataKappa {
    pub kappa: f64,
    pub settled: bool,
    pub windows_used: usize,
    pub t_final: f64,
}

/// Options for data-driven kappa measurements and sweeps.
#[derive(Debug, Clone, Copy)]
pub struct SimOptions {
    pub dt: f64,
    pub grid_points: usize,
    pub horizon_windows: usize,
}

impl Default for SimOptions {
    fn default() -> Self {
        SimOptions {
            dt: 1e-3,
            grid_points: 400,
            horizon_windows: 20,
        }
    }
}

/// Measure kappa_n from simulated input-output data: run the plant under the
/// identification input, form the windowed Gram of the unknown regressor
/// rows, and read half its smallest eigenvalue once per window. Settling is
/// declared when consecutive readings differ by less than 1%; the returned
/// kappa is the final reading over the full horizon.
pub fn kappa_from_data(
    spec: &PlantSpec,
    model: &CoeffModel,
    omega_n: f64,
    opts: &SimOptions,
) -> Result<DataKappa> {
    let n = model.n;
    let input = MultiSine { omega: omega_n, tones: n + 1 };
    let mut pipe = Pipeline::new(spec, &input, n, omega_n, opts.grid_points, opts.dt)?;
    let mut window = GramWindow::new(2 * n + 2, omega_n, opts.dt)?;
    let unknown = model.unknown_indices();
    let steps_per_window = (2.0 * std::f64::consts::PI / omega_n / opts.dt).ceil() as usize;

    let mut readings: Vec<f64> = Vec::with_capacity(opts.horizon_windows);
    for _ in 0..opts.horizon_windows {
        for _ in 0..steps_per_window {
            let reg = pipe.step()?;
            window.push(&reg.phi);
        }
        window.recompute();
        readings.push(lambda_min(&window.gram_sub(&unknown))?);
    }
    let last = *readings.last().expect("horizon_windows >= 1");
    let settled = readings
        .windows(2)
        .last()
        .map(|w| (w[1] - w[0]).abs() < 0.01 * w[1].abs().max(1e-300) || w[1].abs() < 1e-300)
        .unwrap_or(false);
    Ok(DataKappa {
        kappa: 0.5 * last,
        settled,
        windows_used: readings.len(),
        t_final: pipe.time(),
    })
}

/// Classify which kappa path a mask admits.
fn method_for(model: &CoeffModel) -> PeMethod {
    let n = model.n;
    let unknown = model.unknown_indices();
    let any_p = unknown.iter().any(|&i| i <= n);
    let any_q = unknown.iter().any(|&i| i > n);
    match (any_p, any_q) {
        (true, false) => PeMethod::AnalyticNumerator,
        (false, true) => PeMethod::AnalyticDenominator,
        _ => PeMethod::DataDriven,
    }
}

/// Excitation report for a single order.
pub fn report_for(
    spec: &PlantSpec,
    param_box: &ParamBox,
    n: usize,
    omega_n: f64,
    opts: &SimOptions,
) -> Result<PeReport> {
    let model = coeffs::model_for(spec, n)?;
    let bounds = coeffs::bounds_for(param_box, n + 64)?;
    let method = method_for(&model);
    let (kappa, settled) = match method {
        PeMethod::AnalyticNumerator => (kappa_numerator_unknown(&model, omega_n)?, true),
        PeMethod::AnalyticDenominator => {
            (kappa_denominator_unknown(&model, &bounds, omega_n)?, true)
        }
        PeMethod::DataDriven => {
            let dk = kappa_from_data(spec, &model, omega_n, opts)?;
            (dk.kappa, dk.settled)
        }
    };
    let tail = tail_sum(n, omega_n, &bounds);
    let rho_u = rho_upper(n, omega_n, kappa, &bounds)?;
    Ok(PeReport {
        n,
        omega: omega_n,
        kappa,
        tail,
        rho_u,
        method,
        settled,
    })
}

/// One report per order over an inclusive range; orders run in parallel and
/// the output is sorted by n.
pub fn sweep(
    spec: &PlantSpec,
    param_box: &ParamBox,
    n_min: usize,
    n_max: usize,
    rule: OmegaRule,
    opts: &SimOptions,
) -> Result<Vec<PeReport>> {
    if n_min > n_max {
        return Ok(Vec::new());
    }
    (n_min..=n_max)
        .into_par_iter()
        .map(|n| report_for(spec, param_box, n, rule.value(n), opts))
        .collect()
}

/// 1 + sup |G(j omega)|, the constant multiplying truncation-residual bounds.
/// The supremum is approximated on omega = 0 plus 200 log-spaced points in
/// [1e-3, 1e3]; the wave response uses a 24-term series.
pub fn gain_bound_constant(spec: &PlantSpec) -> Result<f64> {
    let mut sup: f64 = match spec {
        PlantSpec::Wave { .. } => crate::plants::steady_state_response(spec, 0.0, 24)?.norm(),
        _ => coeffs::closed_form_tf(spec, 0.0)?.norm(),
    };
    for i in 0..=200 {
        let w = 10f64.powf(-3.0 + 6.0 * i as f64 / 200.0);
        let g = match spec {
            PlantSpec::Wave { .. } => crate::plants::steady_state_response(spec, w, 24)?,
            _ => coeffs::closed_form_tf(spec, w)?,
        };
        sup = sup.max(g.norm());
    }
    Ok(1.0 + sup)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lambda_min_basics() {
        let id = DMatrix::<f64>::identity(5, 5);
        assert!((lambda_min(&id).unwrap() - 1.0).abs() < 1e-12);
        let d = DMatrix::from_diagonal(&DVector::from_vec(vec![3.0, -2.0, 7.0]));
        assert!((lambda_min(&d).unwrap() + 2.0).abs() < 1e-12);
    }

    #[test]
    fn lambda_min_rejects_bad_input() {
        let mut m = DMatrix::<f64>::zeros(3, 3);
        m[(0, 1)] = 1.0; // asymmetric
        assert!(lambda_min(&m).is_err());
        let nanm = DMatrix::from_element(2, 2, f64::NAN);
        assert!(lambda_min(&nanm).is_err());
    }

    #[test]
    fn kappa_single_unknown_constant_is_quarter_pi() {
        // n = 0, only p0 unknown, omega = 1: kappa = (pi/2) |E0(j)|^2 = pi/4
        let model = CoeffModel::new(vec![1.0], vec![1.0], vec![false, true]).unwrap();
        let k = kappa_numerator_unknown(&model, 1.0).unwrap();
        assert!((k - std::f64::consts::PI / 4.0).abs() < 1e-12);
    }

    #[test]
    fn kappa_scalar_case_matches_direct_sum() {
        // single unknown p2 at n = 4: kappa = (pi/2w) sum_m |E(jmw)|^2 (mw)^4
        let n = 4;
        let omega = 0.25;
        let mut mask = vec![true; 2 * n + 2];
        mask[2] = false;
        let model = CoeffModel::new(vec![0.0; n + 1], vec![0.0; n + 1], mask).unwrap();
        let k = kappa_numerator_unknown(&model, omega).unwrap();
        let direct: f64 = (1..=n + 1)
            .map(|m| {
                let w = m as f64 * omega;
                en_response(n, omega, w).norm_sqr() * w.powi(4)
            })
            .sum::<f64>()
            * std::f64::consts::PI
            / (2.0 * omega);
        assert!(k > 0.0);
        assert!((k - direct).abs() < 1e-12 * direct);
    }

    #[test]
    fn wrong_proposition_is_rejected() {
        let model = coeffs::delay_coeffs(1.5, 0.3, 1.0, 0.1, 3).unwrap();
        assert!(kappa_numerator_unknown(&model, 0.25).is_err());
        let bounds = coeffs::bounds_for(
            &ParamBox::Delay { k_max: 10.0, a_max: 5.0, b_max: 10.0, tau_max: 0.2 },
            20,
        )
        .unwrap();
        assert!(kappa_denominator_unknown(&model, &bounds, 0.25).is_err());
    }

    #[test]
    fn rho_zero_tail() {
        // delay bounds have no tail mass above k = 2
        let bounds = coeffs::bounds_for(
            &ParamBox::Delay { k_max: 0.0, a_max: 5.0, b_max: 10.0, tau_max: 0.0 },
            40,
        )
        .unwrap();
        assert_eq!(rho_upper(5, 1.0 / 6.0, 1.0, &bounds).unwrap(), 0.0);
    }

    #[test]
    fn rho_requires_positive_kappa() {
        let bounds = coeffs::bounds_for(
            &ParamBox::Heat { theta_min: 1.0, lambda_max: 5.0 },
            40,
        )
        .unwrap();
        assert!(matches!(
            rho_upper(5, 1.0 / 6.0, 0.0, &bounds),
            Err(Error::NotExcited { .. })
        ));
    }

    #[test]
    fn empty_sweep_range() {
        let spec = PlantSpec::Heat {
            theta: crate::coeffs::Schedule::constant(5.0),
            lambda: crate::coeffs::Schedule::constant(1.5),
        };
        let pb = ParamBox::Heat { theta_min: 1.0, lambda_max: 5.0 };
        let out = sweep(&spec, &pb, 5, 4, OmegaRule::Reciprocal, &SimOptions::default()).unwrap();
        assert!(out.is_empty());
    }
}
