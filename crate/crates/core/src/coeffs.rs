//! Transfer-function coefficient models.
//!
//! Every plant handled here has a transfer function expressible as a ratio of
//! two power series in the Laplace variable,
//!
//! ```text
//!     G(s) = (p0 + p1 s + p2 s^2 + ...) / (q0 + q1 s + q2 s^2 + ...),
//! ```
//!
//! with |p_k| + |q_k| <= c0 c^k / k! so both series converge on the closed
//! right half-plane. A [`CoeffModel`] stores the first n+1 coefficients of
//! each series together with a mask that records which entries are known a
//! priori; the estimator only adapts the unknown ones. [`CoeffBounds`] carries
//! the per-index magnitude caps used by the excitation analysis in [`crate::pe`].

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math::factorial;

/// Time profile of a scalar plant parameter: either a constant or a list of
/// `base + slope * t` segments switching at given absolute times.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Schedule {
    Constant(f64),
    Segments(Vec<Segment>),
}

/// One affine-in-time piece of a [`Schedule`], active from `t_start` until the
/// next segment takes over.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub t_start: f64,
    pub base: f64,
    pub slope: f64,
}

impl Schedule {
    pub fn constant(v: f64) -> Self {
        Schedule::Constant(v)
    }

    /// Value at absolute time `t`. Before the first segment the first
    /// segment's affine law applies.
    pub fn eval(&self, t: f64) -> f64 {
        match self {
            Schedule::Constant(v) => *v,
            Schedule::Segments(segs) => {
                let mut active = &segs[0];
                for s in segs {
                    if s.t_start <= t {
                        active = s;
                    }
                }
                active.base + active.slope * t
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        if let Schedule::Segments(segs) = self {
            if segs.is_empty() {
                return Err(Error::InvalidParameter("empty schedule".into()));
            }
            if segs.windows(2).any(|w| w[0].t_start >= w[1].t_start) {
                return Err(Error::InvalidParameter(
                    "schedule segments must have increasing t_start".into(),
                ));
            }
        }
        Ok(())
    }
}

/// Spatial stiffness profile EI(xi) of the wave plant on [0, 1].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum EiProfile {
    /// EI(xi) = a + b xi.
    Linear { a: f64, b: f64 },
    /// Samples (xi, EI(xi)) with increasing xi, linearly interpolated.
    Tabulated { samples: Vec<(f64, f64)> },
}

impl EiProfile {
    /// Evaluate the profile; outside the sample range the end values extend.
    pub fn eval(&self, xi: f64) -> f64 {
        match self {
            EiProfile::Linear { a, b } => a + b * xi,
            EiProfile::Tabulated { samples } => {
                if xi <= samples[0].0 {
                    return samples[0].1;
                }
                let last = samples[samples.len() - 1];
                if xi >= last.0 {
                    return last.1;
                }
                let i = samples.partition_point(|s| s.0 <= xi);
                let (x0, y0) = samples[i - 1];
                let (x1, y1) = samples[i];
                y0 + (y1 - y0) * (xi - x0) / (x1 - x0)
            }
        }
    }

    /// Check positivity on a grid of `n` points over [0, 1].
    pub fn check_positive(&self, n: usize) -> Result<()> {
        for i in 0..=n {
            let xi = i as f64 / n as f64;
            if !(self.eval(xi) > 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "EI({xi}) = {} is not positive",
                    self.eval(xi)
                )));
            }
        }
        Ok(())
    }
}

/// The three plant families this crate simulates and identifies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum PlantSpec {
    /// Second-order system with output delay, G(s) = K e^(-tau s) / (s^2 + a s + b).
    Delay { k: f64, a: f64, b: f64, tau: f64 },
    /// 1D heat equation with Neumann input at xi = 1 and output T(0, t).
    Heat { theta: Schedule, lambda: Schedule },
    /// 1D wave equation with stiffness EI(xi), Dirichlet input and output w(0, t).
    Wave { ei: EiProfile },
}

impl PlantSpec {
    pub fn validate(&self) -> Result<()> {
        match self {
            PlantSpec::Delay { tau, .. } => {
                if *tau < 0.0 {
                    return Err(Error::InvalidParameter("delay tau must be >= 0".into()));
                }
            }
            PlantSpec::Heat { theta, lambda } => {
                theta.validate()?;
                lambda.validate()?;
                if theta.eval(0.0) <= 0.0 {
                    return Err(Error::InvalidParameter("theta must be positive".into()));
                }
                if lambda.eval(0.0) < 0.0 {
                    return Err(Error::InvalidParameter("lambda must be nonnegative".into()));
                }
            }
            PlantSpec::Wave { ei } => ei.check_positive(1000)?,
        }
        Ok(())
    }
}

/// Truncated numerator/denominator coefficients with the known/unknown mask.
///
/// The stacked coefficient vector is ordered `[p0 .. pn, q0 .. qn]`; the mask
/// has the same layout with `true` marking entries known a priori. Which
/// entries are known is part of the plant description, not something inferred.
#[derive(Debug, Clone, PartialEq)]
pub struct CoeffModel {
    pub n: usize,
    pub p: Vec<f64>,
    pub q: Vec<f64>,
    /// true = known a priori; length 2n+2, ordered like [`Self::beta`].
    pub known_mask: Vec<bool>,
}

impl CoeffModel {
    pub fn new(p: Vec<f64>, q: Vec<f64>, known_mask: Vec<bool>) -> Result<Self> {
        if p.len() != q.len() || p.is_empty() {
            return Err(Error::InvalidParameter(
                "p and q must have equal nonzero length".into(),
            ));
        }
        if known_mask.len() != p.len() + q.len() {
            return Err(Error::InvalidParameter("mask length must be 2n+2".into()));
        }
        Ok(CoeffModel {
            n: p.len() - 1,
            p,
            q,
            known_mask,
        })
    }

    /// Stacked coefficient vector [p0 .. pn, q0 .. qn].
    pub fn beta(&self) -> Vec<f64> {
        let mut b = Vec::with_capacity(2 * self.n + 2);
        b.extend_from_slice(&self.p);
        b.extend_from_slice(&self.q);
        b
    }

    /// Positions of the unknown entries of beta, in increasing order.
    pub fn unknown_indices(&self) -> Vec<usize> {
        (0..self.known_mask.len())
            .filter(|&i| !self.known_mask[i])
            .collect()
    }

    /// Number of unknown coefficients.
    pub fn r(&self) -> usize {
        self.known_mask.iter().filter(|&&m| !m).count()
    }

    /// Drop the known entries from a beta-ordered vector.
    pub fn select(&self, beta: &[f64]) -> Vec<f64> {
        self.unknown_indices().iter().map(|&i| beta[i]).collect()
    }

    /// Rebuild a full beta vector from unknown values, filling known slots
    /// from this model.
    pub fn embed(&self, alpha: &[f64]) -> Vec<f64> {
        assert_eq!(alpha.len(), self.r(), "alpha length mismatch");
        let mut beta = self.beta();
        for (a, &i) in alpha.iter().zip(self.unknown_indices().iter()) {
            beta[i] = *a;
        }
        beta
    }

    /// True values of the unknown coefficients.
    pub fn alpha_true(&self) -> Vec<f64> {
        self.select(&self.beta())
    }

    /// Human-readable names of the unknown entries ("p0", "q3", ...).
    pub fn unknown_names(&self) -> Vec<String> {
        self.unknown_indices()
            .iter()
            .map(|&i| {
                if i <= self.n {
                    format!("p{i}")
                } else {
                    format!("q{}", i - self.n - 1)
                }
            })
            .collect()
    }

    /// Evaluate the truncated denominator series at s = j omega.
    pub fn denominator(&self, omega: f64) -> Complex64 {
        let s = Complex64::new(0.0, omega);
        let mut acc = Complex64::new(0.0, 0.0);
        let mut pw = Complex64::new(1.0, 0.0);
        for &qk in &self.q {
            acc += qk * pw;
            pw *= s;
        }
        acc
    }

    /// Evaluate the truncated ratio at s = j omega.
    pub fn series_tf(&self, omega: f64) -> Complex64 {
        let s = Complex64::new(0.0, omega);
        let mut num = Complex64::new(0.0, 0.0);
        let mut pw = Complex64::new(1.0, 0.0);
        for &pk in &self.p {
            num += pk * pw;
            pw *= s;
        }
        num / self.denominator(omega)
    }
}

/// Known magnitude caps p_k^u, q_k^u together with envelope constants
/// (c0, c) such that every cap is below c0 c^k / k!.
#[derive(Debug, Clone, PartialEq)]
pub struct CoeffBounds {
    pub p_u: Vec<f64>,
    pub q_u: Vec<f64>,
    pub c0: f64,
    pub c: f64,
}

impl CoeffBounds {
    /// p_k^u + q_k^u, zero past the stored range.
    pub fn sum_bound(&self, k: usize) -> f64 {
        let p = self.p_u.get(k).copied().unwrap_or(0.0);
        let q = self.q_u.get(k).copied().unwrap_or(0.0);
        p + q
    }

    pub fn len(&self) -> usize {
        self.p_u.len().max(self.q_u.len())
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Check nonnegativity and the factorial envelope on every stored index.
    pub fn validate(&self) -> Result<()> {
        for (seq, name) in [(&self.p_u, "p_u"), (&self.q_u, "q_u")] {
            for (k, &v) in seq.iter().enumerate() {
                if v < 0.0 {
                    return Err(Error::InvalidParameter(format!("{name}[{k}] negative")));
                }
                let env = self.c0 * self.c.powi(k as i32) / factorial(k);
                if v > env * (1.0 + 1e-12) && env.is_finite() {
                    return Err(Error::InvalidParameter(format!(
                        "{name}[{k}] = {v:.3e} exceeds envelope {env:.3e}"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Parameter boxes under which the coefficient caps are derived.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ParamBox {
    Delay {
        k_max: f64,
        a_max: f64,
        b_max: f64,
        tau_max: f64,
    },
    Heat {
        theta_min: f64,
        lambda_max: f64,
    },
    Wave {
        ei0_max: f64,
        ei_min: f64,
    },
}

/// Coefficients of the delayed second-order plant: p_k = K (-tau)^k / k!,
/// q = [b, a, 1, 0, ...]. The numerator and the first two denominator
/// entries are unknown; q2 = 1 and the zero entries above it are known.
pub fn delay_coeffs(k_gain: f64, a: f64, b: f64, tau: f64, n: usize) -> Result<CoeffModel> {
    if n < 2 {
        return Err(Error::InvalidParameter(
            "delay model needs n >= 2 (second-order denominator)".into(),
        ));
    }
    if tau < 0.0 {
        return Err(Error::InvalidParameter("tau must be >= 0".into()));
    }
    let p: Vec<f64> = (0..=n)
        .map(|kk| k_gain * (-tau).powi(kk as i32) / factorial(kk))
        .collect();
    let mut q = vec![0.0; n + 1];
    q[0] = b;
    q[1] = a;
    q[2] = 1.0;
    let mut mask = vec![false; 2 * n + 2];
    for m in mask.iter_mut().skip(n + 3) {
        *m = true; // q2 and everything above is known
    }
    CoeffModel::new(p, q, mask)
}

/// Denominator series of the heat plant. q0 = sqrt(r) sinh sqrt(r) with
/// r = lambda / theta; for k >= 1
///
/// ```text
///     q_k = theta^-k * sum_i r^i C(k+i, k) / (2k + 2i - 1)!
/// ```
///
/// with the sum truncated once a term drops below `tol` of the running sum.
/// The numerator is the known constant 1; all q entries are unknown.
pub fn heat_coeffs(theta: f64, lambda: f64, n: usize, tol: f64) -> Result<CoeffModel> {
    if theta <= 0.0 {
        return Err(Error::InvalidParameter("theta must be positive".into()));
    }
    if lambda < 0.0 {
        return Err(Error::InvalidParameter("lambda must be >= 0".into()));
    }
    if tol <= 0.0 {
        return Err(Error::InvalidParameter("tol must be positive".into()));
    }
    let r = lambda / theta;
    let mut q = vec![0.0; n + 1];
    q[0] = r.sqrt() * r.sqrt().sinh();
    for k in 1..=n {
        q[k] = heat_series_term(r, k, tol) / theta.powi(k as i32);
    }
    let mut p = vec![0.0; n + 1];
    p[0] = 1.0;
    let mut mask = vec![false; 2 * n + 2];
    for m in mask.iter_mut().take(n + 1) {
        *m = true; // whole numerator known
    }
    CoeffModel::new(p, q, mask)
}

/// sum_i r^i C(k+i, k) / (2k + 2i - 1)! truncated at relative `tol`.
fn heat_series_term(r: f64, k: usize, tol: f64) -> f64 {
    let mut sum = 0.0;
    for i in 0..200 {
        let term = r.powi(i as i32) * crate::math::binomial(k + i, k) / factorial(2 * k + 2 * i - 1);
        sum += term;
        if i > 2 && term < tol * sum {
            break;
        }
    }
    sum
}

/// Denominator series of the wave plant via spatial propagation.
///
/// The Laplace-transformed plant reduces to a 2-vector two-point problem
/// `z' = [[0, 1/EI(xi)], [s^2, 0]] z` on [0, 1] with initial polynomial
/// `z(0) = [1, s EI(0)]`. Both components are carried as truncated
/// polynomials in s (degree n+1) and propagated coefficient-wise with a
/// classical fourth-order fixed-step integrator over `grid` intervals; q_k is
/// the coefficient of s^k in the first component at xi = 1 (q0 comes out
/// exactly 1).
///
/// The numerator is the known constant 1. All denominator entries, q0
/// included, are treated as unknown: the estimator and the excitation
/// analysis both adapt the full q block.
pub fn wave_coeffs_peano(ei: &EiProfile, n: usize, grid: usize) -> Result<CoeffModel> {
    if grid < 100 {
        return Err(Error::InvalidParameter("grid must be >= 100".into()));
    }
    ei.check_positive(grid)?;
    let deg = n + 2; // coefficients of s^0 .. s^(n+1)
    let mut z1 = vec![0.0; deg];
    let mut z2 = vec![0.0; deg];
    z1[0] = 1.0;
    z2[1] = ei.eval(0.0);

    let h = 1.0 / grid as f64;
    let rhs = |xi: f64, z1: &[f64], z2: &[f64], d1: &mut [f64], d2: &mut [f64]| {
        let inv = 1.0 / ei.eval(xi);
        for k in 0..deg {
            d1[k] = z2[k] * inv;
            d2[k] = if k >= 2 { z1[k - 2] } else { 0.0 };
        }
    };

    let mut k1 = (vec![0.0; deg], vec![0.0; deg]);
    let mut k2 = k1.clone();
    let mut k3 = k1.clone();
    let mut k4 = k1.clone();
    let mut tmp1 = vec![0.0; deg];
    let mut tmp2 = vec![0.0; deg];
    let axpy = |out1: &mut [f64], out2: &mut [f64], z1: &[f64], z2: &[f64], d: &(Vec<f64>, Vec<f64>), c: f64| {
        for k in 0..z1.len() {
            out1[k] = z1[k] + c * d.0[k];
            out2[k] = z2[k] + c * d.1[k];
        }
    };

    for i in 0..grid {
        let xi = i as f64 * h;
        rhs(xi, &z1, &z2, &mut k1.0, &mut k1.1);
        axpy(&mut tmp1, &mut tmp2, &z1, &z2, &k1, 0.5 * h);
        rhs(xi + 0.5 * h, &tmp1, &tmp2, &mut k2.0, &mut k2.1);
        axpy(&mut tmp1, &mut tmp2, &z1, &z2, &k2, 0.5 * h);
        rhs(xi + 0.5 * h, &tmp1, &tmp2, &mut k3.0, &mut k3.1);
        axpy(&mut tmp1, &mut tmp2, &z1, &z2, &k3, h);
        rhs(xi + h, &tmp1, &tmp2, &mut k4.0, &mut k4.1);
        for k in 0..deg {
            z1[k] += h / 6.0 * (k1.0[k] + 2.0 * k2.0[k] + 2.0 * k3.0[k] + k4.0[k]);
            z2[k] += h / 6.0 * (k1.1[k] + 2.0 * k2.1[k] + 2.0 * k3.1[k] + k4.1[k]);
        }
    }

    let q = z1[..=n].to_vec();
    let mut p = vec![0.0; n + 1];
    p[0] = 1.0;
    let mut mask = vec![false; 2 * n + 2];
    for m in mask.iter_mut().take(n + 1) {
        *m = true; // numerator known, full q block adapted
    }
    CoeffModel::new(p, q, mask)
}

/// Coefficient caps implied by a parameter box, filled for k = 0 ..= k_max.
pub fn bounds_for(param_box: &ParamBox, k_max: usize) -> Result<CoeffBounds> {
    if k_max < 2 {
        return Err(Error::InvalidParameter("k_max must be >= 2".into()));
    }
    let bounds = match *param_box {
        ParamBox::Delay {
            k_max: kg,
            a_max,
            b_max,
            tau_max,
        } => {
            if kg < 0.0 || a_max < 0.0 || b_max < 0.0 || tau_max < 0.0 {
                return Err(Error::InvalidParameter("delay box entries must be >= 0".into()));
            }
            let p_u: Vec<f64> = (0..=k_max)
                .map(|k| kg * tau_max.powi(k as i32) / factorial(k))
                .collect();
            let mut q_u = vec![0.0; k_max + 1];
            q_u[0] = b_max;
            q_u[1] = a_max;
            q_u[2] = 1.0;
            let c = kg.max(a_max).max(b_max).max(tau_max).max(2.0);
            CoeffBounds { p_u, q_u, c0: c, c }
        }
        ParamBox::Heat {
            theta_min,
            lambda_max,
        } => {
            if theta_min <= 0.0 {
                return Err(Error::InvalidParameter("theta_min must be positive".into()));
            }
            if lambda_max < 0.0 {
                return Err(Error::InvalidParameter("lambda_max must be >= 0".into()));
            }
            let r = lambda_max / theta_min;
            let mut q_u = vec![0.0; k_max + 1];
            q_u[0] = r.sqrt() * r.sqrt().sinh();
            for (k, qu) in q_u.iter_mut().enumerate().skip(1) {
                *qu = heat_series_term(r, k, 1e-14) / theta_min.powi(k as i32);
            }
            let mut p_u = vec![0.0; k_max + 1];
            p_u[0] = 1.0;
            CoeffBounds {
                p_u,
                q_u,
                c0: r.exp(),
                c: 1.0 / theta_min,
            }
        }
        ParamBox::Wave { ei0_max, ei_min } => {
            if ei_min <= 0.0 || ei0_max <= 0.0 {
                return Err(Error::InvalidParameter("wave box entries must be positive".into()));
            }
            let mut q_u = vec![0.0; k_max + 1];
            q_u[0] = 1.0;
            for (k, qu) in q_u.iter_mut().enumerate().skip(1) {
                let decay = (1.0 / ei_min).powf(k as f64 / 2.0) / factorial(k);
                *qu = if k % 2 == 1 {
                    ei0_max / ei_min.sqrt() * decay
                } else {
                    decay
                };
            }
            let mut p_u = vec![0.0; k_max + 1];
            p_u[0] = 1.0;
            let stretch = (1.0 / ei_min.sqrt()).max(1.0);
            CoeffBounds {
                p_u,
                q_u,
                c0: ei0_max.max(1.0) * stretch,
                c: stretch,
            }
        }
    };
    bounds.validate()?;
    Ok(bounds)
}

/// Exact G(j omega) for the delay plant.
pub fn delay_closed_form(k: f64, a: f64, b: f64, tau: f64, omega: f64) -> Complex64 {
    let s = Complex64::new(0.0, omega);
    k * (-tau * s).exp() / (s * s + a * s + b)
}

/// Exact G(j omega) for the heat plant (principal branch of the square root).
pub fn heat_closed_form(theta: f64, lambda: f64, omega: f64) -> Complex64 {
    let z = ((Complex64::new(lambda, omega)) / theta).sqrt();
    1.0 / (z * z.sinh())
}

/// Closed-form G(j omega) where one exists. Heat schedules are evaluated at
/// t = 0; for frozen-time responses at other instants call
/// [`heat_closed_form`] directly. The wave plant has no closed form and
/// reports [`Error::NoClosedForm`] so callers fall back to the truncated
/// series.
pub fn closed_form_tf(spec: &PlantSpec, omega: f64) -> Result<Complex64> {
    if omega < 0.0 {
        return Err(Error::InvalidParameter("omega must be >= 0".into()));
    }
    match spec {
        PlantSpec::Delay { k, a, b, tau } => Ok(delay_closed_form(*k, *a, *b, *tau, omega)),
        PlantSpec::Heat { theta, lambda } => {
            Ok(heat_closed_form(theta.eval(0.0), lambda.eval(0.0), omega))
        }
        PlantSpec::Wave { .. } => Err(Error::NoClosedForm),
    }
}

/// Build the coefficient model matching a plant spec (schedules at t = 0).
pub fn model_for(spec: &PlantSpec, n: usize) -> Result<CoeffModel> {
    model_for_at(spec, n, 0.0)
}

/// Coefficient model with any schedules frozen at time `t`.
pub fn model_for_at(spec: &PlantSpec, n: usize, t: f64) -> Result<CoeffModel> {
    match spec {
        PlantSpec::Delay { k, a, b, tau } => delay_coeffs(*k, *a, *b, *tau, n),
        PlantSpec::Heat { theta, lambda } => {
            heat_coeffs(theta.eval(t), lambda.eval(t), n, 1e-14)
        }
        PlantSpec::Wave { ei } => wave_coeffs_peano(ei, n, 1000),
    }
}
