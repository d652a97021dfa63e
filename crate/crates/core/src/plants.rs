//! Time-domain simulation of the three plant families.
//!
//! All three start from rest and are driven by a caller-supplied input
//! signal. The heat and wave plants are discretized by second-order central
//! differences in space; time stepping is Crank-Nicolson for the heat rod
//! (tridiagonal solve, not stiffness-limited) and classical fourth-order
//! explicit for the wave string and the delay oscillator. The wave plant is
//! simulated in the transformed variable v(xi, t) = w(xi, t) - xi^2 u(t),
//! which turns the moving Dirichlet edge into a homogeneous one at the cost
//! of a forcing term in u and u-double-dot.

use num_complex::Complex64;

use crate::coeffs::{self, PlantSpec, Schedule};
use crate::error::{Error, Result};

/// Deterministic input signal with the two derivatives the wave plant needs.
pub trait InputSignal {
    fn value(&self, t: f64) -> f64;
    fn rate(&self, t: f64) -> f64;
    fn accel(&self, t: f64) -> f64;
}

/// The identification input: a unit-amplitude comb of the first `tones`
/// multiples of a base frequency, u(t) = sum_m sin(m omega t).
#[derive(Debug, Clone)]
pub struct MultiSine {
    pub omega: f64,
    pub tones: usize,
}

impl InputSignal for MultiSine {
    fn value(&self, t: f64) -> f64 {
        (1..=self.tones)
            .map(|m| (m as f64 * self.omega * t).sin())
            .sum()
    }
    fn rate(&self, t: f64) -> f64 {
        (1..=self.tones)
            .map(|m| {
                let w = m as f64 * self.omega;
                w * (w * t).cos()
            })
            .sum()
    }
    fn accel(&self, t: f64) -> f64 {
        (1..=self.tones)
            .map(|m| {
                let w = m as f64 * self.omega;
                -w * w * (w * t).sin()
            })
            .sum()
    }
}

/// Single tone `amplitude * sin(omega t)`, for frequency-response checks.
#[derive(Debug, Clone)]
pub struct SingleTone {
    pub omega: f64,
    pub amplitude: f64,
}

impl InputSignal for SingleTone {
    fn value(&self, t: f64) -> f64 {
        self.amplitude * (self.omega * t).sin()
    }
    fn rate(&self, t: f64) -> f64 {
        self.amplitude * self.omega * (self.omega * t).cos()
    }
    fn accel(&self, t: f64) -> f64 {
        -self.amplitude * self.omega * self.omega * (self.omega * t).sin()
    }
}

/// No input; free dynamics.
#[derive(Debug, Clone, Copy)]
pub struct ZeroInput;

impl InputSignal for ZeroInput {
    fn value(&self, _t: f64) -> f64 {
        0.0
    }
    fn rate(&self, _t: f64) -> f64 {
        0.0
    }
    fn accel(&self, _t: f64) -> f64 {
        0.0
    }
}

/// Second-order state plus a uniform-sample ring of past x1 values spanning
/// the output delay.
#[derive(Debug, Clone)]
pub struct DelayPlantState {
    pub x1: f64,
    pub x2: f64,
    pub t: f64,
    history: Vec<f64>,
    head: usize,
    dt: Option<f64>,
}

/// Rod temperatures on the uniform grid xi_i = i / N.
#[derive(Debug, Clone)]
pub struct HeatPlantState {
    pub temps: Vec<f64>,
    pub t: f64,
    cached: Option<HeatCache>,
}

#[derive(Debug, Clone)]
struct HeatCache {
    theta: f64,
    lambda: f64,
    dt: f64,
    // implicit-side tridiagonal (I - dt/2 A) and its Thomas elimination factors
    lo: Vec<f64>,
    dg: Vec<f64>,
    cprime: Vec<f64>,
}

/// Transformed wave state v = w - xi^2 u and its velocity on xi_i = i / N.
/// The physical displacement is recovered by [`WavePlantState::displacement`];
/// in particular w(1, t) = u(t) holds identically because v(1, t) = 0 is
/// pinned by the scheme.
#[derive(Debug, Clone)]
pub struct WavePlantState {
    pub v: Vec<f64>,
    pub vt: Vec<f64>,
    pub t: f64,
}

impl WavePlantState {
    /// Build a state directly from modal data (free-decay studies).
    pub fn from_fields(v: Vec<f64>, vt: Vec<f64>) -> Result<Self> {
        if v.len() != vt.len() || v.len() < 2 {
            return Err(Error::InvalidParameter("v and vt must match, length >= 2".into()));
        }
        Ok(WavePlantState { v, vt, t: 0.0 })
    }

    /// Physical displacement w(xi_i, t) = v + xi^2 u(t).
    pub fn displacement(&self, u_now: f64) -> Vec<f64> {
        let n = self.v.len() - 1;
        self.v
            .iter()
            .enumerate()
            .map(|(i, &v)| {
                let xi = i as f64 / n as f64;
                v + xi * xi * u_now
            })
            .collect()
    }
}

/// State of whichever plant a spec describes.
#[derive(Debug, Clone)]
pub enum PlantState {
    Delay(DelayPlantState),
    Heat(HeatPlantState),
    Wave(WavePlantState),
}

/// Start a plant from rest. `grid_points` is the number of spatial intervals
/// for the PDE plants (>= 50) and ignored by the delay plant. The input is
/// consulted only by the wave plant, whose transformed state at rest is
/// v = -xi^2 u(0), v_t = -xi^2 u'(0).
pub fn plant_init(
    spec: &PlantSpec,
    grid_points: usize,
    input: &dyn InputSignal,
) -> Result<PlantState> {
    spec.validate()?;
    match spec {
        PlantSpec::Delay { .. } => Ok(PlantState::Delay(DelayPlantState {
            x1: 0.0,
            x2: 0.0,
            t: 0.0,
            history: Vec::new(),
            head: 0,
            dt: None,
        })),
        PlantSpec::Heat { .. } => {
            if grid_points < 50 {
                return Err(Error::InvalidParameter("heat grid needs >= 50 intervals".into()));
            }
            Ok(PlantState::Heat(HeatPlantState {
                temps: vec![0.0; grid_points + 1],
                t: 0.0,
                cached: None,
            }))
        }
        PlantSpec::Wave { .. } => {
            if grid_points < 50 {
                return Err(Error::InvalidParameter("wave grid needs >= 50 intervals".into()));
            }
            let n = grid_points;
            let du0 = input.rate(0.0);
            let u0 = input.value(0.0);
            let mut v = vec![0.0; n + 1];
            let mut vt = vec![0.0; n + 1];
            for i in 0..=n {
                let xi = i as f64 / n as f64;
                v[i] = -xi * xi * u0;
                vt[i] = -xi * xi * du0;
            }
            v[n] = 0.0;
            vt[n] = 0.0;
            Ok(PlantState::Wave(WavePlantState { v, vt, t: 0.0 }))
        }
    }
}

impl PlantState {
    /// Advance one step of length `dt` and return the output at the new time.
    pub fn step(&mut self, spec: &PlantSpec, input: &dyn InputSignal, dt: f64) -> Result<f64> {
        if dt <= 0.0 {
            return Err(Error::InvalidParameter("dt must be positive".into()));
        }
        match (&mut *self, spec) {
            (PlantState::Delay(st), PlantSpec::Delay { k, a, b, tau }) => {
                step_delay(st, *k, *a, *b, *tau, input, dt)?
            }
            (PlantState::Heat(st), PlantSpec::Heat { theta, lambda }) => {
                step_heat(st, theta, lambda, input, dt)?
            }
            (PlantState::Wave(st), PlantSpec::Wave { ei }) => step_wave(st, ei, input, dt)?,
            _ => return Err(Error::InvalidParameter("plant state does not match spec".into())),
        }
        Ok(self.output(spec))
    }

    /// Output at the current time.
    pub fn output(&self, spec: &PlantSpec) -> f64 {
        match (self, spec) {
            (PlantState::Delay(st), PlantSpec::Delay { k, tau, .. }) => st.delayed_x1(*tau) * k,
            (PlantState::Heat(st), _) => st.temps[0],
            (PlantState::Wave(st), _) => st.v[0],
            _ => f64::NAN,
        }
    }

    pub fn time(&self) -> f64 {
        match self {
            PlantState::Delay(st) => st.t,
            PlantState::Heat(st) => st.t,
            PlantState::Wave(st) => st.t,
        }
    }
}

impl DelayPlantState {
    /// x1(t - tau) by linear interpolation in the sample ring; zero before t = 0.
    fn delayed_x1(&self, tau: f64) -> f64 {
        if tau == 0.0 {
            return self.x1;
        }
        let dt = match self.dt {
            Some(dt) => dt,
            None => return 0.0, // no steps taken yet, plant still at rest
        };
        if self.t - tau < 0.0 {
            return 0.0;
        }
        let back = tau / dt;
        let i0 = back.floor() as usize;
        let frac = back - i0 as f64;
        let len = self.history.len();
        let at = |steps_back: usize| -> f64 {
            if steps_back >= len {
                0.0
            } else {
                self.history[(self.head + len - steps_back) % len]
            }
        };
        (1.0 - frac) * at(i0) + frac * at(i0 + 1)
    }
}

fn step_delay(
    st: &mut DelayPlantState,
    _k: f64,
    a: f64,
    b: f64,
    tau: f64,
    input: &dyn InputSignal,
    dt: f64,
) -> Result<()> {
    if st.dt.is_none() {
        let len = (tau / dt).ceil() as usize + 2;
        st.history = vec![0.0; len];
        st.head = 0;
        st.dt = Some(dt);
        st.history[0] = st.x1;
    }
    let rhs = |x1: f64, x2: f64, u: f64| (x2, -b * x1 - a * x2 + u);
    let (u0, um, u1) = (
        input.value(st.t),
        input.value(st.t + 0.5 * dt),
        input.value(st.t + dt),
    );
    let (k1a, k1b) = rhs(st.x1, st.x2, u0);
    let (k2a, k2b) = rhs(st.x1 + 0.5 * dt * k1a, st.x2 + 0.5 * dt * k1b, um);
    let (k3a, k3b) = rhs(st.x1 + 0.5 * dt * k2a, st.x2 + 0.5 * dt * k2b, um);
    let (k4a, k4b) = rhs(st.x1 + dt * k3a, st.x2 + dt * k3b, u1);
    st.x1 += dt / 6.0 * (k1a + 2.0 * k2a + 2.0 * k3a + k4a);
    st.x2 += dt / 6.0 * (k1b + 2.0 * k2b + 2.0 * k3b + k4b);
    st.t += dt;
    st.head = (st.head + 1) % st.history.len();
    let head = st.head;
    st.history[head] = st.x1;
    if !st.x1.is_finite() || !st.x2.is_finite() {
        return Err(Error::Unstable { t: st.t, what: "delay state non-finite".into() });
    }
    Ok(())
}

fn step_heat(
    st: &mut HeatPlantState,
    theta: &Schedule,
    lambda: &Schedule,
    input: &dyn InputSignal,
    dt: f64,
) -> Result<()> {
    let n = st.temps.len() - 1;
    let h = 1.0 / n as f64;
    let th0 = theta.eval(st.t);
    let la0 = lambda.eval(st.t);
    let th1 = theta.eval(st.t + dt);
    let la1 = lambda.eval(st.t + dt);

    // explicit side: (I + dt/2 A(t)) T + dt/2 (b(t) + b(t+dt))
    let c0 = th0 / (h * h);
    let mut rhs = vec![0.0; n + 1];
    for i in 0..=n {
        let lap = if i == 0 {
            2.0 * c0 * (st.temps[1] - st.temps[0])
        } else if i == n {
            2.0 * c0 * (st.temps[n - 1] - st.temps[n])
        } else {
            c0 * (st.temps[i - 1] - 2.0 * st.temps[i] + st.temps[i + 1])
        };
        rhs[i] = st.temps[i] + 0.5 * dt * (lap - la0 * st.temps[i]);
    }
    rhs[n] += 0.5 * dt * (2.0 * th0 * input.value(st.t) + 2.0 * th1 * input.value(st.t + dt)) / h;

    // implicit side cache keyed on (theta, lambda, dt)
    let rebuild = match &st.cached {
        Some(c) => {
            (c.theta - th1).abs() > 1e-12 || (c.lambda - la1).abs() > 1e-12 || c.dt != dt
        }
        None => true,
    };
    if rebuild {
        let c1 = th1 / (h * h);
        let mut lo = vec![0.0; n + 1];
        let mut dg = vec![0.0; n + 1];
        let mut up = vec![0.0; n + 1];
        for i in 0..=n {
            dg[i] = 1.0 + 0.5 * dt * (2.0 * c1 + la1);
            if i > 0 {
                lo[i] = -0.5 * dt * c1;
            }
            if i < n {
                up[i] = -0.5 * dt * c1;
            }
        }
        up[0] = -dt * c1; // ghost at xi = 0
        lo[n] = -dt * c1; // ghost at xi = 1
        let mut cprime = vec![0.0; n + 1];
        cprime[0] = up[0] / dg[0];
        for i in 1..=n {
            cprime[i] = up[i] / (dg[i] - lo[i] * cprime[i - 1]);
        }
        st.cached = Some(HeatCache { theta: th1, lambda: la1, dt, lo, dg, cprime });
    }
    let cache = st.cached.as_ref().expect("cache just built");

    // Thomas back-substitution with the cached elimination factors
    let mut dprime = vec![0.0; n + 1];
    dprime[0] = rhs[0] / cache.dg[0];
    for i in 1..=n {
        dprime[i] = (rhs[i] - cache.lo[i] * dprime[i - 1])
            / (cache.dg[i] - cache.lo[i] * cache.cprime[i - 1]);
    }
    st.temps[n] = dprime[n];
    for i in (0..n).rev() {
        st.temps[i] = dprime[i] - cache.cprime[i] * st.temps[i + 1];
    }
    st.t += dt;
    if st.temps.iter().any(|v| !v.is_finite()) {
        return Err(Error::Unstable { t: st.t, what: "heat grid non-finite".into() });
    }
    Ok(())
}

/// Largest stable internal step for the explicit wave integrator: the usual
/// transport bound plus the real eigenvalue -2 EI(0)/h contributed by the
/// damping edge condition.
fn wave_stable_dt(ei: &crate::coeffs::EiProfile, n: usize) -> f64 {
    let h = 1.0 / n as f64;
    let mut ei_max: f64 = 0.0;
    for i in 0..=n {
        ei_max = ei_max.max(ei.eval(i as f64 / n as f64));
    }
    let cfl = 0.5 * h / ei_max.sqrt();
    let boundary = h / ei.eval(0.0);
    cfl.min(boundary)
}

fn step_wave(
    st: &mut WavePlantState,
    ei: &crate::coeffs::EiProfile,
    input: &dyn InputSignal,
    dt: f64,
) -> Result<()> {
    let n = st.v.len() - 1;
    let h = 1.0 / n as f64;
    let inv_h2 = 1.0 / (h * h);
    let substeps = (dt / wave_stable_dt(ei, n)).ceil().max(1.0) as usize;
    let dts = dt / substeps as f64;

    // precomputed spatial data
    let ei_mid: Vec<f64> = (0..n).map(|i| ei.eval((i as f64 + 0.5) * h)).collect();
    let ei_ghost = ei.eval(-0.5 * h);
    let forcing: Vec<f64> = (0..n)
        .map(|i| {
            let xi = i as f64 * h;
            // 2 (EI(xi) xi)' by centered differencing of the product
            let d = 1e-4;
            let prod = |x: f64| ei.eval(x) * x;
            2.0 * (prod(xi + d) - prod(xi - d)) / (2.0 * d)
        })
        .collect();
    let xi2: Vec<f64> = (0..n).map(|i| (i as f64 * h).powi(2)).collect();

    let rhs = |v: &[f64], vt: &[f64], u: f64, ddu: f64, dv: &mut [f64], dvt: &mut [f64]| {
        dv[..n].copy_from_slice(&vt[..n]);
        for i in 1..n {
            let right = ei_mid[i] * (v[i + 1] - v[i]);
            let left = ei_mid[i - 1] * (v[i] - v[i - 1]);
            dvt[i] = (right - left) * inv_h2 + forcing[i] * u - xi2[i] * ddu;
        }
        // edge xi = 0: ghost node from v_xi(0) = v_t(0)
        let right0 = ei_mid[0] * (v[1] - v[0]);
        let left0 = ei_ghost * (v[0] - (v[1] - 2.0 * h * vt[0]));
        dvt[0] = (right0 - left0) * inv_h2 + forcing[0] * u;
    };

    let mut dv1 = vec![0.0; n];
    let mut dvt1 = vec![0.0; n];
    let mut dv2 = dv1.clone();
    let mut dvt2 = dvt1.clone();
    let mut dv3 = dv1.clone();
    let mut dvt3 = dvt1.clone();
    let mut dv4 = dv1.clone();
    let mut dvt4 = dvt1.clone();
    let mut tv = vec![0.0; n + 1];
    let mut tvt = vec![0.0; n + 1];

    for s in 0..substeps {
        let t = st.t + s as f64 * dts;
        let (u0, dd0) = (input.value(t), input.accel(t));
        let (um, ddm) = (input.value(t + 0.5 * dts), input.accel(t + 0.5 * dts));
        let (u1, dd1) = (input.value(t + dts), input.accel(t + dts));

        rhs(&st.v, &st.vt, u0, dd0, &mut dv1, &mut dvt1);
        stage(&st.v, &st.vt, &dv1, &dvt1, 0.5 * dts, &mut tv, &mut tvt, n);
        rhs(&tv, &tvt, um, ddm, &mut dv2, &mut dvt2);
        stage(&st.v, &st.vt, &dv2, &dvt2, 0.5 * dts, &mut tv, &mut tvt, n);
        rhs(&tv, &tvt, um, ddm, &mut dv3, &mut dvt3);
        stage(&st.v, &st.vt, &dv3, &dvt3, dts, &mut tv, &mut tvt, n);
        rhs(&tv, &tvt, u1, dd1, &mut dv4, &mut dvt4);
        for i in 0..n {
            st.v[i] += dts / 6.0 * (dv1[i] + 2.0 * dv2[i] + 2.0 * dv3[i] + dv4[i]);
            st.vt[i] += dts / 6.0 * (dvt1[i] + 2.0 * dvt2[i] + 2.0 * dvt3[i] + dvt4[i]);
        }
    }
    st.t += dt;
    if st.v.iter().chain(st.vt.iter()).any(|v| !v.is_finite()) {
        return Err(Error::Unstable { t: st.t, what: "wave grid non-finite".into() });
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn stage(
    v: &[f64],
    vt: &[f64],
    dv: &[f64],
    dvt: &[f64],
    c: f64,
    out_v: &mut [f64],
    out_vt: &mut [f64],
    n: usize,
) {
    for i in 0..n {
        out_v[i] = v[i] + c * dv[i];
        out_vt[i] = vt[i] + c * dvt[i];
    }
    out_v[n] = 0.0;
    out_vt[n] = 0.0;
}

/// Steady-state frequency response G(j omega): closed form for delay/heat,
/// truncated-series ratio with `n_series` coefficients for the wave plant.
pub fn steady_state_response(spec: &PlantSpec, omega: f64, n_series: usize) -> Result<Complex64> {
    match spec {
        PlantSpec::Wave { ei } => {
            if n_series < 4 {
                return Err(Error::InvalidParameter(
                    "wave series evaluation needs n_series >= 4".into(),
                ));
            }
            let model = coeffs::wave_coeffs_peano(ei, n_series, 1000)?;
            Ok(model.series_tf(omega))
        }
        _ => coeffs::closed_form_tf(spec, omega),
    }
}

/// Transformed-field energy H(t) = 1/2 int_0^1 (EI v_xi^2 + v_t^2) d xi by
/// trapezoidal quadrature, with v_xi by central differences.
pub fn wave_energy(state: &WavePlantState, spec: &PlantSpec) -> Result<f64> {
    let ei = match spec {
        PlantSpec::Wave { ei } => ei,
        _ => return Err(Error::InvalidParameter("wave_energy needs a wave spec".into())),
    };
    let n = state.v.len() - 1;
    let h = 1.0 / n as f64;
    let vx = |i: usize| -> f64 {
        if i == 0 {
            (state.v[1] - state.v[0]) / h
        } else if i == n {
            (state.v[n] - state.v[n - 1]) / h
        } else {
            (state.v[i + 1] - state.v[i - 1]) / (2.0 * h)
        }
    };
    let density = |i: usize| -> f64 {
        let xi = i as f64 * h;
        ei.eval(xi) * vx(i) * vx(i) + state.vt[i] * state.vt[i]
    };
    let mut acc = 0.5 * (density(0) + density(n));
    for i in 1..n {
        acc += density(i);
    }
    Ok(0.5 * acc * h)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coeffs::EiProfile;

    fn specs() -> Vec<PlantSpec> {
        vec![
            PlantSpec::Delay { k: 1.5, a: 0.3, b: 1.0, tau: 0.1 },
            PlantSpec::Heat {
                theta: Schedule::constant(5.0),
                lambda: Schedule::constant(1.5),
            },
            PlantSpec::Wave { ei: EiProfile::Linear { a: 20.0, b: 10.0 } },
        ]
    }

    #[test]
    fn zero_input_stays_at_rest() {
        for spec in specs() {
            let mut st = plant_init(&spec, 64, &ZeroInput).unwrap();
            for _ in 0..200 {
                st.step(&spec, &ZeroInput, 1e-3).unwrap();
            }
            assert!(st.output(&spec).abs() < 1e-14, "{spec:?}");
        }
    }

    #[test]
    fn init_is_zero_state() {
        let spec = &specs()[1];
        if let PlantState::Heat(h) = plant_init(spec, 100, &ZeroInput).unwrap() {
            assert!(h.temps.iter().all(|&v| v == 0.0));
        } else {
            panic!("wrong variant");
        }
    }

    #[test]
    fn pde_grid_floor_enforced() {
        let spec = &specs()[1];
        assert!(plant_init(spec, 10, &ZeroInput).is_err());
    }

    #[test]
    fn wave_dirichlet_edge_tracks_input() {
        let spec = &specs()[2];
        let input = SingleTone { omega: 0.7, amplitude: 1.0 };
        let mut st = plant_init(spec, 80, &input).unwrap();
        for _ in 0..500 {
            st.step(spec, &input, 1e-3).unwrap();
        }
        if let PlantState::Wave(w) = &st {
            let u_now = input.value(w.t);
            let disp = w.displacement(u_now);
            assert!((disp[80] - u_now).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_energy_at_rest() {
        let spec = &specs()[2];
        if let PlantState::Wave(w) = plant_init(spec, 64, &ZeroInput).unwrap() {
            assert_eq!(wave_energy(&w, spec).unwrap(), 0.0);
        }
    }

    #[test]
    fn wave_series_dc_gain_is_one() {
        let spec = &specs()[2];
        let g = steady_state_response(spec, 0.0, 8).unwrap();
        assert!((g.re - 1.0).abs() < 1e-9);
        assert!(g.im.abs() < 1e-12);
        assert!(steady_state_response(spec, 0.0, 3).is_err());
    }

    #[test]
    fn delay_output_is_shifted_state() {
        // with tau an exact multiple of dt the ring lookup is exact
        let spec = PlantSpec::Delay { k: 2.0, a: 3.0, b: 2.0, tau: 0.05 };
        let input = SingleTone { omega: 1.0, amplitude: 1.0 };
        let mut st = plant_init(&spec, 0, &input).unwrap();
        let dt = 1e-3;
        let mut x1_log = vec![0.0];
        for _ in 0..2000 {
            st.step(&spec, &input, dt).unwrap();
            if let PlantState::Delay(d) = &st {
                x1_log.push(d.x1);
            }
        }
        let y = st.output(&spec);
        let expect = 2.0 * x1_log[x1_log.len() - 1 - 50];
        assert!((y - expect).abs() < 1e-12);
    }
}
