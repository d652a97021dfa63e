//! Wiring of one plant and its two filter banks into a sampled regressor
//! stream. Shared by the experiment harness, the data-driven excitation
//! check, and the integration tests.

use crate::coeffs::{PlantSpec, Schedule, Segment};
use crate::error::Result;
use crate::filters::{filter_init, regressor_assemble, FilterBank, Regressor};
use crate::plants::{plant_init, InputSignal, PlantState};

/// One plant plus matched input/output filter banks advancing in lockstep.
///
/// The pipeline clock `t` is absolute experiment time. After a data restart
/// the plant and input run on a fresh local clock while any parameter
/// schedules keep following absolute time (the restart shifts them).
pub struct Pipeline<'a> {
    input: &'a dyn InputSignal,
    /// plant spec with schedules expressed in the current local clock
    spec_local: PlantSpec,
    pub plant: PlantState,
    pub u_bank: FilterBank,
    pub y_bank: FilterBank,
    dt: f64,
    t0: f64,
    grid_points: usize,
    u_prev: f64,
    y_prev: f64,
}

/// Shift a spec's schedules so that local time t' corresponds to absolute
/// time t' + t0. Affine segments shift exactly.
fn shift_spec(spec: &PlantSpec, t0: f64) -> PlantSpec {
    let shift = |s: &Schedule| match s {
        Schedule::Constant(v) => Schedule::Constant(*v),
        Schedule::Segments(segs) => Schedule::Segments(
            segs.iter()
                .map(|sg| Segment {
                    t_start: sg.t_start - t0,
                    base: sg.base + sg.slope * t0,
                    slope: sg.slope,
                })
                .collect(),
        ),
    };
    match spec {
        PlantSpec::Heat { theta, lambda } => PlantSpec::Heat {
            theta: shift(theta),
            lambda: shift(lambda),
        },
        other => other.clone(),
    }
}

impl<'a> Pipeline<'a> {
    pub fn new(
        spec: &PlantSpec,
        input: &'a dyn InputSignal,
        n: usize,
        omega_n: f64,
        grid_points: usize,
        dt: f64,
    ) -> Result<Self> {
        let spec_local = spec.clone();
        let plant = plant_init(&spec_local, grid_points, input)?;
        let u_bank = filter_init(n, omega_n)?;
        let y_bank = filter_init(n, omega_n)?;
        let y0 = plant.output(&spec_local);
        let u0 = input.value(0.0);
        Ok(Pipeline {
            input,
            spec_local,
            plant,
            u_bank,
            y_bank,
            dt,
            t0: 0.0,
            grid_points,
            u_prev: u0,
            y_prev: y0,
        })
    }

    /// Absolute experiment time.
    pub fn time(&self) -> f64 {
        self.t0 + self.plant.time()
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn input_now(&self) -> f64 {
        self.u_prev
    }

    pub fn output_now(&self) -> f64 {
        self.y_prev
    }

    /// Advance plant and both banks one step; returns the regressor sampled
    /// at the new (absolute) time.
    pub fn step(&mut self) -> Result<Regressor> {
        let local = self.plant.time();
        let y_new = self.plant.step(&self.spec_local, self.input, self.dt)?;
        let u_new = self.input.value(local + self.dt);
        self.u_bank.step(self.u_prev, u_new, self.dt);
        self.y_bank.step(self.y_prev, y_new, self.dt);
        self.u_prev = u_new;
        self.y_prev = y_new;
        regressor_assemble(&self.u_bank, &self.y_bank, self.time())
    }

    /// Restart data collection at the current absolute time: plant back to
    /// rest, input clock re-zeroed, filter banks cleared, schedules shifted
    /// to the new local clock. Used when a known abrupt plant change makes
    /// the collected history unrepresentative.
    pub fn restart_data(&mut self, spec: &PlantSpec) -> Result<()> {
        self.t0 = self.time();
        self.spec_local = shift_spec(spec, self.t0);
        self.plant = plant_init(&self.spec_local, self.grid_points, self.input)?;
        self.u_bank.reset();
        self.y_bank.reset();
        self.u_prev = self.input.value(0.0);
        self.y_prev = self.plant.output(&self.spec_local);
        Ok(())
    }
}
