//! Experiment configuration and the runs behind the command-line tool.
//!
//! A config file describes one plant with its true parameters, the estimator
//! settings, and output options. [`run_identify`] executes the full
//! simulate -> filter -> estimate -> reconstruct loop and streams CSV rows;
//! [`run_simulate`] dumps a raw trajectory; [`run_sweep_rho`] produces the
//! excitation table over a range of orders. All runs are deterministic:
//! identical configs give bit-identical output files.

use std::fmt;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::coeffs::{self, ParamBox, PlantSpec};
use crate::error::{Error, Result};
use crate::identifier::{estimator_init, EstimatorState};
use crate::pe::{self, OmegaRule, PeReport, SimOptions};
use crate::pipeline::Pipeline;
use crate::plants::{self, plant_init, InputSignal, MultiSine, PlantState, ZeroInput};
use crate::reconstruct;

fn default_dt() -> f64 {
    1e-3
}
fn default_heat_points() -> usize {
    200
}
fn default_wave_points() -> usize {
    400
}
fn default_n_min() -> usize {
    1
}
fn default_n_max() -> usize {
    17
}
fn default_horizon() -> usize {
    20
}
fn default_decimation() -> f64 {
    0.1
}

/// Initial estimate: one fill value for every unknown, or a full vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Alpha0 {
    Fill(f64),
    Vector(Vec<f64>),
}

impl Alpha0 {
    pub fn resolve(&self, r: usize) -> Result<Vec<f64>> {
        match self {
            Alpha0::Fill(v) => Ok(vec![*v; r]),
            Alpha0::Vector(v) if v.len() == r => Ok(v.clone()),
            Alpha0::Vector(v) => Err(Error::Config(format!(
                "alpha0 has {} entries but the model has {r} unknowns",
                v.len()
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdentifyConfig {
    /// truncation order of the coefficient model
    pub n: usize,
    /// adaptation gain
    pub gamma: f64,
    pub alpha0: Alpha0,
    pub t_end: f64,
    #[serde(default = "default_dt")]
    pub dt: f64,
    /// base input frequency; defaults to 1 / (n + 1)
    #[serde(default)]
    pub omega: Option<f64>,
    /// absolute times at which data collection restarts (plant to rest,
    /// input clock re-zeroed, window flushed) while the estimate carries
    /// over; used to track known abrupt plant changes
    #[serde(default)]
    pub data_restarts: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridConfig {
    #[serde(default = "default_heat_points")]
    pub heat_points: usize,
    #[serde(default = "default_wave_points")]
    pub wave_points: usize,
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig {
            heat_points: default_heat_points(),
            wave_points: default_wave_points(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeConfig {
    #[serde(default = "default_n_min")]
    pub n_min: usize,
    #[serde(default = "default_n_max")]
    pub n_max: usize,
    #[serde(default = "default_horizon")]
    pub horizon_windows: usize,
}

impl Default for PeConfig {
    fn default() -> Self {
        PeConfig {
            n_min: default_n_min(),
            n_max: default_n_max(),
            horizon_windows: default_horizon(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputConfig {
    /// seconds between output rows
    #[serde(default = "default_decimation")]
    pub decimation: f64,
    /// reserved; the pipeline is deterministic and never draws random numbers
    #[serde(default)]
    pub seed: u64,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            decimation: default_decimation(),
            seed: 0,
        }
    }
}

/// What drives the plant in `simulate` runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SimInput {
    Multisine,
    Zero,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulateConfig {
    #[serde(default = "SimulateConfig::default_input")]
    pub input: SimInput,
    /// amplitude of the built-in smooth initial state for zero-input wave
    /// runs (free-decay studies); zero leaves the plant at rest
    #[serde(default)]
    pub initial_excitation: f64,
}

impl SimulateConfig {
    fn default_input() -> SimInput {
        SimInput::Multisine
    }
}

impl Default for SimulateConfig {
    fn default() -> Self {
        SimulateConfig {
            input: SimInput::Multisine,
            initial_excitation: 0.0,
        }
    }
}

/// Full experiment description, usually parsed from a TOML file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub plant: PlantSpec,
    pub identify: IdentifyConfig,
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(default)]
    pub bounds: Option<ParamBox>,
    #[serde(default)]
    pub pe: PeConfig,
    #[serde(default)]
    pub output: OutputConfig,
    #[serde(default)]
    pub simulate: SimulateConfig,
}

impl ExperimentConfig {
    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let cfg: ExperimentConfig =
            toml::from_str(&text).map_err(|e| Error::Config(format!("{path:?}: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn omega(&self) -> f64 {
        self.identify
            .omega
            .unwrap_or(1.0 / (self.identify.n as f64 + 1.0))
    }

    pub fn grid_points(&self) -> usize {
        match self.plant {
            PlantSpec::Heat { .. } => self.grid.heat_points,
            PlantSpec::Wave { .. } => self.grid.wave_points,
            PlantSpec::Delay { .. } => 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.plant.validate()?;
        let id = &self.identify;
        if id.dt <= 0.0 {
            return Err(Error::Config("dt must be positive".into()));
        }
        let window = 2.0 * std::f64::consts::PI / self.omega();
        if id.t_end <= window {
            return Err(Error::Config(format!(
                "t_end = {} must exceed one window 2 pi / omega = {window:.3}",
                id.t_end
            )));
        }
        if self.output.decimation < id.dt {
            return Err(Error::Config("decimation must be at least dt".into()));
        }
        if id
            .data_restarts
            .windows(2)
            .any(|w| w[0] >= w[1])
        {
            return Err(Error::Config("data_restarts must be strictly increasing".into()));
        }
        if id.data_restarts.iter().any(|&t| t <= 0.0 || t >= id.t_end) {
            return Err(Error::Config("data_restarts must lie inside (0, t_end)".into()));
        }
        Ok(())
    }
}

/// Final record of an identification run.
#[derive(Debug, Clone, Serialize)]
pub struct RunSummary {
    pub t_end: f64,
    pub omega: f64,
    pub window_span: f64,
    pub steps: u64,
    pub estimate_names: Vec<String>,
    pub estimates: Vec<f64>,
    pub param_names: Vec<String>,
    /// reconstructed parameters at t_end; NaN marks a sample outside the
    /// invertible region
    pub params: Vec<f64>,
    pub final_cost: f64,
    /// ||alpha(t_end) - alpha_true(t_end)||_2 with schedules frozen at t_end
    pub final_coeff_error: f64,
    pub guard_status: String,
    pub config: ExperimentConfig,
}

impl fmt::Display for RunSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "t_end = {}", self.t_end)?;
        writeln!(f, "omega = {}", self.omega)?;
        writeln!(f, "window_span = {}", self.window_span)?;
        writeln!(f, "steps = {}", self.steps)?;
        for (name, v) in self.estimate_names.iter().zip(&self.estimates) {
            writeln!(f, "estimate.{name} = {v}")?;
        }
        for (name, v) in self.param_names.iter().zip(&self.params) {
            writeln!(f, "param.{name} = {v}")?;
        }
        writeln!(f, "final_cost = {:e}", self.final_cost)?;
        writeln!(f, "final_coeff_error = {:e}", self.final_coeff_error)?;
        writeln!(f, "guard_status = {}", self.guard_status)
    }
}

struct CsvFile {
    w: BufWriter<File>,
    pub path: PathBuf,
}

impl CsvFile {
    fn create(dir: &Path, name: &str, header: &str) -> Result<Self> {
        std::fs::create_dir_all(dir)?;
        let path = dir.join(name);
        let mut w = BufWriter::new(File::create(&path)?);
        writeln!(w, "{header}")?;
        Ok(CsvFile { w, path })
    }

    fn row(&mut self, fields: &[String]) -> Result<()> {
        writeln!(self.w, "{}", fields.join(","))?;
        Ok(())
    }

    fn trailer(&mut self, message: &str) -> Result<()> {
        writeln!(self.w, "# aborted: {message}")?;
        self.w.flush()?;
        Ok(())
    }

    fn finish(mut self) -> Result<()> {
        self.w.flush()?;
        Ok(())
    }
}

fn fmt_f64(v: f64) -> String {
    format!("{v}")
}

/// Reconstruct physical parameters from a full coefficient vector in beta
/// order. Returns NaN for samples outside the invertible region.
pub fn reconstruct_from_beta(spec: &PlantSpec, n: usize, beta: &[f64]) -> (Vec<String>, Vec<f64>) {
    let q = |j: usize| beta[n + 1 + j];
    match spec {
        PlantSpec::Delay { .. } => {
            let names = vec!["K".into(), "tau".into(), "a".into(), "b".into()];
            match reconstruct::reconstruct_delay(beta[0], beta[1], q(0), q(1)) {
                Ok(r) => (names, r.params.iter().map(|(_, v)| *v).collect()),
                Err(_) => (names, vec![f64::NAN; 4]),
            }
        }
        PlantSpec::Heat { .. } => {
            let names = vec!["theta".into(), "lambda".into()];
            match reconstruct::reconstruct_heat(q(0), q(1), 1e-14) {
                Ok(r) => (names, r.params.iter().map(|(_, v)| *v).collect()),
                Err(_) => (names, vec![f64::NAN; 2]),
            }
        }
        PlantSpec::Wave { .. } => {
            let names = vec!["a".into(), "b".into()];
            match reconstruct::reconstruct_wave(q(1), q(2)) {
                Ok(r) => (names, r.params.iter().map(|(_, v)| *v).collect()),
                Err(_) => (names, vec![f64::NAN; 2]),
            }
        }
    }
}

/// Run the identification loop described by a config. When `out_dir` is
/// given, `estimates.csv` (t, unknown coefficients, J) and
/// `reconstruction.csv` (t, parameters) are written at the configured
/// decimation, plus `summary.toml`. Aborted runs leave a valid CSV prefix
/// and a trailing `# aborted:` record.
pub fn run_identify(config: &ExperimentConfig, out_dir: Option<&Path>) -> Result<RunSummary> {
    config.validate()?;
    let n = config.identify.n;
    let omega = config.omega();
    let dt = config.identify.dt;
    let model = coeffs::model_for(&config.plant, n)?;
    let input = MultiSine { omega, tones: n + 1 };
    let mut pipe = Pipeline::new(
        &config.plant,
        &input,
        n,
        omega,
        config.grid_points(),
        dt,
    )?;
    let alpha0 = config.identify.alpha0.resolve(model.r())?;
    let mut est: EstimatorState =
        estimator_init(&model, config.identify.gamma, &alpha0, omega, dt)?;

    let names = model.unknown_names();
    let (param_names, _) = reconstruct_from_beta(&config.plant, n, &model.beta());

    let mut est_csv = match out_dir {
        Some(dir) => Some(CsvFile::create(
            dir,
            "estimates.csv",
            &format!("t,{},J", names.join(",")),
        )?),
        None => None,
    };
    let mut rec_csv = match out_dir {
        Some(dir) => Some(CsvFile::create(
            dir,
            "reconstruction.csv",
            &format!("t,{}", param_names.join(",")),
        )?),
        None => None,
    };

    let steps = (config.identify.t_end / dt).round() as u64;
    let dec_every = (config.output.decimation / dt).round().max(1.0) as u64;
    let mut restarts = config.identify.data_restarts.clone();
    restarts.reverse(); // pop() yields them in increasing order

    let write_rows = |est: &EstimatorState,
                          t: f64,
                          est_csv: &mut Option<CsvFile>,
                          rec_csv: &mut Option<CsvFile>|
     -> Result<()> {
        if let Some(csv) = est_csv {
            let mut fields = vec![fmt_f64(t)];
            fields.extend(est.alpha().iter().map(|&v| fmt_f64(v)));
            fields.push(fmt_f64(est.cost()));
            csv.row(&fields)?;
        }
        if let Some(csv) = rec_csv {
            let beta = est.beta_bar();
            let (_, params) = reconstruct_from_beta(&config.plant, n, beta.as_slice());
            let mut fields = vec![fmt_f64(t)];
            fields.extend(params.iter().map(|v| {
                if v.is_finite() {
                    fmt_f64(*v)
                } else {
                    String::new() // missing-value marker
                }
            }));
            csv.row(&fields)?;
        }
        Ok(())
    };

    write_rows(&est, 0.0, &mut est_csv, &mut rec_csv)?;
    let mut abort: Option<Error> = None;
    for k in 0..steps {
        let t = k as f64 * dt;
        if let Some(&next) = restarts.last() {
            if t + 0.5 * dt >= next {
                restarts.pop();
                pipe.restart_data(&config.plant)?;
                est.window_mut().reset();
            }
        }
        let step_result = pipe.step().and_then(|reg| est.step(&reg, dt));
        if let Err(e) = step_result {
            abort = Some(e);
            break;
        }
        if (k + 1) % dec_every == 0 {
            write_rows(&est, (k + 1) as f64 * dt, &mut est_csv, &mut rec_csv)?;
        }
    }

    if let Some(e) = abort {
        let msg = e.to_string();
        if let Some(csv) = est_csv.as_mut() {
            csv.trailer(&msg)?;
        }
        if let Some(csv) = rec_csv.as_mut() {
            csv.trailer(&msg)?;
        }
        return Err(e);
    }

    let beta = est.beta_bar();
    let (_, params) = reconstruct_from_beta(&config.plant, n, beta.as_slice());
    let model_end = coeffs::model_for_at(&config.plant, n, config.identify.t_end)?;
    let err: f64 = est
        .alpha()
        .iter()
        .zip(model_end.alpha_true().iter())
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt();

    let summary = RunSummary {
        t_end: config.identify.t_end,
        omega,
        window_span: est.window().span(),
        steps,
        estimate_names: names,
        estimates: est.alpha().to_vec(),
        param_names,
        params,
        final_cost: est.cost(),
        final_coeff_error: err,
        guard_status: "ok".into(),
        config: config.clone(),
    };

    if let Some(csv) = est_csv {
        csv.finish()?;
    }
    if let Some(csv) = rec_csv {
        csv.finish()?;
    }
    if let Some(dir) = out_dir {
        let text = toml::to_string_pretty(&summary)
            .map_err(|e| Error::Config(format!("summary serialization: {e}")))?;
        std::fs::write(dir.join("summary.toml"), text)?;
    }
    Ok(summary)
}

/// Built-in smooth free-decay state for zero-input wave simulations:
/// a few low modes vanishing at xi = 1 with the edge condition satisfied.
fn wave_excited_state(grid: usize, amp: f64) -> (Vec<f64>, Vec<f64>) {
    let n = grid;
    let mut v = vec![0.0; n + 1];
    let mut vt = vec![0.0; n + 1];
    let pi = std::f64::consts::PI;
    for i in 0..=n {
        let xi = i as f64 / n as f64;
        v[i] = amp * ((pi * (1.0 - xi) / 2.0).sin() + 0.3 * (3.0 * pi * (1.0 - xi) / 2.0).sin());
    }
    // v_xi(0) from the profile; vt(xi) = v_xi(0) (1 - xi) meets the edge
    // condition and vanishes at xi = 1
    let h = 1.0 / n as f64;
    let vx0 = (v[1] - v[0]) / h;
    for i in 0..=n {
        let xi = i as f64 / n as f64;
        vt[i] = vx0 * (1.0 - xi);
    }
    (v, vt)
}

/// Summary of a plant-only simulation.
#[derive(Debug, Clone, Serialize)]
pub struct SimSummary {
    pub t_end: f64,
    pub rows: u64,
    pub final_output: f64,
    pub trajectory_path: Option<PathBuf>,
}

/// Simulate the plant alone and write `trajectory.csv` with header `t,u,y`
/// (wave runs append an `H` energy column).
pub fn run_simulate(config: &ExperimentConfig, out_dir: Option<&Path>) -> Result<SimSummary> {
    config.validate()?;
    let n = config.identify.n;
    let omega = config.omega();
    let dt = config.identify.dt;
    let multisine = MultiSine { omega, tones: n + 1 };
    let input: &dyn InputSignal = match config.simulate.input {
        SimInput::Multisine => &multisine,
        SimInput::Zero => &ZeroInput,
    };
    let mut plant = plant_init(&config.plant, config.grid_points(), input)?;
    if config.simulate.initial_excitation != 0.0 {
        if let PlantState::Wave(w) = &mut plant {
            let (v, vt) = wave_excited_state(config.grid_points(), config.simulate.initial_excitation);
            w.v = v;
            w.vt = vt;
        }
    }
    let is_wave = matches!(config.plant, PlantSpec::Wave { .. });
    let header = if is_wave { "t,u,y,H" } else { "t,u,y" };
    let mut csv = match out_dir {
        Some(dir) => Some(CsvFile::create(dir, "trajectory.csv", header)?),
        None => None,
    };

    let steps = (config.identify.t_end / dt).round() as u64;
    let dec_every = (config.output.decimation / dt).round().max(1.0) as u64;
    let mut rows = 0u64;
    let write_row = |plant: &PlantState, t: f64, csv: &mut Option<CsvFile>| -> Result<()> {
        if let Some(csv) = csv {
            let mut fields = vec![
                fmt_f64(t),
                fmt_f64(input.value(t)),
                fmt_f64(plant.output(&config.plant)),
            ];
            if let PlantState::Wave(w) = plant {
                fields.push(fmt_f64(plants::wave_energy(w, &config.plant)?));
            }
            csv.row(&fields)?;
        }
        Ok(())
    };
    write_row(&plant, 0.0, &mut csv)?;
    rows += 1;
    for k in 0..steps {
        if let Err(e) = plant.step(&config.plant, input, dt) {
            if let Some(csv) = csv.as_mut() {
                csv.trailer(&e.to_string())?;
            }
            return Err(e);
        }
        if (k + 1) % dec_every == 0 {
            write_row(&plant, (k + 1) as f64 * dt, &mut csv)?;
            rows += 1;
        }
    }
    let final_output = plant.output(&config.plant);
    let path = csv.as_ref().map(|c| c.path.clone());
    if let Some(csv) = csv {
        csv.finish()?;
    }
    Ok(SimSummary {
        t_end: config.identify.t_end,
        rows,
        final_output,
        trajectory_path: path,
    })
}

/// Excitation sweep over the configured order range; writes `pe_sweep.csv`
/// with header `n,omega,kappa,tail,rho_u,method`.
pub fn run_sweep_rho(config: &ExperimentConfig, out_dir: Option<&Path>) -> Result<Vec<PeReport>> {
    config.validate()?;
    let param_box = config
        .bounds
        .as_ref()
        .ok_or_else(|| Error::Config("sweep needs a [bounds] box".into()))?;
    let opts = SimOptions {
        dt: config.identify.dt,
        grid_points: config.grid_points(),
        horizon_windows: config.pe.horizon_windows,
    };
    let rule = match config.identify.omega {
        Some(w) => OmegaRule::Fixed(w),
        None => OmegaRule::Reciprocal,
    };
    let reports = pe::sweep(
        &config.plant,
        param_box,
        config.pe.n_min,
        config.pe.n_max,
        rule,
        &opts,
    )?;
    if let Some(dir) = out_dir {
        let mut csv = CsvFile::create(dir, "pe_sweep.csv", "n,omega,kappa,tail,rho_u,method")?;
        for r in &reports {
            csv.row(&[
                r.n.to_string(),
                fmt_f64(r.omega),
                fmt_f64(r.kappa),
                fmt_f64(r.tail),
                fmt_f64(r.rho_u),
                r.method.to_string(),
            ])?;
        }
        csv.finish()?;
    }
    Ok(reports)
}

/// Single-order excitation report for the configured n.
pub fn run_verify_pe(config: &ExperimentConfig) -> Result<PeReport> {
    config.validate()?;
    let param_box = config
        .bounds
        .as_ref()
        .ok_or_else(|| Error::Config("verify-pe needs a [bounds] box".into()))?;
    let opts = SimOptions {
        dt: config.identify.dt,
        grid_points: config.grid_points(),
        horizon_windows: config.pe.horizon_windows,
    };
    pe::report_for(
        &config.plant,
        param_box,
        config.identify.n,
        config.omega(),
        &opts,
    )
}

/// Reconstruct parameters from a row of an estimates CSV written by
/// [`run_identify`]. `at` selects the row with the closest time; `None`
/// means the last row.
pub fn reconstruct_from_estimates_csv(
    config: &ExperimentConfig,
    csv_path: &Path,
    at: Option<f64>,
) -> Result<(f64, Vec<String>, Vec<f64>)> {
    let n = config.identify.n;
    let model = coeffs::model_for(&config.plant, n)?;
    let text = std::fs::read_to_string(csv_path)?;
    let mut lines = text.lines().filter(|l| !l.starts_with('#'));
    let header = lines
        .next()
        .ok_or_else(|| Error::Config("empty estimates CSV".into()))?;
    let expected = format!("t,{},J", model.unknown_names().join(","));
    if header != expected {
        return Err(Error::Config(format!(
            "estimates CSV header mismatch: got {header:?}, expected {expected:?}"
        )));
    }
    let mut best: Option<(f64, Vec<f64>)> = None;
    for line in lines {
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != model.r() + 2 {
            continue;
        }
        let t: f64 = fields[0]
            .parse()
            .map_err(|_| Error::Config("bad time field".into()))?;
        let alpha: Vec<f64> = fields[1..=model.r()]
            .iter()
            .map(|f| f.parse().unwrap_or(f64::NAN))
            .collect();
        let better = match (&best, at) {
            (None, _) => true,
            (Some((tb, _)), Some(target)) => (t - target).abs() < (tb - target).abs(),
            (Some((tb, _)), None) => t > *tb,
        };
        if better {
            best = Some((t, alpha));
        }
    }
    let (t, alpha) = best.ok_or_else(|| Error::Config("no data rows in estimates CSV".into()))?;
    let beta = model.embed(&alpha);
    let (names, params) = reconstruct_from_beta(&config.plant, n, &beta);
    Ok((t, names, params))
}
