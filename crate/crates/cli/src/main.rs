use std::path::PathBuf;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};

use irident::harness::{
    reconstruct_from_estimates_csv, run_identify, run_simulate, run_sweep_rho, run_verify_pe,
    ExperimentConfig,
};

#[derive(Parser)]
#[command(name = "irident", version, about = "Adaptive identification of SISO infinite-dimensional plants")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Experiment config (TOML)
    config: PathBuf,
    /// Directory for CSV artifacts; omit to skip file output
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Override the truncation order n
    #[arg(long)]
    n: Option<usize>,
    /// Override the horizon t_end (seconds)
    #[arg(long)]
    t_end: Option<f64>,
    /// Override the step size dt (seconds)
    #[arg(long)]
    dt: Option<f64>,
    /// Override the adaptation gain
    #[arg(long)]
    gamma: Option<f64>,
    /// Override the output decimation (seconds)
    #[arg(long)]
    decimation: Option<f64>,
}

impl Common {
    fn load(&self) -> anyhow::Result<ExperimentConfig> {
        let mut cfg = ExperimentConfig::from_path(&self.config)
            .with_context(|| format!("loading {:?}", self.config))?;
        if let Some(n) = self.n {
            cfg.identify.n = n;
        }
        if let Some(t) = self.t_end {
            cfg.identify.t_end = t;
        }
        if let Some(dt) = self.dt {
            cfg.identify.dt = dt;
        }
        if let Some(g) = self.gamma {
            cfg.identify.gamma = g;
        }
        if let Some(d) = self.decimation {
            cfg.output.decimation = d;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Simulate the plant alone and dump the trajectory
    Simulate(Common),
    /// Run the full identification loop
    Identify(Common),
    /// Excitation report for the configured order n
    VerifyPe(Common),
    /// Excitation sweep over the configured order range
    SweepRho {
        #[command(flatten)]
        common: Common,
        /// Override the sweep's smallest order
        #[arg(long)]
        n_min: Option<usize>,
        /// Override the sweep's largest order
        #[arg(long)]
        n_max: Option<usize>,
    },
    /// Recover physical parameters from an estimates CSV
    Reconstruct {
        #[command(flatten)]
        common: Common,
        /// estimates.csv produced by `identify`
        #[arg(long)]
        estimates: PathBuf,
        /// Row time to use (default: last row)
        #[arg(long)]
        at: Option<f64>,
    },
}

fn main() -> anyhow::Result<()> {
    match Cli::parse().command {
        Command::Simulate(c) => {
            let cfg = c.load()?;
            let summary = run_simulate(&cfg, c.out_dir.as_deref())?;
            println!("t_end = {}", summary.t_end);
            println!("rows = {}", summary.rows);
            println!("final_output = {}", summary.final_output);
            if let Some(p) = summary.trajectory_path {
                println!("trajectory = {}", p.display());
            }
        }
        Command::Identify(c) => {
            let cfg = c.load()?;
            let summary = run_identify(&cfg, c.out_dir.as_deref())?;
            print!("{summary}");
        }
        Command::VerifyPe(c) => {
            let cfg = c.load()?;
            let r = run_verify_pe(&cfg)?;
            println!("n = {}", r.n);
            println!("omega = {}", r.omega);
            println!("kappa = {:e}", r.kappa);
            println!("tail = {:e}", r.tail);
            println!("rho_u = {:e}", r.rho_u);
            println!("method = {}", r.method);
            if !r.settled {
                eprintln!("warning: data-driven excitation level did not settle within the horizon");
            }
        }
        Command::SweepRho { common, n_min, n_max } => {
            let mut cfg = common.load()?;
            if let Some(v) = n_min {
                cfg.pe.n_min = v;
            }
            if let Some(v) = n_max {
                cfg.pe.n_max = v;
            }
            let reports = run_sweep_rho(&cfg, common.out_dir.as_deref())?;
            println!("n,omega,kappa,tail,rho_u,method");
            for r in &reports {
                println!(
                    "{},{},{},{},{},{}",
                    r.n, r.omega, r.kappa, r.tail, r.rho_u, r.method
                );
                if !r.settled {
                    eprintln!("warning: n = {} did not settle within the horizon", r.n);
                }
            }
        }
        Command::Reconstruct { common, estimates, at } => {
            let cfg = common.load()?;
            let (t, names, params) = reconstruct_from_estimates_csv(&cfg, &estimates, at)?;
            println!("t = {t}");
            for (name, v) in names.iter().zip(&params) {
                if v.is_finite() {
                    println!("{name} = {v}");
                } else {
                    println!("{name} = (outside invertible region)");
                }
            }
        }
    }
    Ok(())
}
