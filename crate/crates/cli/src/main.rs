use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use kfcs::harness::{emit_csv, run_experiment, trial_bound_trace, trial_trajectory, ExperimentConfig};
use kfcs::sensing::{generate_gaussian_matrix, rip_constant, roc_constant};
use kfcs::stability::detection_delay_from_bstar;
use kfcs::Error;

#[derive(Parser)]
#[command(name = "kfcs", version, about = "Sparse signal tracking with a Kalman filter and compressed sensing on its residual")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Exact RIP constant δ_K (and ROC θ_{K,K2}) of a seeded gaussian matrix.
    Rip {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        m: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        order: usize,
        #[arg(long)]
        order2: Option<usize>,
    },
    /// Stability calculators.
    Analyze {
        #[command(subcommand)]
        what: Analyze,
    },
    /// Monte Carlo comparison of the configured estimators.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        trials: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory (defaults to the config's `output`).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also write the ground-truth trajectory of trial 0.
        #[arg(long)]
        save_trajectory: bool,
    },
}

#[derive(Subcommand)]
enum Analyze {
    /// Detection delay bound τ_det.
    TauDet {
        #[arg(long)]
        eps: f64,
        #[arg(long)]
        s: usize,
        #[arg(long)]
        bstar: f64,
        #[arg(long = "sigma-sys2")]
        sigma_sys2: f64,
    },
    /// Per-step error bound along one KF-CS run, as CSV.
    Bounds {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value_t = 0)]
        trial: u64,
        /// Write the CSV here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn load_config(path: &Path) -> Result<ExperimentConfig, Error> {
    ExperimentConfig::load(path).map_err(|e| match e {
        Error::Io(io) => Error::Io(std::io::Error::new(io.kind(), format!("{}: {io}", path.display()))),
        other => other,
    })
}

fn run(cli: Cli) -> Result<(), Error> {
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    match cli.command {
        Command::Rip { n, m, seed, order, order2 } => {
            let a = generate_gaussian_matrix(n, m, seed);
            writeln!(out, "{}", rip_constant(&a, order)?.delta)?;
            if let Some(k2) = order2 {
                writeln!(out, "{}", roc_constant(&a, order, k2)?.theta)?;
            }
        }
        Command::Analyze { what: Analyze::TauDet { eps, s, bstar, sigma_sys2 } } => {
            writeln!(out, "{}", detection_delay_from_bstar(eps, s, bstar, sigma_sys2)?)?;
        }
        Command::Analyze { what: Analyze::Bounds { config, trial, out: dest } } => {
            let cfg = load_config(&config)?;
            let trace = trial_bound_trace(&cfg, trial)?;
            match dest {
                Some(path) => trace.write_csv(std::fs::File::create(path)?)?,
                None => trace.write_csv(&mut out)?,
            }
        }
        Command::Simulate { config, trials, seed, out: dir, save_trajectory } => {
            let mut cfg = load_config(&config)?;
            if let Some(t) = trials {
                cfg.trials = t;
            }
            if let Some(s) = seed {
                cfg.seed = s;
            }
            if let Some(d) = dir {
                cfg.output = d;
            }
            cfg.validate()?;
            let metrics = run_experiment(&cfg)?;
            let path = emit_csv(&metrics, &cfg, &cfg.output)?;
            if save_trajectory {
                trial_trajectory(&cfg, 0)?.save(&cfg.output, "trajectory")?;
            }
            writeln!(out, "{}", path.display())?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let usage = e.use_stderr();
            let _ = e.print();
            // Bad arguments count as configuration errors; help and version are fine.
            return if usage { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Error::Io(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
