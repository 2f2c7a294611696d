//! `odfm`: adequacy testing, factor estimation, outlier detection and
//! Monte Carlo experiments for dynamic factor models.
//!
//! Exit status: 0 success, 1 error, 2 adequacy rejection, 3 estimator
//! non-convergence.

mod commands;
mod config;
mod render;

use anyhow::{Context, Result};
use clap::{ArgAction, Args, Parser, Subcommand};
use commands::Outputs;
use config::{load_run_config, Format, Manifest, RunConfig};
use odfm::adequacy::Calibration;
use odfm::datamodel::Orientation;
use odfm::factors::Method;
use odfm::outliers::{AdjustStrategy, DetectionMode};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser, Debug)]
#[command(name = "odfm", version, about = "Dynamic factor models and additive-outlier detection for multivariate time series")]
struct Cli {
    /// Run configuration (TOML or JSON), or a manifest from an earlier run.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// CSV panel to analyse.
    #[arg(long, global = true)]
    input: Option<PathBuf>,
    #[arg(long, global = true)]
    output_dir: Option<PathBuf>,
    /// Master seed for simulations and randomized restarts.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// What to print on stdout; files are always written.
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
    /// Per-component transforms, e.g. "diff,log-diff,none" or a single one for all.
    #[arg(long, global = true)]
    transform_spec: Option<String>,
    #[arg(long, global = true)]
    delimiter: Option<char>,
    /// The CSV has no header record.
    #[arg(long, global = true)]
    no_header: bool,
    /// CSV rows are components and columns are time points.
    #[arg(long, global = true)]
    rows_are_components: bool,
    /// More log output (repeat for more).
    #[arg(short, long, global = true, action = ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Test whether the spectral density matrix is real, band by band.
    Adequacy(AdequacyArgs),
    /// Estimate the loading matrix and the factors.
    Estimate(EstimateArgs),
    /// Detect additive outliers and estimate their sizes.
    Detect(DetectArgs),
    /// Run a Monte Carlo experiment.
    Simulate(SimulateArgs),
}

#[derive(Args, Debug)]
struct AdequacyArgs {
    #[arg(long)]
    bands: Option<usize>,
    /// Test level.
    #[arg(long)]
    alpha: Option<f64>,
    /// standard or antisymmetric.
    #[arg(long)]
    calibration: Option<Calibration>,
}

#[derive(Args, Debug)]
struct ModelArgs {
    /// svd, jointdiag or ml.
    #[arg(long)]
    estimator: Option<Method>,
    /// Factor count; selected from the eigenvalues of the covariance when absent.
    #[arg(long)]
    k: Option<usize>,
    /// Unexplained-variance share allowed when selecting K.
    #[arg(long)]
    select_alpha: Option<f64>,
}

#[derive(Args, Debug)]
struct EstimateArgs {
    #[command(flatten)]
    model: ModelArgs,
    /// Fit all three estimators and compare them.
    #[arg(long)]
    all: bool,
}

#[derive(Args, Debug)]
struct DetectArgs {
    #[command(flatten)]
    adequacy: AdequacyArgs,
    #[command(flatten)]
    model: ModelArgs,
    /// Threshold on the standardized projections.
    #[arg(long)]
    k_alpha: Option<f64>,
    /// homoscedastic or heteroscedastic.
    #[arg(long)]
    mode: Option<DetectionMode>,
    #[arg(long)]
    max_rounds: Option<usize>,
    /// Number of projection directions per round.
    #[arg(long)]
    n_directions: Option<usize>,
    /// interpolate or var-forecast.
    #[arg(long)]
    adjust: Option<AdjustStrategy>,
    /// Continue when the adequacy test rejects.
    #[arg(long)]
    force: bool,
}

#[derive(Args, Debug)]
struct SimulateArgs {
    /// section7, section8-isolated or section8-patch.
    #[arg(long)]
    preset: Option<String>,
    /// Simulation design file (TOML or JSON).
    #[arg(long)]
    sim_config: Option<PathBuf>,
    #[arg(long)]
    replications: Option<usize>,
    /// Worker threads; ODFM_THREADS is read when absent.
    #[arg(long)]
    threads: Option<usize>,
    /// Also write one CSV row per replication.
    #[arg(long)]
    per_replication: bool,
    #[arg(long)]
    k_alpha: Option<f64>,
    #[arg(long)]
    estimator: Option<Method>,
}

impl AdequacyArgs {
    fn apply(&self, cfg: &mut RunConfig) {
        let a = &mut cfg.pipeline.adequacy;
        if let Some(b) = self.bands {
            a.n_bands = b;
        }
        if let Some(x) = self.alpha {
            a.alpha = x;
        }
        if let Some(c) = self.calibration {
            a.calibration = c;
        }
    }
}

impl ModelArgs {
    fn apply(&self, cfg: &mut RunConfig) {
        let p = &mut cfg.pipeline;
        if let Some(m) = self.estimator {
            p.estimator = m;
        }
        if self.k.is_some() {
            p.k_override = self.k;
        }
        if let Some(a) = self.select_alpha {
            p.select_alpha = a;
        }
    }
}

fn resolve(cli: &Cli) -> Result<RunConfig> {
    let mut cfg = match &cli.config {
        Some(path) => load_run_config(path)?,
        None => RunConfig::default(),
    };
    if cli.input.is_some() {
        cfg.input = cli.input.clone();
    }
    if let Some(dir) = &cli.output_dir {
        cfg.output_dir = dir.clone();
    }
    if let Some(f) = cli.format {
        cfg.format = f;
    }
    if cli.transform_spec.is_some() {
        cfg.transform_spec = cli.transform_spec.clone();
    }
    if let Some(d) = cli.delimiter {
        cfg.csv.delimiter = u8::try_from(d).ok().filter(|b| b.is_ascii()).context("the delimiter must be one ASCII character")?;
    }
    if cli.no_header {
        cfg.csv.has_header = false;
    }
    if cli.rows_are_components {
        cfg.csv.orientation = Orientation::RowsAreComponents;
    }
    if cli.seed.is_some() {
        cfg.seed = cli.seed;
    }
    if let Some(seed) = cfg.seed {
        cfg.pipeline.jointdiag.seed = seed;
    }

    match &cli.command {
        Command::Adequacy(a) => a.apply(&mut cfg),
        Command::Estimate(e) => {
            e.model.apply(&mut cfg);
            if e.all {
                cfg.all_estimators = true;
            }
        }
        Command::Detect(d) => {
            d.adequacy.apply(&mut cfg);
            d.model.apply(&mut cfg);
            let p = &mut cfg.pipeline;
            if let Some(k) = d.k_alpha {
                p.k_alpha = k;
            }
            if let Some(m) = d.mode {
                p.mode = m;
            }
            if let Some(r) = d.max_rounds {
                p.max_rounds = r;
            }
            if d.n_directions.is_some() {
                p.n_directions = d.n_directions;
            }
            if let Some(s) = d.adjust {
                p.adjust.strategy = s;
            }
            if d.force {
                p.force = true;
            }
        }
        Command::Simulate(s) => {
            commands::resolve_simulation(&mut cfg, s.sim_config.as_deref(), s.preset.as_deref())?;
            if s.threads.is_some() {
                cfg.threads = s.threads;
            }
            if s.per_replication {
                cfg.per_replication = true;
            }
            let seed = cfg.seed;
            let sim = cfg.simulation.as_mut().expect("resolved above");
            if let Some(r) = s.replications {
                sim.replications = r;
            }
            if let Some(seed) = seed {
                sim.seed = seed;
            }
            if let Some(k) = s.k_alpha {
                sim.pipeline.k_alpha = k;
            }
            if let Some(m) = s.estimator {
                sim.pipeline.estimator = m;
            }
        }
    }
    Ok(cfg)
}

fn run(cli: &Cli) -> Result<u8> {
    let cfg = resolve(cli)?;
    let mut out = Outputs::new(&cfg.output_dir)?;
    let (name, code) = match &cli.command {
        Command::Adequacy(_) => ("adequacy", commands::adequacy(&cfg, &mut out)?),
        Command::Estimate(_) => ("estimate", commands::estimate(&cfg, &mut out)?),
        Command::Detect(_) => ("detect", commands::detect(&cfg, &mut out)?),
        Command::Simulate(_) => ("simulate", commands::simulate(&cfg, &mut out)?),
    };
    let created_unix = std::time::SystemTime::now().duration_since(std::time::UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
    let mut outputs = out.written.clone();
    outputs.push("manifest.json".into());
    let manifest = Manifest {
        odfm_version: env!("CARGO_PKG_VERSION").to_string(),
        command: name.to_string(),
        created_unix,
        config: cfg,
        outputs,
    };
    out.json("manifest.json", &manifest)?;
    Ok(code)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
