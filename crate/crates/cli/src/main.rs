//! `sldp`: run experiments from a config file and write CSV/JSON artifacts.

mod config;

use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path as FsPath, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde_json::json;
use sldp_core::integrate::em_step_sde;
use sldp_core::ldpverify::{estimate_event, ldp_slope, write_estimates_csv, SlopePoint};
use sldp_core::mam::default_schedule;
use sldp_core::model::MODEL_NAMES;
use sldp_core::pullback::{pullback_skeleton, pullback_stationary};
use sldp_core::{
    action, integrate_skeleton, minimize_action, quasipotential, sample_noise, Control, Error,
    Init, ModelParams, ModelSpec, Path, TimeGrid,
};

use config::{one_line, ExperimentConfig, InitKind};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Validation(String),
    #[error(transparent)]
    Core(#[from] Error),
    #[error("{0}")]
    Io(String),
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl CliError {
    fn kind(&self) -> &'static str {
        match self {
            CliError::Validation(_) => "validation",
            CliError::Io(_) => "io",
            CliError::Core(e) => match e {
                Error::InvalidInput(_) => "invalid-input",
                Error::Config(_) => "config",
                Error::Range(_) => "range",
                Error::Divergence { .. } => "divergence",
                Error::NonConvergence { .. } => "non-convergence",
                Error::NonInvertibleDiffusion { .. } => "non-invertible-diffusion",
                Error::Stalled { .. } => "stalled",
                Error::InsufficientData(_) => "insufficient-data",
                Error::Io(_) => "io",
            },
        }
    }

    fn exit_code(&self) -> u8 {
        match self {
            CliError::Core(e) if e.is_numerical() => 3,
            CliError::Io(_) | CliError::Core(Error::Io(_)) => 1,
            _ => 2,
        }
    }
}

#[derive(Parser, Debug)]
#[command(
    name = "sldp",
    version,
    about = "Stationary solutions, pullback and large deviations for SPDE models"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Experiment config (TOML, `version = 1`).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output root; artifacts go to `<out>/<command>/`.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
}

#[derive(Subcommand, Debug, Clone, Copy, PartialEq, Eq)]
enum Command {
    /// Euler–Maruyama trajectory from an initial state.
    Simulate,
    /// Stationary solution on a view window by pullback.
    Pullback,
    /// Controlled skeleton trajectory.
    Skeleton,
    /// Action of a path read from CSV.
    Action,
    /// Minimum-action path at one horizon.
    Mam,
    /// Quasi-potential by horizon continuation.
    Qpot,
    /// Monte Carlo tail estimates and the small-noise slope fit.
    VerifyLdp,
    /// The shipped models and their constants.
    Models,
}

impl Command {
    fn dir_name(self) -> &'static str {
        match self {
            Command::Simulate => "simulate",
            Command::Pullback => "pullback",
            Command::Skeleton => "skeleton",
            Command::Action => "action",
            Command::Mam => "mam",
            Command::Qpot => "qpot",
            Command::VerifyLdp => "verify-ldp",
            Command::Models => "models",
        }
    }
}

fn missing(block: &str) -> CliError {
    CliError::Validation(format!("config has no [{block}] block"))
}

fn create(dir: &FsPath, name: &str) -> Result<BufWriter<File>, CliError> {
    Ok(BufWriter::new(File::create(dir.join(name))?))
}

fn write_json(dir: &FsPath, name: &str, v: &serde_json::Value) -> Result<(), CliError> {
    let mut w = create(dir, name)?;
    serde_json::to_writer_pretty(&mut w, v).map_err(|e| CliError::Io(e.to_string()))?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

fn write_path(dir: &FsPath, name: &str, p: &Path) -> Result<(), CliError> {
    let mut w = create(dir, name)?;
    p.write_csv(&mut w)?;
    w.flush()?;
    Ok(())
}

fn grid(view: [f64; 2], dt: Option<f64>, model: &ModelSpec) -> Result<TimeGrid, CliError> {
    Ok(TimeGrid::with_dt(
        view[0],
        view[1],
        dt.unwrap_or_else(|| model.default_dt()),
    )?)
}

fn models_json() -> serde_json::Value {
    let list: Vec<_> = MODEL_NAMES
        .iter()
        .map(|n| {
            let m = ModelSpec::by_name(n, &ModelParams::default()).expect("defaults are valid");
            json!({
                "name": m.name(),
                "dim": m.dim(),
                "modes": m.modes(),
                "constants": m.constants(),
                "eps0": m.eps0(),
                "trace_q": m.trace_q(),
                "global_hypothesis": m.satisfies_hypothesis_globally(),
                "autonomous": m.is_autonomous(),
            })
        })
        .collect();
    json!(list)
}

fn run(cli: &Cli) -> Result<(), CliError> {
    let dir = cli.out.join(cli.command.dir_name());
    if cli.command == Command::Models {
        let v = models_json();
        println!("{}", serde_json::to_string_pretty(&v).expect("json"));
        fs::create_dir_all(&dir)?;
        return write_json(&dir, "models.json", &v);
    }
    let path = cli
        .config
        .as_deref()
        .ok_or_else(|| CliError::Validation("--config is required for this command".into()))?;
    let mut cfg = ExperimentConfig::load(path)?;
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    let model = cfg.build_model()?;
    fs::create_dir_all(&dir)?;
    fs::write(dir.join("config.toml"), cfg.to_toml())?;
    let seed = cfg.seed;
    match cli.command {
        Command::Simulate => {
            let c = cfg.simulate.as_ref().ok_or_else(|| missing("simulate"))?;
            let g = grid([c.t_start, c.t_end], c.dt, &model)?;
            let x0 = c.x0.clone().unwrap_or_else(|| model.equilibrium().to_vec());
            let noise = sample_noise(&g, model.modes(), seed)?;
            let p = em_step_sde(&model, &x0, &g, &noise, c.eps)?;
            write_path(&dir, "path.csv", &p)
        }
        Command::Pullback => {
            let c = cfg.pullback.as_ref().ok_or_else(|| missing("pullback"))?;
            let view = grid(c.view, c.dt, &model)?;
            let (p, diag) = pullback_stationary(&model, c.eps, seed, &view, &c.options)?;
            write_path(&dir, "path.csv", &p)?;
            write_json(&dir, "diag.json", &diag.to_json())
        }
        Command::Skeleton => {
            let c = cfg.skeleton.as_ref().ok_or_else(|| missing("skeleton"))?;
            let g = grid(c.view, c.dt, &model)?;
            let v = match &c.control {
                Some(f) => Control::read_csv(BufReader::new(File::open(f)?))?,
                None => Control::zero(g, model.modes()),
            };
            if c.pullback {
                let (p, diag) = pullback_skeleton(&model, &v, &g, &c.options)?;
                write_path(&dir, "path.csv", &p)?;
                write_json(&dir, "diag.json", &diag.to_json())
            } else {
                let x0 = c.x0.clone().unwrap_or_else(|| model.equilibrium().to_vec());
                let p = integrate_skeleton(&model, &x0, &g, &v)?;
                write_path(&dir, "path.csv", &p)
            }
        }
        Command::Action => {
            let c = cfg.action.as_ref().ok_or_else(|| missing("action"))?;
            let u = Path::read_csv(BufReader::new(File::open(&c.path)?))?;
            let r = action(&model, &u)?;
            let mut w = create(&dir, "control.csv")?;
            r.control.write_csv(&mut w)?;
            w.flush()?;
            write_json(&dir, "action.json", &r.to_json())
        }
        Command::Mam => {
            let c = cfg.mam.as_ref().ok_or_else(|| missing("mam"))?;
            let init = match c.init {
                InitKind::Linear => Init::Linear,
                InitKind::ReversedFlow => Init::ReversedFlow,
            };
            match minimize_action(&model, &c.target, c.horizon, c.steps, &init, &c.options) {
                Ok(r) => {
                    write_path(&dir, "path.csv", &r.path)?;
                    write_json(
                        &dir,
                        "result.json",
                        &json!({
                            "value": r.value,
                            "iterations": r.iterations,
                            "grad_sup": r.grad_sup,
                            "converged": r.converged,
                        }),
                    )
                }
                Err(Error::Stalled {
                    iterations,
                    value,
                    best,
                }) => {
                    write_path(&dir, "best.csv", &best)?;
                    Err(Error::Stalled {
                        iterations,
                        value,
                        best,
                    }
                    .into())
                }
                Err(e) => Err(e.into()),
            }
        }
        Command::Qpot => {
            let c = cfg.qpot.as_ref().ok_or_else(|| missing("qpot"))?;
            let schedule = c
                .schedule
                .clone()
                .unwrap_or_else(|| default_schedule(&model));
            let q = quasipotential(
                &model,
                &c.target,
                &schedule,
                c.steps_per_unit,
                c.tol,
                &c.options,
            )?;
            write_path(&dir, "path.csv", &q.path)?;
            write_json(&dir, "qpot.json", &q.to_json())
        }
        Command::VerifyLdp => {
            let c = cfg
                .verify_ldp
                .as_ref()
                .ok_or_else(|| missing("verify-ldp"))?;
            let est = estimate_event(&model, &c.eps, &c.event, c.samples, seed, &c.sampling)?;
            let mut w = create(&dir, "estimates.csv")?;
            write_estimates_csv(&est, &mut w)?;
            w.flush()?;
            if let Some(reference) = c.reference {
                let points: Vec<SlopePoint> =
                    est.iter().filter_map(SlopePoint::from_estimate).collect();
                match ldp_slope(&points, reference) {
                    Ok(fit) => write_json(&dir, "fit.json", &fit.to_json())?,
                    Err(e @ Error::InsufficientData(_)) => log::warn!("no slope fit: {e}"),
                    Err(e) => return Err(e.into()),
                }
            }
            Ok(())
        }
        Command::Models => unreachable!("handled above"),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!(
                "{}",
                json!({"error": e.kind(), "message": one_line(&e.to_string())})
            );
            ExitCode::from(e.exit_code())
        }
    }
}
