//! `xpoint`: deterministic front end to xpoint-core.
//!
//! Every run writes its outputs plus a `manifest.json` holding the fully
//! resolved config. `xpoint replay <manifest>` (or `--config <manifest>`
//! with the same subcommand) reproduces the outputs byte for byte.
//!
//! Precedence: command-line flags, then `XPOINT_*` environment variables,
//! then the config file, then built-in defaults.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod config;
mod error;
mod output;

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};

use config::{ControlKind, HjbKind, RunConfig};
use error::CliError;
use output::{Manifest, Outputs, MANIFEST};

#[derive(Debug, Parser)]
#[command(
    name = "xpoint",
    version,
    about = "Phase-space analysis and control of 1-DOF Hamiltonian systems"
)]
struct Cli {
    /// JSON config file, or a manifest from an earlier run.
    #[arg(long, global = true, env = "XPOINT_CONFIG")]
    config: Option<PathBuf>,
    /// Master seed (overrides the config).
    #[arg(long, global = true, env = "XPOINT_SEED")]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, env = "XPOINT_OUT", default_value = "out")]
    out: PathBuf,
    /// Worker threads for parallel scans; results do not depend on it.
    #[arg(long, global = true, env = "XPOINT_THREADS")]
    threads: Option<usize>,
    /// Model id (overrides the config).
    #[arg(long, global = true, env = "XPOINT_MODEL")]
    model: Option<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Integrate one trajectory.
    Simulate,
    /// Locate and classify equilibria.
    Equilibria,
    /// Trace the separatrix through the first x-point.
    Separatrix,
    /// Action, period and frequency table across a well.
    Orbit,
    /// Stimulus planning, viscosity scan, Kapitza threshold or a driven run.
    Control { kind: Option<ControlKind> },
    /// Generating function by characteristics, or the viscous value function.
    Hjb { kind: Option<HjbKind> },
    /// Scattering transform of a signal file or the built-in tone.
    Hst {
        #[arg(long)]
        input: Option<PathBuf>,
    },
    /// Reduced-order model tooling.
    Rom {
        #[command(subcommand)]
        action: RomAction,
    },
    /// Re-run the command recorded in a manifest.
    Replay { manifest: PathBuf },
}

#[derive(Debug, Clone, Copy, Subcommand)]
enum RomAction {
    /// Write the training and held-out pendulum trajectories.
    Dataset,
    Train,
    Predict,
    GradCheck,
}

impl Command {
    fn words(&self) -> Vec<String> {
        let w: Vec<&str> = match self {
            Command::Simulate => vec!["simulate"],
            Command::Equilibria => vec!["equilibria"],
            Command::Separatrix => vec!["separatrix"],
            Command::Orbit => vec!["orbit"],
            Command::Control { .. } => vec!["control"],
            Command::Hjb { .. } => vec!["hjb"],
            Command::Hst { .. } => vec!["hst"],
            Command::Rom { action } => vec![
                "rom",
                match action {
                    RomAction::Dataset => "dataset",
                    RomAction::Train => "train",
                    RomAction::Predict => "predict",
                    RomAction::GradCheck => "grad-check",
                },
            ],
            Command::Replay { .. } => vec!["replay"],
        };
        w.into_iter().map(String::from).collect()
    }
}

/// Loads a config document; a manifest contributes its `config` member.
fn load_config(path: &Path) -> Result<RunConfig, CliError> {
    let text =
        std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    let value: serde_json::Value =
        serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    let doc = match value.get("config") {
        Some(c) if value.get("command").is_some() => c.clone(),
        _ => value,
    };
    serde_json::from_value(doc).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

fn run(cli: Cli) -> Result<(), CliError> {
    let (command, mut cfg) = match cli.command {
        Command::Replay { manifest } => {
            let text = std::fs::read_to_string(&manifest)
                .map_err(|e| CliError::Config(format!("cannot read {}: {e}", manifest.display())))?;
            let m: Manifest =
                serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", manifest.display())))?;
            let argv = std::iter::once("xpoint".to_string()).chain(m.command.iter().cloned());
            let parsed = Cli::try_parse_from(argv).map_err(|e| CliError::Config(format!("manifest command: {e}")))?;
            if matches!(parsed.command, Command::Replay { .. }) {
                return Err(CliError::Config("a manifest cannot replay another replay".into()));
            }
            (parsed.command, m.config)
        }
        other => {
            let cfg = match &cli.config {
                Some(p) => load_config(p)?,
                None => RunConfig::default(),
            };
            (other, cfg)
        }
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(m) = cli.model {
        cfg.model.id = m;
    }
    match &command {
        Command::Control { kind: Some(k) } => cfg.control.kind = *k,
        Command::Hjb { kind: Some(k) } => cfg.hjb.kind = *k,
        Command::Hst { input: Some(p) } => cfg.hst.input = Some(p.clone()),
        _ => {}
    }
    cfg.resolve_static();
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Config(format!("thread pool: {e}")))?;
    }

    let start = Instant::now();
    let mut out = Outputs::new(&cli.out)?;
    match &command {
        Command::Simulate => commands::simulate(&mut cfg, &mut out)?,
        Command::Equilibria => commands::equilibria_cmd(&mut cfg, &mut out)?,
        Command::Separatrix => commands::separatrix_cmd(&mut cfg, &mut out)?,
        Command::Orbit => commands::orbit(&mut cfg, &mut out)?,
        Command::Control { .. } => commands::control(&mut cfg, &mut out)?,
        Command::Hjb { .. } => commands::hjb(&mut cfg, &mut out)?,
        Command::Hst { .. } => commands::hst(&mut cfg, &mut out)?,
        Command::Rom { action } => match action {
            RomAction::Dataset => commands::rom_dataset(&mut cfg, &mut out)?,
            RomAction::Train => commands::rom_train(&mut cfg, &mut out)?,
            RomAction::Predict => commands::rom_predict(&mut cfg, &mut out)?,
            RomAction::GradCheck => commands::rom_grad_check(&mut cfg, &mut out)?,
        },
        Command::Replay { .. } => unreachable!("resolved above"),
    }
    let manifest = Manifest {
        tool: env!("CARGO_PKG_NAME").to_string(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        command: command.words(),
        seed: cfg.seed,
        outputs: out.files().to_vec(),
        config: cfg,
        wall_time_s: start.elapsed().as_secs_f64(),
    };
    out.json(MANIFEST, &manifest)?;
    eprintln!("wrote {} files to {}", manifest.outputs.len() + 1, cli.out.display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
