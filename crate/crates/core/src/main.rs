use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};

use phasefrac::io::{self, ConfigError, RunConfig, PRESETS};
use phasefrac::solver::{Simulation, StepRecord};

#[derive(Parser)]
#[command(
    name = "phasefrac",
    version,
    about = "Gradient-damage fracture by staggered alternate minimization"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a load program. Exit code 0: every step converged; 2: some step
    /// hit the iteration cap; 1: error.
    Run {
        /// TOML configuration; layered over --preset when both are given.
        config: Option<PathBuf>,
        /// Output directory (overrides [output] dir).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Built-in preset to start from.
        #[arg(long)]
        preset: Option<String>,
        /// Write a VTK snapshot every N steps (0 disables).
        #[arg(long)]
        snapshot_every: Option<usize>,
        /// Suppress per-step progress lines.
        #[arg(long)]
        quiet: bool,
    },
    /// List the built-in presets, or print one.
    Presets { name: Option<String> },
}

#[derive(Debug, thiserror::Error)]
enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{0}")]
    Run(String),
}

fn io_err(context: impl Into<String>) -> impl FnOnce(std::io::Error) -> CliError {
    let context = context.into();
    move |source| CliError::Io { context, source }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run {
            config,
            out,
            preset,
            snapshot_every,
            quiet,
        } => run(
            config.as_deref(),
            preset.as_deref(),
            out,
            snapshot_every,
            quiet,
        ),
        Command::Presets { name } => presets(name.as_deref()).map(|_| true),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

fn presets(name: Option<&str>) -> Result<(), CliError> {
    match name {
        None => {
            for (n, _) in PRESETS {
                println!("{n}");
            }
        }
        Some(n) => print!("{}", io::preset(n)?),
    }
    Ok(())
}

fn snapshot(sim: &Simulation, dir: &Path, name: &str) -> Result<(), CliError> {
    let path = dir.join(name);
    io::write_vtk(
        sim.discretization().mesh(),
        sim.displacement(),
        sim.damage(),
        &path,
    )
    .map_err(io_err(format!("writing {}", path.display())))
}

fn write_tables(history: &[StepRecord], dir: &Path) -> Result<(), CliError> {
    let curves = dir.join("curves.csv");
    io::write_curves(history, &curves).map_err(io_err(format!("writing {}", curves.display())))?;
    let diag = dir.join("diagnostics.csv");
    io::write_diagnostics(history, &diag).map_err(io_err(format!("writing {}", diag.display())))?;
    io::validate_curves(&curves)
        .map_err(|e| CliError::Run(format!("{}: {e}", curves.display())))?;
    Ok(())
}

fn run(
    config: Option<&Path>,
    preset: Option<&str>,
    out: Option<PathBuf>,
    snapshot_every: Option<usize>,
    quiet: bool,
) -> Result<bool, CliError> {
    let mut cfg: RunConfig = io::parse_config(config, preset)?;
    if let Some(dir) = out {
        cfg.output_dir = dir;
    }
    if let Some(n) = snapshot_every {
        cfg.snapshot_every = n;
        cfg.program.snapshot_every = n;
    }
    let dir = cfg.output_dir.clone();
    std::fs::create_dir_all(&dir).map_err(io_err(format!("creating {}", dir.display())))?;
    std::fs::write(dir.join("config.toml"), &cfg.resolved)
        .map_err(io_err("writing config.toml"))?;

    let mut sim = cfg.simulation()?;
    let mesh = sim.discretization().mesh();
    if !quiet {
        eprintln!(
            "{} {} elements, {} nodes, {} steps, l = {:.6} mm",
            mesh.kind(),
            mesh.num_elements(),
            mesh.num_nodes(),
            cfg.program.len(),
            cfg.material.internal_length()
        );
    }
    let start = Instant::now();
    loop {
        let rec = match sim.advance() {
            Ok(Some(r)) => r.clone(),
            Ok(None) => break,
            Err(e) => {
                write_tables(sim.history(), &dir)?;
                return Err(CliError::Run(format!(
                    "step {}: {e}",
                    sim.history().len() + 1
                )));
            }
        };
        if !quiet {
            eprintln!(
                "step {:5}  u = {:.4e}  F = {:.6e}  D = {:.6e}  iter = {:3}{}  [{:.1}s]",
                rec.step,
                rec.applied,
                rec.energies.reaction,
                rec.energies.dissipated,
                rec.iterations,
                if rec.converged {
                    ""
                } else {
                    " (not converged)"
                },
                start.elapsed().as_secs_f64()
            );
        }
        if cfg.snapshot_every > 0 && rec.step % cfg.snapshot_every == 0 {
            snapshot(&sim, &dir, &format!("step_{:05}.vtk", rec.step))?;
        }
    }
    snapshot(&sim, &dir, "final.vtk")?;
    write_tables(sim.history(), &dir)?;
    Ok(sim.history().iter().all(|r| r.converged))
}
