//! Command-line driver: batch optimization, evaluation and rendering,
//! baseline comparisons, fixture generation, and the live steering server.

pub mod commands;
pub mod config;
pub mod render;
pub mod serve;

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

pub use config::RunConfig;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// Bad flags, config or inputs. Exit code 2.
    #[error("{0}")]
    Usage(String),
    /// Failure while running. Exit code 1.
    #[error(transparent)]
    Core(#[from] stealth_core::Error),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            _ => 1,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "stealth", version, about = "Reflectivity-driven surface optimization")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

/// Flags shared by every config-driven command.
#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    /// Run configuration (TOML).
    #[arg(long)]
    pub config: PathBuf,
    /// Overrides the config seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Overrides the output directory.
    #[arg(long)]
    pub output: Option<PathBuf>,
}

impl RunArgs {
    pub fn resolve(&self) -> Result<RunConfig, CliError> {
        let mut cfg = RunConfig::load(&self.config)?;
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        if let Some(out) = &self.output {
            cfg.output = std::path::absolute(out).unwrap_or_else(|_| out.clone());
        }
        Ok(cfg)
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Runs the full optimization schedule and writes its artifacts.
    Optimize {
        #[command(flatten)]
        run: RunArgs,
        /// Writes an OBJ checkpoint every K vertex updates.
        #[arg(long)]
        checkpoint_every: Option<usize>,
    },
    /// Estimates the reflectivity energy of a mesh.
    Evaluate {
        #[command(flatten)]
        run: RunArgs,
        /// Mesh to evaluate instead of the config input.
        #[arg(long)]
        mesh: Option<PathBuf>,
        /// Light directions per face.
        #[arg(long)]
        n_dir: Option<usize>,
        /// Writes a retroreflection heatmap PNG.
        #[arg(long)]
        render: Option<PathBuf>,
        /// Writes per-face energies as CSV.
        #[arg(long)]
        per_face: Option<PathBuf>,
    },
    /// Runs the direct, preconditioned and alternating strategies on common
    /// seeds and tabulates their metrics.
    CompareBaselines {
        #[command(flatten)]
        run: RunArgs,
        /// Restricts the comparison to these strategies (repeatable).
        #[arg(long = "strategy")]
        strategies: Vec<String>,
    },
    /// Starts the steering server with a paused optimizer.
    Serve {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long)]
        checkpoint_every: Option<usize>,
        /// Starts running immediately instead of waiting for `resume`.
        #[arg(long)]
        no_pause: bool,
    },
    /// Writes a procedural fixture mesh as OBJ.
    Generate {
        shape: Shape,
        /// Subdivision level or grid resolution.
        #[arg(long, default_value_t = 3)]
        size: usize,
        #[arg(long)]
        output: PathBuf,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Shape {
    Icosphere,
    Cube,
    BentRidge,
    Plate,
    Wall,
    Blob,
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Optimize { run, checkpoint_every } => {
            let mut cfg = run.resolve()?;
            if let Some(k) = checkpoint_every {
                cfg.checkpoint_every = k;
            }
            let summary = commands::optimize(&cfg)?;
            println!("{summary}");
        }
        Command::Evaluate {
            run,
            mesh,
            n_dir,
            render,
            per_face,
        } => {
            let cfg = run.resolve()?;
            let report = commands::evaluate(
                &cfg,
                &commands::EvaluateOptions {
                    mesh,
                    n_dir,
                    render,
                    per_face,
                },
            )?;
            println!("{report}");
        }
        Command::CompareBaselines { run, strategies } => {
            let mut cfg = run.resolve()?;
            if !strategies.is_empty() {
                cfg.compare.strategies = strategies
                    .iter()
                    .map(|s| s.parse().map_err(|e: stealth_core::Error| CliError::Usage(e.to_string())))
                    .collect::<Result<_, _>>()?;
            }
            let path = commands::compare_baselines(&cfg)?;
            println!("comparison written to {}", path.display());
        }
        Command::Serve {
            run,
            port,
            checkpoint_every,
            no_pause,
        } => {
            let mut cfg = run.resolve()?;
            if let Some(k) = checkpoint_every {
                cfg.checkpoint_every = k;
            }
            serve::serve_blocking(cfg, port, !no_pause)?;
        }
        Command::Generate { shape, size, output } => {
            commands::generate(shape, size, &output)?;
            println!("wrote {}", output.display());
        }
    }
    Ok(())
}
