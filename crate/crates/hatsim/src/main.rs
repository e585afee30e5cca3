// `!(x > 0.0)` style checks are used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod config;
mod error;
mod ini;
mod output;

use clap::{Args, Parser, Subcommand};
use commands::{Context, Cut};
use error::{CliError, CliResult};
use std::path::PathBuf;

#[derive(Parser)]
#[command(name = "hatsim", version, about = "Cloak and Schrödinger-hat simulator", after_help = config::CONFIG_HELP)]
struct Cli {
    /// Directory for CSV output (overrides `[run] output`; default `.`).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads (overrides HATSIM_WORKERS and `[run] workers`).
    #[arg(long, global = true)]
    workers: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Cfg {
    /// INI configuration file.
    config: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Find the hat and resonance values of tau1 and classify them.
    Tune(Cfg),
    /// s-wave fields of the empty and hat balls, with the probability table.
    Eigen(Cfg),
    /// Region probabilities for the empty and hat balls.
    Probs(Cfg),
    /// Three-card-monte expectations.
    Monte(Cfg),
    /// Coulomb self-interaction: E1, Q', and the eigenvalue slope.
    Interact(Cfg),
    /// Heterostructure design: mixing ratios, layer stack, convergence table.
    Hetero(Cfg),
    /// Plane-wave scattering, optionally with a field grid.
    Scatter {
        #[command(flatten)]
        cfg: Cfg,
        /// Plane for the field grid, e.g. `z=0`.
        #[arg(long)]
        plane: Option<String>,
        /// Grid points per axis (overrides `[run] grid`).
        #[arg(long)]
        grid: Option<usize>,
    },
    /// Field samples on a plane or along an axis.
    FieldDump {
        #[command(flatten)]
        cfg: Cfg,
        #[arg(long, conflicts_with = "axis", required_unless_present = "axis")]
        plane: Option<String>,
        /// Axis name: x, y or z.
        #[arg(long)]
        axis: Option<String>,
        #[arg(long)]
        grid: Option<usize>,
    },
}

fn workers(cli: Option<usize>, cfg: Option<usize>) -> CliResult<Option<usize>> {
    if cli.is_some() {
        return Ok(cli);
    }
    match std::env::var("HATSIM_WORKERS") {
        Ok(v) => v
            .trim()
            .parse::<usize>()
            .ok()
            .filter(|&n| n > 0)
            .map(Some)
            .ok_or_else(|| CliError::Validation(format!("HATSIM_WORKERS must be a positive integer, got `{v}`"))),
        Err(_) => Ok(cfg),
    }
}

fn run(cli: Cli) -> CliResult<()> {
    let path = match &cli.command {
        Command::Tune(c)
        | Command::Eigen(c)
        | Command::Probs(c)
        | Command::Monte(c)
        | Command::Interact(c)
        | Command::Hetero(c) => &c.config,
        Command::Scatter { cfg, .. } | Command::FieldDump { cfg, .. } => &cfg.config,
    };
    let cfg = config::load(path)?;
    if let Some(n) = workers(cli.workers, cfg.run.workers)? {
        if n == 0 {
            return Err(CliError::Validation("workers must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Validation(e.to_string()))?;
    }
    let name = match &cli.command {
        Command::Tune(_) => "tune",
        Command::Eigen(_) => "eigen",
        Command::Probs(_) => "probs",
        Command::Monte(_) => "monte",
        Command::Interact(_) => "interact",
        Command::Hetero(_) => "hetero",
        Command::Scatter { .. } => "scatter",
        Command::FieldDump { .. } => "field-dump",
    };
    let dir = cli.out.clone().or_else(|| cfg.run.output.clone()).unwrap_or_else(|| PathBuf::from("."));
    let sink = output::CsvSink::new(&dir, name, &cfg.sha256)?;
    let mut ctx = Context { cfg, sink };
    match cli.command {
        Command::Tune(_) => commands::tune(&mut ctx),
        Command::Eigen(_) => commands::eigen(&mut ctx),
        Command::Probs(_) => commands::probs(&mut ctx),
        Command::Monte(_) => commands::monte(&mut ctx),
        Command::Interact(_) => commands::interact(&mut ctx),
        Command::Hetero(_) => commands::hetero(&mut ctx),
        Command::Scatter { plane, grid, .. } => {
            let cut = plane.as_deref().map(commands::parse_plane).transpose()?;
            commands::scatter(&mut ctx, cut, grid)
        }
        Command::FieldDump { plane, axis, grid, .. } => {
            let cut: Cut = match (plane, axis) {
                (Some(p), _) => commands::parse_plane(&p)?,
                (None, Some(a)) => commands::parse_axis(&a)?,
                (None, None) => unreachable!("clap requires --plane or --axis"),
            };
            commands::field_dump(&mut ctx, cut, grid)
        }
    }
}

fn main() {
    let cli = Cli::parse();
    if let Err(e) = run(cli) {
        eprintln!("error: {}: {}", e.code(), e);
        std::process::exit(e.exit_code());
    }
}
