//! `speq` — solve, optimize and verify equilibrium problems on spheres with
//! point-charge external fields.
//!
//! Exit codes: 0 success, 1 configuration or I/O error, 2 infeasible
//! (overlapping caps), 3 optimizer line-search failure, 4 failed
//! verification. Artifacts are written before a non-zero exit.

mod commands;
mod config;
mod error;
mod output;

use std::io::Read;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::commands::{Context, SolveOutput, SOLVE_FORMAT};
use crate::config::{figure_preset, RunConfig};
use crate::error::CliError;
use crate::output::{read_points, OutputDir};

#[derive(Parser)]
#[command(
    name = "speq",
    version,
    about = "Equilibrium supports and minimal-energy points on spheres with point-charge fields"
)]
struct Cli {
    /// Worker threads; 1 (the default) gives bitwise reproducible results.
    #[arg(long, global = true, default_value_t = 1)]
    threads: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Input {
    /// JSON configuration file (`-` for stdin).
    #[arg(long, conflicts_with = "figure")]
    config: Option<PathBuf>,
    /// Built-in parameter preset 1–4.
    #[arg(long, value_parser = clap::value_parser!(u8).range(1..=4))]
    figure: Option<u8>,
    /// Alternative position of the second charge (presets 1 and 3).
    #[arg(long, requires = "figure")]
    variant: bool,
    /// Output directory.
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Support of the equilibrium measure (result.json, density_profile.csv).
    Solve {
        #[command(flatten)]
        input: Input,
        /// Also include the planar image (logarithmic case).
        #[arg(long)]
        planar: bool,
    },
    /// Minimal-energy points (points.csv, result.json).
    Optimize {
        #[command(flatten)]
        input: Input,
        /// Number of points.
        #[arg(short = 'n', long)]
        n: Option<usize>,
        #[arg(long)]
        restarts: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Variational, planar, cap-exclusion and density checks (result.json).
    Verify {
        #[command(flatten)]
        input: Input,
        /// A `solve` result.json; its problem is used when no configuration is given.
        #[arg(long)]
        solution: Option<PathBuf>,
        /// A points.csv from `optimize` for the cap-exclusion and density checks.
        #[arg(long)]
        points: Option<PathBuf>,
        /// Monte-Carlo samples per evaluation point.
        #[arg(long)]
        samples: Option<usize>,
        /// Evaluation points of the variational check.
        #[arg(long)]
        grid: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Planar image of the logarithmic problem under stereographic projection.
    Kelvin {
        #[command(flatten)]
        input: Input,
    },
    /// Caps of electrostatic influence (d = 2, s ∈ {0, 1}).
    Influence {
        #[command(flatten)]
        input: Input,
    },
}

fn read_text(path: &Path) -> Result<String, CliError> {
    if path == Path::new("-") {
        let mut s = String::new();
        std::io::stdin().read_to_string(&mut s)?;
        Ok(s)
    } else {
        std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }
}

fn load(input: &Input, fallback: Option<RunConfig>) -> Result<RunConfig, CliError> {
    let mut cfg = match (&input.config, input.figure) {
        (Some(path), _) => RunConfig::parse(&read_text(path)?)?,
        (None, Some(f)) => figure_preset(f, input.variant)?,
        (None, None) => {
            fallback.ok_or_else(|| CliError::Config("give --config FILE or --figure N".into()))?
        }
    };
    cfg.apply_seed_override(std::env::var("RE_SEED").ok())?;
    Ok(cfg)
}

fn load_solution(path: &Path) -> Result<SolveOutput, CliError> {
    let out: SolveOutput = serde_json::from_str(&read_text(path)?)
        .map_err(|e| CliError::Config(format!("{}: not a solve result: {e}", path.display())))?;
    if out.format != SOLVE_FORMAT {
        return Err(CliError::Config(format!(
            "{}: unknown format {:?}",
            path.display(),
            out.format
        )));
    }
    Ok(out)
}

fn run(cli: Cli) -> Result<(), CliError> {
    if cli.threads == 0 {
        return Err(CliError::Config("--threads must be at least 1".into()));
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(cli.threads)
        .build_global()
        .map_err(|e| CliError::Config(format!("thread pool: {e}")))?;
    let parallel = cli.threads > 1;
    let context = |input: &Input| -> Result<Context, CliError> {
        Ok(Context {
            out: OutputDir::new(&input.out)?,
            parallel,
        })
    };
    match cli.command {
        Command::Solve { input, planar } => {
            commands::solve_cmd(&load(&input, None)?, planar, &context(&input)?)
        }
        Command::Optimize {
            input,
            n,
            restarts,
            seed,
        } => {
            let mut cfg = load(&input, None)?;
            if let Some(n) = n {
                cfg.optimize.n = n;
            }
            if let Some(r) = restarts {
                cfg.optimize.restarts = r;
            }
            if let Some(s) = seed {
                cfg.optimize.seed = s;
            }
            commands::optimize_cmd(&cfg, &context(&input)?)
        }
        Command::Verify {
            input,
            solution,
            points,
            samples,
            grid,
            seed,
        } => {
            let stored = solution.as_deref().map(load_solution).transpose()?;
            let fallback = stored
                .as_ref()
                .map(|s| RunConfig::from_problem(s.problem.clone()));
            let mut cfg = load(&input, fallback)?;
            if let Some(v) = samples {
                cfg.verify.samples = v;
            }
            if let Some(v) = grid {
                cfg.verify.grid = v;
            }
            if let Some(v) = seed {
                cfg.verify.seed = v;
            }
            let points = points.as_deref().map(read_points).transpose()?;
            commands::verify_cmd(&cfg, stored.as_ref(), points.as_deref(), &context(&input)?)
        }
        Command::Kelvin { input } => commands::kelvin_cmd(&load(&input, None)?, &context(&input)?),
        Command::Influence { input } => {
            commands::influence_cmd(&load(&input, None)?, &context(&input)?)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // Usage errors are configuration errors (exit 1), not clap's 2.
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
