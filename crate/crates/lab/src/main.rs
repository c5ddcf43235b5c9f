use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand as ClapSubcommand};
use gasket_lab::config::{config_schema, Arithmetic, BoundsWhich, Format, MeasureKindArg, RunConfig, SchemeArg, Subcommand};
use gasket_lab::problem::problem_schema;
use gasket_lab::{output, run, LabError, LabResult, RayonRunner};

#[derive(Parser)]
#[command(name = "gasket", version, about = "Finite-level calculus, random walks and BSDEs on the Sierpinski gasket")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Global {
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Worker threads for path ensembles (default: all cores).
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Output file; stdout if omitted. A `<out>.meta.json` sidecar is written next to it.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    format: Format,
    #[arg(long, global = true, value_enum, default_value_t = Arithmetic::Exact)]
    arithmetic: Arithmetic,
}

#[derive(ClapSubcommand)]
enum Command {
    /// Vertices of V_m with exact coordinates (edges go to `<out>.edges.csv`).
    Graph {
        #[arg(long)]
        level: u8,
    },
    /// Harmonic extension of boundary values to V_m, with per-cell gradients.
    Harmonic {
        #[arg(long)]
        level: u8,
        /// Three rationals, e.g. `1,0,-1/2`.
        #[arg(long, value_delimiter = ',', num_args = 3)]
        boundary: Vec<String>,
    },
    /// Cell masses of μ, ν or an energy measure.
    Measure {
        #[arg(long, value_enum)]
        kind: MeasureKindArg,
        #[arg(long)]
        level: u8,
        #[arg(long, value_delimiter = ',', num_args = 3)]
        boundary: Option<Vec<String>>,
    },
    /// Random-walk ensemble: one row per path.
    Walk {
        #[arg(long)]
        level: u8,
        #[arg(long)]
        paths: u64,
        #[arg(long)]
        horizon: f64,
        /// `stationary`, `vertex:<id>` or `cell:<word>`.
        #[arg(long)]
        start: Option<String>,
        /// Absorb at V_0.
        #[arg(long)]
        killed: bool,
    },
    /// Backward SDE on the level-m chain: rows (step, vertex_id, Y, Z).
    Bsde {
        #[arg(long)]
        problem: PathBuf,
        #[arg(long)]
        level: u8,
        #[arg(long, value_enum)]
        scheme: Option<SchemeArg>,
        /// Override of the time step per walk step.
        #[arg(long = "dt-per-step")]
        dt: Option<f64>,
    },
    /// Weak-form parabolic solver: rows (layer, vertex_id, u), gradients in `<out>.grad.csv`.
    Pde {
        #[arg(long)]
        problem: PathBuf,
        #[arg(long)]
        level: u8,
        #[arg(long)]
        dt: Option<f64>,
    },
    /// Cross-checks and bound verifications.
    Check {
        #[command(subcommand)]
        which: Check,
    },
    /// Runs a JSON RunConfig (see `gasket schema`).
    Run {
        #[arg(long)]
        config: PathBuf,
    },
    /// Prints the JSON schema of run configs or problem files.
    Schema {
        #[arg(long, value_parser = ["config", "problem"], default_value = "config")]
        of: String,
    },
}

#[derive(ClapSubcommand)]
enum Check {
    /// PDE solution against the killed BSDE along a level ladder.
    Fk {
        #[arg(long)]
        problem: PathBuf,
        #[arg(long, value_delimiter = ',')]
        levels: Vec<u8>,
        #[arg(long, value_delimiter = ',')]
        times: Option<Vec<f64>>,
    },
    /// Moment, Mittag-Leffler, Beta-chain and exp-integral checks.
    Bounds {
        #[arg(long, value_enum)]
        which: BoundsWhich,
        #[arg(long)]
        level: Option<u8>,
        #[arg(long)]
        paths: Option<u64>,
        #[arg(long, value_delimiter = ',')]
        betas: Option<Vec<f64>>,
        #[arg(long, value_delimiter = ',')]
        times: Option<Vec<f64>>,
        #[arg(long)]
        horizon: Option<f64>,
        #[arg(long)]
        start: Option<String>,
    },
    /// Picard iterate distances in the V^β norm.
    Contraction {
        #[arg(long)]
        problem: PathBuf,
        #[arg(long)]
        level: u8,
        #[arg(long)]
        paths: u64,
        #[arg(long)]
        iters: Option<usize>,
        #[arg(long)]
        start: Option<String>,
    },
    /// Exact energy, self-similarity and Kusuoka identities up to a level.
    Identity {
        #[arg(long)]
        level: u8,
    },
}

fn triple(v: Vec<String>) -> Option<[String; 3]> {
    v.try_into().ok()
}

fn to_config(cli: Cli) -> LabResult<Option<RunConfig>> {
    let g = cli.global;
    let base = |s: Subcommand| {
        let mut c = RunConfig::new(s);
        c.seed = g.seed;
        c.workers = g.workers;
        c.out = g.out.clone();
        c.format = g.format;
        c.arithmetic = g.arithmetic;
        c
    };
    let cfg = match cli.command {
        Command::Graph { level } => RunConfig { level: Some(level), ..base(Subcommand::Graph) },
        Command::Harmonic { level, boundary } => {
            RunConfig { level: Some(level), boundary: triple(boundary), ..base(Subcommand::Harmonic) }
        }
        Command::Measure { kind, level, boundary } => RunConfig {
            level: Some(level),
            kind: Some(kind),
            boundary: boundary.and_then(triple),
            ..base(Subcommand::Measure)
        },
        Command::Walk { level, paths, horizon, start, killed } => RunConfig {
            level: Some(level),
            paths: Some(paths),
            horizon: Some(horizon),
            start,
            killed: Some(killed),
            ..base(Subcommand::Walk)
        },
        Command::Bsde { problem, level, scheme, dt } => {
            RunConfig { problem: Some(problem), level: Some(level), scheme, dt, ..base(Subcommand::Bsde) }
        }
        Command::Pde { problem, level, dt } => RunConfig { problem: Some(problem), level: Some(level), dt, ..base(Subcommand::Pde) },
        Command::Check { which } => match which {
            Check::Fk { problem, levels, times } => {
                RunConfig { problem: Some(problem), levels: Some(levels), times, ..base(Subcommand::CheckFk) }
            }
            Check::Bounds { which, level, paths, betas, times, horizon, start } => RunConfig {
                which: Some(which),
                level,
                paths,
                betas,
                times,
                horizon,
                start,
                ..base(Subcommand::CheckBounds)
            },
            Check::Contraction { problem, level, paths, iters, start } => RunConfig {
                problem: Some(problem),
                level: Some(level),
                paths: Some(paths),
                iters,
                start,
                ..base(Subcommand::CheckContraction)
            },
            Check::Identity { level } => RunConfig { level: Some(level), ..base(Subcommand::CheckIdentity) },
        },
        Command::Run { config } => {
            let text = std::fs::read_to_string(&config).map_err(|e| LabError::io(&config, e))?;
            let mut c = RunConfig::from_json(&text)?;
            // Command-line globals override the file only when given explicitly.
            if g.workers.is_some() {
                c.workers = g.workers;
            }
            if g.out.is_some() {
                c.out = g.out;
            }
            c
        }
        Command::Schema { of } => {
            let s = if of == "problem" { problem_schema() } else { config_schema() };
            println!("{}", serde_json::to_string_pretty(&s)?);
            return Ok(None);
        }
    };
    Ok(Some(cfg))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = to_config(cli).and_then(|cfg| {
        let Some(cfg) = cfg else { return Ok(()) };
        let start = Instant::now();
        let out = run(&cfg)?;
        let workers = RayonRunner::new(cfg.workers).workers();
        output::emit(&cfg, &out, start.elapsed().as_secs_f64(), workers)?;
        Ok(())
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
