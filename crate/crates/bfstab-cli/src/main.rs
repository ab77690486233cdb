mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::Field;
use config::{ConfigError, Flags, RunConfig};

#[derive(Parser)]
#[command(name = "bfstab", version, about = "Benjamin-Feir stability of finite-depth Stokes waves")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    flags: Flags,
}

#[derive(Subcommand)]
enum Command {
    /// Depth-dependent coefficients over an h-grid.
    Coeffs,
    /// The critical depth where e_WB changes sign.
    CriticalDepth,
    /// Stokes expansion and residual, or one Fourier field with --field.
    Stokes {
        #[arg(long, value_enum)]
        field: Option<Field>,
    },
    /// Floquet spectrum at (h, eps, mu) with the near-zero quadruple flagged.
    Spectrum {
        /// Also write the operator matrix as (row, col, re, im) CSV.
        #[arg(long, value_name = "PATH")]
        dump_matrix: Option<PathBuf>,
    },
    /// Leading-order figure-8 locus.
    Figure8 {
        #[arg(long, default_value_t = 201)]
        samples: usize,
    },
    /// Unstable band edge, analytic against numeric, over an eps-grid.
    Band,
    /// Every stage of the block-decoupling pipeline.
    Reduce,
    /// Run the acceptance suite.
    Validate,
}

pub enum Failure {
    Config(String),
    Compute(String),
    Io(String),
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Config(e.0)
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    let cfg = RunConfig::resolve(&cli.flags)?;
    if let Command::Figure8 { samples } = &cli.command {
        if *samples < 2 {
            return Err(Failure::Config("samples must be at least 2".into()));
        }
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.jobs)
        .build()
        .map_err(|e| Failure::Config(e.to_string()))?;
    let table = pool.install(|| match &cli.command {
        Command::Coeffs => commands::coeffs(&cfg),
        Command::CriticalDepth => commands::critical(&cfg),
        Command::Stokes { field } => commands::stokes(&cfg, *field),
        Command::Spectrum { dump_matrix } => commands::spectrum(&cfg, dump_matrix.as_deref()),
        Command::Figure8 { samples } => commands::figure(&cfg, *samples),
        Command::Band => commands::band(&cfg),
        Command::Reduce => commands::reduce(&cfg),
        Command::Validate => commands::validate(&cfg),
    })?;
    match (&cli.command, &cfg.out) {
        (_, Some(path)) => commands::write_file(path, &table, cfg.format),
        (Command::Validate, None) => Ok(()),
        (_, None) => table
            .write(cfg.format, std::io::stdout().lock())
            .map_err(|e| Failure::Io(e.to_string())),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(msg)) => {
            eprintln!("error: config: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Compute(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Io(msg)) => {
            eprintln!("error: io: {msg}");
            ExitCode::from(1)
        }
    }
}
