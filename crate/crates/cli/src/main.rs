use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use pulsegrad_cli::gradcheck::{GradcheckOptions, Kernels};
use pulsegrad_cli::shape_io::ShapeFormat;
use pulsegrad_cli::{CliError, Overrides};

#[derive(Parser)]
#[command(name = "pulsegrad", version, about = "Single-spin pulse optimization with exact gradients")]
struct Cli {
    /// Worker threads (0 = one per core).
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Optimize a pulse from a JSON run configuration.
    Optimize {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Shape format to write; both when omitted.
        #[arg(long)]
        format: Option<ShapeFormat>,
        #[arg(long)]
        basis: Option<String>,
        #[arg(long)]
        starts: Option<usize>,
    },
    /// Simulate the offset/B1 profile of a shape.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        /// Shape file; defaults to "shape" in the config.
        #[arg(long)]
        shape: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check analytical derivatives against independent oracles.
    Gradcheck {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Basis name, or all, cartesian, polar.
        #[arg(long, default_value = "all")]
        basis: String,
        /// Kernel-level parameter draws per basis.
        #[arg(long, default_value_t = 200)]
        draws: usize,
        /// Random shapes per basis, digit count and constraint.
        #[arg(long, default_value_t = 3)]
        instances: usize,
    },
    /// Time the derivative kernels.
    Bench {
        #[arg(long, default_value_t = 1000)]
        calls: usize,
        #[arg(long, default_value_t = 15)]
        repeats: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn run(cli: Cli) -> Result<String, CliError> {
    if cli.threads > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(cli.threads)
            .build_global()
            .map_err(|e| CliError::Validation(format!("--threads: {e}")))?;
    }
    match cli.command {
        Command::Optimize { config, seed, out, format, basis, starts } => {
            let cfg = pulsegrad_cli::load_config(&config, &Overrides { seed, out, basis, starts })?;
            pulsegrad_cli::cmd_optimize(&cfg, format)
        }
        Command::Simulate { config, shape, out } => {
            let cfg = pulsegrad_cli::load_config(&config, &Overrides { out, ..Overrides::default() })?;
            pulsegrad_cli::cmd_simulate(&cfg, shape.as_deref())
        }
        Command::Gradcheck { seed, basis, draws, instances } => {
            let opts = GradcheckOptions {
                seed,
                kernel_draws: draws,
                instances,
                bases: pulsegrad_cli::parse_basis_selection(&basis)?,
                ..GradcheckOptions::default()
            };
            pulsegrad_cli::cmd_gradcheck(&opts, &Kernels::default())
        }
        Command::Bench { calls, repeats, seed } => Ok(pulsegrad_cli::cmd_bench(calls, repeats, seed)),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(out) => {
            print!("{out}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
