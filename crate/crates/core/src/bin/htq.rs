use std::process::ExitCode;

use clap::{Parser, Subcommand};

use heavytail::harness::commands::{self, Preset};
use heavytail::harness::CliError;

/// Heavy-tail-aware gradient quantization: fit tails, solve thresholds,
/// quantize, bound and simulate.
#[derive(Debug, Parser)]
#[command(name = "htq", version)]
struct Cli {
    /// Master seed for every random stream (default 0; `simulate` and
    /// `compare` keep the config's seed unless this is given).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Fit a power-law tail to a gradient dump.
    Fit(commands::FitArgs),
    /// Solve for the truncation threshold.
    Solve(commands::SolveArgs),
    /// Evaluate the convergence bound, optionally over a range of bit widths.
    Bound(commands::BoundArgs),
    /// Truncate, quantize and encode a gradient vector.
    Quantize(commands::QuantizeArgs),
    /// Decode a message back to a vector.
    Dequantize(commands::DequantizeArgs),
    /// Run one distributed SGD simulation.
    Simulate(commands::SimulateArgs),
    /// Run several schemes on one problem and tabulate them.
    Compare(commands::CompareArgs),
    /// Run a verification suite; exits 5 if any check fails.
    Verify(commands::VerifyArgs),
    /// Simulation config helpers.
    Config {
        #[command(subcommand)]
        action: ConfigAction,
    },
}

#[derive(Debug, Subcommand)]
enum ConfigAction {
    /// Print a complete config with every default filled in.
    PrintDefaults {
        #[arg(long, value_enum, default_value = "quadratic")]
        preset: Preset,
    },
}

fn run(cli: Cli) -> Result<(), CliError> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Usage(format!("--threads {n}: {e}")))?;
    }
    let seed = cli.seed.unwrap_or(0);
    match &cli.command {
        Command::Fit(a) => commands::fit(a, seed),
        Command::Solve(a) => commands::solve(a, seed),
        Command::Bound(a) => commands::bound(a, seed),
        Command::Quantize(a) => commands::quantize(a, seed),
        Command::Dequantize(a) => commands::dequantize(a, seed),
        Command::Simulate(a) => commands::simulate(a, cli.seed),
        Command::Compare(a) => commands::compare(a, cli.seed),
        Command::Verify(a) => commands::verify(a, seed),
        Command::Config {
            action: ConfigAction::PrintDefaults { preset },
        } => commands::print_defaults(*preset, seed),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let err = CliError::Usage(e.render().to_string().trim().to_string());
            eprintln!("{}", e.render());
            eprintln!("{}", err.to_json());
            return ExitCode::from(err.exit_code() as u8);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.to_json());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
