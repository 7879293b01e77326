use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use subsphere::harness::{
    cmd_asym, cmd_fit, cmd_mc, cmd_simulate, parse_axis, AsymArgs, CommandError, CommandResult, FitArgs, McArgs,
    SimulateArgs, EXIT_INPUT, EXIT_OK,
};
use subsphere::LossKind;

/// Fit concentric subspheres to polysphere data and run inference on the axis.
#[derive(Parser)]
#[command(name = "subsphere", version)]
struct Cli {
    /// Worker threads (defaults to all cores). Outputs do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit a dataset and write the fit as JSON.
    Fit {
        input: PathBuf,
        #[arg(long, default_value = "intrinsic")]
        loss: LossKind,
        #[arg(long, default_value_t = 3)]
        restarts: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Asymptotic covariance, axis confidence region and optional Wald test.
    Asym {
        input: PathBuf,
        fit: PathBuf,
        #[arg(long, default_value_t = 0.95)]
        level: f64,
        /// Comma-separated axis to test, e.g. "0,0,1".
        #[arg(long)]
        test_axis: Option<String>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Generate a dataset from a generator spec.
    Simulate {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        truth_out: Option<PathBuf>,
    },
    /// Run a Monte Carlo study and print its summary tables.
    Mc {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        csv_out: Option<PathBuf>,
    },
}

fn run(command: Command) -> CommandResult<i32> {
    match command {
        Command::Fit { input, loss, restarts, seed, out } => cmd_fit(&FitArgs { input, loss, restarts, seed, out }),
        Command::Asym { input, fit, level, test_axis, out } => {
            let test_axis = test_axis.as_deref().map(parse_axis).transpose()?;
            cmd_asym(&AsymArgs { input, fit, level, test_axis, out })
        }
        Command::Simulate { spec, out, truth_out } => cmd_simulate(&SimulateArgs { spec, out, truth_out }),
        Command::Mc { config, out, csv_out } => {
            print!("{}", cmd_mc(&McArgs { config, out, csv_out })?);
            Ok(EXIT_OK)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(threads) = cli.threads {
        pool = pool.num_threads(threads);
    }
    let pool = match pool.build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_INPUT as u8);
        }
    };
    let code = pool.install(|| run(cli.command)).unwrap_or_else(|e: CommandError| {
        eprintln!("error: {e}");
        e.code
    });
    ExitCode::from(code as u8)
}
