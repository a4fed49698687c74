use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use lrkit::commands::{self, Command, RunOptions};
use lrkit_core::Execution;

#[derive(Parser)]
#[command(name = "lrkit", version, about = "Lieb-Robinson bound verification for finite spin-1/2 systems")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Commutator norms and both bounds on the configured grid.
    Simulate(Args),
    /// Interaction norm, convolution constants and velocities.
    Bound(Args),
    /// Threshold-crossing light cone.
    Lightcone(Args),
    /// Run every invariant check and print a table.
    Verify(Args),
}

#[derive(clap::Args)]
struct Args {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads for grid sweeps.
    #[arg(long)]
    threads: Option<usize>,
    /// Overrides the config seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Lift the site cap. Runtime and memory grow as 4^sites.
    #[arg(long)]
    allow_large: bool,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (command, args) = match cli.command {
        Cmd::Simulate(a) => (Command::Simulate, a),
        Cmd::Bound(a) => (Command::Bound, a),
        Cmd::Lightcone(a) => (Command::Lightcone, a),
        Cmd::Verify(a) => (Command::Verify, a),
    };
    if let Err(code) = configure_threads(args.threads) {
        return code;
    }
    let opts = RunOptions {
        out_dir: args.out,
        seed: args.seed,
        allow_large: args.allow_large,
        exec: Execution::Parallel,
    };
    let stdout = std::io::stdout();
    match commands::run(command, &args.config, &opts, &mut stdout.lock()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("lrkit: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

fn configure_threads(threads: Option<usize>) -> Result<(), ExitCode> {
    let Some(n) = threads else { return Ok(()) };
    if n == 0 {
        eprintln!("lrkit: --threads must be at least 1");
        return Err(ExitCode::from(2));
    }
    #[cfg(feature = "parallel")]
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(|e| {
        eprintln!("lrkit: cannot start thread pool: {e}");
        ExitCode::from(2)
    })?;
    Ok(())
}
