#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use obstacle_ocp::cli::{self, ScenarioConfig, Which, EXIT_USAGE};
use obstacle_ocp::Result;

#[derive(Parser)]
#[command(name = "obstacle-ocp", version, about = "Optimal control of the obstacle problem with a state bound")]
struct Args {
    #[command(subcommand)]
    command: Command,

    /// Scenario file (flat key = value)
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output directory (overrides `out` in the config)
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Seed for sampled directions and oracle instances
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Last penalty parameter of the schedule
    #[arg(long, global = true)]
    gamma_max: Option<f64>,
}

#[derive(Subcommand)]
enum Command {
    /// Run the penalty path and write fields, history and reports
    Solve,
    /// Check a stationarity concept at previously written fields
    Verify {
        /// b, c, strong or normal-cone
        #[arg(long)]
        which: String,
        /// Directory with u.txt, p.txt, nu.txt, ... (default: <out>/fields)
        #[arg(long)]
        fields: Option<PathBuf>,
    },
    /// Cross-check the solvers against dense reference computations
    Oracle,
    /// Evaluate the Slater margin of the configured u_hat
    Slater,
}

fn run(args: Args, log: &mut dyn Write) -> Result<i32> {
    let mut cfg = match &args.config {
        Some(path) => ScenarioConfig::load(path)?,
        None => ScenarioConfig::parse("")?,
    };
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(g) = args.gamma_max {
        if !(g >= cfg.gamma_start) {
            return Err(obstacle_ocp::Error::InvalidArgument(format!(
                "--gamma-max {g} is below gamma_start {}",
                cfg.gamma_start
            )));
        }
        cfg.gamma_end = g;
    }
    let out = args
        .out
        .clone()
        .or_else(|| cfg.out.clone())
        .unwrap_or_else(|| PathBuf::from("out"));
    match args.command {
        Command::Solve => cli::run_solve(&cfg, &out, log),
        Command::Verify { which, fields } => {
            let which: Which = which.parse()?;
            let fields = fields.unwrap_or_else(|| out.join("fields"));
            cli::run_verify(&cfg, &fields, which, &out, log)
        }
        Command::Oracle => cli::run_oracle(&cfg, log),
        Command::Slater => cli::run_slater(&cfg, log),
    }
}

fn main() -> ExitCode {
    let args = match Args::try_parse() {
        Ok(a) => a,
        Err(e) => {
            let _ = e.print();
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            return ExitCode::from(code as u8);
        }
    };
    let stdout = io::stdout();
    let mut lock = stdout.lock();
    let code = match run(args, &mut lock) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            cli::exit_code(&e)
        }
    };
    let _ = lock.flush();
    ExitCode::from(code as u8)
}
