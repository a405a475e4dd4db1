use std::path::PathBuf;
use std::process::ExitCode;

use asyncmb::commands::{cmd_estimate, cmd_replay, cmd_run, cmd_speedup, cmd_verify_bounds};
use asyncmb::{AppError, ExperimentConfig};
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(
    name = "asyncmb",
    version,
    about = "Asynchronous mini-batch mirror descent experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment and write its trace.
    Run(Common),
    /// Compare measured errors with the analytic bounds.
    VerifyBounds(Common),
    /// Measure S(p) = t1/tp with the threaded runner.
    Speedup(Common),
    /// Estimate L, sigma and c and the step sizes they induce.
    Estimate(Common),
    /// Re-execute a recorded delay log.
    Replay(Common),
}

#[derive(Args)]
struct Common {
    /// Experiment config (TOML).
    #[arg(long = "config", value_name = "PATH")]
    config_flag: Option<PathBuf>,
    #[arg(value_name = "CONFIG", conflicts_with = "config_flag")]
    config: Option<PathBuf>,
    /// Overrides engine.seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides output.csv.
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
}

impl Common {
    fn load(&self) -> asyncmb::Result<ExperimentConfig> {
        let mut cfg = match self.config_flag.as_ref().or(self.config.as_ref()) {
            Some(path) => ExperimentConfig::load(path)?,
            None => ExperimentConfig::default(),
        };
        if let Some(seed) = self.seed {
            cfg.engine.seed = seed;
        }
        if let Some(out) = &self.out {
            cfg.output.csv = Some(out.clone());
        }
        Ok(cfg)
    }
}

fn dispatch(cmd: &Command) -> asyncmb::Result<()> {
    match cmd {
        Command::Run(c) => println!("{}", cmd_run(&c.load()?)?),
        Command::Replay(c) => println!("{}", cmd_replay(&c.load()?)?),
        Command::Estimate(c) => println!("{}", cmd_estimate(&c.load()?)?),
        Command::Speedup(c) => print!("{}", cmd_speedup(&c.load()?)?),
        Command::VerifyBounds(c) => {
            let report = cmd_verify_bounds(&c.load()?)?;
            println!("{report}");
            if !report.passed() {
                return Err(AppError::BoundViolation(format!(
                    "worst ratio {:.4}",
                    report.worst_ratio()
                )));
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match dispatch(&cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
