//! `polar-park`: simulate, compare, sweep and certify the parking controllers.
//!
//! Exit codes: 0 success, 1 usage or config error, 2 a certification check
//! failed, 3 runtime failure (no initial condition produced a usable run).

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::builder::PossibleValuesParser;
use clap::{Parser, Subcommand, ValueEnum};
use polar_park::{Frame, Suite};

use commands::{OutputFailure, Outcome, Settings};
use config::ExperimentConfig;

#[derive(Parser)]
#[command(name = "polar-park", version, about = "Unicycle parking controllers in polar coordinates")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// JSON experiment config (simulate, compare, sweep).
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, value_name = "DIR", default_value = "out")]
    out: PathBuf,
    /// Seed for random initial conditions and sampled checks.
    #[arg(long, global = true, value_name = "N")]
    seed: Option<u64>,
    /// Certification suite (verify).
    #[arg(long, global = true, value_name = "NAME", value_parser = PossibleValuesParser::new(Suite::NAMES))]
    suite: Option<String>,
    /// Integrate in this frame, overriding the config.
    #[arg(long, global = true, value_enum)]
    frame: Option<FrameArg>,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Simulate every configured controller from every initial condition.
    Simulate,
    /// Run a certification suite.
    Verify,
    /// Compare two or more controllers on shared initial conditions.
    Compare,
    /// Summarize runs over a grid of initial conditions and gains.
    Sweep,
}

#[derive(Clone, Copy, ValueEnum)]
enum FrameArg {
    Cartesian,
    Polar,
}

const USAGE: u8 = 1;
const VERIFICATION: u8 = 2;
const RUNTIME: u8 = 3;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { USAGE } else { 0 });
        }
    };
    let ctx = Settings {
        out: cli.out.clone(),
        seed: cli.seed,
        frame: cli.frame.map(|f| match f {
            FrameArg::Cartesian => Frame::Cartesian,
            FrameArg::Polar => Frame::Polar,
        }),
    };

    let result = match cli.command {
        Command::Verify => {
            let suite: Suite = cli.suite.as_deref().unwrap_or("all").parse().expect("clap checks the suite name");
            commands::verify(suite, &ctx).map_err(|e| (RUNTIME, e))
        }
        cmd => {
            let Some(path) = &cli.config else {
                eprintln!("error: this command needs --config PATH");
                return ExitCode::from(USAGE);
            };
            let cfg = match ExperimentConfig::load(path) {
                Ok(c) => c,
                Err(e) => {
                    eprintln!("error: {e:#}");
                    return ExitCode::from(USAGE);
                }
            };
            // Problems found while expanding the config are usage errors too.
            let run = match cmd {
                Command::Simulate => commands::simulate(cfg, &ctx),
                Command::Compare => commands::compare(cfg, &ctx),
                Command::Sweep => commands::sweep(cfg, &ctx),
                Command::Verify => unreachable!(),
            };
            run.map_err(|e| (if e.downcast_ref::<OutputFailure>().is_some() { RUNTIME } else { USAGE }, e))
        }
    };

    match result {
        Ok(Outcome::Success) => ExitCode::SUCCESS,
        Ok(Outcome::VerificationFailed) => ExitCode::from(VERIFICATION),
        Ok(Outcome::NoUsableRun) => {
            eprintln!("error: every run stopped at an excluded set or could not start");
            ExitCode::from(RUNTIME)
        }
        Err((code, e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(code)
        }
    }
}
