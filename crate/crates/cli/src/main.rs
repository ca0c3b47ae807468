use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;
use tendon_sim::app::{self, CommonFlags, EXIT_CONFIG};

#[derive(Parser)]
#[command(
    name = "tendon-sim",
    version,
    about = "Quasi-static simulator for a tendon-driven underactuated hand"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args)]
struct Common {
    /// Directory for CSV outputs (default: current directory).
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Reproducibility seed; overrides the scenario's "seed" field.
    #[arg(long, value_name = "N")]
    seed: Option<u64>,
    /// Override the controller convergence tolerance, N.
    #[arg(long, value_name = "N")]
    tol: Option<f64>,
    /// Override the controller step budget.
    #[arg(long, value_name = "N")]
    max_steps: Option<usize>,
    /// Suppress the summary report; errors still go to stderr.
    #[arg(long)]
    quiet: bool,
}

impl Common {
    fn flags(&self) -> CommonFlags {
        CommonFlags {
            out: self.out.clone(),
            seed: self.seed,
            tol: self.tol,
            max_steps: self.max_steps,
            quiet: self.quiet,
        }
    }
}

#[derive(Subcommand)]
enum Cmd {
    /// Check a scenario file without running it.
    Validate {
        scenario: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Run a grasp scenario and write per-step telemetry CSV.
    Simulate {
        scenario: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Sweep payload masses under a frozen grasp and write a ramp CSV.
    Ramp {
        scenario: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Report grip capacity and margin against a payload.
    Margin {
        scenario: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Compute grip efficiency from a measured (mass, tension) datapoint.
    Calibrate {
        scenario: PathBuf,
        #[command(flatten)]
        common: Common,
    },
}

fn main() -> ExitCode {
    // Usage errors are configuration errors (exit 1); clap's default exit
    // code would collide with the non-convergence code.
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            print!("{e}");
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            eprint!("{e}");
            return ExitCode::from(EXIT_CONFIG as u8);
        }
    };

    let result = match &cli.cmd {
        Cmd::Validate { scenario, common } => app::run_validate(scenario, &common.flags()),
        Cmd::Simulate { scenario, common } => app::run_simulate(scenario, &common.flags()),
        Cmd::Ramp { scenario, common } => app::run_ramp(scenario, &common.flags()),
        Cmd::Margin { scenario, common } => app::run_margin(scenario, &common.flags()),
        Cmd::Calibrate { scenario, common } => app::run_calibrate(scenario, &common.flags()),
    };

    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message);
            ExitCode::from(e.code as u8)
        }
    }
}
