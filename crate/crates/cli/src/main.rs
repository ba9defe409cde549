//! `mfcalib`: targetless LiDAR-camera extrinsic calibration.
//!
//! Exit codes: 0 converged, 1 I/O or config error, 2 degenerate
//! geometry / no convergence, 3 insufficient correspondences.

use std::process::ExitCode;

use clap::{Parser, Subcommand};

use mfcalib_cli::commands::{self, Failure};

#[derive(Parser)]
#[command(name = "mfcalib", version, about = "Targetless LiDAR-camera extrinsic calibration")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Estimate extrinsics from one intensity cloud and one image.
    Calibrate(commands::CalibrateArgs),
    /// Generate a synthetic fixture bundle with known extrinsics.
    Simulate(commands::SimulateArgs),
    /// Project the cloud over the image, jet-colored by intensity.
    Overlay(commands::OverlayArgs),
    /// Write a PLY cloud colored by the image seen through extrinsics.
    Colorize(commands::ColorizeArgs),
    /// Print rotation (deg) and translation (cm) differences between
    /// two extrinsics files.
    Metrics(commands::MetricsArgs),
}

fn run(cli: &Cli) -> Result<(), Failure> {
    match &cli.command {
        Command::Calibrate(args) => commands::cmd_calibrate(args),
        Command::Simulate(args) => commands::cmd_simulate(args),
        Command::Overlay(args) => commands::cmd_overlay(args),
        Command::Colorize(args) => commands::cmd_colorize(args),
        Command::Metrics(args) => commands::cmd_metrics(args),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // Usage errors exit 1 so codes 2/3 stay reserved for
            // calibration outcomes.
            let code = match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("{f}");
            ExitCode::from(f.code)
        }
    }
}
