use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use coopreg::output::{certificate_lines, TRACE_COLUMNS_HELP};
use coopreg::{cmd_preset, cmd_run, cmd_verify, RunOptions, PRESET_NAMES};

#[derive(Parser)]
#[command(name = "coopreg", version, about = "Cooperative output regulation over intermittent, delayed, lossy links")]
#[command(after_help = "Set COOPREG_TOL to rescale every numerical tolerance (default 1e-8).")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check every certificate for a scenario; exits 1 if any fails.
    Verify { file: PathBuf },
    /// Simulate a scenario and write trace.csv, events.csv and report.txt.
    #[command(after_help = TRACE_COLUMNS_HELP)]
    Run {
        file: PathBuf,
        /// Channel seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Blackout bound in seconds.
        #[arg(long = "hstar")]
        h_star: Option<f64>,
        /// Simulated time in seconds.
        #[arg(long)]
        horizon: Option<f64>,
        /// Simulate even if a certificate fails.
        #[arg(long)]
        force: bool,
        /// Output directory (default: the file's [output] dir, else coopreg-out).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write a bundled scenario file.
    #[command(after_help = format!("Presets: {}", PRESET_NAMES.join(", ")))]
    Preset {
        name: String,
        /// Destination file; prints to stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Verify { file } => cmd_verify(&file).map(|report| {
            print!("{}", certificate_lines(&report));
            report.certificates_passed()
        }),
        Command::Run { file, seed, h_star, horizon, force, out } => {
            let opts = RunOptions { seed, h_star, horizon, force, out };
            cmd_run(&file, &opts).map(|outcome| {
                print!("{}", coopreg::output::report_text(&outcome.scenario, &outcome.output.report));
                println!("outputs written to {}", outcome.out_dir.display());
                outcome.succeeded()
            })
        }
        Command::Preset { name, out } => cmd_preset(&name, out.as_deref()).map(|text| {
            if out.is_none() {
                print!("{text}");
            }
            true
        }),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
