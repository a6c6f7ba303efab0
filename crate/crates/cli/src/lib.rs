//! Scenario files, bundled presets and the `verify` / `run` / `preset`
//! commands behind the `coopreg` binary.

pub mod output;
pub mod presets;
pub mod scenario;

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use coopreg_core::sim::{certify, run, RunOutput, RunReport, Scenario};
use thiserror::Error;

pub use presets::{preset, preset_text, PRESET_NAMES};
pub use scenario::{parse_scenario, ScenarioFile};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("malformed scenario: {0}")]
    Parse(String),
    #[error("{}{field}: {message}", agent.map(|a| format!("agent {a}: ")).unwrap_or_default())]
    Dimension { agent: Option<usize>, field: String, message: String },
    #[error("agent {follower} is a follower listed after leader {leader}; list followers first")]
    Order { follower: usize, leader: usize },
    #[error("unknown preset {name:?}; valid names: {valid}")]
    UnknownPreset { name: String, valid: String },
    #[error("invalid override: {0}")]
    Override(String),
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("writing {path}: {message}")]
    Output { path: String, message: String },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io { path: path.display().to_string(), source }
}

/// Loads a scenario and runs the certificate suite.
pub fn cmd_verify(path: &Path) -> Result<RunReport, CliError> {
    let sc = parse_scenario(path)?;
    Ok(certify(&sc).0)
}

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub seed: Option<u64>,
    pub h_star: Option<f64>,
    pub horizon: Option<f64>,
    pub force: bool,
    pub out: Option<PathBuf>,
}

impl RunOptions {
    pub fn apply(&self, sc: &mut Scenario) -> Result<(), CliError> {
        if let Some(seed) = self.seed {
            sc.channel.seed = seed;
        }
        if let Some(h) = self.h_star {
            if !(h.is_finite() && h > 0.0) {
                return Err(CliError::Override(format!("--hstar must be positive, got {h}")));
            }
            sc.channel.h_star = h;
        }
        if let Some(t) = self.horizon {
            if !(t.is_finite() && t > 0.0) {
                return Err(CliError::Override(format!("--horizon must be positive, got {t}")));
            }
            sc.sim.horizon = t;
        }
        sc.force |= self.force;
        Ok(())
    }
}

/// Result of [`cmd_run`].
#[derive(Debug)]
pub struct RunOutcome {
    pub scenario: Scenario,
    pub output: RunOutput,
    pub out_dir: PathBuf,
}

impl RunOutcome {
    /// The run finished its simulation without stopping early.
    pub fn succeeded(&self) -> bool {
        self.output.report.aborted.is_none() && self.output.trace.is_some()
    }
}

pub const DEFAULT_OUT_DIR: &str = "coopreg-out";

/// Runs a scenario and writes `trace.csv`, `events.csv` and `report.txt`
/// into the output directory. The report is written even when the run stops
/// early; the trace only when the simulation completed.
pub fn cmd_run(path: &Path, opts: &RunOptions) -> Result<RunOutcome, CliError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    let file = ScenarioFile::parse_str(&text)?;
    let mut sc = file.to_scenario()?;
    opts.apply(&mut sc)?;
    let out_dir = opts
        .out
        .clone()
        .or_else(|| file.output.as_ref().map(|o| PathBuf::from(&o.dir)))
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT_DIR));
    let output = run(&sc);
    write_outputs(&out_dir, &sc, &output)?;
    Ok(RunOutcome { scenario: sc, output, out_dir })
}

pub fn write_outputs(dir: &Path, sc: &Scenario, out: &RunOutput) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let report_path = dir.join("report.txt");
    fs::write(&report_path, output::report_text(sc, &out.report)).map_err(io_err(&report_path))?;
    if !out.schedules.is_empty() {
        let p = dir.join("events.csv");
        let f = File::create(&p).map_err(io_err(&p))?;
        output::write_events(BufWriter::new(f), &out.schedules, sc.channel.ts)
            .map_err(|e| CliError::Output { path: p.display().to_string(), message: e.to_string() })?;
    }
    if let Some(trace) = &out.trace {
        let p = dir.join("trace.csv");
        let f = File::create(&p).map_err(io_err(&p))?;
        output::write_trace(BufWriter::new(f), trace).map_err(io_err(&p))?;
    }
    Ok(())
}

/// Returns the preset file text, also writing it to `out` when given.
pub fn cmd_preset(name: &str, out: Option<&Path>) -> Result<String, CliError> {
    let text = preset_text(name)?;
    if let Some(p) = out {
        fs::write(p, &text).map_err(io_err(p))?;
    }
    Ok(text)
}
