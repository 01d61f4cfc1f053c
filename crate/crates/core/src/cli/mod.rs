//! Scenario runner behind the `hyperconsensus` binary.

pub mod builtins;
pub mod export;
pub mod run;
pub mod scenario;

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

pub use builtins::{builtin, list_scenarios};
pub use export::{write_csv, Summary};
pub use run::{run_prepared, CheckReport, RunReport};
pub use scenario::{OutputFormat, Overrides, Prepared, Scenario, ScenarioError};

/// Validation or I/O failure.
pub const EXIT_INVALID: u8 = 2;
/// The integration aborted (drift or step failure); partial output is still written.
pub const EXIT_ABORTED: u8 = 3;

#[derive(Debug, Parser)]
#[command(name = "hyperconsensus", version, about = "Consensus flows of agents on implicit hypersurfaces")]
pub struct Args {
    #[command(subcommand)]
    pub command: Option<Command>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// List the built-in scenarios.
    List,
    /// Run a scenario file or a built-in scenario by name.
    Run(RunArgs),
    /// Print a built-in scenario as TOML, as a starting point for custom files.
    Show { name: String },
}

#[derive(Debug, clap::Args)]
pub struct RunArgs {
    /// Path to a scenario file, or a built-in name.
    pub target: String,
    /// Output directory (default: the scenario's `output.dir`, else the current directory).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Seed for random initial conditions.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub step: Option<f64>,
    #[arg(long)]
    pub horizon: Option<f64>,
    #[arg(long, value_enum)]
    pub format: Option<OutputFormat>,
}

/// Resolves `target` as a file if one exists at that path, otherwise as a built-in name.
pub fn load(target: &str) -> Result<Scenario, ScenarioError> {
    let path = Path::new(target);
    if path.is_file() {
        let text = fs::read_to_string(path).map_err(|source| ScenarioError::Io {
            path: path.into(),
            source,
        })?;
        return Scenario::from_toml(&text);
    }
    builtin(target)
}

/// Files written by [`run_to_dir`].
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub report: RunReport,
    pub summary: Summary,
    pub csv: Option<PathBuf>,
    pub json: Option<PathBuf>,
}

pub fn run_to_dir(
    scenario: &Scenario,
    overrides: &Overrides,
    dir: &Path,
    format: OutputFormat,
) -> Result<RunOutput, ScenarioError> {
    let prepared = scenario.prepare_with(overrides)?;
    let report = run_prepared(&prepared)?;
    let summary = Summary::new(&scenario.name, prepared.seed, &report);
    let io_err = |path: &Path| {
        let path = path.to_path_buf();
        move |source| ScenarioError::Io { path, source }
    };
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let mut csv_path = None;
    if format.csv() {
        let path = dir.join(format!("{}.csv", scenario.name));
        let file = File::create(&path).map_err(io_err(&path))?;
        write_csv(BufWriter::new(file), &report.trajectory, &prepared.surface, &prepared.graph)
            .map_err(|e| ScenarioError::Io {
                path: path.clone(),
                source: e.into(),
            })?;
        csv_path = Some(path);
    }
    let mut json_path = None;
    if format.json() {
        let path = dir.join(format!("{}.json", scenario.name));
        fs::write(&path, summary.to_json()).map_err(io_err(&path))?;
        json_path = Some(path);
    }
    Ok(RunOutput {
        report,
        summary,
        csv: csv_path,
        json: json_path,
    })
}

fn run_command(args: &RunArgs) -> Result<RunOutput, ScenarioError> {
    let scenario = load(&args.target)?;
    let overrides = Overrides {
        seed: args.seed,
        step: args.step,
        horizon: args.horizon,
    };
    let dir = args
        .out
        .clone()
        .or_else(|| scenario.output.dir.clone())
        .unwrap_or_else(|| PathBuf::from("."));
    let format = args.format.unwrap_or(scenario.output.format);
    run_to_dir(&scenario, &overrides, &dir, format)
}

pub fn main_with(args: Args) -> ExitCode {
    match args.command.unwrap_or(Command::List) {
        Command::List => {
            let entries = list_scenarios();
            let width = entries.iter().map(|(n, _)| n.len()).max().unwrap_or(0);
            for (name, description) in entries {
                println!("{name:width$}  {description}");
            }
            ExitCode::SUCCESS
        }
        Command::Show { name } => match builtins::source(&name) {
            Some(text) => {
                print!("{text}");
                ExitCode::SUCCESS
            }
            None => {
                eprintln!("error: {}", ScenarioError::UnknownScenario(name));
                ExitCode::from(EXIT_INVALID)
            }
        },
        Command::Run(run) => match run_command(&run) {
            Ok(out) => {
                let s = &out.summary;
                println!(
                    "{}: {} (V={:e}, max norm={}, steps={}, {})",
                    s.scenario, s.outcome, s.terminal_v, s.terminal_max_norm, s.steps, s.termination
                );
                for c in &s.checks {
                    let verdict = if c.passed { "ok" } else { "FAIL" };
                    println!("  {} = {:e} {} {:e} [{verdict}]", c.name, c.value, c.relation, c.bound);
                }
                for path in out.csv.iter().chain(&out.json) {
                    println!("  wrote {}", path.display());
                }
                if s.aborted {
                    ExitCode::from(EXIT_ABORTED)
                } else {
                    ExitCode::SUCCESS
                }
            }
            Err(e) => {
                eprintln!("error: {e}");
                ExitCode::from(EXIT_INVALID)
            }
        },
    }
}
