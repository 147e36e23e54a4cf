//! Command-line front end: scenario files in, CSV and manifests out.
//!
//! Exit codes: 0 success, 1 validation failure, 2 configuration or I/O
//! error, 3 numerical failure.

pub mod commands;
pub mod output;
pub mod scenario;

use std::ffi::OsString;
use std::path::PathBuf;
use std::time::Instant;

use clap::{Parser, Subcommand};

use crate::error::{Error, Result};
use output::{manifest_text, write_file, IntegratorSummary, RunManifest};
use scenario::{load_scenario, preset, preset_names, LoadedScenario};

#[derive(Debug, Parser)]
#[command(name = "obsplit", version, about = "Observer mappings, relative motion and Newtonian-limit checks")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,

    /// Scenario file (TOML)
    #[arg(long, global = true, value_name = "PATH")]
    pub scenario: Option<PathBuf>,

    /// Built-in scenario instead of a file
    #[arg(long, global = true, value_name = "NAME", conflicts_with = "scenario")]
    pub preset: Option<String>,

    /// Output directory
    #[arg(long, global = true, value_name = "DIR", default_value = "out")]
    pub out: PathBuf,

    /// Override a tolerance, e.g. rel_tol=1e-9 (repeatable)
    #[arg(long = "tol-override", global = true, value_name = "KEY=VAL")]
    pub tol_override: Vec<String>,

    /// Worker threads (default: all cores)
    #[arg(long, global = true, value_name = "N")]
    pub threads: Option<usize>,

    /// Seed for randomly sampled checks
    #[arg(long, global = true, value_name = "N", default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Sample the past light cone at γ(τ) through the static observer map
    TraceCone {
        /// Proper time of the apex (defaults to cone.tau_s)
        #[arg(long)]
        tau: Option<f64>,
    },
    /// Find observer coordinates of events listed in a CSV file
    Invert {
        /// File with one event k0,k1,k2,k3 per line
        #[arg(long, value_name = "PATH")]
        targets: PathBuf,
    },
    /// Track the scenario's worldline in observer coordinates
    Observe,
    /// Sweep the speed of light and measure Newtonian-limit residuals
    NewtonLimit {
        /// Comma-separated values of c (defaults to the scenario's list)
        #[arg(long, value_delimiter = ',')]
        c: Vec<f64>,
    },
    /// Run the invariant checks on the scenario
    Validate,
    /// List built-in scenarios
    Presets,
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::TraceCone { .. } => "trace-cone",
            Command::Invert { .. } => "invert",
            Command::Observe => "observe",
            Command::NewtonLimit { .. } => "newton-limit",
            Command::Validate => "validate",
            Command::Presets => "presets",
        }
    }
}

fn scenario_text(cli: &Cli) -> Result<String> {
    match (&cli.scenario, &cli.preset) {
        (Some(p), _) => std::fs::read_to_string(p).map_err(|e| Error::Io(format!("{}: {e}", p.display()))),
        (None, Some(name)) => Ok(preset(name)?.to_string()),
        (None, None) => Err(Error::Config("give --scenario PATH or --preset NAME".into())),
    }
}

/// Result of a run: exit code and the lines printed for the user.
#[derive(Debug, Clone, PartialEq)]
pub struct RunReport {
    pub exit_code: i32,
    pub lines: Vec<String>,
}

fn execute(cli: &Cli, loaded: &LoadedScenario) -> Result<commands::CommandOutput> {
    let sc = &loaded.scenario;
    match &cli.command {
        Command::TraceCone { tau } => commands::trace_cone(sc, *tau),
        Command::Invert { targets } => {
            let text =
                std::fs::read_to_string(targets).map_err(|e| Error::Io(format!("{}: {e}", targets.display())))?;
            commands::invert(sc, &commands::parse_targets(&text)?)
        }
        Command::Observe => commands::observe(sc),
        Command::NewtonLimit { c } => commands::newton_limit(sc, c),
        Command::Validate => commands::validate(sc, cli.seed),
        Command::Presets => unreachable!("handled before loading a scenario"),
    }
}

/// Runs a parsed command line, writing outputs under `--out`.
pub fn run(cli: &Cli) -> Result<RunReport> {
    if let Command::Presets = cli.command {
        return Ok(RunReport { exit_code: 0, lines: preset_names().iter().map(|s| s.to_string()).collect() });
    }
    let started = Instant::now();
    let loaded = load_scenario(&scenario_text(cli)?, &cli.tol_override)?;
    let output = match cli.threads {
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n.max(1))
                .build()
                .map_err(|e| Error::Config(format!("--threads: {e}")))?;
            pool.install(|| execute(cli, &loaded))?
        }
        None => execute(cli, &loaded)?,
    };
    let mut lines = output.summary.clone();
    let mut names = Vec::new();
    for (name, text) in &output.files {
        write_file(&cli.out, name, text)?;
        names.push(name.clone());
        lines.push(format!("wrote {}", cli.out.join(name).display()));
    }
    let manifest = RunManifest {
        tool: env!("CARGO_PKG_NAME").into(),
        tool_version: env!("CARGO_PKG_VERSION").into(),
        command: cli.command.name().into(),
        scenario_name: loaded.scenario.name.clone().unwrap_or_default(),
        scenario_hash: loaded.hash.clone(),
        outputs: names,
        wall_clock_s: started.elapsed().as_secs_f64(),
        integrator: IntegratorSummary::from(&output.stats),
        diagnostics: output.diagnostics,
    };
    write_file(&cli.out, "manifest.toml", &manifest_text(&manifest)?)?;
    Ok(RunReport { exit_code: if output.validation_failed { 1 } else { 0 }, lines })
}

/// Parses arguments, runs, prints, and returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match run(&cli) {
        Ok(rep) => {
            for l in &rep.lines {
                println!("{l}");
            }
            rep.exit_code
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
