//! Command-line front end for the flow laboratory.
//!
//! Exit codes: 0 success, 2 rejected input (config, flags, file shape),
//! 3 runtime failure (a guard tripped or a file could not be produced),
//! 4 a requested check ran and failed.

mod config;
mod report;
mod scenario;
mod studies;

use std::path::Path;

use clap::{Args, Parser, Subcommand};

use ottolab::{Error, Result};

use crate::config::ScenarioConfig;
use crate::scenario::Drive;

#[derive(Parser)]
#[command(
    name = "ottolab",
    version,
    about = "Damped transport flows on weighted 1-D domains: simulation runs, \
             closed-form reference trajectories, balance audits, speed-limit \
             sweeps, and claim reports"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct RunArgs {
    /// Config file of dotted `key = value` lines, or a sidecar JSON from a
    /// previous run
    #[arg(long)]
    config: String,
    /// Applied after the file, as `key=value`; repeatable
    #[arg(long = "override", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Replaces `output.path` from the config
    #[arg(long)]
    out: Option<String>,
    /// Recorded in the sidecar; runs are deterministic regardless
    #[arg(long)]
    seed: Option<u64>,
    /// Suppress progress lines on stderr
    #[arg(long)]
    quiet: bool,
}

#[derive(Args)]
struct SweepArgs {
    /// Config file describing the shared grid, initial state, and horizon
    #[arg(long)]
    config: String,
    /// Applied after the file, as `key=value`; repeatable
    #[arg(long = "override", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Comma-separated transition speeds for the sweep
    #[arg(long = "c-list")]
    c_list: Option<String>,
    /// Write the JSON result here instead of stdout
    #[arg(long)]
    out: Option<String>,
    /// Thread count for the sweep; defaults to one thread per entry up to
    /// the machine's cores
    #[arg(long)]
    jobs: Option<usize>,
    /// Recorded in the result; sweeps are deterministic regardless
    #[arg(long)]
    seed: Option<u64>,
    /// Suppress the verdict summary on stderr
    #[arg(long)]
    quiet: bool,
}

#[derive(Subcommand)]
enum Command {
    /// March a flow from the configured initial state and write diagnostics
    Simulate(RunArgs),
    /// Evaluate the closed-form self-similar trajectory at the diagnostic
    /// times and write the same diagnostics schema
    Reference(RunArgs),
    /// Rebuild the relative columns of a diagnostics file and check the
    /// two sides of the stored balance against each other
    Wentropy {
        /// Diagnostics file written by `simulate` or `reference`
        #[arg(long)]
        csv: String,
        /// Largest acceptable residual relative to the balance's scale
        #[arg(long = "rel-tol", default_value_t = 0.03)]
        rel_tol: f64,
    },
    /// Sweep decreasing speeds against the zero-speed diffusion limit
    ConvergeZero(SweepArgs),
    /// Sweep increasing speeds against the infinite-speed geodesic limit
    ConvergeInf(SweepArgs),
    /// Judge the monotonicity, convexity, and comparison claims over one or
    /// more diagnostics files
    Report {
        /// Diagnostics files, each with its sidecar next to it
        #[arg(required = true)]
        files: Vec<String>,
    },
}

fn load_config(path: &str, overrides: &[String], out: Option<&str>) -> Result<ScenarioConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Invalid(format!("--config {path}: {e}")))?;
    let mut map = config::load_keys(&text)?;
    config::apply_overrides(&mut map, overrides)?;
    if let Some(out) = out {
        map.insert("output.path".to_string(), out.to_string());
    }
    ScenarioConfig::from_map(map)
}

fn parse_c_list(text: &str) -> Result<Vec<f64>> {
    let mut out = Vec::new();
    for piece in text.split(',') {
        let piece = piece.trim();
        if piece.is_empty() {
            return Err(Error::Invalid(
                "--c-list: empty entry in the speed list".to_string(),
            ));
        }
        out.push(piece.parse::<f64>().map_err(|_| {
            Error::Invalid(format!("--c-list: {piece} is not a number"))
        })?);
    }
    Ok(out)
}

fn emit_study(result: &studies::StudyResult, out: Option<&str>, quiet: bool) -> Result<()> {
    let mut json = serde_json::to_string_pretty(result)
        .map_err(|e| Error::Invalid(format!("result serialization: {e}")))?;
    json.push('\n');
    match out {
        Some(path) => {
            std::fs::write(path, json)?;
            if !quiet {
                eprintln!("wrote {path}");
            }
        }
        None => print!("{json}"),
    }
    if !quiet {
        for v in &result.verdicts {
            let state = if !v.applicable {
                "skip"
            } else if v.pass {
                "pass"
            } else {
                "FAIL"
            };
            eprintln!("{}: {state} ({})", v.name, v.detail);
        }
    }
    Ok(())
}

/// Returns whether every check the invocation ran came back clean.
fn dispatch(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Simulate(args) => {
            let cfg = load_config(&args.config, &args.overrides, args.out.as_deref())?;
            scenario::run_scenario(&cfg, Drive::Solver, args.quiet, args.seed)?;
            Ok(true)
        }
        Command::Reference(args) => {
            let cfg = load_config(&args.config, &args.overrides, args.out.as_deref())?;
            scenario::run_scenario(&cfg, Drive::Analytic, args.quiet, args.seed)?;
            Ok(true)
        }
        Command::Wentropy { csv, rel_tol } => {
            let audit = report::wentropy_audit(Path::new(&csv), rel_tol)?;
            let mut json = serde_json::to_string_pretty(&audit)
                .map_err(|e| Error::Invalid(format!("result serialization: {e}")))?;
            json.push('\n');
            print!("{json}");
            Ok(audit.pass)
        }
        Command::ConvergeZero(args) => {
            let cfg = load_config(&args.config, &args.overrides, None)?;
            let c_list = parse_c_list(args.c_list.as_deref().unwrap_or("0.4,0.2,0.1"))?;
            let mut result = studies::converge_c_to_zero(&cfg, &c_list, args.jobs)?;
            result.seed = args.seed;
            emit_study(&result, args.out.as_deref(), args.quiet)?;
            Ok(result.all_pass())
        }
        Command::ConvergeInf(args) => {
            let cfg = load_config(&args.config, &args.overrides, None)?;
            let c_list = parse_c_list(args.c_list.as_deref().unwrap_or("2,4,8"))?;
            let mut result = studies::converge_c_to_infinity(&cfg, &c_list, args.jobs)?;
            result.seed = args.seed;
            emit_study(&result, args.out.as_deref(), args.quiet)?;
            Ok(result.all_pass())
        }
        Command::Report { files } => {
            let report = report::report_files(&files)?;
            let mut json = serde_json::to_string_pretty(&report)
                .map_err(|e| Error::Invalid(format!("result serialization: {e}")))?;
            json.push('\n');
            print!("{json}");
            Ok(report.all_pass)
        }
    }
}

fn main() {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(true) => {}
        Ok(false) => std::process::exit(4),
        Err(e) => {
            eprintln!("error: {e}");
            let code = match e {
                Error::Invalid(_) | Error::Unsupported(_) => 2,
                _ => 3,
            };
            std::process::exit(code);
        }
    }
}
