//! Command-line experiment runner.
//!
//! Exit codes: 0 completed or extinct, 1 configuration error, 2 blow-up
//! detected, 3 step failure, 4 I/O failure.

mod config;
mod experiment;
mod json;

use std::fs;
use std::path::PathBuf;

use clap::{Parser, Subcommand};
use rayon::prelude::*;

pub use config::{
    config_from_table, parse_config, AuditConfig, ContinuationConfig, InitialProfile, OutputConfig, RunConfig,
};
pub use experiment::{
    build_experiment_mesh, continuation_json, error_exit_code, exit_code, initial_field, run_experiment,
    trajectory_csv, Outcome, ENERGY_AUDIT_TOL, EXIT_BLOWUP, EXIT_CONFIG, EXIT_IO, EXIT_OK, EXIT_STEP_FAILURE,
    FORMAT_VERSION, L2_AUDIT_TOL,
};
pub use json::{Json, SKIPPED};

use crate::error::{Error, Result};
use crate::model::{check_f_conditions, default_grid};

#[derive(Debug, Parser)]
#[command(name = "tvflow", version, about = "Reaction 1-Laplacian heat flow experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run one experiment (a single flow or a continuation in p).
    Run {
        config: PathBuf,
        /// Overrides `output.dir`.
        #[arg(long)]
        output_dir: Option<PathBuf>,
    },
    /// Run one experiment per value of a config key, each in its own directory.
    Sweep {
        config: PathBuf,
        /// Dotted key, e.g. `solver.p`.
        #[arg(long)]
        key: String,
        /// Comma-separated TOML values.
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<String>,
        #[arg(long)]
        output_dir: Option<PathBuf>,
    },
    /// Write the mesh dump of the configured domain.
    Mesh {
        config: PathBuf,
        /// Output file; stdout when absent.
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Sample the structural conditions on the configured reaction.
    CheckReaction { config: PathBuf },
}

fn read_table(path: &PathBuf) -> Result<toml::Table> {
    let text = fs::read_to_string(path)
        .map_err(|e| Error::config("config", format!("cannot read {}: {e}", path.display())))?;
    text.parse().map_err(|e: toml::de::Error| Error::config("config", e.message().to_string()))
}

fn load(path: &PathBuf, output_dir: &Option<PathBuf>) -> Result<RunConfig> {
    let mut cfg = config_from_table(read_table(path)?)?;
    if let Some(dir) = output_dir {
        cfg.output.dir = dir.clone();
    }
    Ok(cfg)
}

/// Sets `section.key = value` in a parsed config, `value` read as TOML.
fn override_key(table: &mut toml::Table, key: &str, value: &str) -> Result<()> {
    let (section, name) =
        key.split_once('.').ok_or_else(|| Error::config(key, "sweep keys have the form section.key"))?;
    let parsed: toml::Table = format!("v = {value}")
        .parse()
        .or_else(|_| format!("v = \"{value}\"").parse())
        .map_err(|e: toml::de::Error| Error::config(key, e.message().to_string()))?;
    let v = parsed["v"].clone();
    let entry = table.entry(section).or_insert_with(|| toml::Value::Table(toml::Table::new()));
    entry
        .as_table_mut()
        .ok_or_else(|| Error::config(section, "expected a table"))?
        .insert(name.to_string(), v);
    Ok(())
}

fn report(result: Result<Outcome>) -> i32 {
    match result {
        Ok(o) => {
            let get = |k: &str| o.summary.get(k).map(|v| v.render().trim().to_string()).unwrap_or_default();
            println!("status {} at t = {}", get("status"), get("status_time"));
            o.exit_code
        }
        Err(e) => {
            eprintln!("error: {e}");
            error_exit_code(&e)
        }
    }
}

fn sweep(config: &PathBuf, key: &str, values: &[String], output_dir: &Option<PathBuf>) -> i32 {
    let base = match read_table(config) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: {e}");
            return error_exit_code(&e);
        }
    };
    let runs: Vec<Result<RunConfig>> = values
        .iter()
        .map(|v| {
            let mut table = base.clone();
            override_key(&mut table, key, v)?;
            let mut cfg = config_from_table(table)?;
            let root = output_dir.clone().unwrap_or_else(|| cfg.output.dir.clone());
            cfg.output.dir = root.join(format!("{key}={}", v.trim()));
            Ok(cfg)
        })
        .collect();
    let codes: Vec<(String, i32)> = runs
        .into_par_iter()
        .zip(values.par_iter())
        .map(|(cfg, v)| {
            let code = match cfg.and_then(|c| run_experiment(&c)) {
                Ok(o) => o.exit_code,
                Err(e) => {
                    eprintln!("error ({key} = {v}): {e}");
                    error_exit_code(&e)
                }
            };
            (v.clone(), code)
        })
        .collect();
    for (v, code) in &codes {
        println!("{key} = {v}: exit {code}");
    }
    codes.iter().map(|(_, c)| *c).max().unwrap_or(EXIT_OK)
}

/// Runs a parsed command line and returns the process exit code.
pub fn execute(cli: Cli) -> i32 {
    match cli.command {
        Command::Run { config, output_dir } => report(load(&config, &output_dir).and_then(|c| run_experiment(&c))),
        Command::Sweep { config, key, values, output_dir } => sweep(&config, &key, &values, &output_dir),
        Command::Mesh { config, output } => {
            let dump = load(&config, &None).and_then(|c| build_experiment_mesh(&c)).and_then(|m| m.dump(None));
            let written = dump.and_then(|text| match &output {
                Some(path) => fs::write(path, text).map_err(Error::from),
                None => {
                    print!("{text}");
                    Ok(())
                }
            });
            match written {
                Ok(()) => EXIT_OK,
                Err(e) => {
                    eprintln!("error: {e}");
                    error_exit_code(&e)
                }
            }
        }
        Command::CheckReaction { config } => match load(&config, &None) {
            Ok(cfg) => {
                let Some(p0) = cfg.p0 else {
                    eprintln!("error: config key `reaction.p0`: missing required key");
                    return EXIT_CONFIG;
                };
                let r = check_f_conditions(&cfg.nl, p0, &default_grid());
                let j = Json::object()
                    .with("format_version", FORMAT_VERSION)
                    .with("p0", r.p0)
                    .with("theta", r.theta)
                    .with("f1_ratio_max", r.f1_ratio_max)
                    .with("f1_ratio_at_min", r.f1_ratio_at_min)
                    .with("f1_holds", r.f1_holds)
                    .with("f2_min_slack", r.f2_min_slack)
                    .with("f2_holds", r.f2_holds)
                    .with("growth_exponent_fit", r.growth_exponent_fit)
                    .with("f3_holds", r.f3_holds);
                print!("{}", j.render());
                EXIT_OK
            }
            Err(e) => {
                eprintln!("error: {e}");
                error_exit_code(&e)
            }
        },
    }
}
