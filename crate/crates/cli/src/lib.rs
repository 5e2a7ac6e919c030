//! Command-line driver: parses a JSON run configuration, runs one task, and
//! writes `report.json` plus CSV artifacts into an output directory.

pub mod config;
pub mod error;
pub mod fields;
pub mod tasks;

use config::{parse_config, RunConfig, TaskKind};
use error::CliError;
use serde_json::{json, Value};
use std::fs;
use std::path::{Path, PathBuf};

#[derive(Debug, clap::Parser)]
#[command(name = "brane", about = "Brane worldvolume geometry, currents and symplectic forms")]
pub struct Args {
    pub task: TaskKind,
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Multiplies every axis resolution.
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u32).range(1..))]
    pub grid_scale: u32,
}

/// Result of a finished task.
#[derive(Debug)]
pub struct Report {
    pub json: Value,
    /// Set when the task ran but missed its numerical target.
    pub failure: Option<String>,
}

fn io(path: &Path, source: std::io::Error) -> CliError {
    CliError::Io { path: path.display().to_string(), source }
}

/// Runs `task` on a parsed configuration and writes the artifacts to `out`.
pub fn run_config(task: TaskKind, cfg: &RunConfig, out: &Path, grid_scale: usize) -> Result<Report, CliError> {
    if let Some(t) = cfg.task {
        if t != task {
            return Err(CliError::Config {
                path: "task".into(),
                message: format!("config is for `{}`, command asked for `{}`", t.name(), task.name()),
            });
        }
    }
    let missing = |key: &str| CliError::Config { path: key.into(), message: format!("the {key} task needs a `{key}` block") };
    match task {
        TaskKind::Current if cfg.current.is_none() => return Err(missing("current")),
        TaskKind::Sympform if cfg.sympform.is_none() => return Err(missing("sympform")),
        TaskKind::Convergence if cfg.convergence.is_none() => return Err(missing("convergence")),
        _ => {}
    }
    let outcome = match task {
        TaskKind::Geometry => tasks::geometry(cfg, grid_scale),
        TaskKind::Action => tasks::action(cfg, grid_scale),
        TaskKind::Relax => tasks::relax(cfg, grid_scale),
        TaskKind::Jacobi => tasks::jacobi(cfg, grid_scale),
        TaskKind::Current => tasks::current(cfg, grid_scale),
        TaskKind::Sympform => tasks::sympform(cfg, grid_scale),
        TaskKind::Convergence => tasks::convergence(cfg, grid_scale),
    }?;
    fs::create_dir_all(out).map_err(|e| io(out, e))?;
    let mut names = Vec::new();
    for (name, contents) in &outcome.files {
        let p = out.join(name);
        fs::write(&p, contents).map_err(|e| io(&p, e))?;
        names.push(name.clone());
    }
    let mut metrics = outcome.metrics;
    metrics.insert("grid_scale".into(), grid_scale.into());
    let json = json!({
        "task": task.name(),
        "config_echo": serde_json::to_value(cfg).expect("config serializes"),
        "metrics": metrics,
        "files": names,
    });
    let p = out.join("report.json");
    fs::write(&p, tasks::pretty(&json)).map_err(|e| io(&p, e))?;
    Ok(Report { json, failure: outcome.failure })
}

/// Reads, validates and runs; returns the process exit status.
pub fn run(args: &Args) -> i32 {
    let result = fs::read_to_string(&args.config)
        .map_err(|e| io(&args.config, e))
        .and_then(|text| parse_config(&text))
        .and_then(|cfg| run_config(args.task, &cfg, &args.out, args.grid_scale as usize));
    match result {
        Ok(Report { failure: None, .. }) => 0,
        Ok(Report { failure: Some(msg), .. }) => {
            eprintln!("brane: {msg}");
            3
        }
        Err(e) => {
            eprintln!("brane: {e}");
            e.exit_code()
        }
    }
}
