//! Config loading and the four experiments behind the `wcchaos` binary.
//!
//! Every command reads a JSON [`RunConfig`], writes its artifacts to the
//! output directory and records the effective config with its SHA-256 in
//! `meta.json`. A `meta.json` is itself accepted as a config.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};
use wcchaos_core::metrics::convergence_study;
use wcchaos_core::{
    borell_delta, sample_paths, simulate, Error, MeanField, MeanFieldSolution, QuadratureRule, RunConfig,
};

#[derive(Debug)]
pub enum CliError {
    /// Unreadable, malformed or invalid configuration, or unusable paths.
    Config(String),
    /// The numerics failed (blow-up, integration failure, ...).
    Numerical(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numerical(_) => 3,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "config error: {m}"),
            CliError::Numerical(m) => write!(f, "numerical failure: {m}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        if e.is_numerical() {
            CliError::Numerical(e.to_string())
        } else {
            CliError::Config(e.to_string())
        }
    }
}

fn io_error(path: &Path, e: impl fmt::Display) -> CliError {
    CliError::Config(format!("{}: {e}", path.display()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    MeanField,
    Network,
    Figure1,
    Converge,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::MeanField => "meanfield",
            Command::Network => "network",
            Command::Figure1 => "figure1",
            Command::Converge => "converge",
        }
    }
}

/// Prefixes a deserialization message with the path where it occurred.
/// `missing field` errors name the missing field itself.
fn field_message(path: &str, message: &str) -> String {
    let join = |field: &str| {
        if path.is_empty() || path == "." {
            field.to_string()
        } else {
            format!("{path}.{field}")
        }
    };
    if let Some(rest) = message.strip_prefix("missing field `") {
        if let Some(field) = rest.split('`').next() {
            return format!("{}: missing field", join(field));
        }
    }
    // Validation messages from the model already start with the field name.
    if let Some((head, tail)) = message.split_once(": ") {
        let first = head.split('[').next().unwrap_or(head);
        if !head.contains(' ') && first.chars().all(|c| c.is_ascii_alphanumeric() || c == '_') {
            return format!("{}: {tail}", join(head));
        }
    }
    if path.is_empty() || path == "." {
        message.to_string()
    } else {
        format!("{path}: {message}")
    }
}

/// Parses a config document. A `meta.json` written by a previous run is
/// accepted through its `effective_config` entry.
pub fn parse_config(text: &str) -> Result<RunConfig, CliError> {
    let mut value: Value = serde_json::from_str(text).map_err(|e| CliError::Config(format!("invalid JSON: {e}")))?;
    if let Some(inner) = value.get_mut("effective_config") {
        value = inner.take();
    }
    let config: RunConfig = serde_path_to_error::deserialize(value).map_err(|e| {
        let path = e.path().to_string();
        CliError::Config(field_message(&path, &e.inner().to_string()))
    })?;
    config.validate()?;
    Ok(config)
}

pub fn load_config(path: &Path) -> Result<RunConfig, CliError> {
    let text = fs::read_to_string(path).map_err(|e| io_error(path, e))?;
    parse_config(&text)
}

/// Hex SHA-256 of the canonical JSON of `config`.
pub fn config_hash(config: &RunConfig) -> String {
    let bytes = serde_json::to_vec(config).expect("config serializes");
    hex::encode(Sha256::digest(&bytes))
}

fn file_hash(path: &Path) -> Result<String, CliError> {
    let bytes = fs::read(path).map_err(|e| io_error(path, e))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).expect("values serialize");
    text.push('\n');
    fs::write(path, text).map_err(|e| io_error(path, e))
}

/// Overrides from the command line.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
}

/// Applies overrides and revalidates. The result is the effective config.
pub fn effective_config(mut config: RunConfig, overrides: &Overrides) -> Result<RunConfig, CliError> {
    if let Some(seed) = overrides.seed {
        config.seed = seed;
    }
    if let Some(out) = &overrides.out {
        config.output_dir = Some(out.clone());
    }
    config.validate()?;
    Ok(config)
}

fn output_dir(config: &RunConfig) -> Result<PathBuf, CliError> {
    let dir = config.output_dir.clone().unwrap_or_else(|| PathBuf::from("."));
    fs::create_dir_all(&dir).map_err(|e| io_error(&dir, e))?;
    Ok(dir)
}

fn solve(config: &RunConfig) -> Result<MeanFieldSolution, CliError> {
    let rule = QuadratureRule::new(config.quadrature_order)?;
    Ok(MeanField::new(config.model.clone(), rule).solve(config.t_end, config.ode_dt())?)
}

/// Runs `command` and returns the paths written, `meta.json` last.
pub fn run(command: Command, config: &RunConfig) -> Result<Vec<PathBuf>, CliError> {
    let dir = output_dir(config)?;
    let mut written = Vec::new();
    let mut summary = json!({});
    match command {
        Command::MeanField => {
            let sol = solve(config)?;
            let csv = dir.join("meanfield.csv");
            sol.save_csv(&csv)?;
            let last = sol.last();
            summary = json!({
                "t_end": sol.t_end(),
                "steps": sol.states().len() - 1,
                "final_mean": last.m,
                "final_variance": last.q,
                "max_variance": sol.max_variance(),
                "tail_delta": borell_delta(&sol),
                "final_coefficients": sol.coefficients_at(sol.t_end())?
                    .iter()
                    .map(|c| json!({ "slope": c.slope, "forcing": c.forcing }))
                    .collect::<Vec<_>>(),
            });
            let path = dir.join("summary.json");
            write_json(&path, &summary)?;
            written.extend([csv, path]);
        }
        Command::Network => {
            let paths = simulate(config)?;
            let csv = dir.join("network.csv");
            paths.save_csv(&csv)?;
            summary = json!({ "rows": paths.len(), "columns": paths.columns().len(), "max_abs": paths.max_abs() });
            written.push(csv);
        }
        Command::Figure1 => {
            let sol = solve(config)?;
            let paths = sample_paths(&sol, config.samples, config)?;
            // Means and variances on the path grid.
            let csv_means = dir.join("figure1_means.csv");
            write_means(&sol, paths.times(), &csv_means)?;
            let csv_paths = dir.join("figure1_paths.csv");
            paths.save_csv(&csv_paths)?;
            summary = json!({ "rows": paths.len(), "samples": config.samples });
            written.extend([csv_means, csv_paths]);
        }
        Command::Converge => {
            let converge = config
                .converge
                .as_ref()
                .ok_or_else(|| CliError::Config("converge: missing block".into()))?;
            let sol = solve(config)?;
            let report = convergence_study(
                config,
                &sol,
                &converge.ladder,
                converge.replications,
                converge.w1_times,
                converge.refinement_check,
            )?;
            report.save(&dir)?;
            summary = json!({
                "strictly_decreasing": report.strictly_decreasing(),
                "log_log_slope": report.log_log_slope,
            });
            written.extend([dir.join("convergence.csv"), dir.join("report.json")]);
        }
    }
    let outputs = written
        .iter()
        .map(|p| Ok((p.file_name().unwrap().to_string_lossy().into_owned(), Value::from(file_hash(p)?))))
        .collect::<Result<serde_json::Map<String, Value>, CliError>>()?;
    let meta = json!({
        "command": command.name(),
        "version": env!("CARGO_PKG_VERSION"),
        "config_sha256": config_hash(config),
        "effective_config": config,
        "outputs": outputs,
        "summary": summary,
    });
    let path = dir.join("meta.json");
    write_json(&path, &meta)?;
    written.push(path);
    Ok(written)
}

fn write_means(sol: &MeanFieldSolution, times: &[f64], path: &Path) -> Result<(), CliError> {
    let p = sol.model().params().num_populations();
    let mut header = vec!["t".to_string()];
    header.extend((1..=p).map(|a| format!("m_{a}")));
    header.extend((1..=p).map(|a| format!("q_{a}")));
    let rows = times
        .iter()
        .map(|&t| {
            let s = sol.state_at(t)?;
            Ok(std::iter::once(t)
                .chain(s.m.iter().copied())
                .chain(s.q.iter().copied())
                .map(wcchaos_core::output::fmt_f64)
                .collect::<Vec<_>>())
        })
        .collect::<Result<Vec<_>, Error>>()?;
    let file = fs::File::create(path).map_err(|e| io_error(path, e))?;
    wcchaos_core::output::write_rows(std::io::BufWriter::new(file), &header, rows)?;
    Ok(())
}
