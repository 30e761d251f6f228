//! Experiment pipelines behind the `hyperpair` binary and their artifacts.

pub mod config;
mod pipelines;

pub use config::RunConfig;
pub use pipelines::{cmd_homi_scan, cmd_joint, cmd_qst, cmd_sweep};

use crate::qmath::DensityMatrix;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("I/O error: {0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numerical(_) => 3,
            CliError::Io(_) => 4,
        }
    }
}

pub(crate) fn numerical<E: fmt::Display>(e: E) -> CliError {
    CliError::Numerical(e.to_string())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    HomiScan,
    Qst,
    Joint,
    Sweep,
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Command::HomiScan => "homi-scan",
            Command::Qst => "qst",
            Command::Joint => "joint",
            Command::Sweep => "sweep",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AxisKind {
    Length,
    Angle,
    Pump,
    Bandwidth,
}

impl fmt::Display for AxisKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AxisKind::Length => "length",
            AxisKind::Angle => "angle",
            AxisKind::Pump => "pump",
            AxisKind::Bandwidth => "bandwidth",
        })
    }
}

impl FromStr for AxisKind {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "length" => Ok(AxisKind::Length),
            "angle" => Ok(AxisKind::Angle),
            "pump" => Ok(AxisKind::Pump),
            "bandwidth" => Ok(AxisKind::Bandwidth),
            other => Err(CliError::Config(format!(
                "unknown sweep axis `{other}` (expected length, angle, pump or bandwidth)"
            ))),
        }
    }
}

/// Run-level switches that are not part of the physical configuration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunOptions {
    pub command: Command,
    pub seed: u64,
    pub noiseless: bool,
    pub axis: Option<AxisKind>,
}

/// Everything a run produces, held in memory until written.
#[derive(Debug, Clone, PartialEq)]
pub struct Bundle {
    pub options: RunOptions,
    pub config: RunConfig,
    /// File name → contents, including `summary.json`.
    pub artifacts: BTreeMap<String, Vec<u8>>,
}

#[derive(Debug, Serialize, Deserialize)]
struct BundleManifest {
    command: Command,
    version: String,
    seed: u64,
    noiseless: bool,
    axis: Option<AxisKind>,
    artifacts: Vec<String>,
}

impl Bundle {
    pub(crate) fn new(options: RunOptions, config: &RunConfig) -> Self {
        Self {
            options,
            config: config.clone(),
            artifacts: BTreeMap::new(),
        }
    }

    pub(crate) fn add(&mut self, name: impl Into<String>, bytes: Vec<u8>) {
        self.artifacts.insert(name.into(), bytes);
    }

    pub(crate) fn add_json(&mut self, name: impl Into<String>, value: &Value) {
        let mut text = serde_json::to_string_pretty(value).expect("JSON values serialize");
        text.push('\n');
        self.add(name, text.into_bytes());
    }

    pub fn summary(&self) -> Option<Value> {
        self.artifacts
            .get("summary.json")
            .and_then(|b| serde_json::from_slice(b).ok())
    }

    /// Every file of the bundle directory, including the manifest and the
    /// resolved configuration.
    pub fn files(&self) -> BTreeMap<String, Vec<u8>> {
        let mut files = self.artifacts.clone();
        let mut names: Vec<String> = files.keys().cloned().collect();
        names.push("bundle.json".into());
        names.push("resolved_config.json".into());
        names.sort();
        let manifest = BundleManifest {
            command: self.options.command,
            version: env!("CARGO_PKG_VERSION").into(),
            seed: self.options.seed,
            noiseless: self.options.noiseless,
            axis: self.options.axis,
            artifacts: names,
        };
        let mut m = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
        m.push('\n');
        files.insert("bundle.json".into(), m.into_bytes());
        let mut c = serde_json::to_string_pretty(&self.config).expect("config serializes");
        c.push('\n');
        files.insert("resolved_config.json".into(), c.into_bytes());
        files
    }

    pub fn write(&self, dir: &Path) -> Result<(), CliError> {
        let io = |e: std::io::Error| CliError::Io(format!("{}: {e}", dir.display()));
        std::fs::create_dir_all(dir).map_err(io)?;
        for (name, bytes) in self.files() {
            std::fs::write(dir.join(&name), bytes)
                .map_err(|e| CliError::Io(format!("{}: {e}", dir.join(&name).display())))?;
        }
        Ok(())
    }
}

/// Runs one pipeline.
pub fn run(config: &RunConfig, options: RunOptions) -> Result<Bundle, CliError> {
    config.validate()?;
    match options.command {
        Command::HomiScan => cmd_homi_scan(config, options),
        Command::Qst => cmd_qst(config, options),
        Command::Joint => cmd_joint(config, options),
        Command::Sweep => cmd_sweep(config, options),
    }
}

/// Runs a pipeline on a dedicated pool of `workers` threads.
pub fn run_with_workers(
    config: &RunConfig,
    options: RunOptions,
    workers: usize,
) -> Result<Bundle, CliError> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| CliError::Config(format!("worker pool: {e}")))?;
    pool.install(|| run(config, options))
}

/// Reads the manifest and configuration of a previous run.
pub fn load_bundle(dir: &Path) -> Result<(RunConfig, RunOptions), CliError> {
    let read = |name: &str| {
        std::fs::read_to_string(dir.join(name))
            .map_err(|e| CliError::Io(format!("{}: {e}", dir.join(name).display())))
    };
    let manifest: BundleManifest = serde_json::from_str(&read("bundle.json")?)
        .map_err(|e| CliError::Config(format!("bundle.json: {e}")))?;
    let config = RunConfig::from_json(&read("resolved_config.json")?)?;
    Ok((
        config,
        RunOptions {
            command: manifest.command,
            seed: manifest.seed,
            noiseless: manifest.noiseless,
            axis: manifest.axis,
        },
    ))
}

/// `{"basis": [...], "entries": [[[re, im], ...], ...]}`, row-major.
pub fn matrix_json(rho: &DensityMatrix) -> Value {
    let n = rho.dim();
    let entries: Vec<Vec<[f64; 2]>> = (0..n)
        .map(|r| {
            (0..n)
                .map(|c| {
                    let z = rho.get(r, c);
                    [z.re, z.im]
                })
                .collect()
        })
        .collect();
    json!({ "basis": rho.labels(), "entries": entries })
}

/// Writes rows through the csv crate.
pub(crate) fn csv_bytes<I, R>(header: &[&str], rows: I) -> Result<Vec<u8>, CliError>
where
    I: IntoIterator<Item = R>,
    R: IntoIterator<Item = String>,
{
    let mut w = csv::Writer::from_writer(Vec::new());
    let io = |e: csv::Error| CliError::Io(e.to_string());
    w.write_record(header).map_err(io)?;
    for row in rows {
        w.write_record(row).map_err(io)?;
    }
    w.into_inner().map_err(|e| CliError::Io(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qmath::PureState2Q;

    #[test]
    fn matrix_json_layout() {
        let v = matrix_json(&PureState2Q::phi_plus().density());
        assert_eq!(v["basis"][0], "HH");
        assert_eq!(v["entries"].as_array().unwrap().len(), 4);
        assert!((v["entries"][0][3][0].as_f64().unwrap() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn exit_codes() {
        assert_eq!(CliError::Config(String::new()).exit_code(), 2);
        assert_eq!(CliError::Numerical(String::new()).exit_code(), 3);
        assert_eq!(CliError::Io(String::new()).exit_code(), 4);
    }

    #[test]
    fn axis_names() {
        for a in [
            AxisKind::Length,
            AxisKind::Angle,
            AxisKind::Pump,
            AxisKind::Bandwidth,
        ] {
            assert_eq!(a.to_string().parse::<AxisKind>().unwrap(), a);
        }
        assert!("width".parse::<AxisKind>().is_err());
    }
}
