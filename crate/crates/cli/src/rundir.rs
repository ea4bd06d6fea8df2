//! Run directory layout, the advisory lock and per-command manifests.

use std::fs::OpenOptions;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::error::{CliError, CliResult};

pub const LOCK_FILE: &str = ".lock";
pub const MODEL_FILE: &str = "model.toml";
pub const CONFIG_FILE: &str = "config.toml";
pub const POLICY_DIR: &str = "policies";
pub const LOG_DIR: &str = "logs";
pub const ORACLE_TRACE: &str = "oracle_trace.csv";
pub const ORACLE_CSV: &str = "oracle.csv";
pub const GAPS_CSV: &str = "gaps.csv";
pub const EVAL_MODES_CSV: &str = "eval_modes.csv";
pub const BD_CSV: &str = "bd.csv";
pub const BD_TEXT: &str = "bd.txt";
pub const PLOT_SVG: &str = "rd.svg";
pub const REPORT_MD: &str = "report.md";
pub const MANIFEST_SUFFIX: &str = ".manifest.toml";

/// λ as it appears in file names: shortest round-trip decimal.
pub fn lambda_tag(lambda: f64) -> String {
    format!("l{lambda}")
}

pub fn rd_csv_name(method: &str) -> String {
    format!("rd_{method}.csv")
}

pub fn policy_path(dir: &Path, kind: &str, lambda: f64) -> PathBuf {
    dir.join(POLICY_DIR)
        .join(format!("{kind}_{}.policy", lambda_tag(lambda)))
}

pub fn log_path(dir: &Path, kind: &str, lambda: f64) -> PathBuf {
    dir.join(LOG_DIR).join(format!("{kind}_{}.csv", lambda_tag(lambda)))
}

pub fn create_dir(path: &Path) -> CliResult<()> {
    std::fs::create_dir_all(path).map_err(|e| CliError::io(path, e))
}

pub fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> CliResult<()> {
    std::fs::write(path, contents).map_err(|e| CliError::io(path, e))
}

pub fn read_file(path: &Path) -> CliResult<String> {
    std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))
}

/// Held for the lifetime of one command; removed on drop.
#[derive(Debug)]
pub struct RunLock {
    path: PathBuf,
}

impl RunLock {
    pub fn acquire(dir: &Path) -> CliResult<Self> {
        create_dir(dir)?;
        let path = dir.join(LOCK_FILE);
        match OpenOptions::new().write(true).create_new(true).open(&path) {
            Ok(_) => Ok(RunLock { path }),
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => Err(CliError::Locked(dir.to_path_buf())),
            Err(e) => Err(CliError::io(&path, e)),
        }
    }
}

impl Drop for RunLock {
    fn drop(&mut self) {
        let _ = std::fs::remove_file(&self.path);
    }
}

/// Written beside a command's outputs. `config` is the full effective
/// configuration, so `argv` plus `config` reproduce the invocation exactly.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub command: String,
    pub argv: Vec<String>,
    pub code_version: String,
    pub config_hash: String,
    pub seed: u64,
    pub started_unix_s: f64,
    pub wall_clock_s: f64,
    pub outputs: Vec<String>,
    /// Named measurements such as agent decision time.
    #[serde(default)]
    pub timings: std::collections::BTreeMap<String, f64>,
    pub config: String,
}

pub fn manifest_path(dir: &Path, command: &str) -> PathBuf {
    dir.join(format!("{command}{MANIFEST_SUFFIX}"))
}

/// Tracks one command's outputs and timing while it runs.
#[derive(Debug)]
pub struct CommandRun<'a> {
    pub dir: PathBuf,
    pub config: &'a RunConfig,
    command: String,
    argv: Vec<String>,
    started: SystemTime,
    clock: Instant,
    outputs: Vec<String>,
    timings: std::collections::BTreeMap<String, f64>,
    _lock: RunLock,
}

impl<'a> CommandRun<'a> {
    pub fn start(dir: &Path, config: &'a RunConfig, command: &str, argv: Vec<String>) -> CliResult<Self> {
        let lock = RunLock::acquire(dir)?;
        Ok(CommandRun {
            dir: dir.to_path_buf(),
            config,
            command: command.to_string(),
            argv,
            started: SystemTime::now(),
            clock: Instant::now(),
            outputs: Vec::new(),
            timings: Default::default(),
            _lock: lock,
        })
    }

    pub fn path(&self, name: impl AsRef<Path>) -> PathBuf {
        self.dir.join(name)
    }

    /// Writes a file under the run directory and records it as an output.
    pub fn write(&mut self, rel: impl AsRef<Path>, contents: impl AsRef<[u8]>) -> CliResult<PathBuf> {
        let path = self.dir.join(rel.as_ref());
        if let Some(parent) = path.parent() {
            create_dir(parent)?;
        }
        write_file(&path, contents)?;
        self.record(rel.as_ref());
        Ok(path)
    }

    pub fn record(&mut self, rel: &Path) {
        self.outputs.push(rel.to_string_lossy().replace('\\', "/"));
    }

    pub fn timing(&mut self, name: &str, value: f64) {
        self.timings.insert(name.to_string(), value);
    }

    pub fn finish(self) -> CliResult<Manifest> {
        let manifest = Manifest {
            command: self.command.clone(),
            argv: self.argv.clone(),
            code_version: env!("CARGO_PKG_VERSION").to_string(),
            config_hash: self.config.hash(),
            seed: self.config.seed,
            started_unix_s: self
                .started
                .duration_since(UNIX_EPOCH)
                .map(|d| d.as_secs_f64())
                .unwrap_or(0.0),
            wall_clock_s: self.clock.elapsed().as_secs_f64(),
            outputs: self.outputs.clone(),
            timings: self.timings.clone(),
            config: self.config.to_toml(),
        };
        let text = toml::to_string(&manifest).expect("manifest serialization is infallible");
        write_file(&manifest_path(&self.dir, &self.command), text)?;
        Ok(manifest)
    }
}

pub fn load_manifest(path: &Path) -> CliResult<Manifest> {
    let text = read_file(path)?;
    toml::from_str(&text).map_err(|e| {
        CliError::Core(semcode::Error::Parse {
            path: path.to_path_buf(),
            line: semcode::env::modelfile::toml_line(&text, &e),
            message: e.message().to_string(),
        })
    })
}
