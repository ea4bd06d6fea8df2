//! Run configuration: one TOML file that, with the code version, fully
//! determines every output of a run directory.

use std::path::{Path, PathBuf};

use semcode::agent::{OptimizerKind, TrainConfig};
use semcode::baselines::{HandcraftedScheme, Shape, ANCHOR_QPS};
use semcode::env::modelfile::{check_version, toml_line};
use semcode::env::{check_qp, GenSpec};
use semcode::metrics::BdVariant;
use semcode::mode::ModeSpace;
use semcode::oracle::DEFAULT_SEARCH_CAP;
use semcode::Error;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{CliError, CliResult};

pub const CONFIG_FORMAT_VERSION: u32 = 1;

pub const DEFAULT_LAMBDAS: [f64; 9] = [0.0, 0.05, 0.1, 0.15, 0.2, 0.4, 0.6, 0.8, 1.0];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub format_version: u32,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_out_dir")]
    pub out_dir: PathBuf,
    #[serde(default = "default_lambdas")]
    pub lambdas: Vec<f64>,
    #[serde(default)]
    pub env: GenSpec,
    #[serde(default)]
    pub space: ModeSpace,
    #[serde(default)]
    pub train: TrainSection,
    #[serde(default)]
    pub baselines: BaselineSection,
    #[serde(default)]
    pub oracle: OracleSection,
    #[serde(default)]
    pub metrics: MetricsSection,
}

fn default_out_dir() -> PathBuf {
    PathBuf::from("run")
}

fn default_lambdas() -> Vec<f64> {
    DEFAULT_LAMBDAS.to_vec()
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            format_version: CONFIG_FORMAT_VERSION,
            seed: 0,
            out_dir: default_out_dir(),
            lambdas: default_lambdas(),
            env: GenSpec::default(),
            space: ModeSpace::default(),
            train: TrainSection::default(),
            baselines: BaselineSection::default(),
            oracle: OracleSection::default(),
            metrics: MetricsSection::default(),
        }
    }
}

/// [`TrainConfig`] without the per-run `lambda` and `seed`, which come from
/// the sweep list and the top-level seed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSection {
    pub iterations: usize,
    pub batch_size: usize,
    pub lr_parent: f64,
    pub lr_child: f64,
    pub gamma: f64,
    pub entropy_coef: f64,
    pub optimizer: OptimizerKind,
    pub calibration_samples: usize,
    pub hidden: Vec<usize>,
    pub parallel_rollouts: bool,
}

impl Default for TrainSection {
    fn default() -> Self {
        let t = TrainConfig::default();
        TrainSection {
            iterations: t.iterations,
            batch_size: t.batch_size,
            lr_parent: t.lr_parent,
            lr_child: t.lr_child,
            gamma: t.gamma,
            entropy_coef: t.entropy_coef,
            optimizer: t.optimizer,
            calibration_samples: t.calibration_samples,
            hidden: t.hidden,
            parallel_rollouts: t.parallel_rollouts,
        }
    }
}

impl TrainSection {
    pub fn to_train_config(&self, lambda: f64, seed: u64) -> TrainConfig {
        TrainConfig {
            iterations: self.iterations,
            batch_size: self.batch_size,
            lr_parent: self.lr_parent,
            lr_child: self.lr_child,
            gamma: self.gamma,
            entropy_coef: self.entropy_coef,
            optimizer: self.optimizer,
            lambda,
            calibration_samples: self.calibration_samples,
            seed,
            hidden: self.hidden.clone(),
            parallel_rollouts: self.parallel_rollouts,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BaselineSection {
    /// Fixed-QP anchor points; their rates are also the rate-control targets.
    pub anchor_qps: Vec<i32>,
    pub handcrafted_qps: Vec<i32>,
    pub shapes: Vec<Shape>,
    pub curvature: f64,
    pub delta_span: i32,
}

impl Default for BaselineSection {
    fn default() -> Self {
        let scheme = HandcraftedScheme::new(Shape::Linear);
        BaselineSection {
            anchor_qps: ANCHOR_QPS.to_vec(),
            handcrafted_qps: ANCHOR_QPS.to_vec(),
            shapes: Shape::ALL.to_vec(),
            curvature: scheme.curvature,
            delta_span: scheme.delta_span,
        }
    }
}

impl BaselineSection {
    pub fn schemes(&self) -> Vec<HandcraftedScheme> {
        self.shapes
            .iter()
            .map(|&shape| HandcraftedScheme {
                shape,
                curvature: self.curvature,
                delta_span: self.delta_span,
            })
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OracleSection {
    /// Largest mode space the oracle will enumerate.
    pub cap: u64,
    /// Write the full `(mode, rate, fidelity)` table as a trace file.
    pub keep_table: bool,
}

impl Default for OracleSection {
    fn default() -> Self {
        OracleSection {
            cap: DEFAULT_SEARCH_CAP as u64,
            keep_table: true,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MetricsSection {
    pub bd_variant: BdVariant,
}

fn invalid(msg: impl Into<String>) -> CliError {
    CliError::Core(Error::InvalidParameter(msg.into()))
}

impl RunConfig {
    pub fn validate(&self) -> CliResult<()> {
        if self.format_version != CONFIG_FORMAT_VERSION {
            return Err(CliError::Core(Error::FormatVersion {
                found: self.format_version,
                expected: CONFIG_FORMAT_VERSION,
            }));
        }
        if self.lambdas.is_empty() {
            return Err(invalid("lambdas must not be empty"));
        }
        for (i, &l) in self.lambdas.iter().enumerate() {
            if !(l.is_finite() && l >= 0.0) {
                return Err(invalid(format!("lambda {l} must be finite and non-negative")));
            }
            if self.lambdas[..i].contains(&l) {
                return Err(invalid(format!("lambda {l} listed twice")));
            }
        }
        self.env.validate()?;
        self.space.validate()?;
        self.train.to_train_config(0.0, self.seed).validate()?;
        let b = &self.baselines;
        if b.anchor_qps.is_empty() || b.handcrafted_qps.is_empty() || b.shapes.is_empty() {
            return Err(invalid("baseline QP and shape lists must not be empty"));
        }
        for &qp in b.anchor_qps.iter().chain(&b.handcrafted_qps) {
            check_qp(qp)?;
        }
        for s in b.schemes() {
            s.validate()?;
        }
        if self.oracle.cap == 0 {
            return Err(invalid("oracle cap must be positive"));
        }
        Ok(())
    }

    pub fn from_toml(text: &str, path: &Path) -> CliResult<Self> {
        check_version(text, path, CONFIG_FORMAT_VERSION)?;
        let config: RunConfig = toml::from_str(text).map_err(|e| {
            CliError::Core(Error::Parse {
                path: path.to_path_buf(),
                line: toml_line(text, &e),
                message: e.message().to_string(),
            })
        })?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::from_toml(&text, path)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serialization is infallible")
    }

    /// SHA-256 of the canonical serialization, lowercase hex.
    pub fn hash(&self) -> String {
        Sha256::digest(self.to_toml().as_bytes())
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }
}
