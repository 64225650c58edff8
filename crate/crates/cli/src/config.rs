//! Run configuration: one TOML file, overridden by command-line flags, echoed
//! into every run directory.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rehab_contrast::inference::{ReferenceOptions, VarianceKind, DEFAULT_THRESHOLD, DEFAULT_VARIANCE_EPSILON};
use rehab_contrast::model::{EncoderConfig, HeadMode, ProjectionConfig, RegressionHeadConfig};
use rehab_contrast::skeleton::{ingest, load_canonical, Dataset, DatasetKind, SplitScheme};
use rehab_contrast::training::TrainConfig;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

/// Output paths that are relative resolve against this directory when set.
pub const OUTPUT_ROOT_ENV: &str = "REHAB_OUTPUT_ROOT";

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub out_dir: Option<PathBuf>,
    pub dataset: DatasetSection,
    pub model: ModelSection,
    pub train: TrainConfig,
    pub inference: InferenceSection,
    pub eval: EvalSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DatasetSection {
    /// A directory in the canonical format; takes precedence over `kind`/`root`.
    pub canonical: Option<PathBuf>,
    /// `uiprmd`, `irds` or `kimore`, read from `root` and resampled to `length`.
    pub kind: Option<String>,
    pub root: Option<PathBuf>,
    pub length: usize,
    /// Keep only this exercise type.
    pub exercise_type: Option<String>,
}

impl Default for DatasetSection {
    fn default() -> Self {
        DatasetSection {
            canonical: None,
            kind: None,
            root: None,
            length: 64,
            exercise_type: None,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelSection {
    pub encoder: EncoderConfig,
    pub projection: ProjectionConfig,
    pub regression: RegressionHeadConfig,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThresholdPolicy {
    /// Maximize balanced accuracy on the training scores of each type.
    #[default]
    Calibrate,
    /// Use `default_threshold` for every type.
    Fixed,
}

impl FromStr for ThresholdPolicy {
    type Err = CliError;

    fn from_str(s: &str) -> CliResult<Self> {
        match s {
            "calibrate" => Ok(ThresholdPolicy::Calibrate),
            "fixed" => Ok(ThresholdPolicy::Fixed),
            _ => Err(CliError::Usage(format!("unknown threshold policy `{s}` (expected calibrate or fixed)"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InferenceSection {
    pub head_mode: HeadMode,
    pub variance_epsilon: f64,
    pub variance: VarianceKind,
    pub threshold: ThresholdPolicy,
    pub default_threshold: f64,
}

impl Default for InferenceSection {
    fn default() -> Self {
        InferenceSection {
            head_mode: HeadMode::WithProjection,
            variance_epsilon: DEFAULT_VARIANCE_EPSILON,
            variance: VarianceKind::Population,
            threshold: ThresholdPolicy::Calibrate,
            default_threshold: DEFAULT_THRESHOLD,
        }
    }
}

impl InferenceSection {
    pub fn reference_options(&self) -> ReferenceOptions {
        ReferenceOptions {
            head_mode: self.head_mode,
            variance_epsilon: self.variance_epsilon,
            variance: self.variance,
            default_threshold: self.default_threshold,
        }
    }
}

/// How a dataset is divided between training and held-out evaluation.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum Protocol {
    #[serde(rename = "all")]
    All,
    #[default]
    #[serde(rename = "ratio_3_1")]
    Ratio3To1,
    #[serde(rename = "kfold_5")]
    KFold5,
}

impl Protocol {
    pub fn scheme(self) -> Option<SplitScheme> {
        match self {
            Protocol::All => None,
            Protocol::Ratio3To1 => Some(SplitScheme::Ratio3To1),
            Protocol::KFold5 => Some(SplitScheme::KFold5),
        }
    }
}

impl FromStr for Protocol {
    type Err = CliError;

    fn from_str(s: &str) -> CliResult<Self> {
        match s {
            "all" | "none" => Ok(Protocol::All),
            other => match SplitScheme::from_str(other)? {
                SplitScheme::Ratio3To1 => Ok(Protocol::Ratio3To1),
                SplitScheme::KFold5 => Ok(Protocol::KFold5),
            },
        }
    }
}

impl fmt::Display for Protocol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.scheme() {
            Some(s) => write!(f, "{s}"),
            None => f.write_str("all"),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalSection {
    pub protocol: Protocol,
    pub seed: u64,
    /// Which fold of the protocol to train on and hold out.
    pub fold: usize,
}

impl RunConfig {
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Config {
            path: path.to_owned(),
            message: e.to_string(),
        })?;
        toml::from_str(&text).map_err(|e| CliError::Config {
            path: path.to_owned(),
            message: e.to_string(),
        })
    }

    pub fn load_or_default(path: Option<&Path>) -> CliResult<Self> {
        path.map_or_else(|| Ok(RunConfig::default()), RunConfig::load)
    }

    pub fn to_toml(&self) -> CliResult<String> {
        toml::to_string_pretty(self).map_err(|e| CliError::Usage(format!("config cannot be serialized: {e}")))
    }
}

/// `path` under the output root when it is relative and the root is set.
pub fn resolve_output(path: &Path) -> PathBuf {
    match std::env::var_os(OUTPUT_ROOT_ENV) {
        Some(root) if path.is_relative() => Path::new(&root).join(path),
        _ => path.to_owned(),
    }
}

pub fn require_exists(path: &Path, what: &str) -> CliResult<()> {
    if path.exists() {
        Ok(())
    } else {
        Err(CliError::Usage(format!("{what} `{}` does not exist", path.display())))
    }
}

pub fn parse_dataset_kind(kind: &str) -> CliResult<DatasetKind> {
    Ok(DatasetKind::from_str(kind)?)
}

impl DatasetSection {
    pub fn load(&self) -> CliResult<Dataset> {
        let data = if let Some(dir) = &self.canonical {
            require_exists(dir, "dataset directory")?;
            load_canonical(dir)?
        } else {
            let (Some(kind), Some(root)) = (&self.kind, &self.root) else {
                return Err(CliError::Usage(
                    "no dataset given: pass --data or set dataset.canonical (or dataset.kind and dataset.root)".into(),
                ));
            };
            require_exists(root, "dataset root")?;
            ingest(parse_dataset_kind(kind)?, root)?.canonicalize(self.length)?
        };
        Ok(match &self.exercise_type {
            Some(ty) => {
                let subset = data.filter_type(&ty.as_str().into());
                if subset.is_empty() {
                    return Err(CliError::Usage(format!("dataset has no samples of exercise type `{ty}`")));
                }
                subset
            }
            None => data,
        })
    }
}
