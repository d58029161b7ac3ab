use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::dimensions::DEFAULT_SEQ_FAT_DEPTH;
use crate::domain::{FiniteDistribution, FunctionClass, InstanceId, Stream};
use crate::error::{MorError, Result};
use crate::io::{parse_json, read_json, ClassDoc, DistributionDoc, ExampleJson, StreamDoc};
use crate::losses::LossSpec;
use crate::online::{Feedback, DEFAULT_EXPERT_CAP};

pub const SCHEMA_VERSION: u32 = 1;

/// A document given inline or as a path relative to the config file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Source<T> {
    Path(PathBuf),
    Inline(T),
}

impl<T: Clone + serde::de::DeserializeOwned> Source<T> {
    pub fn load(&self, base: &Path) -> Result<T> {
        match self {
            Source::Inline(t) => Ok(t.clone()),
            Source::Path(p) => read_json(&base.join(p)),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    pub scenario: String,
    pub seed: u64,
    pub class: Source<ClassDoc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub distribution: Option<Source<DistributionDoc>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub loss: Option<LossSpec>,
    pub pipeline: Pipeline,
    #[serde(default)]
    pub output: Output,
    /// Directory relative paths are resolved against.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Output {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub csv: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Pipeline {
    Dims(DimsParams),
    Batch(BatchParams),
    Online(OnlineParams),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DimsParams {
    #[serde(default = "default_gamma")]
    pub gamma: f64,
    #[serde(default = "default_depth")]
    pub max_depth: usize,
}

fn default_gamma() -> f64 {
    0.1
}

fn default_depth() -> usize {
    DEFAULT_SEQ_FAT_DEPTH
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BatchReduction {
    Alg1,
    Concat,
    ExtractCls,
    ExtractReg,
    Lp,
    Threshold,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BatchParams {
    pub reduction: BatchReduction,
    pub eps: f64,
    pub delta: f64,
    pub trials: usize,
    /// Coordinate for the extraction reductions.
    #[serde(default)]
    pub k: usize,
    /// Discretization scale; the proof default when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    /// Witness map for the threshold reduction.
    #[serde(default, skip_serializing_if = "Option::is_none", deserialize_with = "instance_keys")]
    pub thresholds: Option<BTreeMap<InstanceId, f64>>,
}

// JSON object keys are strings, and the tagged pipeline enum buffers them
// before the map type is known, so instance ids are parsed here.
fn instance_keys<'de, D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Option<BTreeMap<InstanceId, f64>>, D::Error> {
    let Some(raw) = Option::<BTreeMap<String, f64>>::deserialize(d)? else { return Ok(None) };
    raw.into_iter()
        .map(|(k, v)| k.parse().map(|k| (k, v)).map_err(|_| serde::de::Error::custom(format!("instance id `{k}` is not an integer"))))
        .collect::<std::result::Result<_, _>>()
        .map(Some)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OnlineReduction {
    Rewa,
    Exp4,
    Mcsoa,
    Convert,
    ConvertBandit,
    Concat,
    ExtractCls,
    ExtractReg,
    Lp,
}

impl OnlineReduction {
    pub fn feedback(self) -> Feedback {
        match self {
            OnlineReduction::Exp4 | OnlineReduction::ConvertBandit => Feedback::Bandit,
            _ => Feedback::Full,
        }
    }

    /// Pipelines built from subsampled experts.
    pub fn is_conversion(self) -> bool {
        matches!(
            self,
            OnlineReduction::Convert | OnlineReduction::ConvertBandit | OnlineReduction::ExtractReg | OnlineReduction::Lp
        )
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case")]
pub enum StreamSpec {
    Inline {
        rounds: Vec<ExampleJson>,
    },
    File {
        path: PathBuf,
    },
    /// Draws from a distribution (the top-level one when absent). With
    /// `per_seed` every seed gets its own stream, otherwise all seeds share one.
    Iid {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        distribution: Option<Source<DistributionDoc>>,
        #[serde(default)]
        per_seed: bool,
    },
    /// A random root-to-leaf path of a shattered Littlestone tree, per seed.
    Tree,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OnlineParams {
    pub reduction: OnlineReduction,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub feedback: Option<Feedback>,
    pub horizons: Vec<usize>,
    pub seeds: usize,
    #[serde(default = "default_beta")]
    pub beta: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(default = "default_cap")]
    pub expert_cap: usize,
    #[serde(default)]
    pub exploration: f64,
    #[serde(default)]
    pub k: usize,
    pub stream: StreamSpec,
    /// Seeds per probe stream when measuring the wrapped learner's regret.
    #[serde(default = "default_probe_seeds")]
    pub probe_seeds: usize,
    #[serde(default)]
    pub tolerance: f64,
    /// Upper limit on the fitted growth exponent's upper confidence bound.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_exponent: Option<f64>,
}

fn default_beta() -> f64 {
    0.5
}

fn default_cap() -> usize {
    DEFAULT_EXPERT_CAP
}

fn default_probe_seeds() -> usize {
    20
}

impl ExperimentConfig {
    pub fn from_path(path: &Path) -> Result<Self> {
        let mut cfg: ExperimentConfig = read_json(path)?;
        cfg.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        cfg.check_version(&path.display().to_string())?;
        Ok(cfg)
    }

    pub fn parse(text: &str, origin: &str) -> Result<Self> {
        let cfg: ExperimentConfig = parse_json(text, origin)?;
        cfg.check_version(origin)?;
        Ok(cfg)
    }

    fn check_version(&self, origin: &str) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(MorError::Config {
                path: origin.to_string(),
                msg: format!("schema_version {} is not supported (expected {SCHEMA_VERSION})", self.schema_version),
            });
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn load_class(&self) -> Result<FunctionClass> {
        self.class.load(&self.base_dir)?.build()
    }

    pub fn load_distribution(&self) -> Result<Option<FiniteDistribution>> {
        self.distribution.as_ref().map(|d| d.load(&self.base_dir)?.build()).transpose()
    }

    pub fn require_distribution(&self) -> Result<FiniteDistribution> {
        self.load_distribution()?.ok_or_else(|| MorError::Config {
            path: "distribution".into(),
            msg: "this pipeline needs a distribution".into(),
        })
    }

    pub fn require_loss(&self) -> Result<LossSpec> {
        let loss = self.loss.clone().ok_or_else(|| MorError::Config {
            path: "loss".into(),
            msg: "this pipeline needs a loss".into(),
        })?;
        loss.validate()?;
        Ok(loss)
    }

    pub(crate) fn resolve(&self, p: &Path) -> PathBuf {
        self.base_dir.join(p)
    }
}

pub(crate) fn read_stream(path: &Path) -> Result<Stream> {
    Ok(read_json::<StreamDoc>(path)?.build())
}
