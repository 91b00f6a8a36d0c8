use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::buffer::MemoryStrategy;
use crate::data::surrogate::SurrogateConfig;
use crate::data::SplitMode;
use crate::error::{Error, Result};
use crate::trainer::{Method, TrainConfig};

/// A synthetic twin of the real training set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TwinSource {
    pub tag: String,
    pub root: PathBuf,
    /// Relative share of the substituted samples; shares are normalized.
    #[serde(default = "one")]
    pub share: f64,
}

fn one() -> f64 {
    1.0
}

/// Image folders on disk, or the built-in surrogate generator.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub train_root: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub test_root: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub twins: Vec<TwinSource>,
    /// Expected number of classes for folder datasets.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub classes: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub surrogate: Option<SurrogateConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitConfig {
    #[serde(default = "cil")]
    pub mode: SplitMode,
    /// CIL task count, or DIL step count.
    pub tasks: usize,
    /// Fine-to-coarse class map (DIL only).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coarse_map: Option<Vec<usize>>,
}

fn cil() -> SplitMode {
    SplitMode::Cil
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub data: DataConfig,
    /// Contamination ratio `P`.
    #[serde(default)]
    pub ratio: f64,
    pub split: SplitConfig,
    #[serde(default)]
    pub train: TrainConfig,
    pub seeds: Vec<u64>,
    /// Output directory; not part of the fingerprint.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out_dir: Option<PathBuf>,
}

/// Command-line overrides of config fields.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub ratio: Option<f64>,
    pub buffer_size: Option<usize>,
    pub method: Option<Method>,
    pub mem_strategy: Option<MemoryStrategy>,
    pub seeds: Option<Vec<u64>>,
    pub out_dir: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.seeds.is_empty() {
            return Err(Error::config("seeds", "seed list must not be empty"));
        }
        if !(0.0..=1.0).contains(&self.ratio) {
            return Err(Error::config("ratio", format!("must lie in [0, 1], got {}", self.ratio)));
        }
        if self.split.tasks == 0 {
            return Err(Error::config("split.tasks", "must be positive"));
        }
        match (self.split.mode, &self.split.coarse_map) {
            (SplitMode::Dil, None) => {
                return Err(Error::config("split.coarse_map", "required for dil splits"))
            }
            (SplitMode::Cil, Some(_)) => {
                return Err(Error::config("split.coarse_map", "only valid for dil splits"))
            }
            _ => {}
        }
        self.validate_data()?;
        self.train
            .validate()
            .map_err(|e| Error::config("train", e.to_string()))
    }

    fn validate_data(&self) -> Result<()> {
        let d = &self.data;
        match (&d.surrogate, &d.train_root, &d.test_root) {
            (Some(_), None, None) => {
                if !d.twins.is_empty() {
                    return Err(Error::config("data.twins", "the surrogate brings its own twin"));
                }
            }
            (None, Some(train), Some(test)) => {
                if d.classes.is_none() {
                    return Err(Error::config("data.classes", "required for folder datasets"));
                }
                for (field, path) in [("data.train_root", train), ("data.test_root", test)] {
                    if !path.is_dir() {
                        return Err(Error::config(field, format!("{} is not a directory", path.display())));
                    }
                }
                for (i, twin) in d.twins.iter().enumerate() {
                    if !twin.root.is_dir() {
                        return Err(Error::config(
                            format!("data.twins[{i}].root"),
                            format!("{} is not a directory", twin.root.display()),
                        ));
                    }
                    if !(twin.share > 0.0 && twin.share.is_finite()) {
                        return Err(Error::config(format!("data.twins[{i}].share"), "must be positive"));
                    }
                }
                if self.ratio > 0.0 && d.twins.is_empty() {
                    return Err(Error::config("data.twins", "a positive ratio needs at least one twin"));
                }
            }
            _ => {
                return Err(Error::config(
                    "data",
                    "set either `surrogate` or both `train_root` and `test_root`",
                ))
            }
        }
        Ok(())
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(r) = o.ratio {
            self.ratio = r;
        }
        if let Some(b) = o.buffer_size {
            self.train.buffer_capacity = b;
        }
        if let Some(m) = o.method {
            self.train.method = m;
        }
        if let Some(s) = o.mem_strategy {
            self.train.mem_strategy = s;
        }
        if let Some(s) = &o.seeds {
            self.seeds = s.clone();
        }
        if let Some(out) = &o.out_dir {
            self.out_dir = Some(out.clone());
        }
    }

    /// Canonical TOML text; parsing it back gives an equal config.
    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::config("", e.to_string()))
    }

    /// Hex SHA-256 of the canonical JSON form (keys sorted), without `out_dir`.
    pub fn fingerprint(&self) -> Result<String> {
        let mut value = serde_json::to_value(self)?;
        if let Some(map) = value.as_object_mut() {
            map.remove("out_dir");
        }
        let digest = Sha256::digest(serde_json::to_string(&value)?.as_bytes());
        let mut hex = String::with_capacity(64);
        for b in digest {
            write!(hex, "{b:02x}").expect("writing to a String");
        }
        Ok(hex)
    }
}

/// Parses TOML text; schema violations name the offending field path.
pub fn parse_config_str(text: &str) -> Result<ExperimentConfig> {
    let de = toml::Deserializer::new(text);
    let cfg: ExperimentConfig = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        Error::config(if path == "." { String::new() } else { path }, e.into_inner().message().trim().to_string())
    })?;
    cfg.validate()?;
    Ok(cfg)
}

pub fn parse_config(path: &Path) -> Result<ExperimentConfig> {
    let text = fs::read_to_string(path).map_err(|e| Error::config(path.display().to_string(), e.to_string()))?;
    parse_config_str(&text)
}
