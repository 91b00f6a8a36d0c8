use std::collections::HashMap;
use std::fs;
use std::path::Path;

use super::{Learner, ModelConfig};
use crate::error::{Error, Result};

const FORMAT_KEY: &str = "format";
const FORMAT_NAME: &str = "esrm-learner";
const VERSION_KEY: &str = "version";
const CONFIG_KEY: &str = "model_config";

/// Current checkpoint layout version.
pub const CHECKPOINT_VERSION: u32 = 1;

impl Learner {
    /// Writes every weight and batch-norm statistic to one safetensors file;
    /// the model configuration and format version travel in its metadata.
    pub fn save(&self, path: &Path) -> Result<()> {
        let vars = self.named_vars();
        let mut names: Vec<&String> = vars.keys().collect();
        names.sort();
        let tensors: Vec<(&String, &candle_core::Tensor)> =
            names.iter().map(|n| (*n, vars[*n].as_tensor())).collect();
        let metadata = HashMap::from([
            (FORMAT_KEY.to_string(), FORMAT_NAME.to_string()),
            (VERSION_KEY.to_string(), CHECKPOINT_VERSION.to_string()),
            (CONFIG_KEY.to_string(), serde_json::to_string(&self.config)?),
        ]);
        safetensors::tensor::serialize_to_file(tensors, Some(metadata), path)
            .map_err(|e| Error::Checkpoint(format!("{}: {e}", path.display())))
    }

    /// Rebuilds a learner from a file written by [`Learner::save`].
    pub fn load(path: &Path) -> Result<Self> {
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        let (_, header) = safetensors::SafeTensors::read_metadata(&bytes)
            .map_err(|e| Error::Checkpoint(format!("{}: {e}", path.display())))?;
        let meta = header
            .metadata()
            .as_ref()
            .ok_or_else(|| Error::Checkpoint("checkpoint has no metadata".into()))?;
        if meta.get(FORMAT_KEY).map(String::as_str) != Some(FORMAT_NAME) {
            return Err(Error::Checkpoint(format!("{} is not a learner checkpoint", path.display())));
        }
        let version: u32 = meta
            .get(VERSION_KEY)
            .and_then(|v| v.parse().ok())
            .ok_or_else(|| Error::Checkpoint("missing checkpoint version".into()))?;
        if version != CHECKPOINT_VERSION {
            return Err(Error::Checkpoint(format!(
                "checkpoint version {version} is not supported (expected {CHECKPOINT_VERSION})"
            )));
        }
        let config: ModelConfig = serde_json::from_str(
            meta.get(CONFIG_KEY)
                .ok_or_else(|| Error::Checkpoint("missing model config".into()))?,
        )?;
        let learner = Learner::build(config)?;
        let stored = candle_core::safetensors::load_buffer(&bytes, learner.device())?;
        for (name, var) in learner.named_vars() {
            let value = stored
                .get(&name)
                .ok_or_else(|| Error::Checkpoint(format!("checkpoint lacks `{name}`")))?;
            var.set(value)
                .map_err(|e| Error::Checkpoint(format!("`{name}`: {e}")))?;
        }
        Ok(learner)
    }
}
