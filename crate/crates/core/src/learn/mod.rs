//! Per-channel one-vs-rest RBF-SVMs, hyperparameter search and linear late fusion.

mod fusion;
mod kernel;
mod ovr;
mod search;
pub mod smo;
mod svm;

use std::path::Path;

use serde::{Deserialize, Serialize};

pub use fusion::{train_fusion, FusionModel, FusionParams};
pub use kernel::{dot, squared_distance, Gram, Kernel};
pub use ovr::{argmax, train_channel, LabeledData, Standardizer, TrainedChannelModel};
pub use search::{grid_search, grid_search_table, GridPoint, ParamGrid};
pub use svm::{train_binary, train_with_kernel, BinarySvm, SvmParams};

use crate::error::{Error, Result};
use crate::io::{read_json, write_json};

pub const MODEL_FORMAT: &str = "facelayout-model/1";

/// Serialized form of a trained pipeline: one model per channel and an optional fusion layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelBundle {
    pub format: String,
    pub class_names: Vec<String>,
    pub channels: Vec<TrainedChannelModel>,
    #[serde(default)]
    pub fusion: Option<FusionModel>,
    /// Free-form record of the run that produced the bundle.
    #[serde(default)]
    pub config: serde_json::Value,
}

impl ModelBundle {
    pub fn new(class_names: Vec<String>, channels: Vec<TrainedChannelModel>, fusion: Option<FusionModel>) -> Self {
        ModelBundle {
            format: MODEL_FORMAT.to_string(),
            class_names,
            channels,
            fusion,
            config: serde_json::Value::Null,
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_json(path, self)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let b: ModelBundle = read_json(path)?;
        if b.format != MODEL_FORMAT {
            return Err(Error::Format {
                expected: MODEL_FORMAT.into(),
                found: b.format,
            });
        }
        Ok(b)
    }

    /// Final per-class scores for one image given its vector in every channel, in bundle order.
    /// Without a fusion layer the single channel's scores are returned.
    pub fn scores(&self, per_channel: &[&[f64]]) -> Result<Vec<f64>> {
        if per_channel.len() != self.channels.len() {
            return Err(Error::Config(format!(
                "expected {} channel vectors, got {}",
                self.channels.len(),
                per_channel.len()
            )));
        }
        let mut stacked = Vec::with_capacity(self.channels.len() * self.class_names.len());
        for (m, x) in self.channels.iter().zip(per_channel) {
            stacked.extend(m.scores(x)?);
        }
        match &self.fusion {
            Some(f) => f.scores(&stacked),
            None if self.channels.len() == 1 => Ok(stacked),
            None => Err(Error::Config("multiple channels without a fusion layer".into())),
        }
    }
}
