//! Metrics documents. The shape is published in `schema/metrics.schema.json`.

use std::fs;
use std::path::Path;

use gfuse_core::trainer::SplitAccuracy;
use serde_json::{json, Map, Value};

use crate::error::{Error, Result};

pub const SCHEMA_VERSION: u32 = 1;
pub const SCHEMA: &str = include_str!("../schema/metrics.schema.json");

#[derive(Clone, Debug, Default)]
pub struct MetricsDoc {
    pub command: String,
    pub dataset: String,
    pub seed: Option<u64>,
    pub channels: Vec<String>,
    pub accuracy: SplitAccuracy,
    /// Empty when the command fuses nothing.
    pub mean_attention: Vec<f64>,
    pub timings_ms: Vec<(String, f64)>,
    pub config: Map<String, Value>,
    pub loss_trace: Option<Vec<f64>>,
}

impl MetricsDoc {
    pub fn to_json(&self) -> Value {
        let attention: Map<String, Value> = self
            .channels
            .iter()
            .zip(&self.mean_attention)
            .map(|(c, a)| (c.clone(), json!(a)))
            .collect();
        let timings: Map<String, Value> = self.timings_ms.iter().map(|(k, v)| (k.clone(), json!(v))).collect();
        let mut doc = json!({
            "schema_version": SCHEMA_VERSION,
            "command": self.command,
            "dataset": self.dataset,
            "seed": self.seed,
            "channels": self.channels,
            "accuracy": {
                "train": self.accuracy.train,
                "val": self.accuracy.val,
                "test": self.accuracy.test,
            },
            "mean_attention": attention,
            "timings_ms": timings,
            "config": self.config,
        });
        if let Some(trace) = &self.loss_trace {
            doc["loss_trace"] = json!(trace);
        }
        doc
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(&self.to_json()).expect("json value");
        fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
    }
}
