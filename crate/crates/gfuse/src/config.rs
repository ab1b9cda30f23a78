//! Flat `key = value` run configuration.
//!
//! `#` starts a comment. Every value is type-checked when it is set, from a
//! file or a flag; flags are applied after the file and win.

use std::fs;
use std::path::{Path, PathBuf};

use gfuse_core::{ChannelSpec, TrainConfig};
use serde_json::{json, Value};

use crate::error::{Error, Result};

pub const KEYS: [&str; 13] = [
    "dataset",
    "cache_dir",
    "channels",
    "n_batches",
    "batch_size",
    "lr",
    "hidden_dims",
    "n_layers",
    "entropy",
    "seed",
    "mask_hgc",
    "rcond",
    "out",
];

#[derive(Clone, Debug, Default, PartialEq)]
pub struct RunConfig {
    pub dataset: Option<PathBuf>,
    pub cache_dir: Option<PathBuf>,
    pub channels: Option<Vec<ChannelSpec>>,
    pub n_batches: Option<usize>,
    pub batch_size: Option<usize>,
    pub lr: Option<f64>,
    /// Width of every hidden layer.
    pub hidden_dims: Option<usize>,
    pub n_layers: Option<usize>,
    pub entropy: Option<f64>,
    pub seed: Option<u64>,
    pub mask_hgc: Option<bool>,
    pub rcond: Option<f64>,
    pub out: Option<PathBuf>,
}

fn num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("`{key}`: cannot parse `{value}`")))
}

fn positive(key: &str, value: &str) -> Result<f64> {
    let v: f64 = num(key, value)?;
    if !(v > 0.0 && v.is_finite()) {
        return Err(Error::Config(format!("`{key}` must be a positive number, got `{value}`")));
    }
    Ok(v)
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        let mut seen = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected `key = value`", i + 1)))?;
            let key = key.trim();
            if seen.contains(&key) {
                return Err(Error::Config(format!("line {}: `{key}` set twice", i + 1)));
            }
            seen.push(key);
            cfg.set(key, value.trim())
                .map_err(|e| Error::Config(format!("line {}: {}", i + 1, e.to_string().trim_start_matches("config: "))))?;
        }
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "dataset" => self.dataset = Some(value.into()),
            "cache_dir" => self.cache_dir = Some(value.into()),
            "out" => self.out = Some(value.into()),
            "channels" => self.channels = Some(ChannelSpec::parse_list(value)?),
            "n_batches" => self.n_batches = Some(num(key, value)?),
            "batch_size" => self.batch_size = Some(num(key, value)?),
            "hidden_dims" => self.hidden_dims = Some(num(key, value)?),
            "n_layers" => self.n_layers = Some(num(key, value)?),
            "seed" => self.seed = Some(num(key, value)?),
            "lr" => self.lr = Some(positive(key, value)?),
            "entropy" => self.entropy = Some(positive(key, value)?),
            "rcond" => self.rcond = Some(positive(key, value)?),
            "mask_hgc" => {
                self.mask_hgc = Some(match value.to_ascii_lowercase().as_str() {
                    "true" | "1" | "yes" => true,
                    "false" | "0" | "no" => false,
                    _ => return Err(Error::Config(format!("`mask_hgc`: cannot parse `{value}`"))),
                })
            }
            _ => return Err(Error::Config(format!("unknown key `{key}`"))),
        }
        Ok(())
    }

    pub fn dataset(&self) -> Result<&Path> {
        self.dataset
            .as_deref()
            .ok_or_else(|| Error::Config("missing required key `dataset`".into()))
    }

    pub fn channels(&self) -> Vec<ChannelSpec> {
        self.channels.clone().unwrap_or_else(ChannelSpec::default_set)
    }

    /// Training settings. The per-graph knobs have no defaults.
    pub fn train_config(&self) -> Result<TrainConfig> {
        fn req<T: Copy>(v: Option<T>, key: &str) -> Result<T> {
            v.ok_or_else(|| Error::Config(format!("missing required key `{key}`")))
        }
        let base = TrainConfig::default();
        let n_layers = req(self.n_layers, "n_layers")?;
        let hidden_dim = if n_layers > 1 {
            req(self.hidden_dims, "hidden_dims")?
        } else {
            self.hidden_dims.unwrap_or(base.hidden_dim)
        };
        let cfg = TrainConfig {
            channels: self.channels(),
            n_batches: req(self.n_batches, "n_batches")?,
            batch_size: self.batch_size.unwrap_or(base.batch_size),
            lr: req(self.lr, "lr")?,
            hidden_dim,
            n_layers,
            entropy: req(self.entropy, "entropy")?,
            seed: self.seed.unwrap_or(base.seed),
            mask_hgc: self.mask_hgc.unwrap_or(base.mask_hgc),
            rcond: self.rcond.unwrap_or(base.rcond),
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

pub fn train_config_json(cfg: &TrainConfig) -> Value {
    json!({
        "channels": cfg.channels.iter().map(|c| c.name.clone()).collect::<Vec<_>>(),
        "n_batches": cfg.n_batches,
        "batch_size": cfg.batch_size,
        "lr": cfg.lr,
        "hidden_dims": cfg.hidden_dim,
        "n_layers": cfg.n_layers,
        "entropy": cfg.entropy,
        "seed": cfg.seed,
        "mask_hgc": cfg.mask_hgc,
        "rcond": cfg.rcond,
    })
}
