//! Flat JSON run configuration. Built-in defaults are overridden by the
//! config file, which the command line overrides in turn.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::encoder::ToyEncoderConfig;
use crate::error::{Error, Result};
use crate::eval::Variant;
use crate::model::{LossWeights, TrainConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Defaults to `<out_dir>/corpus.jsonl`.
    pub corpus: Option<PathBuf>,
    /// Defaults to `<out_dir>/lexicon.tsv`.
    pub lexicon: Option<PathBuf>,
    /// Defaults to the shipped English table.
    pub frequency_table: Option<PathBuf>,
    pub out_dir: PathBuf,
    pub checkpoint: Option<PathBuf>,

    pub backend: String,
    pub dim: usize,
    pub max_len: usize,
    pub init_noise: f64,

    pub learning_rate: f64,
    pub weight_decay: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub patience: usize,
    pub dropout: f64,
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    /// Search every `(alpha, beta, gamma)` in `weight_grid^3` on
    /// validation weighted F1 instead of using the fixed weights.
    pub grid_search: bool,
    pub weight_grid: Vec<f64>,

    pub variant: Variant,
    pub k: usize,
    pub val_fraction: f64,
    pub l2_weight: f64,
    pub seed: u64,

    pub n_per_class: usize,
    pub hashtag_rate: f64,
    pub implicit_rate: f64,

    pub jobs: Option<usize>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            corpus: None,
            lexicon: None,
            frequency_table: None,
            out_dir: PathBuf::from("runs"),
            checkpoint: None,
            backend: "toy".into(),
            dim: 64,
            max_len: 64,
            init_noise: 0.01,
            learning_rate: 1e-3,
            weight_decay: 0.01,
            batch_size: 16,
            max_epochs: 50,
            patience: 5,
            dropout: 0.2,
            alpha: 1.0,
            beta: 1.0,
            gamma: 1.0,
            grid_search: true,
            weight_grid: vec![1.0, 2.0, 3.0, 4.0, 5.0],
            variant: Variant::Sric,
            k: 5,
            val_fraction: 0.2,
            l2_weight: 0.01,
            seed: 7,
            n_per_class: 100,
            hashtag_rate: 0.5,
            implicit_rate: 0.35,
            jobs: None,
        }
    }
}

fn positive(field: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::config(field, "must be positive"))
    }
}

fn fraction(field: &str, v: f64, upper_open: bool) -> Result<()> {
    let ok = v >= 0.0 && if upper_open { v < 1.0 } else { v <= 1.0 };
    if ok {
        Ok(())
    } else {
        Err(Error::config(field, "out of range"))
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|_| {
            Error::config("config", format!("cannot read {}", path.display()))
        })?;
        let value: serde_json::Value = serde_json::from_str(&text)
            .map_err(|e| Error::config("config", format!("{}: {e}", path.display())))?;
        Self::from_value(value)
    }

    /// Parse a flat JSON object, naming the offending key on error.
    pub fn from_value(value: serde_json::Value) -> Result<Self> {
        let serde_json::Value::Object(map) = value else {
            return Err(Error::config("config", "expected a JSON object"));
        };
        let defaults = serde_json::to_value(Self::default())?;
        let serde_json::Value::Object(mut merged) = defaults else {
            unreachable!("config serializes to an object")
        };
        for (key, v) in map {
            if !merged.contains_key(&key) {
                return Err(Error::config(key, "unknown field"));
            }
            let mut probe = merged.clone();
            probe.insert(key.clone(), v.clone());
            if let Err(e) = serde_json::from_value::<Self>(serde_json::Value::Object(probe)) {
                return Err(Error::config(key, e.to_string()));
            }
            merged.insert(key, v);
        }
        Ok(serde_json::from_value(serde_json::Value::Object(merged))?)
    }

    pub fn validate(&self) -> Result<()> {
        if self.backend != crate::encoder::TOY_BACKEND {
            return Err(Error::config("backend", format!("unsupported backend {:?}", self.backend)));
        }
        if self.dim == 0 {
            return Err(Error::config("dim", "must be positive"));
        }
        if self.max_len < 3 {
            return Err(Error::config("max_len", "must be at least 3"));
        }
        positive("learning_rate", self.learning_rate)?;
        if !(self.weight_decay >= 0.0) {
            return Err(Error::config("weight_decay", "must be non-negative"));
        }
        if self.batch_size == 0 {
            return Err(Error::config("batch_size", "must be positive"));
        }
        if self.max_epochs == 0 {
            return Err(Error::config("max_epochs", "must be positive"));
        }
        if self.patience == 0 {
            return Err(Error::config("patience", "must be at least 1"));
        }
        fraction("dropout", self.dropout, true)?;
        self.fixed_weights()
            .validate()
            .map_err(|e| Error::config("alpha", e.to_string()))?;
        if self.grid_search
            && (self.weight_grid.is_empty() || self.weight_grid.iter().any(|w| !(*w >= 0.0 && w.is_finite())))
        {
            return Err(Error::config("weight_grid", "must be non-empty and non-negative"));
        }
        if self.k < 2 {
            return Err(Error::config("k", "must be at least 2"));
        }
        fraction("val_fraction", self.val_fraction, true)?;
        if !(self.l2_weight >= 0.0 && self.l2_weight.is_finite()) {
            return Err(Error::config("l2_weight", "must be non-negative"));
        }
        fraction("hashtag_rate", self.hashtag_rate, false)?;
        fraction("implicit_rate", self.implicit_rate, false)?;
        if self.jobs == Some(0) {
            return Err(Error::config("jobs", "must be positive"));
        }
        Ok(())
    }

    pub fn corpus_path(&self) -> PathBuf {
        self.corpus.clone().unwrap_or_else(|| self.out_dir.join("corpus.jsonl"))
    }

    pub fn lexicon_path(&self) -> PathBuf {
        self.lexicon.clone().unwrap_or_else(|| self.out_dir.join("lexicon.tsv"))
    }

    pub fn fixed_weights(&self) -> LossWeights {
        LossWeights::new(self.alpha, self.beta, self.gamma)
    }

    /// Candidate loss weights for the SRIC variants.
    pub fn weight_candidates(&self) -> Vec<LossWeights> {
        if !self.grid_search {
            return vec![self.fixed_weights()];
        }
        let g = &self.weight_grid;
        let mut out = Vec::with_capacity(g.len().pow(3));
        for &a in g {
            for &b in g {
                for &c in g {
                    let w = LossWeights::new(a, b, c);
                    if w.validate().is_ok() {
                        out.push(w);
                    }
                }
            }
        }
        out
    }

    pub fn toy_encoder(&self) -> ToyEncoderConfig {
        ToyEncoderConfig {
            dim: self.dim,
            max_len: self.max_len,
            init_noise: self.init_noise,
        }
    }

    pub fn train_config(&self, loss_weights: LossWeights, seed: u64) -> TrainConfig {
        TrainConfig {
            learning_rate: self.learning_rate,
            weight_decay: self.weight_decay,
            batch_size: self.batch_size,
            max_epochs: self.max_epochs,
            patience: self.patience,
            seed,
            loss_weights,
        }
    }

    /// sha256 of the canonical JSON form, ignoring settings that do not
    /// change results (`out_dir`, `jobs`).
    pub fn config_hash(&self) -> String {
        let mut v = serde_json::to_value(self).expect("config serializes");
        if let serde_json::Value::Object(map) = &mut v {
            map.remove("out_dir");
            map.remove("jobs");
        }
        hex::encode(Sha256::digest(v.to_string().as_bytes()))
    }

    /// Hash of the settings a checkpoint must share with a config to be
    /// usable under it.
    pub fn compat_hash(&self) -> String {
        let v = serde_json::json!({
            "backend": self.backend,
            "dim": self.dim,
            "max_len": self.max_len,
            "text_mode": self.variant.text_mode(),
        });
        hex::encode(Sha256::digest(v.to_string().as_bytes()))
    }

    pub fn derive_seed(&self, purpose: &str, index: u64) -> u64 {
        derive_seed(self.seed, purpose, index)
    }
}

/// Independent child seed for `(purpose, index)`.
pub fn derive_seed(base: u64, purpose: &str, index: u64) -> u64 {
    let digest = Sha256::digest(format!("{base}/{purpose}/{index}").as_bytes());
    u64::from_le_bytes(digest[..8].try_into().expect("8 bytes"))
}
