//! Run configuration: a TOML file with defaults for every field, `section.key=value`
//! overrides from the command line, and `CRS_SIM_SECTION__KEY` environment overrides.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::corpus::{DatasetFiles, SplitRatios, SyntheticConfig};
use crate::dialog::EnvConfig;
use crate::error::{Error, Result};
use crate::eval::NegativeSampling;
use crate::federated::{StageOneSettings, StageTwoSettings};
use crate::ldp::PrivacyParams;
use crate::policy::ReturnWeighting;

/// Prefix of environment variables that override configuration values.
pub const ENV_PREFIX: &str = "CRS_SIM_";

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Master seed; every random stream in a run is derived from it.
    pub seed: u64,
    /// Worker threads; 0 uses all cores.
    pub threads: usize,
    pub data: DataConfig,
    pub model: ModelConfig,
    pub privacy: PrivacyConfig,
    pub stage1: Stage1Config,
    pub stage2: Stage2Config,
    pub env: EnvConfig,
    pub eval: EvalConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataConfig {
    /// On-disk dataset; the synthetic generator is used when absent.
    pub files: Option<DatasetFiles>,
    pub min_interactions: usize,
    pub split: SplitRatios,
    /// Seed of the per-user split when loading files.
    pub split_seed: u64,
    pub synthetic: SyntheticConfig,
}

impl Default for DataConfig {
    fn default() -> Self {
        Self {
            files: None,
            min_interactions: 10,
            split: SplitRatios::default(),
            split_seed: 0,
            synthetic: SyntheticConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub dim: usize,
    /// Standard deviation of the Gaussian initialization of all embeddings.
    pub init_std: f64,
    /// L2 weight on the parameters touched by a client's loss.
    pub reg: f64,
    pub negatives_per_positive: usize,
    pub hidden: usize,
    pub output_relu: bool,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            dim: 64,
            init_std: 0.1,
            reg: 1e-3,
            negatives_per_positive: 1,
            hidden: 64,
            output_relu: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PrivacyConfig {
    pub clip_scale: f64,
    pub laplace_scale: f64,
}

impl Default for PrivacyConfig {
    fn default() -> Self {
        Self {
            clip_scale: 0.0025,
            laplace_scale: 0.01,
        }
    }
}

impl PrivacyConfig {
    pub fn params(&self) -> Result<PrivacyParams> {
        PrivacyParams::new(self.clip_scale, self.laplace_scale)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Stage1Config {
    pub lr_user: f64,
    pub lr_items: f64,
    pub lr_attributes: f64,
    pub max_epochs: usize,
    /// Epochs between validation checks.
    pub eval_every: usize,
    /// Validation checks without improvement before stopping; 0 disables early stopping.
    pub patience: usize,
    pub participation: f64,
}

impl Default for Stage1Config {
    fn default() -> Self {
        Self {
            lr_user: 0.01,
            lr_items: 1.5,
            lr_attributes: 2.0,
            max_epochs: 200,
            eval_every: 10,
            patience: 5,
            participation: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Stage2Config {
    /// Server step α applied to the averaged ascent direction.
    pub learning_rate: f64,
    /// Step size of each client's projection-layer ascent.
    pub local_learning_rate: f64,
    pub epochs: usize,
    pub episodes_per_client: usize,
    pub gamma: f64,
    /// Weight every step by the undiscounted episode return instead.
    pub undiscounted: bool,
    pub use_projection: bool,
    pub participation: f64,
}

impl Default for Stage2Config {
    fn default() -> Self {
        Self {
            learning_rate: 1.0,
            local_learning_rate: 0.05,
            epochs: 100,
            episodes_per_client: 10,
            gamma: 0.95,
            undiscounted: false,
            use_projection: true,
            participation: 1.0,
        }
    }
}

impl Stage2Config {
    pub fn weighting(&self) -> ReturnWeighting {
        if self.undiscounted {
            ReturnWeighting::Undiscounted
        } else {
            ReturnWeighting::Discounted { gamma: self.gamma }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    /// Negatives per positive for AUC; 0 scores against every uninteracted item.
    pub auc_negatives: usize,
    pub bytes_per_value: usize,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            auc_negatives: 50,
            bytes_per_value: 2,
        }
    }
}

impl EvalConfig {
    pub fn negative_sampling(&self) -> NegativeSampling {
        match self.auc_negatives {
            0 => NegativeSampling::Exhaustive,
            n => NegativeSampling::Sampled(n),
        }
    }
}

fn check(ok: bool, field: &str, message: &str) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(Error::config(field, message))
    }
}

fn positive(x: f64) -> bool {
    x > 0.0 && x.is_finite()
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        let d = &self.data;
        if d.files.is_none() {
            d.synthetic
                .validate()
                .map_err(|e| Error::config("data.synthetic", e.to_string()))?;
        }
        d.split.validate().map_err(|e| Error::config("data.split", e.to_string()))?;

        let m = &self.model;
        check(m.dim > 0, "model.dim", "must be at least 1")?;
        check(m.init_std >= 0.0 && m.init_std.is_finite(), "model.init_std", "must be non-negative")?;
        check(m.reg >= 0.0 && m.reg.is_finite(), "model.reg", "must be non-negative")?;
        check(m.negatives_per_positive > 0, "model.negatives_per_positive", "must be at least 1")?;
        check(m.hidden > 0, "model.hidden", "must be at least 1")?;

        let p = &self.privacy;
        check(positive(p.clip_scale), "privacy.clip_scale", "must be positive")?;
        check(
            p.laplace_scale >= 0.0 && p.laplace_scale.is_finite(),
            "privacy.laplace_scale",
            "must be non-negative",
        )?;

        let s1 = &self.stage1;
        check(positive(s1.lr_user), "stage1.lr_user", "must be positive")?;
        check(positive(s1.lr_items), "stage1.lr_items", "must be positive")?;
        check(positive(s1.lr_attributes), "stage1.lr_attributes", "must be positive")?;
        check(s1.eval_every > 0, "stage1.eval_every", "must be at least 1")?;
        check(
            s1.participation > 0.0 && s1.participation <= 1.0,
            "stage1.participation",
            "must lie in (0, 1]",
        )?;

        let s2 = &self.stage2;
        check(positive(s2.learning_rate), "stage2.learning_rate", "must be positive")?;
        check(
            s2.local_learning_rate >= 0.0 && s2.local_learning_rate.is_finite(),
            "stage2.local_learning_rate",
            "must be non-negative",
        )?;
        check(s2.episodes_per_client > 0, "stage2.episodes_per_client", "must be at least 1")?;
        check((0.0..=1.0).contains(&s2.gamma), "stage2.gamma", "must lie in [0, 1]")?;
        check(
            s2.participation > 0.0 && s2.participation <= 1.0,
            "stage2.participation",
            "must lie in (0, 1]",
        )?;

        check(self.env.k > 0, "env.k", "must be at least 1")?;
        check(self.env.max_turns > 0, "env.max_turns", "must be at least 1")?;
        check(self.eval.bytes_per_value > 0, "eval.bytes_per_value", "must be at least 1")?;
        Ok(())
    }

    pub fn stage_one_settings(&self) -> Result<StageOneSettings> {
        Ok(StageOneSettings {
            lr_user: self.stage1.lr_user,
            lr_items: self.stage1.lr_items,
            lr_attributes: self.stage1.lr_attributes,
            reg: self.model.reg,
            negatives_per_positive: self.model.negatives_per_positive,
            privacy: self.privacy.params()?,
        })
    }

    pub fn stage_two_settings(&self) -> Result<StageTwoSettings> {
        Ok(StageTwoSettings {
            learning_rate: self.stage2.learning_rate,
            local_learning_rate: self.stage2.local_learning_rate,
            episodes_per_client: self.stage2.episodes_per_client,
            weighting: self.stage2.weighting(),
            use_projection: self.stage2.use_projection,
            privacy: self.privacy.params()?,
            env: self.env.clone(),
        })
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::config("<file>", e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::config("<file>", e.to_string()))
    }

    /// Loads `path` (or the defaults), then applies environment and explicit overrides in that
    /// order, and validates the result.
    pub fn resolve(
        path: Option<&Path>,
        env: impl IntoIterator<Item = (String, String)>,
        overrides: &[String],
    ) -> Result<Self> {
        let text = match path {
            Some(p) => std::fs::read_to_string(p)?,
            None => String::new(),
        };
        let mut value: toml::Table = toml::from_str(&text).map_err(|e| Error::config("<file>", e.to_string()))?;
        for (key, raw) in env {
            if let Some(rest) = key.strip_prefix(ENV_PREFIX) {
                let path = rest.to_ascii_lowercase().replace("__", ".");
                set_path(&mut value, &path, &raw)?;
            }
        }
        for o in overrides {
            let (k, v) = o
                .split_once('=')
                .ok_or_else(|| Error::config(o, "override must look like section.key=value"))?;
            set_path(&mut value, k.trim(), v.trim())?;
        }
        let cfg: Self = toml::Value::Table(value)
            .try_into()
            .map_err(|e: toml::de::Error| Error::config("<resolved>", e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn dataset_files(&self) -> Option<(&PathBuf, &PathBuf)> {
        self.data.files.as_ref().map(|f| (&f.interactions, &f.attributes))
    }
}

/// Parses `raw` as a TOML value, falling back to a plain string.
fn parse_scalar(raw: &str) -> toml::Value {
    let wrapped = format!("v = {raw}");
    match toml::from_str::<toml::Table>(&wrapped) {
        Ok(mut t) => t.remove("v").unwrap_or_else(|| toml::Value::String(raw.to_string())),
        Err(_) => toml::Value::String(raw.to_string()),
    }
}

fn set_path(table: &mut toml::Table, path: &str, raw: &str) -> Result<()> {
    let parts: Vec<&str> = path.split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(Error::config(path, "malformed key"));
    }
    let mut cur = table;
    for part in &parts[..parts.len() - 1] {
        let entry = cur
            .entry(part.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cur = entry
            .as_table_mut()
            .ok_or_else(|| Error::config(path, format!("`{part}` is not a section")))?;
    }
    cur.insert(parts[parts.len() - 1].to_string(), parse_scalar(raw));
    Ok(())
}
