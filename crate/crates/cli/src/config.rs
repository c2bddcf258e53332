//! Run configuration file: TOML mirror of the library configuration types.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::Context;
use rapd_core::dataio::{config_digest, ConfigDigest, SplitConfig};
use rapd_core::pipeline::TrainingConfig;
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Paths {
    pub data: Option<PathBuf>,
    pub prior: Option<PathBuf>,
    pub out: Option<PathBuf>,
}

/// Everything a command can be configured with. Missing keys take the
/// desk-scale defaults; unknown keys are rejected.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    /// Points per generated cloud.
    pub num_points: usize,
    /// Write a second-stage checkpoint every this many epochs (0 = never).
    pub checkpoint_every: u32,
    pub split: SplitConfig,
    pub training: TrainingConfig,
    pub paths: Paths,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self::desk()
    }
}

impl RunConfig {
    pub fn desk() -> Self {
        let training = TrainingConfig::desk();
        Self {
            num_points: training.net.num_points(),
            checkpoint_every: 0,
            split: SplitConfig::default(),
            training,
            paths: Paths::default(),
        }
    }

    /// Reference-scale widths, point counts, epochs and learning rate.
    pub fn paper() -> Self {
        let training = TrainingConfig::default();
        Self { num_points: training.net.num_points(), training, ..Self::desk() }
    }

    pub fn preset(name: &str) -> anyhow::Result<Self> {
        match name {
            "desk" => Ok(Self::desk()),
            "paper" => Ok(Self::paper()),
            other => anyhow::bail!(rapd_core::Error::Argument(format!("unknown preset `{other}`"))),
        }
    }

    /// Parses a possibly partial file. Keys are merged over the desk
    /// defaults table by table, so a partial section keeps desk values for
    /// the keys it omits.
    pub fn parse(text: &str) -> anyhow::Result<Self> {
        let bad = |e: toml::de::Error| rapd_core::Error::Argument(format!("config: {}", e.message()));
        let user: toml::Table = toml::from_str(text).map_err(bad)?;
        let mut base = toml::Table::try_from(Self::desk()).expect("config is always serializable");
        merge(&mut base, user);
        Ok(toml::Value::Table(base).try_into().map_err(bad)?)
    }

    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        Self::parse(&text)
    }

    /// Loads `path` if given, otherwise the desk defaults.
    pub fn load_or_default(path: Option<&Path>) -> anyhow::Result<Self> {
        path.map_or_else(|| Ok(Self::default()), Self::load)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is always serializable")
    }

    pub fn validate(&self) -> anyhow::Result<()> {
        if self.num_points == 0 {
            anyhow::bail!(rapd_core::Error::Argument("num_points must be positive".into()));
        }
        self.training.validate()?;
        Ok(())
    }

    /// SHA-256 of the canonical TOML rendering, with paths excluded.
    pub fn digest(&self) -> ConfigDigest {
        let canonical = RunConfig { paths: Paths::default(), ..self.clone() };
        config_digest(&canonical.to_toml())
    }

    /// Digest over the settings the first stage depends on. Second-stage
    /// options are reset to their defaults, so changing them does not make
    /// an existing prior look stale.
    pub fn stage1_digest(&self) -> ConfigDigest {
        let d = TrainingConfig::default();
        let mut c = self.clone();
        c.checkpoint_every = 0;
        c.training.stage2_epochs = d.stage2_epochs;
        c.training.weights = d.weights;
        c.training.scale_schedule = d.scale_schedule;
        c.training.latent_distance = d.latent_distance;
        c.training.degradation = d.degradation;
        c.training.flags = d.flags;
        c.digest()
    }
}

fn merge(base: &mut toml::Table, user: toml::Table) {
    for (k, v) in user {
        match (base.get_mut(&k), v) {
            (Some(toml::Value::Table(b)), toml::Value::Table(u)) => merge(b, u),
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
}
