use serde::{Deserialize, Serialize};

use super::params::Role;
use crate::error::{Error, Result};

/// Shared per-point map, max-pool, tile-and-concat, second shared map, max-pool.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EncoderArch {
    pub point_widths: Vec<usize>,
    pub global_widths: Vec<usize>,
}

/// Fully connected latent-to-points decoder.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DecoderArch {
    pub hidden_widths: Vec<usize>,
    pub num_points: usize,
}

/// Per-point features, softmax attention pooling, classification head.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiscriminatorArch {
    pub point_widths: Vec<usize>,
    pub head_widths: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NetConfig {
    pub encoder: EncoderArch,
    pub decoder: DecoderArch,
    pub discriminator: DiscriminatorArch,
}

impl Default for NetConfig {
    fn default() -> Self {
        Self {
            encoder: EncoderArch { point_widths: vec![128, 256], global_widths: vec![512, 1024] },
            decoder: DecoderArch { hidden_widths: vec![1024, 1024], num_points: 2048 },
            discriminator: DiscriminatorArch { point_widths: vec![64, 128, 256], head_widths: vec![128, 64] },
        }
    }
}

/// One dense layer of a network layout.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LayerSpec {
    pub name: String,
    pub fan_in: usize,
    pub fan_out: usize,
}

fn chain(prefix: &str, input: usize, widths: &[usize], out: &mut Vec<LayerSpec>) -> usize {
    let mut fan_in = input;
    for (i, &w) in widths.iter().enumerate() {
        out.push(LayerSpec { name: format!("{prefix}.{i}"), fan_in, fan_out: w });
        fan_in = w;
    }
    fan_in
}

impl NetConfig {
    /// Reduced widths and point counts for single-core experiments.
    pub fn desk() -> Self {
        Self {
            encoder: EncoderArch { point_widths: vec![32, 64], global_widths: vec![128, 128] },
            decoder: DecoderArch { hidden_widths: vec![256, 256], num_points: 128 },
            discriminator: DiscriminatorArch { point_widths: vec![16, 32], head_widths: vec![16] },
        }
    }

    pub fn latent_dim(&self) -> usize {
        *self.encoder.global_widths.last().unwrap_or(&0)
    }

    pub fn num_points(&self) -> usize {
        self.decoder.num_points
    }

    pub fn validate(&self) -> Result<()> {
        let nonempty = |name: &str, w: &[usize]| {
            if w.is_empty() || w.contains(&0) {
                Err(Error::argument(format!("{name} widths must be nonempty and positive, got {w:?}")))
            } else {
                Ok(())
            }
        };
        nonempty("encoder point", &self.encoder.point_widths)?;
        nonempty("encoder global", &self.encoder.global_widths)?;
        nonempty("discriminator point", &self.discriminator.point_widths)?;
        if self.decoder.hidden_widths.contains(&0) || self.discriminator.head_widths.contains(&0) {
            return Err(Error::argument("layer widths must be positive"));
        }
        if self.decoder.num_points == 0 {
            return Err(Error::argument("decoder must emit at least one point"));
        }
        Ok(())
    }

    /// Dense layers of the network with the given role, in parameter order.
    pub fn layers(&self, role: Role) -> Vec<LayerSpec> {
        let mut out = Vec::new();
        match role {
            Role::Encoder => {
                let c = chain("enc.point", 3, &self.encoder.point_widths, &mut out);
                chain("enc.global", 2 * c, &self.encoder.global_widths, &mut out);
            }
            Role::Decoder => {
                let mut widths = self.decoder.hidden_widths.clone();
                widths.push(3 * self.decoder.num_points);
                chain("dec.fc", self.latent_dim(), &widths, &mut out);
            }
            Role::Discriminator => {
                let c = chain("disc.point", 3, &self.discriminator.point_widths, &mut out);
                out.push(LayerSpec { name: "disc.attn".into(), fan_in: c, fan_out: 1 });
                let mut widths = self.discriminator.head_widths.clone();
                widths.push(1);
                chain("disc.head", c, &widths, &mut out);
            }
        }
        out
    }
}
