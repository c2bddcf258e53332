use serde::{Deserialize, Serialize};

use crate::degradation::DegradationConfig;
use crate::error::{Error, Result};
use crate::geometry::MetricConfig;
use crate::losses::{LatentDistanceKind, LossWeights};
use crate::nets::NetConfig;
use crate::optim::AdamConfig;

/// Independent switches for the components of the second stage.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AblationFlags {
    pub use_weight_distill_encoder: bool,
    pub use_weight_distill_decoder: bool,
    pub use_feature_distill: bool,
    pub use_self_supervised: bool,
    pub use_discriminator: bool,
}

impl Default for AblationFlags {
    fn default() -> Self {
        Self::full()
    }
}

impl AblationFlags {
    pub fn full() -> Self {
        Self {
            use_weight_distill_encoder: true,
            use_weight_distill_decoder: true,
            use_feature_distill: true,
            use_self_supervised: true,
            use_discriminator: true,
        }
    }

    pub fn none() -> Self {
        Self {
            use_weight_distill_encoder: false,
            use_weight_distill_decoder: false,
            use_feature_distill: false,
            use_self_supervised: false,
            use_discriminator: false,
        }
    }

    /// Full model without the self-supervised branch.
    pub fn without_self_supervision() -> Self {
        Self { use_self_supervised: false, use_discriminator: false, ..Self::full() }
    }

    /// Self-supervision with no first-stage initialization and no latent terms.
    pub fn self_supervised_without_prior() -> Self {
        Self { use_self_supervised: true, use_discriminator: true, ..Self::none() }
    }

    /// Whether the second stage reads anything from the first.
    pub fn needs_prior(&self) -> bool {
        self.use_weight_distill_encoder || self.use_weight_distill_decoder || self.use_feature_distill
    }

    pub fn uses_discriminator(&self) -> bool {
        self.use_self_supervised && self.use_discriminator
    }
}

/// Hyperparameters of both training stages.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainingConfig {
    pub stage1_epochs: u32,
    pub stage2_epochs: u32,
    pub batch_size: usize,
    pub optimizer: AdamConfig,
    pub weights: LossWeights,
    /// Rescale the latent-weight breakpoints when `stage2_epochs < 100`.
    pub scale_schedule: bool,
    pub latent_distance: LatentDistanceKind,
    pub degradation: DegradationConfig,
    pub flags: AblationFlags,
    pub net: NetConfig,
    pub metric: MetricConfig,
    pub seed: u64,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        Self {
            stage1_epochs: 300,
            stage2_epochs: 150,
            batch_size: 32,
            optimizer: AdamConfig::default(),
            weights: LossWeights::default(),
            scale_schedule: true,
            latent_distance: LatentDistanceKind::Kl,
            degradation: DegradationConfig::default(),
            flags: AblationFlags::full(),
            net: NetConfig::default(),
            metric: MetricConfig::default(),
            seed: 0,
        }
    }
}

impl TrainingConfig {
    /// Shrunken widths, point counts and epochs for single-core runs.
    pub fn desk() -> Self {
        let net = NetConfig::desk();
        let degradation = DegradationConfig { output_size: net.num_points(), ..Default::default() };
        Self {
            stage1_epochs: 60,
            stage2_epochs: 60,
            batch_size: 16,
            optimizer: AdamConfig { learning_rate: 1e-3, ..Default::default() },
            degradation,
            net,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.stage1_epochs < 1 || self.stage2_epochs < 1 {
            return Err(Error::argument("epoch counts must be >= 1"));
        }
        if self.batch_size < 1 {
            return Err(Error::argument("batch_size must be >= 1"));
        }
        let o = &self.optimizer;
        if !(o.learning_rate > 0.0) || !o.learning_rate.is_finite() {
            return Err(Error::argument(format!("learning rate must be > 0, got {}", o.learning_rate)));
        }
        if !(0.0..1.0).contains(&o.beta1) || !(0.0..1.0).contains(&o.beta2) || !(o.eps > 0.0) {
            return Err(Error::argument("optimizer moments must lie in [0, 1) and eps must be > 0"));
        }
        self.weights.validate()?;
        self.degradation.validate()?;
        self.net.validate()?;
        self.metric.validate()?;
        if self.degradation.output_size != self.net.num_points() {
            return Err(Error::argument(format!(
                "degradation output_size {} must equal the decoder point count {}",
                self.degradation.output_size,
                self.net.num_points()
            )));
        }
        Ok(())
    }

    /// Loss weights in effect for the configured second-stage length.
    pub fn effective_weights(&self) -> LossWeights {
        if self.scale_schedule {
            self.weights.scaled_for(self.stage2_epochs)
        } else {
            self.weights.clone()
        }
    }
}
