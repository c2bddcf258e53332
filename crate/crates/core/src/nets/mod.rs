//! Encoder, decoder and discriminator networks with exact reverse-mode
//! gradients, plus the parameter containers they read from.
//!
//! Layers are looked up by name (`enc.point.0.weight`, ...) so any width
//! configuration produced by [`init_params`] runs through the same code.

mod arch;
mod decoder;
mod dense;
mod discriminator;
mod encoder;
mod params;

pub use arch::{DecoderArch, DiscriminatorArch, EncoderArch, LayerSpec, NetConfig};
pub use decoder::{decoder_backward, decoder_forward, decoder_forward_traced, DecoderTrace};
pub use discriminator::{
    discriminator_backward, discriminator_forward, discriminator_forward_traced, DiscriminatorTrace,
};
pub use encoder::{encoder_backward, encoder_forward, encoder_forward_traced, EncoderTrace};
pub use params::{distill_weights, init_params, ModelParams, Role, Tensor};

use crate::error::{Error, Result};

/// Global shape descriptor produced by an encoder.
#[derive(Clone, Debug, PartialEq)]
pub struct LatentCode(pub Vec<f64>);

impl LatentCode {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Numerical { entry: format!("latent[{i}]") });
        }
        Ok(Self(values))
    }

    pub fn zeros(dim: usize) -> Self {
        Self(vec![0.0; dim])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

/// Numerically stable softmax.
pub fn softmax(x: &[f64]) -> Vec<f64> {
    let m = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = x.iter().map(|v| (v - m).exp()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|v| v / s).collect()
}

pub(crate) fn check_role(params: &ModelParams, role: Role) -> Result<()> {
    if params.role() != role {
        return Err(Error::structural("<params>", format!("expected {role:?} parameters, got {:?}", params.role())));
    }
    Ok(())
}
