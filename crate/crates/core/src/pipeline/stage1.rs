use std::collections::BTreeMap;

use rand::seq::SliceRandom;

use super::history::Stage1Record;
use super::{ordered_map, sum_grads, Observer, TrainingConfig};
use crate::dataio::Checkpoint;
use crate::error::{Error, Result};
use crate::geometry::{chamfer_value_and_grad, PointCloud};
use crate::losses::category_mean_code;
use crate::nets::{
    decoder_backward, decoder_forward_traced, encoder_backward, encoder_forward, encoder_forward_traced, init_params,
    LatentCode, ModelParams, Role,
};
use crate::optim::Adam;
use crate::sampling::{derive_seed, rng_from_seed};

/// What the first stage hands to the second.
#[derive(Clone, Debug, PartialEq)]
pub struct StagePrior {
    pub encoder_incomplete: ModelParams,
    pub decoder_complete: ModelParams,
    /// Frozen; recomputes complete-cloud codes for paired samples.
    pub encoder_complete: ModelParams,
    pub category_means: BTreeMap<u32, LatentCode>,
}

const GROUPS: [(&str, Role); 3] =
    [("encoder_incomplete", Role::Encoder), ("decoder_complete", Role::Decoder), ("encoder_complete", Role::Encoder)];

impl StagePrior {
    pub fn to_checkpoint(&self, epoch: u32, digest: [u8; 32]) -> Result<Checkpoint> {
        let mut c = Checkpoint::new(epoch, digest);
        for ((group, _), params) in
            GROUPS.iter().zip([&self.encoder_incomplete, &self.decoder_complete, &self.encoder_complete])
        {
            c.insert_params(group, params)?;
        }
        c.insert_codes("category_mean", self.category_means.iter().map(|(k, v)| (*k, v)))?;
        Ok(c)
    }

    pub fn from_checkpoint(c: &Checkpoint) -> Result<Self> {
        let mut encoder_complete = c.params(GROUPS[2].0, Role::Encoder)?;
        encoder_complete.freeze();
        Ok(Self {
            encoder_incomplete: c.params(GROUPS[0].0, Role::Encoder)?,
            decoder_complete: c.params(GROUPS[1].0, Role::Decoder)?,
            encoder_complete,
            category_means: c.codes("category_mean")?.into_iter().collect(),
        })
    }

    /// Checks that the prior fits the architecture in `cfg`.
    pub fn check_arch(&self, cfg: &TrainingConfig) -> Result<()> {
        let enc = init_params(Role::Encoder, &cfg.net, 0)?;
        let dec = init_params(Role::Decoder, &cfg.net, 0)?;
        self.encoder_incomplete.check_same_layout(&enc)?;
        self.encoder_complete.check_same_layout(&enc)?;
        self.decoder_complete.check_same_layout(&dec)?;
        let dim = cfg.net.latent_dim();
        if let Some((cat, z)) = self.category_means.iter().find(|(_, z)| z.dim() != dim) {
            return Err(Error::structural(format!("category_mean/{cat}"), format!("dim {} vs {dim}", z.dim())));
        }
        Ok(())
    }
}

/// Chamfer reconstruction loss of one cloud through an autoencoder, with
/// gradients for both halves.
pub fn autoencoder_grads(
    encoder: &ModelParams,
    decoder: &ModelParams,
    cloud: &PointCloud,
    gamma: f64,
) -> Result<(f64, ModelParams, ModelParams)> {
    let (z, et) = encoder_forward_traced(encoder, &cloud.points)?;
    let (rec, dt) = decoder_forward_traced(decoder, &z)?;
    let cd = chamfer_value_and_grad(&rec, &cloud.points, gamma)?;
    let mut ge = encoder.zeros_like();
    let mut gd = decoder.zeros_like();
    let dz = decoder_backward(decoder, &dt, &cd.grad_a, &mut gd)?;
    encoder_backward(encoder, &et, &dz, &mut ge)?;
    Ok((cd.value, ge, gd))
}

struct Autoencoder<'a> {
    name: &'static str,
    encoder: ModelParams,
    decoder: ModelParams,
    opt_e: Adam,
    opt_d: Adam,
    data: &'a [&'a PointCloud],
}

impl Autoencoder<'_> {
    /// One epoch of minibatch updates; returns the mean pre-update loss.
    fn epoch(&mut self, cfg: &TrainingConfig, epoch: u32, salt: u64) -> Result<f64> {
        let mut order: Vec<usize> = (0..self.data.len()).collect();
        order.shuffle(&mut rng_from_seed(derive_seed(cfg.seed, &[salt, epoch as u64])));
        let mut total = 0.0;
        for (b, batch) in order.chunks(cfg.batch_size).enumerate() {
            let (enc, dec) = (&self.encoder, &self.decoder);
            let gamma = cfg.metric.gamma;
            let out = ordered_map(batch, |&i| autoencoder_grads(enc, dec, self.data[i], gamma))?;
            let loss: f64 = out.iter().map(|o| o.0).sum();
            if !loss.is_finite() {
                return Err(Error::Numerical { entry: format!("stage 1 {} epoch {epoch} batch {b}", self.name) });
            }
            total += loss;
            let scale = 1.0 / batch.len() as f64;
            let ge = sum_grads(&self.encoder, out.iter().map(|o| &o.1), scale)?;
            let gd = sum_grads(&self.decoder, out.iter().map(|o| &o.2), scale)?;
            self.opt_e.step(&mut self.encoder, &ge)?;
            self.opt_d.step(&mut self.decoder, &gd)?;
        }
        Ok(total / self.data.len() as f64)
    }
}

/// Trains the complete and incomplete autoencoders and extracts the prior:
/// the incomplete encoder, the complete decoder, the frozen complete encoder
/// and per-category mean codes of the complete pool. The incomplete decoder
/// is dropped.
pub fn train_stage1(
    complete: &[&PointCloud],
    incomplete: &[&PointCloud],
    cfg: &TrainingConfig,
    observer: &mut dyn Observer,
) -> Result<(StagePrior, Vec<Stage1Record>)> {
    cfg.validate()?;
    if complete.is_empty() || incomplete.is_empty() {
        return Err(Error::argument("stage 1 needs nonempty complete and incomplete pools"));
    }
    let make = |name, data, s1: u64, s2: u64| -> Result<Autoencoder> {
        let encoder = init_params(Role::Encoder, &cfg.net, derive_seed(cfg.seed, &[s1]))?;
        let decoder = init_params(Role::Decoder, &cfg.net, derive_seed(cfg.seed, &[s2]))?;
        Ok(Autoencoder {
            name,
            opt_e: Adam::new(cfg.optimizer.clone(), &encoder),
            opt_d: Adam::new(cfg.optimizer.clone(), &decoder),
            encoder,
            decoder,
            data,
        })
    };
    let mut ae_c = make("complete", complete, 1, 2)?;
    let mut ae_i = make("incomplete", incomplete, 3, 4)?;
    let mut history = Vec::with_capacity(cfg.stage1_epochs as usize);
    for epoch in 1..=cfg.stage1_epochs {
        let cd_complete = ae_c.epoch(cfg, epoch, 11)?;
        let cd_incomplete = ae_i.epoch(cfg, epoch, 12)?;
        let record = Stage1Record { epoch, cd_complete, cd_incomplete };
        log::info!("stage 1 epoch {epoch}: cd complete {cd_complete:.6e}, incomplete {cd_incomplete:.6e}");
        observer.stage1_epoch(&record)?;
        history.push(record);
    }
    Ok((extract_prior(&ae_c, &ae_i)?, history))
}

fn extract_prior(ae_c: &Autoencoder, ae_i: &Autoencoder) -> Result<StagePrior> {
    let codes = ordered_map(ae_c.data, |c| encoder_forward(&ae_c.encoder, &c.points))?;
    let labels: Vec<Option<u32>> = ae_c.data.iter().map(|c| c.category).collect();
    let (codes, labels): (Vec<LatentCode>, Vec<u32>) =
        codes.into_iter().zip(labels).filter_map(|(z, l)| l.map(|l| (z, l))).unzip();
    let category_means = category_mean_code(&codes, &labels)?;
    let mut encoder_complete = ae_c.encoder.clone();
    encoder_complete.freeze();
    Ok(StagePrior {
        encoder_incomplete: ae_i.encoder.clone(),
        decoder_complete: ae_c.decoder.clone(),
        encoder_complete,
        category_means,
    })
}
