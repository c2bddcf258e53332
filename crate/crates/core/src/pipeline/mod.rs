//! Two-stage training, evaluation and the ablation modes.

mod config;
mod eval;
mod history;
mod stage1;
mod stage2;

pub use config::{AblationFlags, TrainingConfig};
pub use eval::{evaluate, evaluate_predictions, split_validation, CategoryStats, EvalItem, EvalReport};
pub use history::{stage1_csv, stage2_csv, EpochRecord, Stage1Record, STAGE1_CSV_HEADER, STAGE2_CSV_HEADER};
pub use stage1::{autoencoder_grads, train_stage1, StagePrior};
pub use stage2::{
    discriminator_grads, generator_step, initial_generator, train_stage2, Generator, GeneratorStep, PairedSample,
    Stage2Outcome, StepSettings, StepWeights, UnpairedSample,
};

use rayon::prelude::*;

use crate::error::Result;
use crate::nets::ModelParams;

/// Hooks called at the end of every epoch, e.g. to write checkpoints.
pub trait Observer {
    fn stage1_epoch(&mut self, _record: &Stage1Record) -> Result<()> {
        Ok(())
    }

    fn stage2_epoch(&mut self, _record: &EpochRecord, _generator: &Generator, _is_best: bool) -> Result<()> {
        Ok(())
    }
}

/// Observer that does nothing.
pub struct Quiet;

impl Observer for Quiet {}

/// Maps `f` over `items` on the rayon pool, keeping input order so that
/// reductions over the results are independent of scheduling.
pub(crate) fn ordered_map<T, U, F>(items: &[T], f: F) -> Result<Vec<U>>
where
    T: Sync,
    U: Send,
    F: Fn(&T) -> Result<U> + Sync + Send,
{
    items.par_iter().map(f).collect()
}

/// `sum_i scale * grads_i`, accumulated in index order.
pub(crate) fn sum_grads<'a>(
    like: &ModelParams,
    grads: impl IntoIterator<Item = &'a ModelParams>,
    scale: f64,
) -> Result<ModelParams> {
    let mut acc = like.zeros_like();
    for g in grads {
        acc.add_scaled(scale, g)?;
    }
    Ok(acc)
}

#[cfg(test)]
mod tests;
