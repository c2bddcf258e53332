use ndarray::{s, Array2, Axis};

use super::dense::{dense_chain, max_pool, mlp_backward, mlp_forward, MlpTrace};
use super::params::{ModelParams, Role};
use super::{check_role, LatentCode};
use crate::error::Result;
use crate::geometry::Point3;

/// Saved activations for [`encoder_backward`].
pub struct EncoderTrace {
    point: MlpTrace,
    point_arg: Vec<usize>,
    global: MlpTrace,
    latent_arg: Vec<usize>,
}

pub(crate) fn points_matrix(points: &[Point3]) -> Array2<f64> {
    Array2::from_shape_fn((points.len(), 3), |(i, d)| points[i][d])
}

/// Maps a cloud to its latent code. Invariant under point permutations.
pub fn encoder_forward(params: &ModelParams, points: &[Point3]) -> Result<LatentCode> {
    encoder_forward_traced(params, points).map(|(z, _)| z)
}

pub fn encoder_forward_traced(params: &ModelParams, points: &[Point3]) -> Result<(LatentCode, EncoderTrace)> {
    check_role(params, Role::Encoder)?;
    crate::geometry::ensure_nonempty(points, "encoder input")?;
    let point_layers = dense_chain(params, "enc.point", 3)?;
    let c = point_layers.last().map(|l| l.fan_out()).unwrap_or(3);
    let global_layers = dense_chain(params, "enc.global", 2 * c)?;

    let point = mlp_forward(&point_layers, points_matrix(points));
    let (pooled, point_arg) = max_pool(&point.output);
    let n = points.len();
    let mut joined = Array2::zeros((n, 2 * c));
    for mut row in joined.outer_iter_mut() {
        row.slice_mut(s![..c]).assign(&ndarray::ArrayView1::from(&pooled[..]));
    }
    joined.slice_mut(s![.., c..]).assign(&point.output);
    let global = mlp_forward(&global_layers, joined);
    let (latent, latent_arg) = max_pool(&global.output);
    Ok((LatentCode(latent), EncoderTrace { point, point_arg, global, latent_arg }))
}

/// Adds the gradient of a scalar loss with upstream `dz` into `grads`.
pub fn encoder_backward(params: &ModelParams, trace: &EncoderTrace, dz: &[f64], grads: &mut ModelParams) -> Result<()> {
    let point_layers = dense_chain(params, "enc.point", 3)?;
    let c = point_layers.last().map(|l| l.fan_out()).unwrap_or(3);
    let global_layers = dense_chain(params, "enc.global", 2 * c)?;
    let n = trace.point.output.nrows();

    let mut d_global = Array2::zeros((n, dz.len()));
    for (k, (&row, &g)) in trace.latent_arg.iter().zip(dz).enumerate() {
        d_global[[row, k]] += g;
    }
    let d_joined =
        mlp_backward(&global_layers, &trace.global, d_global, Some(grads), true)?.expect("input gradient requested");
    let d_pooled = d_joined.slice(s![.., ..c]).sum_axis(Axis(0));
    let mut d_point = d_joined.slice(s![.., c..]).to_owned();
    for (k, &row) in trace.point_arg.iter().enumerate() {
        d_point[[row, k]] += d_pooled[k];
    }
    mlp_backward(&point_layers, &trace.point, d_point, Some(grads), false)?;
    Ok(())
}
