use ndarray::Array2;

use super::dense::{dense_chain, mlp_backward, mlp_forward, MlpTrace};
use super::params::{ModelParams, Role};
use super::{check_role, LatentCode};
use crate::error::{Error, Result};
use crate::geometry::Point3;

pub struct DecoderTrace {
    mlp: MlpTrace,
}

pub fn decoder_forward(params: &ModelParams, z: &LatentCode) -> Result<Vec<Point3>> {
    decoder_forward_traced(params, z).map(|(p, _)| p)
}

pub fn decoder_forward_traced(params: &ModelParams, z: &LatentCode) -> Result<(Vec<Point3>, DecoderTrace)> {
    check_role(params, Role::Decoder)?;
    let layers = dense_chain(params, "dec.fc", z.dim())?;
    let out = layers.last().expect("nonempty chain").fan_out();
    if out % 3 != 0 {
        return Err(Error::structural(
            format!("{}.weight", layers.last().unwrap().name),
            format!("output width {out} is not a multiple of 3"),
        ));
    }
    let x = Array2::from_shape_vec((1, z.dim()), z.0.clone()).expect("row vector");
    let mlp = mlp_forward(&layers, x);
    let flat = mlp.output.row(0);
    let points = flat.as_slice().expect("contiguous").chunks_exact(3).map(|c| [c[0], c[1], c[2]]).collect();
    Ok((points, DecoderTrace { mlp }))
}

/// Adds parameter gradients into `grads` and returns the latent gradient.
pub fn decoder_backward(
    params: &ModelParams,
    trace: &DecoderTrace,
    d_points: &[Point3],
    grads: &mut ModelParams,
) -> Result<Vec<f64>> {
    let latent_dim = trace.mlp.inputs[0].ncols();
    let layers = dense_chain(params, "dec.fc", latent_dim)?;
    let flat: Vec<f64> = d_points.iter().flat_map(|p| p.iter().copied()).collect();
    let dy = Array2::from_shape_vec((1, flat.len()), flat).map_err(|e| Error::structural("dec.fc", e.to_string()))?;
    let dz = mlp_backward(&layers, &trace.mlp, dy, Some(grads), true)?.expect("input gradient requested");
    Ok(dz.row(0).to_vec())
}
