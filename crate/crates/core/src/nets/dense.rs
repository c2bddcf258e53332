//! Dense layers applied row-wise, with ReLU between consecutive layers.

use ndarray::linalg::general_mat_mul;
use ndarray::{Array2, ArrayView1, ArrayView2, ArrayViewMut1, ArrayViewMut2, Axis};

use super::params::ModelParams;
use crate::error::{Error, Result};

pub(crate) struct Dense<'a> {
    pub name: String,
    pub w: ArrayView2<'a, f64>,
    pub b: ArrayView1<'a, f64>,
}

impl Dense<'_> {
    pub fn fan_in(&self) -> usize {
        self.w.ncols()
    }

    pub fn fan_out(&self) -> usize {
        self.w.nrows()
    }
}

pub(crate) fn dense<'a>(params: &'a ModelParams, name: &str) -> Result<Dense<'a>> {
    let wn = format!("{name}.weight");
    let bn = format!("{name}.bias");
    let w = params.get(&wn)?;
    let b = params.get(&bn)?;
    if w.shape().len() != 2 {
        return Err(Error::structural(wn, format!("expected rank 2, got shape {:?}", w.shape())));
    }
    if b.shape() != [w.shape()[0]] {
        return Err(Error::structural(bn, format!("expected shape [{}], got {:?}", w.shape()[0], b.shape())));
    }
    let w = ArrayView2::from_shape((w.shape()[0], w.shape()[1]), w.data()).expect("shape checked");
    let b = ArrayView1::from(b.data());
    Ok(Dense { name: name.to_string(), w, b })
}

/// Layers `prefix.0`, `prefix.1`, ... in order; checks that widths chain.
pub(crate) fn dense_chain<'a>(params: &'a ModelParams, prefix: &str, input: usize) -> Result<Vec<Dense<'a>>> {
    let mut layers = Vec::new();
    let mut width = input;
    while params.contains(&format!("{prefix}.{}.weight", layers.len())) {
        let layer = dense(params, &format!("{prefix}.{}", layers.len()))?;
        if layer.fan_in() != width {
            return Err(Error::structural(
                format!("{}.weight", layer.name),
                format!("expects {} inputs but receives {width}", layer.fan_in()),
            ));
        }
        width = layer.fan_out();
        layers.push(layer);
    }
    if layers.is_empty() {
        return Err(Error::structural(format!("{prefix}.0.weight"), "missing parameter"));
    }
    Ok(layers)
}

/// Intermediate values of an MLP evaluation. `inputs[l]` is what layer `l` saw.
pub(crate) struct MlpTrace {
    pub inputs: Vec<Array2<f64>>,
    pub output: Array2<f64>,
}

pub(crate) fn affine(layer: &Dense, x: &Array2<f64>) -> Array2<f64> {
    let mut y = Array2::zeros((x.nrows(), layer.fan_out()));
    general_mat_mul(1.0, x, &layer.w.t(), 0.0, &mut y);
    y += &layer.b;
    y
}

pub(crate) fn mlp_forward(layers: &[Dense], x: Array2<f64>) -> MlpTrace {
    let mut inputs = Vec::with_capacity(layers.len());
    let mut cur = x;
    for (l, layer) in layers.iter().enumerate() {
        let mut y = affine(layer, &cur);
        if l + 1 < layers.len() {
            y.mapv_inplace(|v| v.max(0.0));
        }
        inputs.push(cur);
        cur = y;
    }
    MlpTrace { inputs, output: cur }
}

/// Accumulates parameter gradients of `layer` for input `x` and upstream `dy`.
pub(crate) fn affine_backward(layer: &Dense, x: &Array2<f64>, dy: &Array2<f64>, grads: &mut ModelParams) -> Result<()> {
    {
        let gw = grads.get_mut(&format!("{}.weight", layer.name))?;
        let mut gw = ArrayViewMut2::from_shape((layer.fan_out(), layer.fan_in()), gw.data_mut())
            .map_err(|e| Error::structural(&layer.name, e.to_string()))?;
        general_mat_mul(1.0, &dy.t(), x, 1.0, &mut gw);
    }
    let gb = grads.get_mut(&format!("{}.bias", layer.name))?;
    let mut gb = ArrayViewMut1::from(gb.data_mut());
    gb += &dy.sum_axis(Axis(0));
    Ok(())
}

/// Backpropagates `dy` through the MLP. Parameter gradients are added into
/// `grads` when given; the input gradient is returned when `want_input` is set.
pub(crate) fn mlp_backward(
    layers: &[Dense],
    trace: &MlpTrace,
    dy: Array2<f64>,
    mut grads: Option<&mut ModelParams>,
    want_input: bool,
) -> Result<Option<Array2<f64>>> {
    let mut d = dy;
    for l in (0..layers.len()).rev() {
        let layer = &layers[l];
        let x = &trace.inputs[l];
        if let Some(g) = grads.as_deref_mut() {
            affine_backward(layer, x, &d, g)?;
        }
        if l == 0 && !want_input {
            return Ok(None);
        }
        let mut dx = Array2::zeros((d.nrows(), layer.fan_in()));
        general_mat_mul(1.0, &d, &layer.w, 0.0, &mut dx);
        if l > 0 {
            // x is the ReLU output of the previous layer.
            ndarray::Zip::from(&mut dx).and(x).for_each(|g, &v| {
                if v <= 0.0 {
                    *g = 0.0;
                }
            });
        }
        d = dx;
    }
    Ok(Some(d))
}

/// Column-wise max over rows, with the first row attaining it.
pub(crate) fn max_pool(x: &Array2<f64>) -> (Vec<f64>, Vec<usize>) {
    let cols = x.ncols();
    let mut best = vec![f64::NEG_INFINITY; cols];
    let mut arg = vec![0usize; cols];
    for (i, row) in x.outer_iter().enumerate() {
        for (c, &v) in row.iter().enumerate() {
            if v > best[c] {
                best[c] = v;
                arg[c] = i;
            }
        }
    }
    (best, arg)
}
