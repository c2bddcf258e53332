use ndarray::{Array1, Array2, Axis};

use super::dense::{affine_backward, dense, dense_chain, mlp_backward, mlp_forward, Dense, MlpTrace};
use super::encoder::points_matrix;
use super::params::{ModelParams, Role};
use super::{check_role, softmax};
use crate::error::Result;
use crate::geometry::Point3;

pub struct DiscriminatorTrace {
    point: MlpTrace,
    attention: Vec<f64>,
    head: MlpTrace,
    score: f64,
}

impl DiscriminatorTrace {
    pub fn score(&self) -> f64 {
        self.score
    }
}

struct Layers<'a> {
    point: Vec<Dense<'a>>,
    attn: Dense<'a>,
    head: Vec<Dense<'a>>,
}

fn layers(params: &ModelParams) -> Result<Layers<'_>> {
    let point = dense_chain(params, "disc.point", 3)?;
    let c = point.last().expect("nonempty chain").fan_out();
    let attn = dense(params, "disc.attn")?;
    if attn.fan_in() != c || attn.fan_out() != 1 {
        return Err(crate::Error::structural(
            "disc.attn.weight",
            format!("expected shape [1, {c}], got [{}, {}]", attn.fan_out(), attn.fan_in()),
        ));
    }
    let head = dense_chain(params, "disc.head", c)?;
    if head.last().expect("nonempty chain").fan_out() != 1 {
        return Err(crate::Error::structural("disc.head", "head must end in a single output"));
    }
    Ok(Layers { point, attn, head })
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Probability in (0, 1) that `points` is a real partial observation.
pub fn discriminator_forward(params: &ModelParams, points: &[Point3]) -> Result<f64> {
    discriminator_forward_traced(params, points).map(|(s, _)| s)
}

pub fn discriminator_forward_traced(params: &ModelParams, points: &[Point3]) -> Result<(f64, DiscriminatorTrace)> {
    check_role(params, Role::Discriminator)?;
    crate::geometry::ensure_nonempty(points, "discriminator input")?;
    let l = layers(params)?;
    let point = mlp_forward(&l.point, points_matrix(points));
    let feats = &point.output;
    let logits: Vec<f64> = feats.outer_iter().map(|f| f.dot(&l.attn.w.row(0)) + l.attn.b[0]).collect();
    let attention = softmax(&logits);
    let mut pooled = Array1::zeros(feats.ncols());
    for (f, &a) in feats.outer_iter().zip(&attention) {
        pooled.scaled_add(a, &f);
    }
    let head = mlp_forward(&l.head, pooled.insert_axis(Axis(0)));
    let score = sigmoid(head.output[[0, 0]]);
    Ok((score, DiscriminatorTrace { point, attention, head, score }))
}

/// Backpropagates `d_score`. Parameter gradients go into `grads` when given;
/// the gradient with respect to the input points is returned when requested.
pub fn discriminator_backward(
    params: &ModelParams,
    trace: &DiscriminatorTrace,
    d_score: f64,
    mut grads: Option<&mut ModelParams>,
    want_input: bool,
) -> Result<Option<Vec<Point3>>> {
    let l = layers(params)?;
    let d_logit = d_score * trace.score * (1.0 - trace.score);
    let d_head = Array2::from_elem((1, 1), d_logit);
    let d_pooled =
        mlp_backward(&l.head, &trace.head, d_head, grads.as_deref_mut(), true)?.expect("input gradient requested");
    let d_pooled = d_pooled.row(0);

    let feats = &trace.point.output;
    let a = &trace.attention;
    // pooled = sum_i a_i f_i with a = softmax(s), s_i = w . f_i + b
    let da: Vec<f64> = feats.outer_iter().map(|f| f.dot(&d_pooled)).collect();
    let mean_da: f64 = a.iter().zip(&da).map(|(x, y)| x * y).sum();
    let ds: Array2<f64> = Array2::from_shape_fn((feats.nrows(), 1), |(i, _)| a[i] * (da[i] - mean_da));
    if let Some(g) = grads.as_deref_mut() {
        affine_backward(&l.attn, feats, &ds, g)?;
    }
    let mut d_feats = Array2::zeros(feats.raw_dim());
    for (i, mut row) in d_feats.outer_iter_mut().enumerate() {
        row.scaled_add(a[i], &d_pooled);
        row.scaled_add(ds[[i, 0]], &l.attn.w.row(0));
    }
    let d_points = mlp_backward(&l.point, &trace.point, d_feats, grads, want_input)?;
    Ok(d_points.map(|d| d.outer_iter().map(|r| [r[0], r[1], r[2]]).collect()))
}
