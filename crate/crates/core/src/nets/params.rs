use indexmap::IndexMap;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::arch::NetConfig;
use crate::error::{Error, Result};
use crate::sampling::rng_from_seed;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Encoder,
    Decoder,
    Discriminator,
}

/// Dense row-major array with an explicit shape.
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl Tensor {
    pub fn new(shape: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        if shape.contains(&0) {
            return Err(Error::structural("<tensor>", format!("zero-sized dimension in {shape:?}")));
        }
        let expected: usize = shape.iter().product();
        if expected != data.len() {
            return Err(Error::structural(
                "<tensor>",
                format!("shape {shape:?} needs {expected} values, got {}", data.len()),
            ));
        }
        Ok(Self { shape, data })
    }

    pub fn zeros(shape: Vec<usize>) -> Self {
        let n = shape.iter().product();
        Self { shape, data: vec![0.0; n] }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }
}

/// Named, ordered parameter collection for one network.
///
/// Frozen collections refuse optimizer updates.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelParams {
    role: Role,
    entries: IndexMap<String, Tensor>,
    frozen: bool,
}

impl ModelParams {
    pub fn new(role: Role) -> Self {
        Self { role, entries: IndexMap::new(), frozen: false }
    }

    pub fn role(&self) -> Role {
        self.role
    }

    pub fn insert(&mut self, name: impl Into<String>, tensor: Tensor) -> Result<()> {
        let name = name.into();
        if self.entries.contains_key(&name) {
            return Err(Error::structural(name, "duplicate parameter name"));
        }
        self.entries.insert(name, tensor);
        Ok(())
    }

    pub fn get(&self, name: &str) -> Result<&Tensor> {
        self.entries.get(name).ok_or_else(|| Error::structural(name, "missing parameter"))
    }

    pub fn get_mut(&mut self, name: &str) -> Result<&mut Tensor> {
        self.entries.get_mut(name).ok_or_else(|| Error::structural(name, "missing parameter"))
    }

    pub fn contains(&self, name: &str) -> bool {
        self.entries.contains_key(name)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor)> {
        self.entries.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = (&str, &mut Tensor)> {
        self.entries.iter_mut().map(|(k, v)| (k.as_str(), v))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn num_values(&self) -> usize {
        self.entries.values().map(Tensor::len).sum()
    }

    pub fn freeze(&mut self) {
        self.frozen = true;
    }

    pub fn is_frozen(&self) -> bool {
        self.frozen
    }

    /// Same names and shapes, all values zero, not frozen.
    pub fn zeros_like(&self) -> Self {
        Self {
            role: self.role,
            entries: self.entries.iter().map(|(k, v)| (k.clone(), Tensor::zeros(v.shape.clone()))).collect(),
            frozen: false,
        }
    }

    /// Checks that `other` has the same role, names, order and shapes.
    pub fn check_same_layout(&self, other: &ModelParams) -> Result<()> {
        if self.role != other.role {
            return Err(Error::structural("<params>", format!("role {:?} vs {:?}", self.role, other.role)));
        }
        if self.entries.len() != other.entries.len() {
            return Err(Error::structural(
                "<params>",
                format!("{} entries vs {}", self.entries.len(), other.entries.len()),
            ));
        }
        for ((ka, va), (kb, vb)) in self.entries.iter().zip(&other.entries) {
            if ka != kb {
                return Err(Error::structural(ka.as_str(), format!("name differs from `{kb}`")));
            }
            if va.shape != vb.shape {
                return Err(Error::structural(ka.as_str(), format!("shape {:?} vs {:?}", va.shape, vb.shape)));
            }
        }
        Ok(())
    }

    /// First entry containing a non-finite value, reported as a numerical error.
    pub fn check_finite(&self) -> Result<()> {
        for (name, t) in &self.entries {
            if t.data.iter().any(|v| !v.is_finite()) {
                return Err(Error::Numerical { entry: name.clone() });
            }
        }
        Ok(())
    }

    /// `self += alpha * other`; layouts must match.
    pub fn add_scaled(&mut self, alpha: f64, other: &ModelParams) -> Result<()> {
        self.check_same_layout(other)?;
        for (a, b) in self.entries.values_mut().zip(other.entries.values()) {
            for (x, y) in a.data.iter_mut().zip(&b.data) {
                *x += alpha * y;
            }
        }
        Ok(())
    }

    pub fn scale(&mut self, s: f64) {
        for t in self.entries.values_mut() {
            t.data.iter_mut().for_each(|v| *v *= s);
        }
    }

    /// All values concatenated in entry order.
    pub fn flatten(&self) -> Vec<f64> {
        self.entries.values().flat_map(|t| t.data.iter().copied()).collect()
    }
}

/// Copies every value of `source` into a fresh collection laid out like
/// `target`. The result shares no storage with either argument.
pub fn distill_weights(source: &ModelParams, target: &ModelParams) -> Result<ModelParams> {
    target.check_same_layout(source)?;
    let mut out = source.clone();
    out.frozen = target.frozen;
    Ok(out)
}

/// Uniform fan-in initialization: every weight and bias of a layer with
/// `fan_in` inputs is drawn from `U(-1/sqrt(fan_in), 1/sqrt(fan_in))`.
pub fn init_params(role: Role, arch: &NetConfig, seed: u64) -> Result<ModelParams> {
    arch.validate()?;
    let mut rng = rng_from_seed(seed);
    let mut params = ModelParams::new(role);
    for layer in arch.layers(role) {
        let bound = 1.0 / (layer.fan_in as f64).sqrt();
        let mut draw = |n: usize| -> Vec<f64> { (0..n).map(|_| rng.gen_range(-bound..=bound)).collect() };
        let w = draw(layer.fan_in * layer.fan_out);
        let b = draw(layer.fan_out);
        params.insert(format!("{}.weight", layer.name), Tensor::new(vec![layer.fan_out, layer.fan_in], w)?)?;
        params.insert(format!("{}.bias", layer.name), Tensor::new(vec![layer.fan_out], b)?)?;
    }
    Ok(params)
}
