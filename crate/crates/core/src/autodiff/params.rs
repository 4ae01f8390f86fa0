//! Named trainable tensors with per-tensor RMSprop accumulator state.

use std::collections::HashMap;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use super::tensor::Tensor;

#[derive(Debug, Error, PartialEq)]
pub enum ParamError {
    #[error("duplicate parameter name {0:?}")]
    Duplicate(String),
    #[error("unknown parameter name {0:?}")]
    Unknown(String),
    #[error("gradient shape {grad:?} does not match parameter {name:?} shape {param:?}")]
    GradShape {
        name: String,
        param: Vec<usize>,
        grad: Vec<usize>,
    },
    #[error("invalid optimizer config: {0}")]
    Config(String),
}

#[derive(Debug, Clone)]
struct Entry {
    name: String,
    value: Tensor,
    /// RMSprop running mean of squared gradients; same shape as value.
    acc: Tensor,
}

/// Ordered, named collection of trainable tensors. Registration order is
/// the parameter index order used by tapes and gradients.
#[derive(Debug, Clone, Default)]
pub struct Params {
    entries: Vec<Entry>,
    by_name: HashMap<String, usize>,
}

impl Params {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Registers a tensor and returns its parameter index.
    pub fn register(&mut self, name: &str, value: Tensor) -> Result<usize, ParamError> {
        if self.by_name.contains_key(name) {
            return Err(ParamError::Duplicate(name.to_string()));
        }
        let acc = Tensor::zeros(value.shape().to_vec());
        let idx = self.entries.len();
        self.entries.push(Entry {
            name: name.to_string(),
            value,
            acc,
        });
        self.by_name.insert(name.to_string(), idx);
        Ok(idx)
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.by_name.get(name).copied()
    }

    pub fn name(&self, idx: usize) -> &str {
        &self.entries[idx].name
    }

    pub fn value(&self, idx: usize) -> &Tensor {
        &self.entries[idx].value
    }

    pub fn value_mut(&mut self, idx: usize) -> &mut Tensor {
        &mut self.entries[idx].value
    }

    pub fn accumulator(&self, idx: usize) -> &Tensor {
        &self.entries[idx].acc
    }

    pub fn get(&self, name: &str) -> Result<&Tensor, ParamError> {
        let idx = self
            .index_of(name)
            .ok_or_else(|| ParamError::Unknown(name.to_string()))?;
        Ok(&self.entries[idx].value)
    }

    pub fn set(&mut self, name: &str, value: Tensor) -> Result<(), ParamError> {
        let idx = self
            .index_of(name)
            .ok_or_else(|| ParamError::Unknown(name.to_string()))?;
        if value.shape() != self.entries[idx].value.shape() {
            return Err(ParamError::GradShape {
                name: name.to_string(),
                param: self.entries[idx].value.shape().to_vec(),
                grad: value.shape().to_vec(),
            });
        }
        self.entries[idx].value = value;
        Ok(())
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|e| e.name.as_str())
    }

    /// One RMSprop update:
    ///   acc <- alpha * acc + (1 - alpha) * g^2
    ///   theta <- theta - lr * g / (sqrt(acc) + eps)
    /// A missing gradient counts as zero (the accumulator still decays).
    pub fn rmsprop_step(
        &mut self,
        grads: &Gradients,
        lr: f64,
        alpha: f64,
        eps: f64,
    ) -> Result<(), ParamError> {
        if !(lr > 0.0) {
            return Err(ParamError::Config(format!("lr must be > 0, got {lr}")));
        }
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(ParamError::Config(format!(
                "alpha must be in (0, 1), got {alpha}"
            )));
        }
        if !(eps > 0.0) {
            return Err(ParamError::Config(format!("eps must be > 0, got {eps}")));
        }
        if grads.len() != self.entries.len() {
            return Err(ParamError::Config(format!(
                "gradients cover {} parameters, expected {}",
                grads.len(),
                self.entries.len()
            )));
        }
        for (idx, entry) in self.entries.iter_mut().enumerate() {
            match grads.get(idx) {
                Some(g) => {
                    if g.shape() != entry.value.shape() {
                        return Err(ParamError::GradShape {
                            name: entry.name.clone(),
                            param: entry.value.shape().to_vec(),
                            grad: g.shape().to_vec(),
                        });
                    }
                    let acc = entry.acc.data_mut();
                    let theta = entry.value.data_mut();
                    for ((a, t), &gv) in acc.iter_mut().zip(theta.iter_mut()).zip(g.data()) {
                        *a = alpha * *a + (1.0 - alpha) * gv * gv;
                        *t -= lr * gv / (a.sqrt() + eps);
                    }
                }
                None => {
                    for a in entry.acc.data_mut() {
                        *a *= alpha;
                    }
                }
            }
        }
        Ok(())
    }
}

/// Per-parameter gradients produced by a backward pass, indexed like the
/// `Params` the tape was bound to. Constants never appear here.
#[derive(Debug, Clone)]
pub struct Gradients {
    by_param: Vec<Option<Tensor>>,
}

impl Gradients {
    pub(crate) fn new(by_param: Vec<Option<Tensor>>) -> Self {
        Self { by_param }
    }

    pub fn len(&self) -> usize {
        self.by_param.len()
    }

    pub fn is_empty(&self) -> bool {
        self.by_param.is_empty()
    }

    pub fn get(&self, idx: usize) -> Option<&Tensor> {
        self.by_param.get(idx).and_then(|g| g.as_ref())
    }
}

/// Kaiming-uniform weight init: U(-sqrt(6/fan_in), +sqrt(6/fan_in)).
/// Deterministic given the RNG state; biases start at zero.
pub fn init_linear(
    params: &mut Params,
    rng: &mut ChaCha8Rng,
    prefix: &str,
    fan_in: usize,
    fan_out: usize,
) -> Result<(usize, usize), ParamError> {
    init_linear_with_gain(params, rng, prefix, fan_in, fan_out, 1.0)
}

/// [`init_linear`] with the weight bound multiplied by `gain`; small
/// gains keep a layer's initial output near zero.
pub fn init_linear_with_gain(
    params: &mut Params,
    rng: &mut ChaCha8Rng,
    prefix: &str,
    fan_in: usize,
    fan_out: usize,
    gain: f64,
) -> Result<(usize, usize), ParamError> {
    let bound = gain * (6.0 / fan_in as f64).sqrt();
    let data: Vec<f64> = (0..fan_in * fan_out)
        .map(|_| rng.gen_range(-bound..bound))
        .collect();
    let w = params.register(&format!("{prefix}.w"), Tensor::new(vec![fan_in, fan_out], data))?;
    let b = params.register(&format!("{prefix}.b"), Tensor::zeros(vec![fan_out]))?;
    Ok((w, b))
}
