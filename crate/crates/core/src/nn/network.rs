use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::tensor::Tensor;

use super::{he_uniform, BatchNorm, BatchNormCache, Conv2d, ConvCache, Dense, DenseCache, Dropout};
use super::{Mode, Param};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Padding {
    Same,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LayerKind {
    Conv,
    BatchNorm,
    Dropout,
    Flatten,
    Dense,
}

/// Declarative description of one layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum LayerSpec {
    Conv {
        kernel: usize,
        stride: usize,
        filters: usize,
        padding: Padding,
        relu: bool,
    },
    BatchNorm,
    Dropout {
        rate: f64,
    },
    Flatten,
    Dense {
        units: usize,
        relu: bool,
    },
}

impl LayerSpec {
    pub fn kind(&self) -> LayerKind {
        match self {
            LayerSpec::Conv { .. } => LayerKind::Conv,
            LayerSpec::BatchNorm => LayerKind::BatchNorm,
            LayerSpec::Dropout { .. } => LayerKind::Dropout,
            LayerSpec::Flatten => LayerKind::Flatten,
            LayerSpec::Dense { .. } => LayerKind::Dense,
        }
    }

    /// Per-item output shape given a per-item input shape.
    pub fn output_shape(&self, input: &[usize]) -> Result<Vec<usize>> {
        match *self {
            LayerSpec::Conv {
                stride, filters, kernel, ..
            } => {
                if input.len() != 3 {
                    return invalid(format!("conv expects an H×W×C input, got {input:?}"));
                }
                if kernel == 0 || stride == 0 || filters == 0 {
                    return invalid("conv kernel, stride and filters must be positive");
                }
                Ok(vec![input[0].div_ceil(stride), input[1].div_ceil(stride), filters])
            }
            LayerSpec::BatchNorm => Ok(input.to_vec()),
            LayerSpec::Dropout { rate } => {
                Dropout::new(rate)?;
                Ok(input.to_vec())
            }
            LayerSpec::Flatten => Ok(vec![input.iter().product()]),
            LayerSpec::Dense { units, .. } => {
                if input.len() != 1 {
                    return invalid(format!("dense expects a flat input, got {input:?}"));
                }
                Ok(vec![units])
            }
        }
    }

    /// Trainable scalars this layer contributes for the given input shape.
    pub fn param_count(&self, input: &[usize]) -> Result<usize> {
        Ok(match *self {
            LayerSpec::Conv {
                kernel, filters, ..
            } => kernel * kernel * input[2] * filters + filters,
            LayerSpec::BatchNorm => 2 * input[input.len() - 1],
            LayerSpec::Dropout { .. } | LayerSpec::Flatten => 0,
            LayerSpec::Dense { units, .. } => {
                self.output_shape(input)?;
                input[0] * units + units
            }
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Layer {
    Conv(Conv2d),
    BatchNorm(BatchNorm),
    Dropout(Dropout),
    Flatten,
    Dense(Dense),
}

#[derive(Debug, Clone)]
pub enum LayerCache {
    Conv(ConvCache),
    BatchNorm(BatchNormCache),
    Dropout(Option<Vec<f64>>),
    Flatten(Vec<usize>),
    Dense(DenseCache),
}

/// Per-layer caches of one forward pass, consumed by [`Network::backward`].
#[derive(Debug, Clone)]
pub struct Trace {
    caches: Vec<LayerCache>,
}

/// A sequential stack of layers over batched `[B, H, W, C]` input.
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    input_shape: Vec<usize>,
    specs: Vec<LayerSpec>,
    layers: Vec<Layer>,
}

impl Network {
    /// Builds the stack with He-uniform weights, zero biases and unit/zero
    /// batch-norm affine parameters.
    pub fn build<R: Rng + ?Sized>(specs: &[LayerSpec], input_shape: &[usize], rng: &mut R) -> Result<Self> {
        let mut shape = input_shape.to_vec();
        let mut layers = Vec::with_capacity(specs.len());
        for spec in specs {
            let next = spec.output_shape(&shape)?;
            let layer = match *spec {
                LayerSpec::Conv {
                    kernel,
                    stride,
                    filters,
                    relu,
                    ..
                } => {
                    let fan_in = kernel * kernel * shape[2];
                    let w = he_uniform(&[kernel, kernel, shape[2], filters], fan_in, rng);
                    Layer::Conv(Conv2d::new(w, Tensor::zeros(&[filters]), stride, relu)?)
                }
                LayerSpec::BatchNorm => Layer::BatchNorm(BatchNorm::new(shape[shape.len() - 1])),
                LayerSpec::Dropout { rate } => Layer::Dropout(Dropout::new(rate)?),
                LayerSpec::Flatten => Layer::Flatten,
                LayerSpec::Dense { units, relu } => {
                    let w = he_uniform(&[shape[0], units], shape[0], rng);
                    Layer::Dense(Dense::new(w, Tensor::zeros(&[units]), relu)?)
                }
            };
            layers.push(layer);
            shape = next;
        }
        Ok(Self {
            input_shape: input_shape.to_vec(),
            specs: specs.to_vec(),
            layers,
        })
    }

    pub fn input_shape(&self) -> &[usize] {
        &self.input_shape
    }

    pub fn specs(&self) -> &[LayerSpec] {
        &self.specs
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Layer] {
        &mut self.layers
    }

    /// Per-item output shape after every layer.
    pub fn shape_trace(&self) -> Vec<Vec<usize>> {
        let mut shape = self.input_shape.clone();
        self.specs
            .iter()
            .map(|s| {
                shape = s.output_shape(&shape).expect("validated at build");
                shape.clone()
            })
            .collect()
    }

    pub fn output_len(&self) -> usize {
        self.shape_trace()
            .last()
            .map(|s| s.iter().product())
            .unwrap_or_else(|| self.input_shape.iter().product())
    }

    fn check_input(&self, x: &Tensor) -> Result<()> {
        if x.shape().len() != self.input_shape.len() + 1 || x.shape()[1..] != self.input_shape[..] {
            let mut expected = vec![x.shape().first().copied().unwrap_or(0)];
            expected.extend_from_slice(&self.input_shape);
            return Err(Error::ShapeMismatch {
                expected,
                actual: x.shape().to_vec(),
            });
        }
        Ok(())
    }

    /// Inference pass: running batch-norm statistics, dropout disabled.
    pub fn infer(&self, x: &Tensor) -> Result<Tensor> {
        self.check_input(x)?;
        let mut h = x.clone();
        for layer in &self.layers {
            h = match layer {
                Layer::Conv(c) => c.infer(&h)?,
                Layer::BatchNorm(bn) => bn.infer(&h)?,
                Layer::Dropout(_) => h,
                Layer::Flatten => {
                    let b = h.batch();
                    let n = h.len() / b;
                    h.reshape(&[b, n])?
                }
                Layer::Dense(d) => d.infer(&h)?,
            };
        }
        Ok(h)
    }

    /// Forward pass that records what the backward pass needs. Train mode uses
    /// batch statistics (and updates the running ones) and draws dropout masks
    /// from `rng` in layer order.
    pub fn forward<R: Rng + ?Sized>(&mut self, x: &Tensor, mode: Mode, rng: &mut R) -> Result<(Tensor, Trace)> {
        self.check_input(x)?;
        let mut h = x.clone();
        let mut caches = Vec::with_capacity(self.layers.len());
        for layer in &mut self.layers {
            let (next, cache) = match layer {
                Layer::Conv(c) => {
                    let (y, cache) = c.forward(&h)?;
                    (y, LayerCache::Conv(cache))
                }
                Layer::BatchNorm(bn) => {
                    let (y, cache) = bn.forward(&h, mode)?;
                    (y, LayerCache::BatchNorm(cache))
                }
                Layer::Dropout(d) => {
                    let (y, mask) = d.forward(&h, mode, rng);
                    (y, LayerCache::Dropout(mask))
                }
                Layer::Flatten => {
                    let shape = h.shape().to_vec();
                    let b = h.batch();
                    let n = h.len() / b;
                    (h.reshape(&[b, n])?, LayerCache::Flatten(shape))
                }
                Layer::Dense(d) => {
                    let (y, cache) = d.forward(&h)?;
                    (y, LayerCache::Dense(cache))
                }
            };
            caches.push(cache);
            h = next;
        }
        Ok((h, Trace { caches }))
    }

    /// Accumulates parameter gradients for `grad_out` (gradient of the loss with
    /// respect to the network output). Returns the input gradient if requested.
    pub fn backward(&mut self, trace: &Trace, grad_out: Tensor, input_grad: bool) -> Result<Option<Tensor>> {
        if trace.caches.len() != self.layers.len() {
            return invalid("trace does not belong to this network");
        }
        let mut g = grad_out;
        let n = self.layers.len();
        for (i, (layer, cache)) in self.layers.iter_mut().zip(&trace.caches).enumerate().rev() {
            let need = input_grad || i > 0;
            let next = match (layer, cache) {
                (Layer::Conv(c), LayerCache::Conv(cache)) => c.backward(cache, g, need)?,
                (Layer::BatchNorm(bn), LayerCache::BatchNorm(cache)) => Some(bn.backward(cache, &g)?),
                (Layer::Dropout(_), LayerCache::Dropout(mask)) => Some(Dropout::backward(mask.as_deref(), g)),
                (Layer::Flatten, LayerCache::Flatten(shape)) => Some(g.reshape(shape)?),
                (Layer::Dense(d), LayerCache::Dense(cache)) => d.backward(cache, g, need)?,
                _ => return invalid(format!("trace entry {i} of {n} does not match its layer")),
            };
            match next {
                Some(t) => g = t,
                None => return Ok(None),
            }
        }
        Ok(Some(g))
    }

    pub fn params(&self) -> Vec<&Param> {
        let mut out = Vec::new();
        for layer in &self.layers {
            match layer {
                Layer::Conv(c) => out.extend([&c.weight, &c.bias]),
                Layer::BatchNorm(bn) => out.extend([&bn.gamma, &bn.beta]),
                Layer::Dense(d) => out.extend([&d.weight, &d.bias]),
                Layer::Dropout(_) | Layer::Flatten => {}
            }
        }
        out
    }

    pub fn params_mut(&mut self) -> Vec<&mut Param> {
        let mut out = Vec::new();
        for layer in &mut self.layers {
            match layer {
                Layer::Conv(c) => out.extend([&mut c.weight, &mut c.bias]),
                Layer::BatchNorm(bn) => out.extend([&mut bn.gamma, &mut bn.beta]),
                Layer::Dense(d) => out.extend([&mut d.weight, &mut d.bias]),
                Layer::Dropout(_) | Layer::Flatten => {}
            }
        }
        out
    }

    /// Names matching the order of [`Network::params`].
    pub fn param_names(&self) -> Vec<String> {
        let mut out = Vec::new();
        for (i, layer) in self.layers.iter().enumerate() {
            let (a, b) = match layer {
                Layer::Conv(_) | Layer::Dense(_) => ("weight", "bias"),
                Layer::BatchNorm(_) => ("gamma", "beta"),
                Layer::Dropout(_) | Layer::Flatten => continue,
            };
            out.push(format!("layer{}.{a}", i + 1));
            out.push(format!("layer{}.{b}", i + 1));
        }
        out
    }

    /// Non-trainable state (batch-norm running mean and variance), in layer order.
    pub fn buffers(&self) -> Vec<&[f64]> {
        let mut out: Vec<&[f64]> = Vec::new();
        for layer in &self.layers {
            if let Layer::BatchNorm(bn) = layer {
                out.push(&bn.running_mean);
                out.push(&bn.running_var);
            }
        }
        out
    }

    pub fn buffers_mut(&mut self) -> Vec<&mut Vec<f64>> {
        let mut out = Vec::new();
        for layer in &mut self.layers {
            if let Layer::BatchNorm(bn) = layer {
                out.push(&mut bn.running_mean);
                out.push(&mut bn.running_var);
            }
        }
        out
    }

    pub fn buffer_names(&self) -> Vec<String> {
        let mut out = Vec::new();
        for (i, layer) in self.layers.iter().enumerate() {
            if let Layer::BatchNorm(_) = layer {
                out.push(format!("layer{}.running_mean", i + 1));
                out.push(format!("layer{}.running_var", i + 1));
            }
        }
        out
    }

    pub fn zero_grad(&mut self) {
        self.params_mut().into_iter().for_each(Param::zero_grad);
    }

    pub fn param_count(&self) -> usize {
        self.params().iter().map(|p| p.len()).sum()
    }
}
