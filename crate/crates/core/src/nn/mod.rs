//! Layer kernels with explicit forward and backward passes, losses and Adam.
//!
//! Activations are laid out batch-first and channels-last: `[B, H, W, C]` for
//! feature maps and `[B, F]` for flat features.

mod adam;
mod batchnorm;
mod conv;
mod dense;
mod dropout;
mod loss;
mod network;

pub use adam::{AdamConfig, AdamState};
pub use batchnorm::{BatchNorm, BatchNormCache};
pub use conv::{same_padding, Conv2d, ConvCache};
pub use dense::{Dense, DenseCache};
pub use dropout::Dropout;
pub use loss::{
    bce_loss, bce_loss_grad, relu, relu_grad, sigmoid, sigmoid_grad, softmax, softmax_cross_entropy,
    BCE_EPS,
};
pub use network::{Layer, LayerCache, LayerKind, LayerSpec, Network, Padding, Trace};

use serde::{Deserialize, Serialize};

use crate::tensor::Tensor;

/// Whether stochastic and batch-statistic layers run in training or inference form.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Train,
    Infer,
}

/// A trainable tensor together with its accumulated gradient.
#[derive(Debug, Clone, PartialEq)]
pub struct Param {
    pub value: Tensor,
    pub grad: Tensor,
}

impl Param {
    pub fn new(value: Tensor) -> Self {
        let grad = Tensor::zeros(value.shape());
        Self { value, grad }
    }

    pub fn zero_grad(&mut self) {
        self.grad.fill(0.0);
    }

    pub fn len(&self) -> usize {
        self.value.len()
    }

    pub fn is_empty(&self) -> bool {
        self.value.is_empty()
    }
}

/// He-uniform initialisation: U(-sqrt(6/fan_in), sqrt(6/fan_in)).
pub(crate) fn he_uniform<R: rand::Rng + ?Sized>(shape: &[usize], fan_in: usize, rng: &mut R) -> Tensor {
    let limit = (6.0 / fan_in as f64).sqrt();
    let mut t = Tensor::zeros(shape);
    for x in t.data_mut() {
        *x = rng.random_range(-limit..limit);
    }
    t
}
