use rand::Rng;

use crate::error::{invalid, Result};
use crate::tensor::Tensor;

use super::Mode;

/// Inverted dropout: in train mode each unit is zeroed with probability `rate`
/// and survivors are scaled by `1 / (1 - rate)`; inference is the identity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dropout {
    rate: f64,
}

impl Dropout {
    pub fn new(rate: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&rate) {
            return invalid(format!("dropout rate must lie in [0, 1), got {rate}"));
        }
        Ok(Self { rate })
    }

    pub fn rate(&self) -> f64 {
        self.rate
    }

    /// Returns the output and, in train mode with a non-zero rate, the mask of
    /// per-unit scale factors.
    pub fn forward<R: Rng + ?Sized>(
        &self,
        x: &Tensor,
        mode: Mode,
        rng: &mut R,
    ) -> (Tensor, Option<Vec<f64>>) {
        if mode == Mode::Infer || self.rate == 0.0 {
            return (x.clone(), None);
        }
        let keep = 1.0 / (1.0 - self.rate);
        let mask: Vec<f64> = (0..x.len())
            .map(|_| {
                if rng.random::<f64>() < self.rate {
                    0.0
                } else {
                    keep
                }
            })
            .collect();
        let mut y = x.clone();
        y.data_mut().iter_mut().zip(&mask).for_each(|(v, m)| *v *= m);
        (y, Some(mask))
    }

    pub fn backward(mask: Option<&[f64]>, mut grad_out: Tensor) -> Tensor {
        if let Some(mask) = mask {
            grad_out
                .data_mut()
                .iter_mut()
                .zip(mask)
                .for_each(|(g, m)| *g *= m);
        }
        grad_out
    }
}
