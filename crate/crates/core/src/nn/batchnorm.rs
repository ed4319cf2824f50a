use crate::error::{invalid, Error, Result};
use crate::tensor::Tensor;

use super::{Mode, Param};

/// Per-channel batch normalisation over the last axis.
///
/// Running statistics follow `running = momentum * running + (1 - momentum) * batch`;
/// the running variance uses the unbiased batch estimate.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchNorm {
    pub channels: usize,
    pub eps: f64,
    pub momentum: f64,
    pub gamma: Param,
    pub beta: Param,
    pub running_mean: Vec<f64>,
    pub running_var: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct BatchNormCache {
    mode: Mode,
    shape: Vec<usize>,
    x_hat: Vec<f64>,
    inv_std: Vec<f64>,
}

impl BatchNorm {
    pub const DEFAULT_EPS: f64 = 1e-5;
    pub const DEFAULT_MOMENTUM: f64 = 0.9;

    pub fn new(channels: usize) -> Self {
        Self {
            channels,
            eps: Self::DEFAULT_EPS,
            momentum: Self::DEFAULT_MOMENTUM,
            gamma: Param::new(Tensor::full(&[channels], 1.0)),
            beta: Param::new(Tensor::zeros(&[channels])),
            running_mean: vec![0.0; channels],
            running_var: vec![1.0; channels],
        }
    }

    fn check(&self, x: &Tensor) -> Result<()> {
        let s = x.shape();
        if s.len() < 2 || *s.last().unwrap() != self.channels {
            return Err(Error::ShapeMismatch {
                expected: vec![0, self.channels],
                actual: s.to_vec(),
            });
        }
        Ok(())
    }

    fn normalize(&self, x: &Tensor, mean: &[f64], inv_std: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let c = self.channels;
        let g = self.gamma.value.data();
        let b = self.beta.value.data();
        let mut x_hat = Vec::with_capacity(x.len());
        let mut y = Vec::with_capacity(x.len());
        for row in x.data().chunks_exact(c) {
            for j in 0..c {
                let h = (row[j] - mean[j]) * inv_std[j];
                x_hat.push(h);
                y.push(g[j] * h + b[j]);
            }
        }
        (x_hat, y)
    }

    fn running_inv_std(&self) -> Vec<f64> {
        self.running_var
            .iter()
            .map(|v| 1.0 / (v + self.eps).sqrt())
            .collect()
    }

    pub fn infer(&self, x: &Tensor) -> Result<Tensor> {
        self.check(x)?;
        let (_, y) = self.normalize(x, &self.running_mean, &self.running_inv_std());
        Tensor::new(x.shape().to_vec(), y)
    }

    /// In train mode, standardises by batch statistics and updates the running
    /// estimates; in infer mode, standardises by the running estimates.
    pub fn forward(&mut self, x: &Tensor, mode: Mode) -> Result<(Tensor, BatchNormCache)> {
        self.check(x)?;
        let c = self.channels;
        let n = x.len() / c;
        let (mean, inv_std) = match mode {
            Mode::Infer => (self.running_mean.clone(), self.running_inv_std()),
            Mode::Train => {
                if x.batch() < 2 {
                    return invalid("batch normalisation in train mode needs a batch of at least 2");
                }
                let mut mean = vec![0.0; c];
                for row in x.data().chunks_exact(c) {
                    for (m, v) in mean.iter_mut().zip(row) {
                        *m += v;
                    }
                }
                mean.iter_mut().for_each(|m| *m /= n as f64);
                let mut var = vec![0.0; c];
                for row in x.data().chunks_exact(c) {
                    for j in 0..c {
                        let d = row[j] - mean[j];
                        var[j] += d * d;
                    }
                }
                var.iter_mut().for_each(|v| *v /= n as f64);
                let unbias = n as f64 / (n as f64 - 1.0);
                for j in 0..c {
                    self.running_mean[j] =
                        self.momentum * self.running_mean[j] + (1.0 - self.momentum) * mean[j];
                    self.running_var[j] = self.momentum * self.running_var[j]
                        + (1.0 - self.momentum) * var[j] * unbias;
                }
                let inv_std = var.iter().map(|v| 1.0 / (v + self.eps).sqrt()).collect();
                (mean, inv_std)
            }
        };
        let (x_hat, y) = self.normalize(x, &mean, &inv_std);
        let cache = BatchNormCache {
            mode,
            shape: x.shape().to_vec(),
            x_hat,
            inv_std,
        };
        Ok((Tensor::new(x.shape().to_vec(), y)?, cache))
    }

    pub fn backward(&mut self, cache: &BatchNormCache, grad_out: &Tensor) -> Result<Tensor> {
        grad_out.expect_shape(&cache.shape)?;
        let c = self.channels;
        let n = grad_out.len() / c;
        let mut sum_dy = vec![0.0; c];
        let mut sum_dy_xhat = vec![0.0; c];
        for (dy, xh) in grad_out
            .data()
            .chunks_exact(c)
            .zip(cache.x_hat.chunks_exact(c))
        {
            for j in 0..c {
                sum_dy[j] += dy[j];
                sum_dy_xhat[j] += dy[j] * xh[j];
            }
        }
        for j in 0..c {
            self.gamma.grad.data_mut()[j] += sum_dy_xhat[j];
            self.beta.grad.data_mut()[j] += sum_dy[j];
        }
        let gamma = self.gamma.value.data();
        let mut dx = Vec::with_capacity(grad_out.len());
        match cache.mode {
            Mode::Infer => {
                for dy in grad_out.data().chunks_exact(c) {
                    for j in 0..c {
                        dx.push(dy[j] * gamma[j] * cache.inv_std[j]);
                    }
                }
            }
            Mode::Train => {
                let nf = n as f64;
                for (dy, xh) in grad_out
                    .data()
                    .chunks_exact(c)
                    .zip(cache.x_hat.chunks_exact(c))
                {
                    for j in 0..c {
                        let scale = gamma[j] * cache.inv_std[j] / nf;
                        dx.push(scale * (nf * dy[j] - sum_dy[j] - xh[j] * sum_dy_xhat[j]));
                    }
                }
            }
        }
        Tensor::new(cache.shape.clone(), dx)
    }
}
