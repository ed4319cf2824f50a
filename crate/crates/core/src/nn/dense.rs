use crate::error::{Error, Result};
use crate::tensor::{gemm, Mat, Tensor};

use super::Param;

/// Fully connected layer `y = x · W + b` over `[B, in]` inputs, weights `[in, out]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub inputs: usize,
    pub outputs: usize,
    pub relu: bool,
    pub weight: Param,
    pub bias: Param,
}

#[derive(Debug, Clone)]
pub struct DenseCache {
    input: Tensor,
    output: Option<Vec<f64>>,
}

impl Dense {
    pub fn new(weight: Tensor, bias: Tensor, relu: bool) -> Result<Self> {
        let ws = weight.shape().to_vec();
        if ws.len() != 2 {
            return Err(Error::ShapeMismatch {
                expected: vec![0, 0],
                actual: ws,
            });
        }
        bias.expect_shape(&[ws[1]])?;
        Ok(Self {
            inputs: ws[0],
            outputs: ws[1],
            relu,
            weight: Param::new(weight),
            bias: Param::new(bias),
        })
    }

    fn check(&self, x: &Tensor) -> Result<usize> {
        if x.shape().len() != 2 || x.shape()[1] != self.inputs {
            return Err(Error::ShapeMismatch {
                expected: vec![x.shape()[0], self.inputs],
                actual: x.shape().to_vec(),
            });
        }
        Ok(x.shape()[0])
    }

    pub fn infer(&self, x: &Tensor) -> Result<Tensor> {
        let b = self.check(x)?;
        let mut out = Vec::with_capacity(b * self.outputs);
        for _ in 0..b {
            out.extend_from_slice(self.bias.value.data());
        }
        gemm(
            Mat::new(x.data(), b, self.inputs),
            Mat::new(self.weight.value.data(), self.inputs, self.outputs),
            1.0,
            &mut out,
        );
        if self.relu {
            out.iter_mut().for_each(|v| *v = v.max(0.0));
        }
        Tensor::new(vec![b, self.outputs], out)
    }

    pub fn forward(&self, x: &Tensor) -> Result<(Tensor, DenseCache)> {
        let y = self.infer(x)?;
        let cache = DenseCache {
            input: x.clone(),
            output: self.relu.then(|| y.data().to_vec()),
        };
        Ok((y, cache))
    }

    pub fn backward(
        &mut self,
        cache: &DenseCache,
        grad_out: Tensor,
        input_grad: bool,
    ) -> Result<Option<Tensor>> {
        let b = cache.input.shape()[0];
        grad_out.expect_shape(&[b, self.outputs])?;
        let mut dy = grad_out.into_data();
        if let Some(out) = &cache.output {
            for (d, &o) in dy.iter_mut().zip(out) {
                if o <= 0.0 {
                    *d = 0.0;
                }
            }
        }
        gemm(
            Mat::new(cache.input.data(), b, self.inputs).t(),
            Mat::new(&dy, b, self.outputs),
            1.0,
            self.weight.grad.data_mut(),
        );
        let gb = self.bias.grad.data_mut();
        for row in dy.chunks_exact(self.outputs) {
            for (acc, v) in gb.iter_mut().zip(row) {
                *acc += v;
            }
        }
        if !input_grad {
            return Ok(None);
        }
        let mut dx = vec![0.0; b * self.inputs];
        gemm(
            Mat::new(&dy, b, self.outputs),
            Mat::new(self.weight.value.data(), self.inputs, self.outputs).t(),
            0.0,
            &mut dx,
        );
        Ok(Some(Tensor::new(vec![b, self.inputs], dx)?))
    }
}
