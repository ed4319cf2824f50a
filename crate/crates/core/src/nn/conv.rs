use crate::error::{invalid, Error, Result};
use crate::tensor::{gemm, Mat, Tensor};

use super::Param;

/// Output extent and leading pad for "same" padding: `out = ceil(input / stride)`,
/// with any odd padding placed on the high-index side.
pub fn same_padding(input: usize, kernel: usize, stride: usize) -> (usize, usize) {
    let out = input.div_ceil(stride);
    let total = ((out - 1) * stride + kernel).saturating_sub(input);
    (out, total / 2)
}

#[derive(Debug, Clone, Copy)]
struct Geometry {
    batch: usize,
    h: usize,
    w: usize,
    cin: usize,
    oh: usize,
    ow: usize,
    pad_y: usize,
    pad_x: usize,
    k: usize,
    s: usize,
}

impl Geometry {
    fn rows(&self) -> usize {
        self.batch * self.oh * self.ow
    }

    fn cols(&self) -> usize {
        self.k * self.k * self.cin
    }
}

/// 2-D cross-correlation with zero "same" padding and optional fused ReLU.
///
/// Weights are stored `[k, k, C_in, C_out]` so that the im2col matrix multiplies
/// them directly.
#[derive(Debug, Clone, PartialEq)]
pub struct Conv2d {
    pub kernel: usize,
    pub stride: usize,
    pub in_channels: usize,
    pub out_channels: usize,
    pub relu: bool,
    pub weight: Param,
    pub bias: Param,
}

#[derive(Debug, Clone)]
pub struct ConvCache {
    geom: Geometry,
    col: Vec<f64>,
    /// Post-activation output, kept only when the ReLU is fused.
    output: Option<Vec<f64>>,
}

impl Conv2d {
    pub fn new(weight: Tensor, bias: Tensor, stride: usize, relu: bool) -> Result<Self> {
        let ws = weight.shape().to_vec();
        if ws.len() != 4 || ws[0] != ws[1] {
            return invalid(format!("conv weight must be [k, k, C_in, C_out], got {ws:?}"));
        }
        bias.expect_shape(&[ws[3]])?;
        if stride == 0 {
            return invalid("conv stride must be at least 1");
        }
        Ok(Self {
            kernel: ws[0],
            stride,
            in_channels: ws[2],
            out_channels: ws[3],
            relu,
            weight: Param::new(weight),
            bias: Param::new(bias),
        })
    }

    pub fn output_shape(&self, h: usize, w: usize) -> [usize; 3] {
        [
            h.div_ceil(self.stride),
            w.div_ceil(self.stride),
            self.out_channels,
        ]
    }

    fn geometry(&self, x: &Tensor) -> Result<Geometry> {
        let s = x.shape();
        if s.len() != 4 || s[3] != self.in_channels {
            return Err(Error::ShapeMismatch {
                expected: vec![0, 0, 0, self.in_channels],
                actual: s.to_vec(),
            });
        }
        let (oh, pad_y) = same_padding(s[1], self.kernel, self.stride);
        let (ow, pad_x) = same_padding(s[2], self.kernel, self.stride);
        Ok(Geometry {
            batch: s[0],
            h: s[1],
            w: s[2],
            cin: s[3],
            oh,
            ow,
            pad_y,
            pad_x,
            k: self.kernel,
            s: self.stride,
        })
    }

    fn im2col(x: &[f64], g: &Geometry) -> Vec<f64> {
        let cols = g.cols();
        let mut col = vec![0.0; g.rows() * cols];
        for b in 0..g.batch {
            let img = &x[b * g.h * g.w * g.cin..(b + 1) * g.h * g.w * g.cin];
            for oy in 0..g.oh {
                for ox in 0..g.ow {
                    let row = ((b * g.oh + oy) * g.ow + ox) * cols;
                    for ky in 0..g.k {
                        let iy = (oy * g.s + ky) as isize - g.pad_y as isize;
                        if iy < 0 || iy >= g.h as isize {
                            continue;
                        }
                        for kx in 0..g.k {
                            let ix = (ox * g.s + kx) as isize - g.pad_x as isize;
                            if ix < 0 || ix >= g.w as isize {
                                continue;
                            }
                            let src = (iy as usize * g.w + ix as usize) * g.cin;
                            let dst = row + (ky * g.k + kx) * g.cin;
                            col[dst..dst + g.cin].copy_from_slice(&img[src..src + g.cin]);
                        }
                    }
                }
            }
        }
        col
    }

    fn col2im(dcol: &[f64], g: &Geometry) -> Vec<f64> {
        let cols = g.cols();
        let mut dx = vec![0.0; g.batch * g.h * g.w * g.cin];
        for b in 0..g.batch {
            let img = &mut dx[b * g.h * g.w * g.cin..(b + 1) * g.h * g.w * g.cin];
            for oy in 0..g.oh {
                for ox in 0..g.ow {
                    let row = ((b * g.oh + oy) * g.ow + ox) * cols;
                    for ky in 0..g.k {
                        let iy = (oy * g.s + ky) as isize - g.pad_y as isize;
                        if iy < 0 || iy >= g.h as isize {
                            continue;
                        }
                        for kx in 0..g.k {
                            let ix = (ox * g.s + kx) as isize - g.pad_x as isize;
                            if ix < 0 || ix >= g.w as isize {
                                continue;
                            }
                            let dst = (iy as usize * g.w + ix as usize) * g.cin;
                            let src = row + (ky * g.k + kx) * g.cin;
                            for (d, s) in img[dst..dst + g.cin].iter_mut().zip(&dcol[src..src + g.cin]) {
                                *d += s;
                            }
                        }
                    }
                }
            }
        }
        dx
    }

    fn apply(&self, col: &[f64], g: &Geometry) -> Vec<f64> {
        let m = g.rows();
        let n = self.out_channels;
        let mut out = Vec::with_capacity(m * n);
        for _ in 0..m {
            out.extend_from_slice(self.bias.value.data());
        }
        gemm(
            Mat::new(col, m, g.cols()),
            Mat::new(self.weight.value.data(), g.cols(), n),
            1.0,
            &mut out,
        );
        if self.relu {
            out.iter_mut().for_each(|v| *v = v.max(0.0));
        }
        out
    }

    /// Inference-only forward pass; no cache is built.
    pub fn infer(&self, x: &Tensor) -> Result<Tensor> {
        let g = self.geometry(x)?;
        let col = Self::im2col(x.data(), &g);
        let out = self.apply(&col, &g);
        Tensor::new(vec![g.batch, g.oh, g.ow, self.out_channels], out)
    }

    pub fn forward(&self, x: &Tensor) -> Result<(Tensor, ConvCache)> {
        let g = self.geometry(x)?;
        let col = Self::im2col(x.data(), &g);
        let out = self.apply(&col, &g);
        let cache = ConvCache {
            geom: g,
            col,
            output: self.relu.then(|| out.clone()),
        };
        Ok((Tensor::new(vec![g.batch, g.oh, g.ow, self.out_channels], out)?, cache))
    }

    /// Accumulates weight and bias gradients; returns the input gradient when
    /// `input_grad` is set.
    pub fn backward(
        &mut self,
        cache: &ConvCache,
        grad_out: Tensor,
        input_grad: bool,
    ) -> Result<Option<Tensor>> {
        let g = cache.geom;
        let (b, h, w, c) = (g.batch, g.h, g.w, g.cin);
        grad_out.expect_shape(&[b, g.oh, g.ow, self.out_channels])?;
        let mut dy = grad_out.into_data();
        if let Some(out) = &cache.output {
            for (d, &o) in dy.iter_mut().zip(out) {
                if o <= 0.0 {
                    *d = 0.0;
                }
            }
        }
        let m = g.rows();
        let n = self.out_channels;
        let k = g.cols();
        gemm(
            Mat::new(&cache.col, m, k).t(),
            Mat::new(&dy, m, n),
            1.0,
            self.weight.grad.data_mut(),
        );
        let gb = self.bias.grad.data_mut();
        for row in dy.chunks_exact(n) {
            for (acc, v) in gb.iter_mut().zip(row) {
                *acc += v;
            }
        }
        if !input_grad {
            return Ok(None);
        }
        let mut dcol = vec![0.0; m * k];
        gemm(
            Mat::new(&dy, m, n),
            Mat::new(self.weight.value.data(), k, n).t(),
            0.0,
            &mut dcol,
        );
        let dx = Self::col2im(&dcol, &g);
        Ok(Some(Tensor::new(vec![b, h, w, c], dx)?))
    }
}
