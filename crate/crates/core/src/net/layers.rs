//! Forward and backward passes of the individual layers.
//!
//! Backward functions take the cached forward quantities and the gradient
//! of the loss with respect to the layer output, accumulate parameter
//! gradients into a matching parameter struct, and return the gradient
//! with respect to the layer input.

use rand::Rng;

use super::tensor::Tensor;
use crate::error::{dim_err, Error, Result};

fn fan_in_uniform<R: Rng>(rng: &mut R, fan_in: usize, len: usize) -> Vec<f64> {
    let bound = 1.0 / (fan_in as f64).sqrt();
    (0..len).map(|_| rng.gen_range(-bound..=bound)).collect()
}

/// Valid (unpadded) stride-1 convolution.
#[derive(Debug, Clone, PartialEq)]
pub struct Conv2d {
    pub c_in: usize,
    pub c_out: usize,
    pub kh: usize,
    pub kw: usize,
    /// `[c_out][c_in][kh][kw]`
    pub weight: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Conv2d {
    pub fn new<R: Rng>(c_in: usize, c_out: usize, kh: usize, kw: usize, rng: &mut R) -> Self {
        let fan_in = c_in * kh * kw;
        Self {
            c_in,
            c_out,
            kh,
            kw,
            weight: fan_in_uniform(rng, fan_in, c_out * fan_in),
            bias: fan_in_uniform(rng, fan_in, c_out),
        }
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            weight: vec![0.0; self.weight.len()],
            bias: vec![0.0; self.bias.len()],
            ..*self
        }
    }

    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        let [b, c, h, w] = x.shape;
        if c != self.c_in || h < self.kh || w < self.kw {
            return Err(dim_err(
                format!("B×{}×≥{}×≥{}", self.c_in, self.kh, self.kw),
                format!("{:?}", x.shape),
            ));
        }
        let (oh, ow) = (h - self.kh + 1, w - self.kw + 1);
        let mut y = Tensor::zeros([b, self.c_out, oh, ow]);
        for bi in 0..b {
            for o in 0..self.c_out {
                let ybase = y.offset(bi, o, 0, 0);
                y.data[ybase..ybase + oh * ow].fill(self.bias[o]);
                for ci in 0..c {
                    for ki in 0..self.kh {
                        for kj in 0..self.kw {
                            let wv = self.weight[((o * c + ci) * self.kh + ki) * self.kw + kj];
                            for i in 0..oh {
                                let xs = x.offset(bi, ci, i + ki, kj);
                                let ys = ybase + i * ow;
                                let xrow = &x.data[xs..xs + ow];
                                for (yv, xv) in y.data[ys..ys + ow].iter_mut().zip(xrow) {
                                    *yv += wv * xv;
                                }
                            }
                        }
                    }
                }
            }
        }
        Ok(y)
    }

    pub fn backward(&self, x: &Tensor, dy: &Tensor, grad: &mut Conv2d) -> Tensor {
        let [b, c, _, _] = x.shape;
        let [_, _, oh, ow] = dy.shape;
        let mut dx = Tensor::zeros(x.shape);
        for bi in 0..b {
            for o in 0..self.c_out {
                let ybase = dy.offset(bi, o, 0, 0);
                let dplane = &dy.data[ybase..ybase + oh * ow];
                grad.bias[o] += dplane.iter().sum::<f64>();
                for ci in 0..c {
                    for ki in 0..self.kh {
                        for kj in 0..self.kw {
                            let widx = ((o * c + ci) * self.kh + ki) * self.kw + kj;
                            let wv = self.weight[widx];
                            let mut acc = 0.0;
                            for i in 0..oh {
                                let xs = x.offset(bi, ci, i + ki, kj);
                                let drow = &dplane[i * ow..(i + 1) * ow];
                                let xrow = &x.data[xs..xs + ow];
                                acc += drow.iter().zip(xrow).map(|(d, xv)| d * xv).sum::<f64>();
                                for (dxv, d) in dx.data[xs..xs + ow].iter_mut().zip(drow) {
                                    *dxv += wv * d;
                                }
                            }
                            grad.weight[widx] += acc;
                        }
                    }
                }
            }
        }
        dx
    }
}

/// `(1, k)` transposed convolution with stride `(1, k)`: every input column
/// expands into `k` output columns.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvTranspose {
    pub c_in: usize,
    pub c_out: usize,
    pub k: usize,
    /// `[c_in][c_out][k]`
    pub weight: Vec<f64>,
    pub bias: Vec<f64>,
}

impl ConvTranspose {
    pub fn new<R: Rng>(c_in: usize, c_out: usize, k: usize, rng: &mut R) -> Self {
        let fan_in = c_in * k;
        Self {
            c_in,
            c_out,
            k,
            weight: fan_in_uniform(rng, fan_in, c_in * c_out * k),
            bias: fan_in_uniform(rng, fan_in, c_out),
        }
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            weight: vec![0.0; self.weight.len()],
            bias: vec![0.0; self.bias.len()],
            ..*self
        }
    }

    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        let [b, c, h, w] = x.shape;
        if c != self.c_in {
            return Err(dim_err(format!("B×{}×H×W", self.c_in), format!("{:?}", x.shape)));
        }
        let k = self.k;
        let mut y = Tensor::zeros([b, self.c_out, h, w * k]);
        for bi in 0..b {
            for o in 0..self.c_out {
                let ybase = y.offset(bi, o, 0, 0);
                y.data[ybase..ybase + h * w * k].fill(self.bias[o]);
                for ci in 0..c {
                    let xbase = x.offset(bi, ci, 0, 0);
                    for t in 0..k {
                        let wv = self.weight[(ci * self.c_out + o) * k + t];
                        for p in 0..h * w {
                            y.data[ybase + p * k + t] += wv * x.data[xbase + p];
                        }
                    }
                }
            }
        }
        Ok(y)
    }

    pub fn backward(&self, x: &Tensor, dy: &Tensor, grad: &mut ConvTranspose) -> Tensor {
        let [b, c, h, w] = x.shape;
        let k = self.k;
        let mut dx = Tensor::zeros(x.shape);
        for bi in 0..b {
            for o in 0..self.c_out {
                let ybase = dy.offset(bi, o, 0, 0);
                grad.bias[o] += dy.data[ybase..ybase + h * w * k].iter().sum::<f64>();
                for ci in 0..c {
                    let xbase = x.offset(bi, ci, 0, 0);
                    for t in 0..k {
                        let widx = (ci * self.c_out + o) * k + t;
                        let wv = self.weight[widx];
                        let mut acc = 0.0;
                        for p in 0..h * w {
                            let d = dy.data[ybase + p * k + t];
                            acc += d * x.data[xbase + p];
                            dx.data[xbase + p] += wv * d;
                        }
                        grad.weight[widx] += acc;
                    }
                }
            }
        }
        dx
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BatchNorm {
    pub gamma: Vec<f64>,
    pub beta: Vec<f64>,
    pub running_mean: Vec<f64>,
    pub running_var: Vec<f64>,
    pub momentum: f64,
    pub eps: f64,
}

pub struct BatchNormCache {
    xhat: Tensor,
    inv_std: Vec<f64>,
}

impl BatchNorm {
    pub fn new(channels: usize, momentum: f64, eps: f64) -> Self {
        Self {
            gamma: vec![1.0; channels],
            beta: vec![0.0; channels],
            running_mean: vec![0.0; channels],
            running_var: vec![1.0; channels],
            momentum,
            eps,
        }
    }

    pub fn zeros_like(&self) -> Self {
        let c = self.gamma.len();
        Self {
            gamma: vec![0.0; c],
            beta: vec![0.0; c],
            running_mean: vec![0.0; c],
            running_var: vec![0.0; c],
            ..*self
        }
    }

    fn check(&self, x: &Tensor) -> Result<()> {
        if x.channels() != self.gamma.len() {
            return Err(dim_err(
                format!("{} channels", self.gamma.len()),
                format!("{:?}", x.shape),
            ));
        }
        Ok(())
    }

    /// Batch statistics; updates the running averages.
    pub fn forward_train(&mut self, x: &Tensor) -> Result<(Tensor, BatchNormCache)> {
        self.check(x)?;
        let [b, c, _, _] = x.shape;
        let plane = x.plane();
        let count = (b * plane) as f64;
        if b * plane < 2 {
            return Err(Error::Config("batch norm needs at least two values per channel".into()));
        }
        let mut y = Tensor::zeros(x.shape);
        let mut xhat = Tensor::zeros(x.shape);
        let mut inv_std = vec![0.0; c];
        for ch in 0..c {
            let planes = (0..b).map(|bi| {
                let s = x.offset(bi, ch, 0, 0);
                &x.data[s..s + plane]
            });
            let mean = planes.clone().flatten().sum::<f64>() / count;
            let var = planes.flatten().map(|v| (v - mean).powi(2)).sum::<f64>() / count;
            let is = 1.0 / (var + self.eps).sqrt();
            inv_std[ch] = is;
            for bi in 0..b {
                let s = x.offset(bi, ch, 0, 0);
                for p in s..s + plane {
                    let xh = (x.data[p] - mean) * is;
                    xhat.data[p] = xh;
                    y.data[p] = self.gamma[ch] * xh + self.beta[ch];
                }
            }
            let m = self.momentum;
            self.running_mean[ch] = (1.0 - m) * self.running_mean[ch] + m * mean;
            self.running_var[ch] = (1.0 - m) * self.running_var[ch] + m * var * count / (count - 1.0);
        }
        Ok((y, BatchNormCache { xhat, inv_std }))
    }

    pub fn forward_eval(&self, x: &Tensor) -> Result<Tensor> {
        self.check(x)?;
        let [b, c, _, _] = x.shape;
        let plane = x.plane();
        let mut y = Tensor::zeros(x.shape);
        for ch in 0..c {
            let is = 1.0 / (self.running_var[ch] + self.eps).sqrt();
            let (g, sh, m) = (self.gamma[ch], self.beta[ch], self.running_mean[ch]);
            for bi in 0..b {
                let s = x.offset(bi, ch, 0, 0);
                for p in s..s + plane {
                    y.data[p] = g * (x.data[p] - m) * is + sh;
                }
            }
        }
        Ok(y)
    }

    pub fn backward(&self, cache: &BatchNormCache, dy: &Tensor, grad: &mut BatchNorm) -> Tensor {
        let [b, c, _, _] = dy.shape;
        let plane = dy.plane();
        let count = (b * plane) as f64;
        let mut dx = Tensor::zeros(dy.shape);
        for ch in 0..c {
            let (mut sum_dy, mut sum_dy_xhat) = (0.0, 0.0);
            for bi in 0..b {
                let s = dy.offset(bi, ch, 0, 0);
                for p in s..s + plane {
                    sum_dy += dy.data[p];
                    sum_dy_xhat += dy.data[p] * cache.xhat.data[p];
                }
            }
            grad.gamma[ch] += sum_dy_xhat;
            grad.beta[ch] += sum_dy;
            let scale = self.gamma[ch] * cache.inv_std[ch] / count;
            for bi in 0..b {
                let s = dy.offset(bi, ch, 0, 0);
                for p in s..s + plane {
                    dx.data[p] =
                        scale * (count * dy.data[p] - sum_dy - cache.xhat.data[p] * sum_dy_xhat);
                }
            }
        }
        dx
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Linear {
    pub n_in: usize,
    pub n_out: usize,
    /// `[n_out][n_in]`
    pub weight: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Linear {
    pub fn new<R: Rng>(n_in: usize, n_out: usize, rng: &mut R) -> Self {
        Self {
            n_in,
            n_out,
            weight: fan_in_uniform(rng, n_in, n_in * n_out),
            bias: fan_in_uniform(rng, n_in, n_out),
        }
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            weight: vec![0.0; self.weight.len()],
            bias: vec![0.0; self.bias.len()],
            ..*self
        }
    }

    /// `x` is `B×n_in` row-major; returns `B×n_out`.
    pub fn forward(&self, x: &[f64], batch: usize) -> Result<Vec<f64>> {
        if x.len() != batch * self.n_in {
            return Err(dim_err(batch * self.n_in, x.len()));
        }
        let mut y = vec![0.0; batch * self.n_out];
        for bi in 0..batch {
            let xr = &x[bi * self.n_in..(bi + 1) * self.n_in];
            for o in 0..self.n_out {
                let wr = &self.weight[o * self.n_in..(o + 1) * self.n_in];
                y[bi * self.n_out + o] =
                    self.bias[o] + wr.iter().zip(xr).map(|(a, b)| a * b).sum::<f64>();
            }
        }
        Ok(y)
    }

    pub fn backward(&self, x: &[f64], dy: &[f64], batch: usize, grad: &mut Linear) -> Vec<f64> {
        let mut dx = vec![0.0; x.len()];
        for bi in 0..batch {
            let xr = &x[bi * self.n_in..(bi + 1) * self.n_in];
            let dxr = &mut dx[bi * self.n_in..(bi + 1) * self.n_in];
            for o in 0..self.n_out {
                let d = dy[bi * self.n_out + o];
                grad.bias[o] += d;
                let wr = &self.weight[o * self.n_in..(o + 1) * self.n_in];
                let gr = &mut grad.weight[o * self.n_in..(o + 1) * self.n_in];
                for ((g, dxv), (xv, wv)) in gr.iter_mut().zip(dxr.iter_mut()).zip(xr.iter().zip(wr)) {
                    *g += d * xv;
                    *dxv += d * wv;
                }
            }
        }
        dx
    }
}

/// Zero padding of one row/column on each of the four sides.
pub fn pad1(x: &Tensor) -> Tensor {
    let [b, c, h, w] = x.shape;
    let mut y = Tensor::zeros([b, c, h + 2, w + 2]);
    for bi in 0..b {
        for ci in 0..c {
            for i in 0..h {
                let s = x.offset(bi, ci, i, 0);
                let d = y.offset(bi, ci, i + 1, 1);
                y.data[d..d + w].copy_from_slice(&x.data[s..s + w]);
            }
        }
    }
    y
}

pub fn pad1_backward(dy: &Tensor) -> Tensor {
    let [b, c, hp, wp] = dy.shape;
    let (h, w) = (hp - 2, wp - 2);
    let mut dx = Tensor::zeros([b, c, h, w]);
    for bi in 0..b {
        for ci in 0..c {
            for i in 0..h {
                let s = dy.offset(bi, ci, i + 1, 1);
                let d = dx.offset(bi, ci, i, 0);
                dx.data[d..d + w].copy_from_slice(&dy.data[s..s + w]);
            }
        }
    }
    dx
}

pub fn relu(x: &Tensor) -> Tensor {
    Tensor {
        shape: x.shape,
        data: x.data.iter().map(|v| v.max(0.0)).collect(),
    }
}

/// Gradient through ReLU given its output.
pub fn relu_backward(y: &Tensor, dy: &Tensor) -> Tensor {
    Tensor {
        shape: dy.shape,
        data: y
            .data
            .iter()
            .zip(&dy.data)
            .map(|(y, d)| if *y > 0.0 { *d } else { 0.0 })
            .collect(),
    }
}

/// `(1, 2)` average pooling with stride `(1, 2)`.
pub fn avg_pool(x: &Tensor) -> Result<Tensor> {
    let [b, c, h, w] = x.shape;
    if w % 2 != 0 {
        return Err(Error::Dimension {
            expected: "even width".into(),
            got: w.to_string(),
        });
    }
    let mut y = Tensor::zeros([b, c, h, w / 2]);
    for (out, pair) in y.data.iter_mut().zip(x.data.chunks_exact(2)) {
        *out = 0.5 * (pair[0] + pair[1]);
    }
    Ok(y)
}

pub fn avg_pool_backward(dy: &Tensor) -> Tensor {
    let [b, c, h, w] = dy.shape;
    let mut dx = Tensor::zeros([b, c, h, w * 2]);
    for (pair, d) in dx.data.chunks_exact_mut(2).zip(&dy.data) {
        pair[0] = 0.5 * d;
        pair[1] = 0.5 * d;
    }
    dx
}
