//! Zero-padded, stride-1 convolutions that preserve spatial size.
//!
//! `Conv1dKernel` slides along the last axis only, treating every row of a
//! `(c, n, p)` tensor independently. `Conv2dKernel` slides over both `(n, p)`
//! axes. Both carry a per-output-channel bias.

use rand::Rng;

use super::params::{join_name, Parameters};
use super::tensor::Tensor;
use crate::error::{Error, Result};

fn check_kernel_size(s: usize) -> Result<()> {
    if s == 0 || s % 2 == 0 {
        return Err(Error::arg(format!("kernel size must be odd, got {s}")));
    }
    Ok(())
}

/// Valid output range for a tap at `offset` over a length-`len` axis.
#[inline]
fn tap_range(offset: isize, len: usize) -> (usize, usize) {
    let lo = (-offset).max(0) as usize;
    let hi = (len as isize - offset).clamp(0, len as isize) as usize;
    (lo, hi.max(lo))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Conv1dKernel {
    weight: Tensor,
    bias: Tensor,
}

impl Conv1dKernel {
    pub fn new(weight: Tensor, bias: Tensor) -> Result<Self> {
        let [c_out, _, s] = *weight.shape() else {
            return Err(Error::shape(format!("conv1d weight must be (c_out, c_in, S), got {:?}", weight.shape())));
        };
        check_kernel_size(s)?;
        if bias.shape() != [c_out] {
            return Err(Error::shape(format!("conv1d bias must be ({c_out},), got {:?}", bias.shape())));
        }
        Ok(Self { weight, bias })
    }

    pub fn zeros(c_out: usize, c_in: usize, s: usize) -> Result<Self> {
        check_kernel_size(s)?;
        Ok(Self {
            weight: Tensor::zeros(&[c_out, c_in, s]),
            bias: Tensor::zeros(&[c_out]),
        })
    }

    /// He-uniform weights, `U(-b, b)` with `b = sqrt(6 / (c_in S))`; zero bias.
    pub fn init_uniform<R: Rng>(c_out: usize, c_in: usize, s: usize, rng: &mut R) -> Result<Self> {
        let mut k = Self::zeros(c_out, c_in, s)?;
        let bound = (6.0 / (c_in * s) as f64).sqrt();
        for v in k.weight.data_mut() {
            *v = rng.random_range(-bound..=bound);
        }
        Ok(k)
    }

    pub fn c_out(&self) -> usize {
        self.weight.shape()[0]
    }

    pub fn c_in(&self) -> usize {
        self.weight.shape()[1]
    }

    pub fn size(&self) -> usize {
        self.weight.shape()[2]
    }

    pub fn weight(&self) -> &Tensor {
        &self.weight
    }

    pub fn bias(&self) -> &Tensor {
        &self.bias
    }

    pub fn weight_mut(&mut self) -> &mut Tensor {
        &mut self.weight
    }

    pub fn bias_mut(&mut self) -> &mut Tensor {
        &mut self.bias
    }

    fn check_input(&self, x: &Tensor) -> Result<(usize, usize, usize)> {
        let (c, n, p) = x.dims3()?;
        if c != self.c_in() {
            return Err(Error::shape(format!(
                "conv1d expects {} input channels, got {c}",
                self.c_in()
            )));
        }
        Ok((c, n, p))
    }

    fn out_shape(x: &Tensor, c_out: usize) -> Vec<usize> {
        let mut shape = x.shape().to_vec();
        shape[0] = c_out;
        shape
    }

    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        let (c_in, n, p) = self.check_input(x)?;
        let (c_out, s) = (self.c_out(), self.size());
        let half = (s / 2) as isize;
        let w = self.weight.data();
        let xd = x.data();
        let mut out = Tensor::zeros(&Self::out_shape(x, c_out));
        let od = out.data_mut();
        let plane = n * p;
        for o in 0..c_out {
            let out_o = &mut od[o * plane..(o + 1) * plane];
            out_o.fill(self.bias.data()[o]);
            for i in 0..c_in {
                let x_i = &xd[i * plane..(i + 1) * plane];
                for k in 0..s {
                    let wk = w[(o * c_in + i) * s + k];
                    let off = k as isize - half;
                    let (lo, hi) = tap_range(off, p);
                    for r in 0..n {
                        let row_out = &mut out_o[r * p + lo..r * p + hi];
                        let start = (r * p) as isize + lo as isize + off;
                        let row_x = &x_i[start as usize..start as usize + (hi - lo)];
                        for (y, &xv) in row_out.iter_mut().zip(row_x) {
                            *y += wk * xv;
                        }
                    }
                }
            }
        }
        Ok(out)
    }

    /// Returns the input gradient and the parameter gradient (as a kernel).
    pub fn backward(&self, x: &Tensor, dy: &Tensor) -> Result<(Tensor, Conv1dKernel)> {
        let (c_in, n, p) = self.check_input(x)?;
        let (c_out, s) = (self.c_out(), self.size());
        if dy.shape() != Self::out_shape(x, c_out).as_slice() {
            return Err(Error::shape(format!(
                "conv1d upstream gradient {:?} does not match forward output",
                dy.shape()
            )));
        }
        let half = (s / 2) as isize;
        let w = self.weight.data();
        let (xd, dyd) = (x.data(), dy.data());
        let plane = n * p;
        let mut dx = Tensor::zeros(x.shape());
        let mut grad = Conv1dKernel::zeros(c_out, c_in, s)?;
        {
            let dxd = dx.data_mut();
            for o in 0..c_out {
                let dy_o = &dyd[o * plane..(o + 1) * plane];
                grad.bias.data_mut()[o] = dy_o.iter().sum();
                for i in 0..c_in {
                    let x_i = &xd[i * plane..(i + 1) * plane];
                    for k in 0..s {
                        let idx = (o * c_in + i) * s + k;
                        let wk = w[idx];
                        let off = k as isize - half;
                        let (lo, hi) = tap_range(off, p);
                        let mut acc = 0.0;
                        for r in 0..n {
                            let g = &dy_o[r * p + lo..r * p + hi];
                            let start = ((r * p) as isize + lo as isize + off) as usize;
                            let xs = &x_i[start..start + (hi - lo)];
                            acc += g.iter().zip(xs).map(|(a, b)| a * b).sum::<f64>();
                            let dxs = &mut dxd[i * plane + start..i * plane + start + (hi - lo)];
                            for (d, &gv) in dxs.iter_mut().zip(g) {
                                *d += wk * gv;
                            }
                        }
                        grad.weight.data_mut()[idx] = acc;
                    }
                }
            }
        }
        Ok((dx, grad))
    }
}

impl Parameters for Conv1dKernel {
    fn collect_tensors<'a>(&'a self, prefix: &str, out: &mut Vec<(String, &'a Tensor)>) {
        out.push((join_name(prefix, "weight"), &self.weight));
        out.push((join_name(prefix, "bias"), &self.bias));
    }

    fn collect_tensors_mut<'a>(&'a mut self, out: &mut Vec<&'a mut Tensor>) {
        out.push(&mut self.weight);
        out.push(&mut self.bias);
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Conv2dKernel {
    weight: Tensor,
    bias: Tensor,
}

impl Conv2dKernel {
    pub fn new(weight: Tensor, bias: Tensor) -> Result<Self> {
        let [c_out, _, sh, sw] = *weight.shape() else {
            return Err(Error::shape(format!("conv2d weight must be (c_out, c_in, S, S), got {:?}", weight.shape())));
        };
        check_kernel_size(sh)?;
        if sh != sw {
            return Err(Error::shape(format!("conv2d kernel must be square, got {sh}x{sw}")));
        }
        if bias.shape() != [c_out] {
            return Err(Error::shape(format!("conv2d bias must be ({c_out},), got {:?}", bias.shape())));
        }
        Ok(Self { weight, bias })
    }

    pub fn zeros(c_out: usize, c_in: usize, s: usize) -> Result<Self> {
        check_kernel_size(s)?;
        Ok(Self {
            weight: Tensor::zeros(&[c_out, c_in, s, s]),
            bias: Tensor::zeros(&[c_out]),
        })
    }

    /// He-uniform weights, `U(-b, b)` with `b = sqrt(6 / (c_in S²))`; zero bias.
    pub fn init_uniform<R: Rng>(c_out: usize, c_in: usize, s: usize, rng: &mut R) -> Result<Self> {
        let mut k = Self::zeros(c_out, c_in, s)?;
        let bound = (6.0 / (c_in * s * s) as f64).sqrt();
        for v in k.weight.data_mut() {
            *v = rng.random_range(-bound..=bound);
        }
        Ok(k)
    }

    pub fn c_out(&self) -> usize {
        self.weight.shape()[0]
    }

    pub fn c_in(&self) -> usize {
        self.weight.shape()[1]
    }

    pub fn size(&self) -> usize {
        self.weight.shape()[2]
    }

    pub fn weight(&self) -> &Tensor {
        &self.weight
    }

    pub fn bias(&self) -> &Tensor {
        &self.bias
    }

    pub fn weight_mut(&mut self) -> &mut Tensor {
        &mut self.weight
    }

    pub fn bias_mut(&mut self) -> &mut Tensor {
        &mut self.bias
    }

    fn check_input(&self, x: &Tensor) -> Result<(usize, usize, usize)> {
        let [c, h, w] = *x.shape() else {
            return Err(Error::shape(format!("conv2d expects (c, h, w), got {:?}", x.shape())));
        };
        if c != self.c_in() {
            return Err(Error::shape(format!(
                "conv2d expects {} input channels, got {c}",
                self.c_in()
            )));
        }
        Ok((c, h, w))
    }

    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        let (c_in, h, wd) = self.check_input(x)?;
        let (c_out, s) = (self.c_out(), self.size());
        let half = (s / 2) as isize;
        let wt = self.weight.data();
        let xd = x.data();
        let plane = h * wd;
        let mut out = Tensor::zeros(&[c_out, h, wd]);
        let od = out.data_mut();
        for o in 0..c_out {
            let out_o = &mut od[o * plane..(o + 1) * plane];
            out_o.fill(self.bias.data()[o]);
            for i in 0..c_in {
                let x_i = &xd[i * plane..(i + 1) * plane];
                for ky in 0..s {
                    let dy = ky as isize - half;
                    let (rlo, rhi) = tap_range(dy, h);
                    for kx in 0..s {
                        let wk = wt[((o * c_in + i) * s + ky) * s + kx];
                        let dx = kx as isize - half;
                        let (clo, chi) = tap_range(dx, wd);
                        for r in rlo..rhi {
                            let src_r = (r as isize + dy) as usize;
                            let row_out = &mut out_o[r * wd + clo..r * wd + chi];
                            let start = (src_r * wd) as isize + clo as isize + dx;
                            let row_x = &x_i[start as usize..start as usize + (chi - clo)];
                            for (y, &xv) in row_out.iter_mut().zip(row_x) {
                                *y += wk * xv;
                            }
                        }
                    }
                }
            }
        }
        Ok(out)
    }

    pub fn backward(&self, x: &Tensor, dy_up: &Tensor) -> Result<(Tensor, Conv2dKernel)> {
        let (c_in, h, wd) = self.check_input(x)?;
        let (c_out, s) = (self.c_out(), self.size());
        if dy_up.shape() != [c_out, h, wd] {
            return Err(Error::shape(format!(
                "conv2d upstream gradient {:?} does not match forward output",
                dy_up.shape()
            )));
        }
        let half = (s / 2) as isize;
        let wt = self.weight.data();
        let (xd, gd) = (x.data(), dy_up.data());
        let plane = h * wd;
        let mut dx_t = Tensor::zeros(x.shape());
        let mut grad = Conv2dKernel::zeros(c_out, c_in, s)?;
        {
            let dxd = dx_t.data_mut();
            for o in 0..c_out {
                let g_o = &gd[o * plane..(o + 1) * plane];
                grad.bias.data_mut()[o] = g_o.iter().sum();
                for i in 0..c_in {
                    let x_i = &xd[i * plane..(i + 1) * plane];
                    for ky in 0..s {
                        let dy = ky as isize - half;
                        let (rlo, rhi) = tap_range(dy, h);
                        for kx in 0..s {
                            let idx = ((o * c_in + i) * s + ky) * s + kx;
                            let wk = wt[idx];
                            let dx = kx as isize - half;
                            let (clo, chi) = tap_range(dx, wd);
                            let mut acc = 0.0;
                            for r in rlo..rhi {
                                let src_r = (r as isize + dy) as usize;
                                let g = &g_o[r * wd + clo..r * wd + chi];
                                let start = ((src_r * wd) as isize + clo as isize + dx) as usize;
                                let xs = &x_i[start..start + (chi - clo)];
                                acc += g.iter().zip(xs).map(|(a, b)| a * b).sum::<f64>();
                                let dxs = &mut dxd[i * plane + start..i * plane + start + (chi - clo)];
                                for (d, &gv) in dxs.iter_mut().zip(g) {
                                    *d += wk * gv;
                                }
                            }
                            grad.weight.data_mut()[idx] = acc;
                        }
                    }
                }
            }
        }
        Ok((dx_t, grad))
    }
}

impl Parameters for Conv2dKernel {
    fn collect_tensors<'a>(&'a self, prefix: &str, out: &mut Vec<(String, &'a Tensor)>) {
        out.push((join_name(prefix, "weight"), &self.weight));
        out.push((join_name(prefix, "bias"), &self.bias));
    }

    fn collect_tensors_mut<'a>(&'a mut self, out: &mut Vec<&'a mut Tensor>) {
        out.push(&mut self.weight);
        out.push(&mut self.bias);
    }
}
