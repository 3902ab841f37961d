//! One sinogram-to-sinogram block: a plain convolution `f0`, optional graph
//! aggregation, then a residual convolution `f1`, each followed by ReLU.
//!
//! ```text
//! Z0 = f0(Y)            A0 = relu(Z0)
//! M  = aggregate(A0)    (identity for the CNN block)
//! Z1 = M + f1(M)        out = relu(Z1)
//! ```

use rand::Rng;

use super::message::MessagePassing;
use crate::error::Result;
use crate::ndcore::{join_name, relu, relu_backward, Conv1dKernel, Conv2dKernel, Parameters, Tensor};

/// Convolution over the detector axis only (GLM) or over both axes (CNN).
#[derive(Debug, Clone, PartialEq)]
pub enum SinoConv {
    Line(Conv1dKernel),
    Grid(Conv2dKernel),
}

impl SinoConv {
    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        match self {
            SinoConv::Line(k) => k.forward(x),
            SinoConv::Grid(k) => k.forward(x),
        }
    }

    pub fn backward(&self, x: &Tensor, dy: &Tensor) -> Result<(Tensor, SinoConv)> {
        match self {
            SinoConv::Line(k) => k.backward(x, dy).map(|(dx, g)| (dx, SinoConv::Line(g))),
            SinoConv::Grid(k) => k.backward(x, dy).map(|(dx, g)| (dx, SinoConv::Grid(g))),
        }
    }

    pub fn c_in(&self) -> usize {
        match self {
            SinoConv::Line(k) => k.c_in(),
            SinoConv::Grid(k) => k.c_in(),
        }
    }

    pub fn c_out(&self) -> usize {
        match self {
            SinoConv::Line(k) => k.c_out(),
            SinoConv::Grid(k) => k.c_out(),
        }
    }

    pub fn zeroed(&self) -> Self {
        match self {
            SinoConv::Line(k) => SinoConv::Line(Conv1dKernel::zeros(k.c_out(), k.c_in(), k.size()).expect("valid kernel size")),
            SinoConv::Grid(k) => SinoConv::Grid(Conv2dKernel::zeros(k.c_out(), k.c_in(), k.size()).expect("valid kernel size")),
        }
    }

    pub fn weight_mut(&mut self) -> &mut Tensor {
        match self {
            SinoConv::Line(k) => k.weight_mut(),
            SinoConv::Grid(k) => k.weight_mut(),
        }
    }

    pub fn bias_mut(&mut self) -> &mut Tensor {
        match self {
            SinoConv::Line(k) => k.bias_mut(),
            SinoConv::Grid(k) => k.bias_mut(),
        }
    }
}

impl Parameters for SinoConv {
    fn collect_tensors<'a>(&'a self, prefix: &str, out: &mut Vec<(String, &'a Tensor)>) {
        match self {
            SinoConv::Line(k) => k.collect_tensors(prefix, out),
            SinoConv::Grid(k) => k.collect_tensors(prefix, out),
        }
    }

    fn collect_tensors_mut<'a>(&'a mut self, out: &mut Vec<&'a mut Tensor>) {
        match self {
            SinoConv::Line(k) => k.collect_tensors_mut(out),
            SinoConv::Grid(k) => k.collect_tensors_mut(out),
        }
    }
}

/// Weights of one block with channel mapping `c_in -> c_out -> c_out`.
#[derive(Debug, Clone, PartialEq)]
pub struct SinoModule {
    pub f0: SinoConv,
    pub f1: SinoConv,
}

/// Intermediate values kept for the backward pass.
#[derive(Debug, Clone)]
pub struct ModuleCache {
    pub input: Tensor,
    pub z0: Tensor,
    pub aggregated: Tensor,
    pub z1: Tensor,
}

impl SinoModule {
    pub fn init_line<R: Rng>(c_in: usize, c_out: usize, s: usize, rng: &mut R) -> Result<Self> {
        Ok(Self {
            f0: SinoConv::Line(Conv1dKernel::init_uniform(c_out, c_in, s, rng)?),
            f1: SinoConv::Line(Conv1dKernel::init_uniform(c_out, c_out, s, rng)?),
        })
    }

    pub fn init_grid<R: Rng>(c_in: usize, c_out: usize, s: usize, rng: &mut R) -> Result<Self> {
        Ok(Self {
            f0: SinoConv::Grid(Conv2dKernel::init_uniform(c_out, c_in, s, rng)?),
            f1: SinoConv::Grid(Conv2dKernel::init_uniform(c_out, c_out, s, rng)?),
        })
    }

    pub fn zeroed(&self) -> Self {
        Self {
            f0: self.f0.zeroed(),
            f1: self.f1.zeroed(),
        }
    }

    pub fn forward(&self, mp: Option<&MessagePassing>, y: &Tensor) -> Result<(Tensor, ModuleCache)> {
        let z0 = self.f0.forward(y)?;
        let a0 = relu(&z0);
        let aggregated = match mp {
            Some(mp) => mp.forward(&a0)?,
            None => a0,
        };
        let z1 = aggregated.add(&self.f1.forward(&aggregated)?)?;
        let out = relu(&z1);
        Ok((
            out,
            ModuleCache {
                input: y.clone(),
                z0,
                aggregated,
                z1,
            },
        ))
    }

    /// Returns the input gradient and parameter gradients.
    pub fn backward(
        &self,
        mp: Option<&MessagePassing>,
        cache: &ModuleCache,
        d_out: &Tensor,
    ) -> Result<(Tensor, SinoModule)> {
        let dz1 = relu_backward(&cache.z1, d_out)?;
        let (dm_conv, g1) = self.f1.backward(&cache.aggregated, &dz1)?;
        let dm = dz1.add(&dm_conv)?;
        let da0 = match mp {
            Some(mp) => mp.backward(&dm)?,
            None => dm,
        };
        let dz0 = relu_backward(&cache.z0, &da0)?;
        let (dy, g0) = self.f0.backward(&cache.input, &dz0)?;
        Ok((dy, SinoModule { f0: g0, f1: g1 }))
    }
}

impl Parameters for SinoModule {
    fn collect_tensors<'a>(&'a self, prefix: &str, out: &mut Vec<(String, &'a Tensor)>) {
        self.f0.collect_tensors(&join_name(prefix, "f0"), out);
        self.f1.collect_tensors(&join_name(prefix, "f1"), out);
    }

    fn collect_tensors_mut<'a>(&'a mut self, out: &mut Vec<&'a mut Tensor>) {
        self.f0.collect_tensors_mut(out);
        self.f1.collect_tensors_mut(out);
    }
}
