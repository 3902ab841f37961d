//! Image-domain post-processing network shared by both pipelines: three
//! 3x3 convolutions `1 -> c -> c -> 1` with ReLU between layers.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ndcore::{join_name, relu, relu_backward, seeded_rng, Conv2dKernel, Parameters, Tensor};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GammaSpec {
    pub channels: usize,
}

impl Default for GammaSpec {
    fn default() -> Self {
        Self { channels: 16 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GammaNet {
    layers: [Conv2dKernel; 3],
}

#[derive(Debug, Clone)]
pub struct GammaCache {
    input: Tensor,
    z: [Tensor; 2],
}

impl GammaCache {
    pub fn pre_activations(&self) -> impl Iterator<Item = &Tensor> {
        self.z.iter()
    }
}

impl GammaNet {
    pub fn init(spec: GammaSpec, seed: u64) -> Result<Self> {
        if spec.channels == 0 {
            return Err(Error::Config("gamma channels must be >= 1".into()));
        }
        let c = spec.channels;
        let mut rng = seeded_rng(seed);
        Ok(Self {
            layers: [
                Conv2dKernel::init_uniform(c, 1, 3, &mut rng)?,
                Conv2dKernel::init_uniform(c, c, 3, &mut rng)?,
                Conv2dKernel::init_uniform(1, c, 3, &mut rng)?,
            ],
        })
    }

    pub fn from_layers(layers: [Conv2dKernel; 3]) -> Result<Self> {
        let c = layers[0].c_out();
        let ok = layers[0].c_in() == 1
            && layers[1].c_in() == c
            && layers[2].c_in() == layers[1].c_out()
            && layers[2].c_out() == 1;
        if !ok {
            return Err(Error::shape("gamma layers must map 1 -> c -> c -> 1"));
        }
        Ok(Self { layers })
    }

    pub fn layers(&self) -> &[Conv2dKernel; 3] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Conv2dKernel; 3] {
        &mut self.layers
    }

    pub fn zeroed(&self) -> Self {
        Self {
            layers: self.layers.clone().map(|k| Conv2dKernel::zeros(k.c_out(), k.c_in(), k.size()).expect("valid size")),
        }
    }

    pub fn forward_cached(&self, image: &Tensor) -> Result<(Tensor, GammaCache)> {
        if !matches!(image.shape(), [1, _, _]) {
            return Err(Error::shape(format!("gamma input must be (1, h, w), got {:?}", image.shape())));
        }
        let z0 = self.layers[0].forward(image)?;
        let z1 = self.layers[1].forward(&relu(&z0))?;
        let out = self.layers[2].forward(&relu(&z1))?;
        Ok((
            out,
            GammaCache {
                input: image.clone(),
                z: [z0, z1],
            },
        ))
    }

    pub fn forward(&self, image: &Tensor) -> Result<Tensor> {
        self.forward_cached(image).map(|(o, _)| o)
    }

    pub fn backward(&self, cache: &GammaCache, d_out: &Tensor) -> Result<(Tensor, GammaNet)> {
        let a1 = relu(&cache.z[1]);
        let (da1, g2) = self.layers[2].backward(&a1, d_out)?;
        let dz1 = relu_backward(&cache.z[1], &da1)?;
        let a0 = relu(&cache.z[0]);
        let (da0, g1) = self.layers[1].backward(&a0, &dz1)?;
        let dz0 = relu_backward(&cache.z[0], &da0)?;
        let (dx, g0) = self.layers[0].backward(&cache.input, &dz0)?;
        Ok((dx, GammaNet { layers: [g0, g1, g2] }))
    }
}

impl Parameters for GammaNet {
    fn collect_tensors<'a>(&'a self, prefix: &str, out: &mut Vec<(String, &'a Tensor)>) {
        for (i, l) in self.layers.iter().enumerate() {
            l.collect_tensors(&join_name(prefix, &format!("l{i}")), out);
        }
    }

    fn collect_tensors_mut<'a>(&'a mut self, out: &mut Vec<&'a mut Tensor>) {
        for l in &mut self.layers {
            l.collect_tensors_mut(out);
        }
    }
}

pub fn gamma_forward(net: &GammaNet, image: &Tensor) -> Result<Tensor> {
    net.forward(image)
}
