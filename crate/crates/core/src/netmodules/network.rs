use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::message::MessagePassing;
use super::module::{ModuleCache, SinoModule};
use crate::error::{Error, Result};
use crate::geomgraph::GeometryGraph;
use crate::ndcore::{join_name, seeded_rng, Parameters, Tensor};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NetworkKind {
    Glm,
    Cnn,
}

impl NetworkKind {
    pub fn as_str(self) -> &'static str {
        match self {
            NetworkKind::Glm => "glm",
            NetworkKind::Cnn => "cnn",
        }
    }
}

impl fmt::Display for NetworkKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            NetworkKind::Glm => "GLM",
            NetworkKind::Cnn => "CNN",
        })
    }
}

impl FromStr for NetworkKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "glm" => Ok(NetworkKind::Glm),
            "cnn" => Ok(NetworkKind::Cnn),
            other => Err(Error::arg(format!("unknown network kind `{other}`"))),
        }
    }
}

fn default_kernel_size() -> usize {
    7
}

fn default_modules() -> usize {
    3
}

/// Architecture of a sinogram network: `modules` stacked blocks with channel
/// map `1 -> c -> ... -> c -> 1` and kernel size `S`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkSpec {
    pub kind: NetworkKind,
    pub channels: usize,
    #[serde(default = "default_kernel_size")]
    pub kernel_size: usize,
    #[serde(default = "default_modules")]
    pub modules: usize,
}

impl NetworkSpec {
    /// Three modules with kernel size 7.
    pub fn standard(kind: NetworkKind, channels: usize) -> Self {
        Self {
            kind,
            channels,
            kernel_size: 7,
            modules: 3,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.channels == 0 {
            return Err(Error::Config("network.channels must be >= 1".into()));
        }
        if self.kernel_size % 2 == 0 {
            return Err(Error::Config(format!(
                "network.kernel_size must be odd, got {}",
                self.kernel_size
            )));
        }
        if self.modules < 2 {
            return Err(Error::Config(format!(
                "network.modules must be >= 2, got {}",
                self.modules
            )));
        }
        Ok(())
    }

    /// `(c_in, c_out)` of each module.
    pub fn channel_map(&self) -> Vec<(usize, usize)> {
        (0..self.modules)
            .map(|m| {
                let c_in = if m == 0 { 1 } else { self.channels };
                let c_out = if m + 1 == self.modules { 1 } else { self.channels };
                (c_in, c_out)
            })
            .collect()
    }

    pub fn name(&self) -> String {
        format!("{}-{}", self.kind, self.channels)
    }

    /// Half-width of the receptive field along the angle axis after the whole
    /// stack: graph hops for GLM, rows for CNN (two `S x S` convolutions per
    /// module, each reaching `(S - 1) / 2` rows).
    pub fn angular_reach(&self) -> usize {
        match self.kind {
            NetworkKind::Glm => self.modules,
            NetworkKind::Cnn => self.modules * (self.kernel_size - 1),
        }
    }
}

/// Trainable sinogram-to-sinogram network.
#[derive(Debug, Clone, PartialEq)]
pub struct SinogramNet {
    spec: NetworkSpec,
    modules: Vec<SinoModule>,
}

/// Forward activations of every module.
#[derive(Debug, Clone)]
pub struct NetworkCache {
    modules: Vec<ModuleCache>,
}

impl NetworkCache {
    /// All ReLU pre-activations, in forward order.
    pub fn pre_activations(&self) -> impl Iterator<Item = &Tensor> {
        self.modules.iter().flat_map(|c| [&c.z0, &c.z1])
    }
}

impl SinogramNet {
    pub fn init(spec: NetworkSpec, seed: u64) -> Result<Self> {
        spec.validate()?;
        let mut rng = seeded_rng(seed);
        let s = spec.kernel_size;
        let modules = spec
            .channel_map()
            .into_iter()
            .map(|(ci, co)| match spec.kind {
                NetworkKind::Glm => SinoModule::init_line(ci, co, s, &mut rng),
                NetworkKind::Cnn => SinoModule::init_grid(ci, co, s, &mut rng),
            })
            .collect::<Result<_>>()?;
        Ok(Self { spec, modules })
    }

    pub fn spec(&self) -> &NetworkSpec {
        &self.spec
    }

    pub fn modules(&self) -> &[SinoModule] {
        &self.modules
    }

    pub fn modules_mut(&mut self) -> &mut [SinoModule] {
        &mut self.modules
    }

    /// Same architecture with all parameters zero; used as a gradient buffer.
    pub fn zeroed(&self) -> Self {
        Self {
            spec: self.spec,
            modules: self.modules.iter().map(SinoModule::zeroed).collect(),
        }
    }

    /// Message-passing operator for `graph`, or `None` for the CNN.
    pub fn aggregator(&self, graph: Option<&GeometryGraph>) -> Result<Option<MessagePassing>> {
        match (self.spec.kind, graph) {
            (NetworkKind::Cnn, _) => Ok(None),
            (NetworkKind::Glm, Some(g)) => MessagePassing::new(g).map(Some),
            (NetworkKind::Glm, None) => Err(Error::arg("GLM network requires a geometry graph")),
        }
    }

    fn check_input(&self, mp: Option<&MessagePassing>, y: &Tensor) -> Result<()> {
        let [1, n, _] = *y.shape() else {
            return Err(Error::shape(format!("network input must be (1, n, p), got {:?}", y.shape())));
        };
        match (self.spec.kind, mp) {
            (NetworkKind::Glm, None) => Err(Error::arg("GLM network requires a geometry graph")),
            (NetworkKind::Glm, Some(mp)) if mp.node_count() != n => Err(Error::shape(format!(
                "sinogram has {n} views, graph has {} nodes",
                mp.node_count()
            ))),
            _ => Ok(()),
        }
    }

    pub fn forward_cached(&self, mp: Option<&MessagePassing>, y: &Tensor) -> Result<(Tensor, NetworkCache)> {
        self.check_input(mp, y)?;
        let mp = if self.spec.kind == NetworkKind::Glm { mp } else { None };
        let mut caches = Vec::with_capacity(self.modules.len());
        let mut x = y.clone();
        for m in &self.modules {
            let (out, cache) = m.forward(mp, &x)?;
            caches.push(cache);
            x = out;
        }
        Ok((x, NetworkCache { modules: caches }))
    }

    pub fn forward(&self, mp: Option<&MessagePassing>, y: &Tensor) -> Result<Tensor> {
        self.forward_cached(mp, y).map(|(out, _)| out)
    }

    /// Returns the input gradient and the parameter gradient.
    pub fn backward(
        &self,
        mp: Option<&MessagePassing>,
        cache: &NetworkCache,
        d_out: &Tensor,
    ) -> Result<(Tensor, SinogramNet)> {
        let mp = if self.spec.kind == NetworkKind::Glm { mp } else { None };
        let mut grads = Vec::with_capacity(self.modules.len());
        let mut d = d_out.clone();
        for (m, c) in self.modules.iter().zip(&cache.modules).rev() {
            let (dx, g) = m.backward(mp, c, &d)?;
            grads.push(g);
            d = dx;
        }
        grads.reverse();
        Ok((
            d,
            SinogramNet {
                spec: self.spec,
                modules: grads,
            },
        ))
    }
}

impl Parameters for SinogramNet {
    fn collect_tensors<'a>(&'a self, prefix: &str, out: &mut Vec<(String, &'a Tensor)>) {
        for (i, m) in self.modules.iter().enumerate() {
            m.collect_tensors(&join_name(prefix, &format!("m{i}")), out);
        }
    }

    fn collect_tensors_mut<'a>(&'a mut self, out: &mut Vec<&'a mut Tensor>) {
        for m in &mut self.modules {
            m.collect_tensors_mut(out);
        }
    }
}

/// Stacked forward pass of `net` on a `(1, n, p)` sinogram. The graph is
/// required for GLM networks and ignored for CNNs.
pub fn network_forward(net: &SinogramNet, graph: Option<&GeometryGraph>, y: &Tensor) -> Result<Tensor> {
    let mp = net.aggregator(graph)?;
    net.forward(mp.as_ref(), y)
}

/// Single GLM block on a `(c_in, n, p)` input.
pub fn glm_module_forward(module: &SinoModule, graph: &GeometryGraph, y: &Tensor) -> Result<Tensor> {
    let mp = MessagePassing::new(graph)?;
    module.forward(Some(&mp), y).map(|(out, _)| out)
}

/// Single CNN block on a `(c_in, n, p)` input.
pub fn cnn_module_forward(module: &SinoModule, y: &Tensor) -> Result<Tensor> {
    module.forward(None, y).map(|(out, _)| out)
}
