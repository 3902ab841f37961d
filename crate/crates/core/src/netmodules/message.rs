use crate::error::{Error, Result};
use crate::geomgraph::{CsrMatrix, GeometryGraph};
use crate::ndcore::Tensor;

/// Graph aggregation along the node (angle) axis of `(c, n, p)` features
/// using `D̃^{-1/2} (W + I) D̃^{-1/2}`. Has no trainable parameters.
#[derive(Debug, Clone)]
pub struct MessagePassing {
    propagation: CsrMatrix,
}

impl MessagePassing {
    pub fn new(graph: &GeometryGraph) -> Result<Self> {
        Ok(Self {
            propagation: graph.normalized_propagation()?,
        })
    }

    pub fn node_count(&self) -> usize {
        self.propagation.n()
    }

    pub fn propagation(&self) -> &CsrMatrix {
        &self.propagation
    }

    fn check(&self, x: &Tensor) -> Result<(usize, usize, usize)> {
        let [c, n, p] = *x.shape() else {
            return Err(Error::shape(format!("message passing expects (c, n, p), got {:?}", x.shape())));
        };
        if n != self.node_count() {
            return Err(Error::shape(format!(
                "features have {n} nodes, graph has {}",
                self.node_count()
            )));
        }
        Ok((c, n, p))
    }

    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        let (c, n, p) = self.check(x)?;
        let mut out = Tensor::zeros(x.shape());
        let (xd, od) = (x.data(), out.data_mut());
        for ch in 0..c {
            let base = ch * n * p;
            for i in 0..n {
                let dst = base + i * p;
                for (j, w) in self.propagation.row(i) {
                    let src = base + j * p;
                    for q in 0..p {
                        od[dst + q] += w * xd[src + q];
                    }
                }
            }
        }
        Ok(out)
    }

    /// Vector-Jacobian product: applies the transpose of the propagation.
    pub fn backward(&self, dy: &Tensor) -> Result<Tensor> {
        let (c, n, p) = self.check(dy)?;
        let mut dx = Tensor::zeros(dy.shape());
        let (gd, dd) = (dy.data(), dx.data_mut());
        for ch in 0..c {
            let base = ch * n * p;
            for i in 0..n {
                let src = base + i * p;
                for (j, w) in self.propagation.row(i) {
                    let dst = base + j * p;
                    for q in 0..p {
                        dd[dst + q] += w * gd[src + q];
                    }
                }
            }
        }
        Ok(dx)
    }
}

/// Applies one round of message passing over `graph` to `(c, n, p)` features.
pub fn message_pass(graph: &GeometryGraph, features: &Tensor) -> Result<Tensor> {
    MessagePassing::new(graph)?.forward(features)
}
