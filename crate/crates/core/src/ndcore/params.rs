use super::tensor::Tensor;
use crate::error::{Error, Result};

/// A collection of trainable tensors with a fixed traversal order.
///
/// Gradient containers reuse the parameter type, so a model and its gradient
/// flatten to vectors with matching layouts.
pub trait Parameters {
    /// Pushes `(name, tensor)` pairs in traversal order.
    fn collect_tensors<'a>(&'a self, prefix: &str, out: &mut Vec<(String, &'a Tensor)>);

    fn collect_tensors_mut<'a>(&'a mut self, out: &mut Vec<&'a mut Tensor>);

    fn named_tensors(&self) -> Vec<(String, &Tensor)> {
        let mut out = Vec::new();
        self.collect_tensors("", &mut out);
        out
    }

    fn param_count(&self) -> usize {
        self.named_tensors().iter().map(|(_, t)| t.len()).sum()
    }

    fn flat(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.param_count());
        for (_, t) in self.named_tensors() {
            v.extend_from_slice(t.data());
        }
        v
    }

    fn set_flat(&mut self, values: &[f64]) -> Result<()> {
        let mut tensors = Vec::new();
        self.collect_tensors_mut(&mut tensors);
        let total: usize = tensors.iter().map(|t| t.len()).sum();
        if total != values.len() {
            return Err(Error::shape(format!(
                "expected {total} parameter values, got {}",
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("parameter update".into()));
        }
        let mut offset = 0;
        for t in tensors {
            let n = t.len();
            t.data_mut().copy_from_slice(&values[offset..offset + n]);
            offset += n;
        }
        Ok(())
    }

    /// Replaces every tensor with one from `named`, matching by name and shape.
    fn load_named(&mut self, named: &[(String, Tensor)]) -> Result<()> {
        let names: Vec<(String, Vec<usize>)> = self
            .named_tensors()
            .into_iter()
            .map(|(n, t)| (n, t.shape().to_vec()))
            .collect();
        if names.len() != named.len() {
            return Err(Error::shape(format!(
                "expected {} tensors, got {}",
                names.len(),
                named.len()
            )));
        }
        for ((want_name, want_shape), (name, t)) in names.iter().zip(named) {
            if want_name != name || want_shape.as_slice() != t.shape() {
                return Err(Error::shape(format!(
                    "tensor `{name}` {:?} does not match expected `{want_name}` {want_shape:?}",
                    t.shape()
                )));
            }
        }
        let mut tensors = Vec::new();
        self.collect_tensors_mut(&mut tensors);
        for (dst, (_, src)) in tensors.into_iter().zip(named) {
            dst.data_mut().copy_from_slice(src.data());
        }
        Ok(())
    }
}

pub(crate) fn join_name(prefix: &str, name: &str) -> String {
    if prefix.is_empty() {
        name.to_string()
    } else {
        format!("{prefix}.{name}")
    }
}
