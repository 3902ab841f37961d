use std::hash::{DefaultHasher, Hasher};

use super::tensor::Tensor;
use crate::error::Result;

pub fn relu(x: &Tensor) -> Tensor {
    x.map(|v| v.max(0.0))
}

/// Gradient of ReLU given the pre-activation `z`. The derivative at exactly 0
/// is taken as 0.
pub fn relu_backward(z: &Tensor, dy: &Tensor) -> Result<Tensor> {
    z.check_same_shape(dy, "relu_backward")?;
    let data = z
        .data()
        .iter()
        .zip(dy.data())
        .map(|(&zv, &g)| if zv > 0.0 { g } else { 0.0 })
        .collect();
    Tensor::from_vec(z.shape(), data)
}

/// Mean of squared differences.
pub fn mse_loss(a: &Tensor, b: &Tensor) -> Result<f64> {
    a.check_same_shape(b, "mse_loss")?;
    let n = a.len() as f64;
    Ok(a.data().iter().zip(b.data()).map(|(x, y)| (x - y) * (x - y)).sum::<f64>() / n)
}

/// Gradient of [`mse_loss`] with respect to `a`.
pub fn mse_grad(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    a.check_same_shape(b, "mse_grad")?;
    let scale = 2.0 / a.len() as f64;
    let data = a.data().iter().zip(b.data()).map(|(x, y)| scale * (x - y)).collect();
    Tensor::from_vec(a.shape(), data)
}

/// Hash of the active set `{z > 0}` over a sequence of pre-activations.
/// Two evaluations on the same side of every ReLU kink share a signature.
pub fn activation_signature<'a>(pre_activations: impl IntoIterator<Item = &'a Tensor>) -> u64 {
    let mut h = DefaultHasher::new();
    for t in pre_activations {
        h.write_usize(t.len());
        for chunk in t.data().chunks(64) {
            let bits = chunk
                .iter()
                .enumerate()
                .fold(0u64, |acc, (i, &v)| acc | (((v > 0.0) as u64) << i));
            h.write_u64(bits);
        }
    }
    h.finish()
}

/// Smallest `|z|` over the given pre-activations.
pub fn kink_margin<'a>(pre_activations: impl IntoIterator<Item = &'a Tensor>) -> f64 {
    pre_activations
        .into_iter()
        .flat_map(|t| t.data().iter())
        .fold(f64::INFINITY, |m, v| m.min(v.abs()))
}
