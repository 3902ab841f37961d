//! Dense tensors, size-preserving convolutions with hand-written gradients,
//! activation and loss primitives, Adam, and finite-difference checking.

mod adam;
mod checkpoint;
mod conv;
mod gradcheck;
mod ops;
mod params;
mod tensor;

pub use adam::{adam_step, AdamConfig, AdamState};
pub use checkpoint::{decode_checkpoint, encode_checkpoint, read_checkpoint};
pub use conv::{Conv1dKernel, Conv2dKernel};
pub use gradcheck::{grad_check, GradCheckOptions, GradCheckReport, Probe};
pub use ops::{activation_signature, kink_margin, mse_grad, mse_loss, relu, relu_backward};
pub use params::Parameters;
pub use tensor::Tensor;

pub(crate) use params::join_name;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Seeded generator used for every random draw in the crate.
pub fn seeded_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
