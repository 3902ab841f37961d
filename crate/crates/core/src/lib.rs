//! Graph-line modules (GLM) for sinogram-domain processing in learned CT
//! reconstruction, together with the CNN baseline, a 2D tomography
//! simulator with filtered backprojection, and the training and
//! evaluation harness used to compare them.

pub mod cli;
pub mod error;
pub mod geomgraph;
pub mod ndcore;
pub mod netmodules;
pub mod tomosim;
pub mod traineval;

pub use error::{Error, Result};
