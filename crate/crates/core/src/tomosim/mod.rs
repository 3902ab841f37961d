//! Synthetic phantoms, the parallel/fan ray transform, Poisson noise and
//! filtered backprojection.

mod fbp;
pub mod io;
mod noise;
mod phantom;
mod projector;

pub use fbp::{fbp_reconstruct, Fbp, RampFilter, ReconGrid};
pub use noise::apply_noise;
pub use phantom::{
    make_phantom, random_ellipses, shepp_logan_ellipses, Ellipse, Phantom, PhantomKind, MIN_PHANTOM_SIZE,
};
pub use projector::{forward_project, Sinogram, SAMPLES_PER_PIXEL};
