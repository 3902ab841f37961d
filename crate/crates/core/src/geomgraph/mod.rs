//! Acquisition geometries and their graph representations.

mod geometry;
mod graph;
mod sparse;
mod spectral;

pub use geometry::{AcquisitionGeometry, BeamKind, UNIFORM_TOL};
pub use graph::{Edge, GeometryGraph, MIN_EDGE_WEIGHT};
pub use sparse::CsrMatrix;
pub use spectral::{
    laplacian_eigen, spectral_convolve, CirculantSpectrum, SpectralFilter, MAX_DENSE_EIGEN_NODES,
};

