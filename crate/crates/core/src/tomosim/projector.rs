//! Ray-driven forward projection with bilinear sampling at a fixed step of
//! half a pixel along every ray.

use super::phantom::Phantom;
use crate::error::{Error, Result};
use crate::geomgraph::{AcquisitionGeometry, BeamKind};
use crate::ndcore::Tensor;

/// Line-integral measurements, one row per source angle.
#[derive(Debug, Clone, PartialEq)]
pub struct Sinogram {
    data: Tensor,
    geometry: AcquisitionGeometry,
}

impl Sinogram {
    pub fn new(data: Tensor, geometry: AcquisitionGeometry) -> Result<Self> {
        let expected = [geometry.n_views(), geometry.detector_pixels()];
        if data.shape() != expected {
            return Err(Error::shape(format!(
                "sinogram data {:?} does not match geometry {expected:?}",
                data.shape()
            )));
        }
        Ok(Self { data, geometry })
    }

    pub fn zeros(geometry: AcquisitionGeometry) -> Self {
        Self {
            data: Tensor::zeros(&[geometry.n_views(), geometry.detector_pixels()]),
            geometry,
        }
    }

    pub fn data(&self) -> &Tensor {
        &self.data
    }

    pub fn into_data(self) -> Tensor {
        self.data
    }

    pub fn geometry(&self) -> &AcquisitionGeometry {
        &self.geometry
    }

    /// Row `view` of the sinogram.
    pub fn view(&self, view: usize) -> &[f64] {
        let p = self.geometry.detector_pixels();
        &self.data.data()[view * p..(view + 1) * p]
    }

    /// Keeps the rows of the views retained by `geometry.subsample(factor)`.
    pub fn subsample(&self, factor: usize) -> Result<Self> {
        let geometry = self.geometry.subsample(factor)?;
        let p = self.geometry.detector_pixels();
        let mut data = Vec::with_capacity(geometry.n_views() * p);
        for i in 0..geometry.n_views() {
            data.extend_from_slice(self.view(i * factor));
        }
        Self::new(Tensor::from_vec(&[geometry.n_views(), p], data)?, geometry)
    }
}

/// Bilinear sample of an `(h, w)` grid at fractional pixel coordinates,
/// zero outside.
#[inline]
pub(crate) fn bilinear(grid: &[f64], h: usize, w: usize, row: f64, col: f64) -> f64 {
    let r0 = row.floor();
    let c0 = col.floor();
    let (fr, fc) = (row - r0, col - c0);
    let (r0, c0) = (r0 as isize, c0 as isize);
    let at = |r: isize, c: isize| {
        if r >= 0 && c >= 0 && (r as usize) < h && (c as usize) < w {
            grid[r as usize * w + c as usize]
        } else {
            0.0
        }
    };
    (1.0 - fr) * ((1.0 - fc) * at(r0, c0) + fc * at(r0, c0 + 1))
        + fr * ((1.0 - fc) * at(r0 + 1, c0) + fc * at(r0 + 1, c0 + 1))
}

struct GridFrame {
    h: usize,
    w: usize,
    pixel: f64,
}

impl GridFrame {
    #[inline]
    fn sample(&self, grid: &[f64], x: f64, y: f64) -> f64 {
        let col = x / self.pixel + 0.5 * (self.w as f64 - 1.0);
        let row = 0.5 * (self.h as f64 - 1.0) - y / self.pixel;
        bilinear(grid, self.h, self.w, row, col)
    }
}

/// Samples per unit length along each ray.
pub const SAMPLES_PER_PIXEL: f64 = 2.0;

/// Line integrals of `phantom` for every (view, detector pixel) of `geometry`.
///
/// Parallel beam: view `θ` integrates along `(cos θ, sin θ)` through the
/// detector point `t (-sin θ, cos θ)`. Fan beam: the source sits at
/// `R (cos β, sin β)` and the flat detector passes through the isocentre,
/// perpendicular to the central ray.
pub fn forward_project(phantom: &Phantom, geometry: &AcquisitionGeometry) -> Result<Sinogram> {
    let frame = GridFrame {
        h: phantom.height(),
        w: phantom.width(),
        pixel: phantom.pixel_size(),
    };
    let reach = phantom.half_diagonal();
    let step = phantom.pixel_size() / SAMPLES_PER_PIXEL;
    let n_steps = (2.0 * reach / step).ceil() as usize;
    // Samples are placed symmetrically about the ray's closest approach to
    // the isocentre.
    let half_steps = 0.5 * n_steps as f64;
    let grid = phantom.grid().data();
    let (n, p) = (geometry.n_views(), geometry.detector_pixels());
    let mut out = vec![0.0; n * p];

    match geometry.beam() {
        BeamKind::Parallel => {
            for (v, &theta) in geometry.angles().iter().enumerate() {
                let (s, c) = theta.sin_cos();
                let (dir, axis) = ((c, s), (-s, c));
                for k in 0..p {
                    let t = geometry.detector_coordinate(k);
                    let mut acc = 0.0;
                    for m in 0..n_steps {
                        let along = (m as f64 + 0.5 - half_steps) * step;
                        acc += frame.sample(grid, t * axis.0 + along * dir.0, t * axis.1 + along * dir.1);
                    }
                    out[v * p + k] = acc * step;
                }
            }
        }
        BeamKind::Fan => {
            let radius = geometry.orbit_radius();
            if radius <= reach {
                return Err(Error::Geometry(format!(
                    "fan-beam source orbit radius {radius} lies inside the object support (half-diagonal {reach})"
                )));
            }
            for (v, &beta) in geometry.angles().iter().enumerate() {
                let (s, c) = beta.sin_cos();
                let source = (radius * c, radius * s);
                let axis = (-s, c);
                for k in 0..p {
                    let u = geometry.detector_coordinate(k);
                    let target = (u * axis.0, u * axis.1);
                    let (dx, dy) = (target.0 - source.0, target.1 - source.1);
                    let len = (dx * dx + dy * dy).sqrt();
                    let dir = (dx / len, dy / len);
                    // Distance along the ray to the point closest to the isocentre.
                    let mid = -(source.0 * dir.0 + source.1 * dir.1);
                    let mut acc = 0.0;
                    for m in 0..n_steps {
                        let along = mid + (m as f64 + 0.5 - half_steps) * step;
                        acc += frame.sample(grid, source.0 + along * dir.0, source.1 + along * dir.1);
                    }
                    out[v * p + k] = acc * step;
                }
            }
        }
    }
    Sinogram::new(Tensor::from_vec(&[n, p], out)?, geometry.clone())
}
