//! Filtered backprojection with a Ram-Lak filter, together with its exact
//! transpose so that gradients can flow through a fixed reconstruction.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use super::projector::Sinogram;
use crate::error::{Error, Result};
use crate::geomgraph::{AcquisitionGeometry, BeamKind};
use crate::ndcore::Tensor;

/// Output pixel grid of a reconstruction, centred on the rotation axis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReconGrid {
    pub height: usize,
    pub width: usize,
    pub pixel_size: f64,
}

impl ReconGrid {
    /// Grid spanning `[-1, 1]` horizontally, matching the phantom convention.
    pub fn unit(height: usize, width: usize) -> Self {
        Self {
            height,
            width,
            pixel_size: 2.0 / width as f64,
        }
    }

    fn centre(&self, r: usize, c: usize) -> (f64, f64) {
        (
            (c as f64 - 0.5 * (self.width as f64 - 1.0)) * self.pixel_size,
            (0.5 * (self.height as f64 - 1.0) - r as f64) * self.pixel_size,
        )
    }
}

/// Ram-Lak row filter, applied as a zero-padded circular convolution.
#[derive(Clone)]
pub struct RampFilter {
    len: usize,
    padded: usize,
    response: Vec<f64>,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl fmt::Debug for RampFilter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("RampFilter")
            .field("len", &self.len)
            .field("padded", &self.padded)
            .finish()
    }
}

impl RampFilter {
    /// Filter for rows of `len` samples at spacing `tau`.
    pub fn new(len: usize, tau: f64) -> Result<Self> {
        if len == 0 || !(tau.is_finite() && tau > 0.0) {
            return Err(Error::arg(format!("ramp filter needs len >= 1 and tau > 0, got {len}, {tau}")));
        }
        let padded = (2 * len).next_power_of_two();
        let mut kernel = vec![Complex64::new(0.0, 0.0); padded];
        kernel[0].re = 1.0 / (4.0 * tau * tau);
        for k in (1..len).step_by(2) {
            let v = -1.0 / (PI * PI * (k * k) as f64 * tau * tau);
            kernel[k].re = v;
            kernel[padded - k].re = v;
        }
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(padded);
        let inverse = planner.plan_fft_inverse(padded);
        forward.process(&mut kernel);
        // Real and even kernel: the spectrum is real. Fold in the sample
        // spacing and the inverse-FFT normalisation.
        let scale = tau / padded as f64;
        let response = kernel.iter().map(|z| z.re * scale).collect();
        Ok(Self {
            len,
            padded,
            response,
            forward,
            inverse,
        })
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Frequency response on the padded grid (including the `tau / N` scale).
    pub fn response(&self) -> &[f64] {
        &self.response
    }

    /// Filters `row` in place. The filter matrix is symmetric, so this is
    /// also its transpose.
    pub fn apply(&self, row: &mut [f64]) {
        debug_assert_eq!(row.len(), self.len);
        let mut buf: Vec<Complex64> = row
            .iter()
            .map(|&v| Complex64::new(v, 0.0))
            .chain(std::iter::repeat(Complex64::new(0.0, 0.0)))
            .take(self.padded)
            .collect();
        self.forward.process(&mut buf);
        for (z, &h) in buf.iter_mut().zip(&self.response) {
            *z *= h;
        }
        self.inverse.process(&mut buf);
        for (dst, z) in row.iter_mut().zip(&buf) {
            *dst = z.re;
        }
    }
}

/// Per-view backprojection weight for a parallel geometry: the angular step,
/// halved where the opposite view direction is also covered.
fn parallel_weights(g: &AcquisitionGeometry, step: f64) -> Vec<f64> {
    let start = g.angles()[0];
    let span = step * g.n_views() as f64;
    g.angles()
        .iter()
        .map(|&theta| {
            let opposite = (theta + PI - start).rem_euclid(2.0 * PI);
            if opposite < span - 1e-9 * step {
                0.5 * step
            } else {
                step
            }
        })
        .collect()
}

/// Linear reconstruction operator `image = FBP(sinogram)` for one geometry
/// and output grid.
#[derive(Debug, Clone)]
pub struct Fbp {
    geometry: AcquisitionGeometry,
    grid: ReconGrid,
    filter: RampFilter,
    view_weights: Vec<f64>,
    /// Fan-beam cosine pre-weights per detector pixel.
    pre_weights: Option<Vec<f64>>,
}

impl Fbp {
    pub fn new(geometry: &AcquisitionGeometry, grid: ReconGrid) -> Result<Self> {
        if grid.height == 0 || grid.width == 0 || !(grid.pixel_size > 0.0) {
            return Err(Error::arg(format!("invalid reconstruction grid {grid:?}")));
        }
        let step = geometry.angular_step().ok_or_else(|| {
            Error::Geometry("filtered backprojection requires uniformly spaced views".into())
        })?;
        let p = geometry.detector_pixels();
        let filter = RampFilter::new(p, geometry.detector_spacing())?;
        let (view_weights, pre_weights) = match geometry.beam() {
            BeamKind::Parallel => (parallel_weights(geometry, step), None),
            BeamKind::Fan => {
                if !geometry.full_rotation() {
                    return Err(Error::Geometry(
                        "fan-beam reconstruction requires a full rotation".into(),
                    ));
                }
                let r = geometry.orbit_radius();
                let pre = (0..p)
                    .map(|k| {
                        let u = geometry.detector_coordinate(k);
                        r / (r * r + u * u).sqrt()
                    })
                    .collect();
                (vec![0.5 * step; geometry.n_views()], Some(pre))
            }
        };
        Ok(Self {
            geometry: geometry.clone(),
            grid,
            filter,
            view_weights,
            pre_weights,
        })
    }

    pub fn geometry(&self) -> &AcquisitionGeometry {
        &self.geometry
    }

    pub fn grid(&self) -> ReconGrid {
        self.grid
    }

    fn check_sinogram(&self, data: &Tensor) -> Result<()> {
        let expected = [self.geometry.n_views(), self.geometry.detector_pixels()];
        if data.shape() != expected {
            return Err(Error::shape(format!(
                "sinogram {:?} does not match reconstruction geometry {expected:?}",
                data.shape()
            )));
        }
        Ok(())
    }

    /// Visits every (view, pixel) interpolation tap of the backprojector:
    /// `f(view, pixel, k0, frac, weight)` with detector sample position
    /// `k0 + frac`.
    fn for_each_tap(&self, mut f: impl FnMut(usize, usize, isize, f64, f64)) {
        let g = &self.geometry;
        let half = 0.5 * (g.detector_pixels() as f64 - 1.0);
        let inv_spacing = 1.0 / g.detector_spacing();
        let radius = g.orbit_radius();
        let detector_end = g.detector_pixels() as f64;
        for (v, &angle) in g.angles().iter().enumerate() {
            let (s, c) = angle.sin_cos();
            let w = self.view_weights[v];
            for r in 0..self.grid.height {
                for col in 0..self.grid.width {
                    let (x, y) = self.grid.centre(r, col);
                    let b = -x * s + y * c;
                    let (u, weight) = match g.beam() {
                        BeamKind::Parallel => (b, w),
                        BeamKind::Fan => {
                            let scale = (radius - (x * c + y * s)) / radius;
                            (b / scale, w / (scale * scale))
                        }
                    };
                    let pos = u * inv_spacing + half;
                    if !(pos > -1.0 && pos < detector_end) {
                        continue;
                    }
                    let k0 = pos.floor();
                    f(v, r * self.grid.width + col, k0 as isize, pos - k0, weight);
                }
            }
        }
    }

    /// Reconstructs an `(H, W)` image from `(n_views, P)` sinogram data.
    pub fn apply(&self, data: &Tensor) -> Result<Tensor> {
        self.check_sinogram(data)?;
        let p = self.geometry.detector_pixels();
        let mut filtered = data.data().to_vec();
        for row in filtered.chunks_mut(p) {
            if let Some(pre) = &self.pre_weights {
                row.iter_mut().zip(pre).for_each(|(v, w)| *v *= w);
            }
            self.filter.apply(row);
        }
        let mut image = vec![0.0; self.grid.height * self.grid.width];
        let p = p as isize;
        self.for_each_tap(|v, pix, k0, frac, weight| {
            let row = &filtered[v * p as usize..(v + 1) * p as usize];
            let mut acc = 0.0;
            if (0..p).contains(&k0) {
                acc += (1.0 - frac) * row[k0 as usize];
            }
            if (0..p).contains(&(k0 + 1)) {
                acc += frac * row[(k0 + 1) as usize];
            }
            image[pix] += weight * acc;
        });
        Tensor::from_vec(&[self.grid.height, self.grid.width], image)
    }

    /// Exact transpose of [`Fbp::apply`]: maps an `(H, W)` image to
    /// `(n_views, P)` sinogram space.
    pub fn transpose(&self, image: &Tensor) -> Result<Tensor> {
        if image.shape() != [self.grid.height, self.grid.width] {
            return Err(Error::shape(format!(
                "image {:?} does not match reconstruction grid {}x{}",
                image.shape(),
                self.grid.height,
                self.grid.width
            )));
        }
        let (n, p) = (self.geometry.n_views(), self.geometry.detector_pixels());
        let mut out = vec![0.0; n * p];
        let img = image.data();
        let pi = p as isize;
        self.for_each_tap(|v, pix, k0, frac, weight| {
            let val = weight * img[pix];
            if (0..pi).contains(&k0) {
                out[v * p + k0 as usize] += (1.0 - frac) * val;
            }
            if (0..pi).contains(&(k0 + 1)) {
                out[v * p + (k0 + 1) as usize] += frac * val;
            }
        });
        for row in out.chunks_mut(p) {
            self.filter.apply(row);
            if let Some(pre) = &self.pre_weights {
                row.iter_mut().zip(pre).for_each(|(v, w)| *v *= w);
            }
        }
        Tensor::from_vec(&[n, p], out)
    }
}

/// Reconstructs `s` on `grid`.
pub fn fbp_reconstruct(s: &Sinogram, grid: ReconGrid) -> Result<Tensor> {
    Fbp::new(s.geometry(), grid)?.apply(s.data())
}
