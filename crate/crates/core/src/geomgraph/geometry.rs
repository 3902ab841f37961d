//! Circular acquisition geometries: sampled source positions on the circle
//! times a discretised line detector.

use std::f64::consts::TAU;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Tolerance used when checking that angles follow a uniform full rotation.
pub const UNIFORM_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BeamKind {
    Parallel,
    Fan,
}

impl BeamKind {
    pub fn as_str(self) -> &'static str {
        match self {
            BeamKind::Parallel => "parallel",
            BeamKind::Fan => "fan",
        }
    }
}

impl fmt::Display for BeamKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for BeamKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "parallel" => Ok(BeamKind::Parallel),
            "fan" => Ok(BeamKind::Fan),
            other => Err(Error::Geometry(format!("unknown beam kind `{other}`"))),
        }
    }
}

/// A discretised circular acquisition geometry.
///
/// Source angles are strictly increasing in `[0, 2π)`. The orbit radius is
/// `None` for parallel-beam scans (source at infinity).
#[derive(Debug, Clone, PartialEq)]
pub struct AcquisitionGeometry {
    angles: Vec<f64>,
    orbit_radius: Option<f64>,
    detector_pixels: usize,
    detector_spacing: f64,
    beam: BeamKind,
    full_rotation: bool,
}

impl AcquisitionGeometry {
    /// Uniformly sampled full rotation with `n_views` source positions.
    pub fn circular(
        n_views: usize,
        detector_pixels: usize,
        beam: BeamKind,
        orbit_radius: f64,
        detector_spacing: f64,
    ) -> Result<Self> {
        if n_views < 3 {
            return Err(Error::Geometry(format!(
                "at least 3 views are required, got {n_views}"
            )));
        }
        let step = TAU / n_views as f64;
        let angles = (0..n_views).map(|i| i as f64 * step).collect();
        Self::from_parts(angles, detector_pixels, beam, orbit_radius, detector_spacing, true)
    }

    /// Geometry with explicit source angles. `full_rotation` is inferred.
    pub fn from_angles(
        angles: Vec<f64>,
        detector_pixels: usize,
        beam: BeamKind,
        orbit_radius: f64,
        detector_spacing: f64,
    ) -> Result<Self> {
        let full = is_uniform_full_rotation(&angles);
        Self::from_parts(angles, detector_pixels, beam, orbit_radius, detector_spacing, full)
    }

    fn from_parts(
        angles: Vec<f64>,
        detector_pixels: usize,
        beam: BeamKind,
        orbit_radius: f64,
        detector_spacing: f64,
        full_rotation: bool,
    ) -> Result<Self> {
        if angles.is_empty() {
            return Err(Error::Geometry("no source angles".into()));
        }
        if detector_pixels == 0 {
            return Err(Error::Geometry("detector needs at least one pixel".into()));
        }
        if !(detector_spacing.is_finite() && detector_spacing > 0.0) {
            return Err(Error::Geometry(format!(
                "detector spacing must be positive, got {detector_spacing}"
            )));
        }
        let orbit_radius = match beam {
            BeamKind::Parallel => {
                if orbit_radius.is_nan() || orbit_radius <= 0.0 {
                    return Err(Error::Geometry(format!(
                        "orbit radius must be positive or infinite, got {orbit_radius}"
                    )));
                }
                None
            }
            BeamKind::Fan => {
                if !(orbit_radius.is_finite() && orbit_radius > 0.0) {
                    return Err(Error::Geometry(format!(
                        "fan-beam orbit radius must be positive and finite, got {orbit_radius}"
                    )));
                }
                Some(orbit_radius)
            }
        };
        for (i, &a) in angles.iter().enumerate() {
            if !(a.is_finite() && (0.0..TAU).contains(&a)) {
                return Err(Error::Geometry(format!("angle {i} = {a} outside [0, 2π)")));
            }
        }
        if let Some(i) = angles.windows(2).position(|w| w[1] <= w[0]) {
            return Err(Error::Geometry(format!(
                "angles must be strictly increasing (index {})",
                i + 1
            )));
        }
        Ok(Self {
            angles,
            orbit_radius,
            detector_pixels,
            detector_spacing,
            beam,
            full_rotation,
        })
    }

    /// Keeps every `factor`-th view starting at index 0.
    ///
    /// When `factor` does not divide the view count, the first
    /// `floor(n / factor)` retained views are kept and the result is no longer
    /// a full rotation (the wrap-around gap differs from the others).
    pub fn subsample(&self, factor: usize) -> Result<Self> {
        if factor < 1 {
            return Err(Error::Geometry("subsampling factor must be >= 1".into()));
        }
        if factor == 1 {
            return Ok(self.clone());
        }
        let n = self.angles.len();
        let keep = n / factor;
        if keep == 0 {
            return Err(Error::Geometry(format!(
                "factor {factor} leaves no views out of {n}"
            )));
        }
        let angles: Vec<f64> = (0..keep).map(|i| self.angles[i * factor]).collect();
        Ok(Self {
            angles,
            full_rotation: self.full_rotation && n % factor == 0,
            ..self.clone()
        })
    }

    pub fn angles(&self) -> &[f64] {
        &self.angles
    }

    pub fn n_views(&self) -> usize {
        self.angles.len()
    }

    pub fn detector_pixels(&self) -> usize {
        self.detector_pixels
    }

    pub fn detector_spacing(&self) -> f64 {
        self.detector_spacing
    }

    pub fn beam(&self) -> BeamKind {
        self.beam
    }

    /// Source-to-isocentre distance; infinite for parallel beams.
    pub fn orbit_radius(&self) -> f64 {
        self.orbit_radius.unwrap_or(f64::INFINITY)
    }

    pub fn full_rotation(&self) -> bool {
        self.full_rotation
    }

    /// Position of detector pixel `k` along the detector axis, centred on 0.
    pub fn detector_coordinate(&self, k: usize) -> f64 {
        (k as f64 - 0.5 * (self.detector_pixels as f64 - 1.0)) * self.detector_spacing
    }

    /// Constant angular step if the angles are equally spaced.
    pub fn angular_step(&self) -> Option<f64> {
        match self.angles.len() {
            0 => None,
            1 => Some(TAU),
            _ => {
                let step = self.angles[1] - self.angles[0];
                let equal = self
                    .angles
                    .windows(2)
                    .all(|w| ((w[1] - w[0]) - step).abs() <= 1e-9);
                equal.then_some(step)
            }
        }
    }

    /// 64-bit digest of the geometry, stable across runs and platforms.
    pub fn digest(&self) -> u64 {
        let mut hasher = Sha256::new();
        hasher.update(self.beam.as_str().as_bytes());
        hasher.update((self.detector_pixels as u64).to_le_bytes());
        hasher.update(self.detector_spacing.to_le_bytes());
        hasher.update(self.orbit_radius().to_le_bytes());
        hasher.update([self.full_rotation as u8]);
        for a in &self.angles {
            hasher.update(a.to_le_bytes());
        }
        let out = hasher.finalize();
        u64::from_le_bytes(out[..8].try_into().expect("sha256 output is 32 bytes"))
    }
}

fn is_uniform_full_rotation(angles: &[f64]) -> bool {
    let n = angles.len();
    if n < 3 {
        return false;
    }
    let step = TAU / n as f64;
    angles
        .iter()
        .enumerate()
        .all(|(i, &a)| (a - (angles[0] + i as f64 * step)).abs() <= UNIFORM_TOL)
}
