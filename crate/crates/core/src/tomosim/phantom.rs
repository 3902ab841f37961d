use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ndcore::{seeded_rng, Tensor};

/// Ellipse primitive in normalised coordinates, where the image width spans
/// `[-1, 1]`. `angle` is in radians, counter-clockwise.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ellipse {
    pub center: (f64, f64),
    pub axes: (f64, f64),
    pub angle: f64,
    pub value: f64,
}

impl Ellipse {
    pub fn contains(&self, x: f64, y: f64) -> bool {
        let (dx, dy) = (x - self.center.0, y - self.center.1);
        let (s, c) = self.angle.sin_cos();
        let u = dx * c + dy * s;
        let v = -dx * s + dy * c;
        (u / self.axes.0).powi(2) + (v / self.axes.1).powi(2) <= 1.0
    }
}

/// Modified Shepp-Logan ellipses (higher-contrast variant, peak value 1):
/// `(value, a, b, x0, y0, phi_degrees)`.
const SHEPP_LOGAN: [(f64, f64, f64, f64, f64, f64); 10] = [
    (1.0, 0.69, 0.92, 0.0, 0.0, 0.0),
    (-0.8, 0.6624, 0.8740, 0.0, -0.0184, 0.0),
    (-0.2, 0.1100, 0.3100, 0.22, 0.0, -18.0),
    (-0.2, 0.1600, 0.4100, -0.22, 0.0, 18.0),
    (0.1, 0.2100, 0.2500, 0.0, 0.35, 0.0),
    (0.1, 0.0460, 0.0460, 0.0, 0.1, 0.0),
    (0.1, 0.0460, 0.0460, 0.0, -0.1, 0.0),
    (0.1, 0.0460, 0.0230, -0.08, -0.605, 0.0),
    (0.1, 0.0230, 0.0230, 0.0, -0.606, 0.0),
    (0.1, 0.0230, 0.0460, 0.06, -0.605, 0.0),
];

pub fn shepp_logan_ellipses() -> Vec<Ellipse> {
    SHEPP_LOGAN
        .iter()
        .map(|&(value, a, b, x0, y0, phi)| Ellipse {
            center: (x0, y0),
            axes: (a, b),
            angle: phi.to_radians(),
            value,
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PhantomKind {
    SheppLogan,
    RandomEllipses,
}

impl fmt::Display for PhantomKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PhantomKind::SheppLogan => "shepp_logan",
            PhantomKind::RandomEllipses => "random_ellipses",
        })
    }
}

impl FromStr for PhantomKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "shepp_logan" => Ok(PhantomKind::SheppLogan),
            "random_ellipses" => Ok(PhantomKind::RandomEllipses),
            other => Err(Error::arg(format!("unknown phantom kind `{other}`"))),
        }
    }
}

/// Attenuation map on an `H x W` grid. The grid spans `[-1, 1]` horizontally,
/// so `pixel_size = 2 / W`; pixel values are attenuation per unit length.
#[derive(Debug, Clone, PartialEq)]
pub struct Phantom {
    grid: Tensor,
    pixel_size: f64,
    ellipses: Vec<Ellipse>,
}

pub const MIN_PHANTOM_SIZE: usize = 32;

impl Phantom {
    /// Rasterises additive ellipses at pixel centres.
    pub fn from_ellipses(height: usize, width: usize, ellipses: Vec<Ellipse>) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(Error::arg("phantom grid must be non-empty"));
        }
        let pixel_size = 2.0 / width as f64;
        let mut data = vec![0.0; height * width];
        for r in 0..height {
            let y = (0.5 * (height as f64 - 1.0) - r as f64) * pixel_size;
            for c in 0..width {
                let x = (c as f64 - 0.5 * (width as f64 - 1.0)) * pixel_size;
                data[r * width + c] = ellipses
                    .iter()
                    .filter(|e| e.contains(x, y))
                    .map(|e| e.value)
                    .sum::<f64>()
                    .max(0.0);
            }
        }
        Ok(Self {
            grid: Tensor::from_vec(&[height, width], data)?,
            pixel_size,
            ellipses,
        })
    }

    /// Wraps an existing `(H, W)` grid.
    pub fn from_grid(grid: Tensor) -> Result<Self> {
        let [_, w] = *grid.shape() else {
            return Err(Error::shape(format!("phantom grid must be (h, w), got {:?}", grid.shape())));
        };
        Ok(Self {
            grid,
            pixel_size: 2.0 / w as f64,
            ellipses: Vec::new(),
        })
    }

    pub fn grid(&self) -> &Tensor {
        &self.grid
    }

    pub fn height(&self) -> usize {
        self.grid.shape()[0]
    }

    pub fn width(&self) -> usize {
        self.grid.shape()[1]
    }

    pub fn pixel_size(&self) -> f64 {
        self.pixel_size
    }

    pub fn ellipses(&self) -> &[Ellipse] {
        &self.ellipses
    }

    /// Half-diagonal of the grid's physical extent.
    pub fn half_diagonal(&self) -> f64 {
        0.5 * self.pixel_size * ((self.height().pow(2) + self.width().pow(2)) as f64).sqrt()
    }
}

/// Draws 3 to 8 ellipses with values in `[0.2, 1.0]`, all contained in the
/// disc of radius 0.9.
pub fn random_ellipses<R: Rng>(rng: &mut R) -> Vec<Ellipse> {
    let count = rng.random_range(3..=8);
    (0..count)
        .map(|_| {
            let radius = rng.random_range(0.0..0.5);
            let theta = rng.random_range(0.0..std::f64::consts::TAU);
            Ellipse {
                center: (radius * theta.cos(), radius * theta.sin()),
                axes: (rng.random_range(0.08..0.4), rng.random_range(0.08..0.4)),
                angle: rng.random_range(0.0..std::f64::consts::PI),
                value: rng.random_range(0.2..=1.0),
            }
        })
        .collect()
}

pub fn make_phantom(seed: u64, height: usize, width: usize, kind: PhantomKind) -> Result<Phantom> {
    if height < MIN_PHANTOM_SIZE || width < MIN_PHANTOM_SIZE {
        return Err(Error::arg(format!(
            "phantom must be at least {MIN_PHANTOM_SIZE}x{MIN_PHANTOM_SIZE}, got {height}x{width}"
        )));
    }
    let ellipses = match kind {
        PhantomKind::SheppLogan => shepp_logan_ellipses(),
        PhantomKind::RandomEllipses => random_ellipses(&mut seeded_rng(seed)),
    };
    Phantom::from_ellipses(height, width, ellipses)
}
