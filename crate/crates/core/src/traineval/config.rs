use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geomgraph::{AcquisitionGeometry, BeamKind};
use crate::netmodules::{GammaSpec, NetworkKind, NetworkSpec};
use crate::tomosim::{PhantomKind, ReconGrid};

/// Synthetic dataset: phantoms, acquisition geometry and noise level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DatasetConfig {
    pub phantom: PhantomKind,
    /// Phantoms are `image_size x image_size`.
    pub image_size: usize,
    pub n_views: usize,
    pub detector_pixels: usize,
    pub beam: BeamKind,
    /// Source orbit radius for fan beam, in units of the image half-width.
    pub orbit_radius: f64,
    /// Incident photon count per ray; `0` disables noise.
    pub photons: f64,
    pub train: usize,
    pub val: usize,
    pub test: usize,
    pub seed: u64,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        Self {
            phantom: PhantomKind::RandomEllipses,
            image_size: 64,
            n_views: 90,
            detector_pixels: 96,
            beam: BeamKind::Parallel,
            orbit_radius: 4.0,
            photons: 1e5,
            train: 200,
            val: 32,
            test: 32,
            seed: 0,
        }
    }
}

impl DatasetConfig {
    /// Detector pitch equals the image pixel size.
    pub fn geometry(&self) -> Result<AcquisitionGeometry> {
        let radius = match self.beam {
            BeamKind::Parallel => f64::INFINITY,
            BeamKind::Fan => self.orbit_radius,
        };
        AcquisitionGeometry::circular(
            self.n_views,
            self.detector_pixels,
            self.beam,
            radius,
            2.0 / self.image_size as f64,
        )
    }

    pub fn grid(&self) -> ReconGrid {
        ReconGrid::unit(self.image_size, self.image_size)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainingConfig {
    pub lr: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub pretrain_epochs: usize,
    /// Seeds weight initialisation and batch shuffling.
    pub seed: u64,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        Self {
            lr: 5e-5,
            batch_size: 8,
            epochs: 10,
            pretrain_epochs: 1,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepConfig {
    pub factors: Vec<usize>,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            factors: (1..=10).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScalingConfig {
    pub kinds: Vec<NetworkKind>,
    pub channels: Vec<usize>,
    pub batch_sizes: Vec<usize>,
    /// Channel counts whose batch training time is measured.
    pub timing_channels: Vec<usize>,
    /// Timed repetitions per batch size; the minimum is reported.
    pub repeats: usize,
}

impl Default for ScalingConfig {
    fn default() -> Self {
        Self {
            kinds: vec![NetworkKind::Glm, NetworkKind::Cnn],
            channels: vec![4, 8, 16, 24, 32, 64],
            batch_sizes: vec![2, 4, 6, 8, 10],
            timing_channels: vec![16],
            repeats: 1,
        }
    }
}

fn default_network() -> NetworkSpec {
    NetworkSpec::standard(NetworkKind::Glm, 16)
}

/// Complete experiment description, read from a TOML file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "default_network")]
    pub network: NetworkSpec,
    #[serde(default)]
    pub gamma: GammaSpec,
    #[serde(default)]
    pub training: TrainingConfig,
    #[serde(default)]
    pub dataset: DatasetConfig,
    #[serde(default)]
    pub sweep: SweepConfig,
    #[serde(default)]
    pub scaling: ScalingConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            network: default_network(),
            gamma: GammaSpec::default(),
            training: TrainingConfig::default(),
            dataset: DatasetConfig::default(),
            sweep: SweepConfig::default(),
            scaling: ScalingConfig::default(),
        }
    }
}

fn positive(name: &str, v: usize) -> Result<()> {
    if v == 0 {
        return Err(Error::Config(format!("{name} must be >= 1")));
    }
    Ok(())
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is always representable as TOML")
    }

    pub fn validate(&self) -> Result<()> {
        self.network.validate()?;
        positive("gamma.channels", self.gamma.channels)?;
        let t = &self.training;
        if !(t.lr.is_finite() && t.lr > 0.0) {
            return Err(Error::Config(format!("training.lr must be positive, got {}", t.lr)));
        }
        positive("training.batch_size", t.batch_size)?;
        let d = &self.dataset;
        if d.image_size < crate::tomosim::MIN_PHANTOM_SIZE {
            return Err(Error::Config(format!(
                "dataset.image_size must be >= {}, got {}",
                crate::tomosim::MIN_PHANTOM_SIZE,
                d.image_size
            )));
        }
        if d.n_views < 3 {
            return Err(Error::Config(format!("dataset.n_views must be >= 3, got {}", d.n_views)));
        }
        positive("dataset.detector_pixels", d.detector_pixels)?;
        positive("dataset.train", d.train)?;
        positive("dataset.val", d.val)?;
        positive("dataset.test", d.test)?;
        if !(d.photons.is_finite() && d.photons >= 0.0) {
            return Err(Error::Config(format!("dataset.photons must be >= 0, got {}", d.photons)));
        }
        if d.beam == BeamKind::Fan && !(d.orbit_radius > std::f64::consts::SQRT_2) {
            return Err(Error::Config(format!(
                "dataset.orbit_radius must exceed the image half-diagonal (sqrt 2), got {}",
                d.orbit_radius
            )));
        }
        if self.sweep.factors.is_empty() {
            return Err(Error::Config("sweep.factors must not be empty".into()));
        }
        for &f in &self.sweep.factors {
            if f == 0 {
                return Err(Error::Config("sweep.factors must all be >= 1, got 0".into()));
            }
            if d.n_views / f < 3 {
                return Err(Error::Config(format!(
                    "sweep factor {f} leaves fewer than 3 of {} views",
                    d.n_views
                )));
            }
            if d.beam == BeamKind::Fan && d.n_views % f != 0 {
                return Err(Error::Config(format!(
                    "fan-beam reconstruction needs a full rotation: sweep factor {f} must divide n_views = {}",
                    d.n_views
                )));
            }
            // Neighbouring views must stay less than a quarter turn apart so
            // that every cosine edge weight is positive.
            if 4 * f >= d.n_views {
                return Err(Error::Config(format!(
                    "sweep factor {f} spaces the {} views a quarter turn or more apart; factors must be < n_views / 4",
                    d.n_views
                )));
            }
        }
        let s = &self.scaling;
        for &c in &s.channels {
            positive("scaling.channels entries", c)?;
        }
        for &c in &s.timing_channels {
            positive("scaling.timing_channels entries", c)?;
        }
        for &b in &s.batch_sizes {
            positive("scaling.batch_sizes entries", b)?;
        }
        positive("scaling.repeats", s.repeats)?;
        Ok(())
    }
}
