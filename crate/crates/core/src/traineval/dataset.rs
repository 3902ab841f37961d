use super::config::DatasetConfig;
use crate::error::Result;
use crate::geomgraph::AcquisitionGeometry;
use crate::ndcore::Tensor;
use crate::tomosim::{apply_noise, forward_project, make_phantom};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    fn tag(self) -> u64 {
        match self {
            Split::Train => 1,
            Split::Val => 2,
            Split::Test => 3,
        }
    }
}

/// Ground-truth image `(H, W)` and its measured sinogram `(n_views, P)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub image: Tensor,
    pub sinogram: Tensor,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub geometry: AcquisitionGeometry,
    pub train: Vec<Sample>,
    pub val: Vec<Sample>,
    pub test: Vec<Sample>,
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed of sample `index` in `split`. Splits draw from disjoint streams, so
/// no phantom is shared between train, validation and test.
pub fn sample_seed(seed: u64, split: Split, index: usize) -> u64 {
    splitmix(splitmix(splitmix(seed) ^ split.tag()) ^ index as u64)
}

pub fn make_sample(cfg: &DatasetConfig, geometry: &AcquisitionGeometry, seed: u64) -> Result<Sample> {
    let phantom = make_phantom(seed, cfg.image_size, cfg.image_size, cfg.phantom)?;
    let mut sino = forward_project(&phantom, geometry)?;
    if cfg.photons > 0.0 {
        sino = apply_noise(&sino, cfg.photons, splitmix(seed ^ 0x6e6f_6973_65))?;
    }
    Ok(Sample {
        image: phantom.grid().clone(),
        sinogram: sino.into_data(),
    })
}

pub fn generate_split(cfg: &DatasetConfig, geometry: &AcquisitionGeometry, split: Split) -> Result<Vec<Sample>> {
    let count = match split {
        Split::Train => cfg.train,
        Split::Val => cfg.val,
        Split::Test => cfg.test,
    };
    (0..count)
        .map(|i| make_sample(cfg, geometry, sample_seed(cfg.seed, split, i)))
        .collect()
}

pub fn generate_dataset(cfg: &DatasetConfig) -> Result<Dataset> {
    let geometry = cfg.geometry()?;
    Ok(Dataset {
        train: generate_split(cfg, &geometry, Split::Train)?,
        val: generate_split(cfg, &geometry, Split::Val)?,
        test: generate_split(cfg, &geometry, Split::Test)?,
        geometry,
    })
}
