use rand_distr::{Distribution, Poisson};

use super::projector::Sinogram;
use crate::error::{Error, Result};
use crate::ndcore::{seeded_rng, Tensor};

/// Poisson transmission noise: each line integral `y` becomes
/// `-ln(max(t, 1) / I0)` with `t ~ Poisson(I0 exp(-y))`.
pub fn apply_noise(s: &Sinogram, photons: f64, seed: u64) -> Result<Sinogram> {
    if !(photons.is_finite() && photons > 0.0) {
        return Err(Error::arg(format!("photon count must be positive and finite, got {photons}")));
    }
    let mut rng = seeded_rng(seed);
    let noisy = s
        .data()
        .data()
        .iter()
        .map(|&y| {
            let mean = photons * (-y).exp();
            let counts = if mean > 0.0 {
                Poisson::new(mean)
                    .map_err(|e| Error::arg(format!("invalid Poisson mean {mean}: {e}")))?
                    .sample(&mut rng)
            } else {
                0.0
            };
            Ok(-(counts.max(1.0) / photons).ln())
        })
        .collect::<Result<Vec<_>>>()?;
    Sinogram::new(Tensor::from_vec(s.data().shape(), noisy)?, s.geometry().clone())
}
