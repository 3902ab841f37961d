use serde::Serialize;

use crate::error::{Error, Result};
use crate::ndcore::Tensor;
use crate::tomosim::io::to_u8;

/// Peak signal-to-noise ratio in dB. Identical images give `+inf`, which
/// callers can test with [`f64::is_infinite`].
pub fn psnr(a: &Tensor, b: &Tensor, peak: f64) -> Result<f64> {
    a.check_same_shape(b, "psnr")?;
    if !(peak.is_finite() && peak > 0.0) {
        return Err(Error::arg(format!("psnr peak must be positive, got {peak}")));
    }
    let mse = a
        .data()
        .iter()
        .zip(b.data())
        .map(|(x, y)| (x - y).powi(2))
        .sum::<f64>()
        / a.len() as f64;
    if mse == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(10.0 * (peak * peak / mse).log10())
}

pub const SSIM_WINDOW: usize = 11;
const SSIM_SIGMA: f64 = 1.5;
const SSIM_K1: f64 = 0.01;
const SSIM_K2: f64 = 0.03;
const SSIM_L: f64 = 255.0;

fn gaussian_window() -> Vec<f64> {
    let half = (SSIM_WINDOW / 2) as f64;
    let g: Vec<f64> = (0..SSIM_WINDOW)
        .map(|i| (-((i as f64 - half).powi(2)) / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp())
        .collect();
    let sum: f64 = g.iter().sum();
    g.into_iter().map(|v| v / sum).collect()
}

/// Separable Gaussian filter over the fully contained ("valid") windows.
fn filter_valid(img: &[f64], h: usize, w: usize, g: &[f64]) -> Vec<f64> {
    let k = g.len();
    let (oh, ow) = (h - k + 1, w - k + 1);
    let mut rows = vec![0.0; h * ow];
    for r in 0..h {
        for c in 0..ow {
            rows[r * ow + c] = (0..k).map(|t| g[t] * img[r * w + c + t]).sum();
        }
    }
    let mut out = vec![0.0; oh * ow];
    for r in 0..oh {
        for c in 0..ow {
            out[r * ow + c] = (0..k).map(|t| g[t] * rows[(r + t) * ow + c]).sum();
        }
    }
    out
}

/// Mean local SSIM of two 8-bit images of shape `(h, w)`.
pub fn ssim_u8(a: &[u8], b: &[u8], h: usize, w: usize) -> Result<f64> {
    if a.len() != h * w || b.len() != h * w {
        return Err(Error::shape(format!("ssim: expected {h}x{w} pixels, got {} and {}", a.len(), b.len())));
    }
    if h < SSIM_WINDOW || w < SSIM_WINDOW {
        return Err(Error::shape(format!(
            "ssim needs images of at least {SSIM_WINDOW}x{SSIM_WINDOW}, got {h}x{w}"
        )));
    }
    let g = gaussian_window();
    let fa: Vec<f64> = a.iter().map(|&v| v as f64).collect();
    let fb: Vec<f64> = b.iter().map(|&v| v as f64).collect();
    let prod = |x: &[f64], y: &[f64]| x.iter().zip(y).map(|(p, q)| p * q).collect::<Vec<_>>();
    let mu_a = filter_valid(&fa, h, w, &g);
    let mu_b = filter_valid(&fb, h, w, &g);
    let aa = filter_valid(&prod(&fa, &fa), h, w, &g);
    let bb = filter_valid(&prod(&fb, &fb), h, w, &g);
    let ab = filter_valid(&prod(&fa, &fb), h, w, &g);
    let c1 = (SSIM_K1 * SSIM_L).powi(2);
    let c2 = (SSIM_K2 * SSIM_L).powi(2);
    let total: f64 = (0..mu_a.len())
        .map(|i| {
            let (ma, mb) = (mu_a[i], mu_b[i]);
            let va = aa[i] - ma * ma;
            let vb = bb[i] - mb * mb;
            let cov = ab[i] - ma * mb;
            ((2.0 * ma * mb + c1) * (2.0 * cov + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2))
        })
        .sum();
    Ok(total / mu_a.len() as f64)
}

/// SSIM after min-max normalising both images to 8 bits.
pub fn ssim(a: &Tensor, b: &Tensor) -> Result<f64> {
    a.check_same_shape(b, "ssim")?;
    if a.rank() != 2 {
        return Err(Error::shape(format!("ssim expects (h, w) images, got {:?}", a.shape())));
    }
    ssim_u8(&to_u8(a)?, &to_u8(b)?, a.shape()[0], a.shape()[1])
}

/// 256-bin grayscale histogram scaled so the fullest bin is 1.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Histogram {
    pub bins: Vec<f64>,
}

impl Histogram {
    /// Local maxima with height at least `threshold`. On a plateau the first
    /// bin is reported.
    pub fn peaks(&self, threshold: f64) -> Vec<usize> {
        let b = &self.bins;
        (0..b.len())
            .filter(|&i| {
                b[i] >= threshold
                    && b[i] > 0.0
                    && (i == 0 || b[i] > b[i - 1])
                    && (i + 1 == b.len() || b[i] >= b[i + 1])
            })
            .collect()
    }
}

pub fn grayscale_histogram(pixels: &[u8]) -> Histogram {
    let mut counts = [0u64; 256];
    for &p in pixels {
        counts[p as usize] += 1;
    }
    let max = counts.iter().copied().max().unwrap_or(0);
    let bins = counts
        .iter()
        .map(|&c| if max == 0 { 0.0 } else { c as f64 / max as f64 })
        .collect();
    Histogram { bins }
}

/// Sample mean and (n - 1)-normalised standard deviation.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, var.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn psnr_formula() {
        let a = Tensor::filled(&[4, 4], 0.5);
        assert!(psnr(&a, &a, 1.0).unwrap().is_infinite());
        let b = Tensor::filled(&[4, 4], 0.6);
        assert!((psnr(&a, &b, 1.0).unwrap() - 20.0).abs() < 1e-9);
        let c = Tensor::filled(&[4, 4], 1.5);
        let expected = 20.0 * 255f64.log10();
        assert!((psnr(&c, &Tensor::filled(&[4, 4], 0.5), 255.0).unwrap() - expected).abs() < 1e-12);
        assert!((expected - 48.13).abs() < 5e-3);
    }

    #[test]
    fn ssim_identity_and_window_check() {
        let img = Tensor::from_vec(&[16, 16], (0..256).map(|v| ((v * 13) % 17) as f64).collect()).unwrap();
        assert_eq!(ssim(&img, &img).unwrap(), 1.0);
        assert!(ssim(&Tensor::zeros(&[8, 16]), &Tensor::zeros(&[8, 16])).is_err());
    }

    #[test]
    fn gaussian_window_normalised() {
        let g = gaussian_window();
        assert!((g.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        assert_eq!(g[0], g[10]);
    }

    #[test]
    fn histogram_examples() {
        let h = grayscale_histogram(&[0; 64]);
        assert_eq!(h.bins[0], 1.0);
        assert!(h.bins[1..].iter().all(|&v| v == 0.0));
        let mut two = vec![0u8; 32];
        two.extend([40u8; 32]);
        let h = grayscale_histogram(&two);
        assert_eq!(h.bins[0], 1.0);
        assert_eq!(h.bins[40], 1.0);
        assert_eq!(h.peaks(0.5), vec![0, 40]);
    }

    #[test]
    fn mean_std_sample() {
        let (m, s) = mean_std(&[1.0, 2.0, 3.0]);
        assert_eq!(m, 2.0);
        assert!((s - 1.0).abs() < 1e-15);
    }
}
