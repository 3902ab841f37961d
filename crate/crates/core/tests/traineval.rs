mod common;

use common::*;
use glmct::ndcore::{seeded_rng, Parameters, Tensor};
use glmct::netmodules::{NetworkKind, NetworkSpec};
use glmct::tomosim::io::to_u8;
use glmct::tomosim::{make_phantom, PhantomKind};
use glmct::traineval::*;
use proptest::prelude::*;
use rand::Rng;

/// Direct SSIM: for every fully contained 11x11 window, Gaussian-weighted
/// moments computed in two dimensions at once.
fn ssim_reference(a: &[u8], b: &[u8], h: usize, w: usize) -> f64 {
    let k = 11;
    let mut g = vec![0.0; k * k];
    for i in 0..k {
        for j in 0..k {
            let (di, dj) = (i as f64 - 5.0, j as f64 - 5.0);
            g[i * k + j] = (-(di * di + dj * dj) / (2.0 * 1.5 * 1.5)).exp();
        }
    }
    let total: f64 = g.iter().sum();
    g.iter_mut().for_each(|v| *v /= total);
    let (c1, c2) = ((0.01f64 * 255.0).powi(2), (0.03f64 * 255.0).powi(2));
    let mut acc = 0.0;
    let mut count = 0;
    for r in 0..=h - k {
        for c in 0..=w - k {
            let (mut ma, mut mb, mut saa, mut sbb, mut sab) = (0.0, 0.0, 0.0, 0.0, 0.0);
            for i in 0..k {
                for j in 0..k {
                    let (x, y) = (a[(r + i) * w + c + j] as f64, b[(r + i) * w + c + j] as f64);
                    let wt = g[i * k + j];
                    ma += wt * x;
                    mb += wt * y;
                    saa += wt * x * x;
                    sbb += wt * y * y;
                    sab += wt * x * y;
                }
            }
            let (va, vb, cov) = (saa - ma * ma, sbb - mb * mb, sab - ma * mb);
            acc += ((2.0 * ma * mb + c1) * (2.0 * cov + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
            count += 1;
        }
    }
    acc / count as f64
}

fn random_u8<R: Rng>(n: usize, rng: &mut R) -> Vec<u8> {
    (0..n).map(|_| rng.random()).collect()
}

#[test]
fn psnr_known_value() {
    // MSE 0.01 at peak 1 gives 20 dB
    let a = Tensor::zeros(&[4, 4]);
    let b = Tensor::filled(&[4, 4], 0.1);
    assert!((psnr(&a, &b, 1.0).unwrap() - 20.0).abs() < 1e-12);
    assert!(psnr(&a, &a, 1.0).unwrap().is_infinite());
    assert!(psnr(&a, &b, 0.0).is_err());
}

#[test]
fn ssim_of_constant_images_closed_form() {
    let (h, w) = (16, 20);
    for (x, y) in [(100u8, 100u8), (100, 120), (0, 255), (30, 200)] {
        let (a, b) = (vec![x; h * w], vec![y; h * w]);
        let c1 = (0.01f64 * 255.0).powi(2);
        let (x, y) = (x as f64, y as f64);
        let expected = (2.0 * x * y + c1) / (x * x + y * y + c1);
        assert!((ssim_u8(&a, &b, h, w).unwrap() - expected).abs() < 1e-9);
    }
}

#[test]
fn ssim_of_negative_is_low() {
    let img = make_phantom(0, 64, 64, PhantomKind::SheppLogan).unwrap();
    let neg = img.grid().map(|v| 1.0 - v);
    assert!(ssim(img.grid(), &neg).unwrap() < 0.5);
    assert!((ssim(img.grid(), img.grid()).unwrap() - 1.0).abs() < 1e-12);
}

#[test]
fn ssim_rejects_small_images() {
    assert!(ssim_u8(&[0; 100], &[0; 100], 10, 10).is_err());
    assert!(ssim_u8(&[0; 120], &[0; 121], 11, 11).is_err());
}

#[test]
fn shepp_logan_histogram_peaks_at_background() {
    let img = make_phantom(0, 128, 128, PhantomKind::SheppLogan).unwrap();
    let hist = grayscale_histogram(&to_u8(img.grid()).unwrap());
    assert_eq!(hist.bins.len(), 256);
    assert_eq!(hist.bins[0], 1.0);
    assert_eq!(hist.peaks(0.5)[0], 0);
    assert!(hist.bins[1..].iter().all(|&b| b < 1.0));
    assert!(hist.peaks(0.0).len() > 1);
}

#[test]
fn mean_std_uses_sample_denominator() {
    let (m, s) = mean_std(&[1.0, 2.0, 3.0, 4.0]);
    assert_eq!(m, 2.5);
    assert!((s - (5.0f64 / 3.0).sqrt()).abs() < 1e-15);
    assert_eq!(mean_std(&[7.0]), (7.0, 0.0));
    assert!(mean_std(&[]).0.is_nan());
}

fn tiny_config() -> ExperimentConfig {
    let mut cfg = ExperimentConfig::default();
    cfg.network = NetworkSpec::standard(NetworkKind::Glm, 2);
    cfg.gamma.channels = 2;
    cfg.dataset.image_size = 32;
    cfg.dataset.n_views = 24;
    cfg.dataset.detector_pixels = 48;
    cfg.dataset.train = 4;
    cfg.dataset.val = 2;
    cfg.dataset.test = 2;
    cfg.training.epochs = 2;
    cfg.training.batch_size = 2;
    cfg.sweep.factors = vec![1, 2, 3, 5];
    cfg
}

#[test]
fn dataset_is_reproducible_and_split_independent() {
    let cfg = tiny_config().dataset;
    let a = generate_dataset(&cfg).unwrap();
    let b = generate_dataset(&cfg).unwrap();
    assert_eq!(a.train, b.train);
    assert_eq!(a.test, b.test);
    assert_ne!(a.train[0].image, a.val[0].image);
    assert_ne!(a.train[0].image, a.test[0].image);
    // enlarging one split leaves the others untouched
    let mut bigger = cfg.clone();
    bigger.train = 6;
    let c = generate_dataset(&bigger).unwrap();
    assert_eq!(c.train[..4], a.train[..]);
    assert_eq!(c.val, a.val);
    assert_eq!(a.train[0].sinogram.shape(), &[24, 48]);
    assert_eq!(a.train[0].image.shape(), &[32, 32]);
}

#[test]
fn training_is_deterministic() {
    let cfg = tiny_config();
    let data = generate_dataset(&cfg.dataset).unwrap();
    let run = || {
        let mut pipe = Pipeline::init(&cfg).unwrap();
        let pre = pretrain_autoencode(&mut pipe.net, &data.geometry, &data.train, &cfg.training).unwrap();
        let curve =
            train_pipeline(&mut pipe, &data.geometry, cfg.dataset.grid(), &data.train, &data.val, &cfg.training).unwrap();
        (pre, curve.iter().map(|r| (r.train_loss.to_bits(), r.val_loss.to_bits())).collect::<Vec<_>>(), pipe.flat())
    };
    let (a, b) = (run(), run());
    assert_eq!(a, b);
    assert_eq!(a.1.len(), cfg.training.epochs + 1);
}

#[test]
fn sweep_at_factor_one_equals_plain_evaluation() {
    let cfg = tiny_config();
    let data = generate_dataset(&cfg.dataset).unwrap();
    let pipe = Pipeline::init(&cfg).unwrap();
    let rows = generalization_sweep(&pipe, &data.geometry, cfg.dataset.grid(), &data.test, &cfg.sweep.factors).unwrap();
    assert_eq!(rows.iter().map(|r| r.factor).collect::<Vec<_>>(), cfg.sweep.factors);
    let ops = Operators::new(NetworkKind::Glm, &data.geometry, cfg.dataset.grid()).unwrap();
    let metrics = evaluate(&pipe, &ops, &data.test).unwrap();
    let (m, s) = mean_std(&metrics.iter().map(|m| m.psnr).collect::<Vec<_>>());
    assert_eq!((rows[0].psnr_mean, rows[0].psnr_std), (m, s));
    assert_eq!(rows[0].params, pipe.net.param_count() as u64);
}

#[test]
fn config_validation() {
    let bad = [
        "[training]\nlr = 0.0\n",
        "[dataset]\nimage_size = 16\n",
        "[dataset]\nn_views = 2\n",
        "[dataset]\nbeam = \"fan\"\norbit_radius = 1.0\n",
        "[sweep]\nfactors = []\n",
        "[sweep]\nfactors = [30]\n",
        "[dataset]\nbeam = \"fan\"\n[sweep]\nfactors = [7]\n",
        "[network]\nkind = \"glm\"\nchannels = 0\n",
        "unknown = 1\n",
    ];
    for text in bad {
        assert!(ExperimentConfig::from_toml(text).is_err(), "{text}");
    }
    let ok = ExperimentConfig::from_toml("[network]\nkind = \"cnn\"\nchannels = 8\n[dataset]\nbeam = \"fan\"\n[sweep]\nfactors = [1, 2, 3, 5]\n").unwrap();
    assert_eq!(ok.network.name(), "CNN-8");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn ssim_matches_reference(h in 11usize..24, w in 11usize..24, seed in any::<u64>()) {
        let mut rng = seeded_rng(seed);
        let a = random_u8(h * w, &mut rng);
        let b: Vec<u8> = a.iter().map(|&v| v.saturating_add(rng.random_range(0..40))).collect();
        let ours = ssim_u8(&a, &b, h, w).unwrap();
        prop_assert!((ours - ssim_reference(&a, &b, h, w)).abs() < 1e-10);
        prop_assert!((ssim_u8(&b, &a, h, w).unwrap() - ours).abs() < 1e-12);
        prop_assert!(ours <= 1.0 + 1e-12);
    }

    #[test]
    fn psnr_matches_formula(seed in any::<u64>(), peak in 0.1f64..10.0) {
        let mut rng = seeded_rng(seed);
        let a = random_tensor(&[5, 7], &mut rng);
        let b = random_tensor(&[5, 7], &mut rng);
        let mse = a.data().iter().zip(b.data()).map(|(x, y)| (x - y) * (x - y)).sum::<f64>() / 35.0;
        prop_assert!((psnr(&a, &b, peak).unwrap() - 10.0 * (peak * peak / mse).log10()).abs() < 1e-10);
    }

    #[test]
    fn histogram_is_normalised(seed in any::<u64>(), n in 1usize..500) {
        let px = random_u8(n, &mut seeded_rng(seed));
        let h = grayscale_histogram(&px);
        let max = h.bins.iter().cloned().fold(0.0, f64::max);
        prop_assert_eq!(max, 1.0);
        for p in h.peaks(0.0) {
            prop_assert!(h.bins[p] > 0.0);
        }
    }

    #[test]
    fn config_round_trips(c in 1usize..64, lr in 1e-6f64..1e-2, epochs in 0usize..50, seed in any::<u64>()) {
        let mut cfg = ExperimentConfig::default();
        cfg.network = NetworkSpec::standard(if c % 2 == 0 { NetworkKind::Glm } else { NetworkKind::Cnn }, c);
        cfg.training.lr = lr;
        cfg.training.epochs = epochs;
        cfg.dataset.seed = seed;
        prop_assert_eq!(ExperimentConfig::from_toml(&cfg.to_toml()).unwrap(), cfg);
    }
}
