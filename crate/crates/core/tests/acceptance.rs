//! Acceptance runner: checks each criterion at its stated tolerance and
//! prints one PASS/FAIL line per criterion. Exits non-zero if any fail.

mod common;

use std::f64::consts::TAU;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::Instant;

use common::*;
use glmct::geomgraph::{
    spectral_convolve, AcquisitionGeometry, BeamKind, CirculantSpectrum, GeometryGraph, SpectralFilter,
};
use glmct::ndcore::{seeded_rng, Parameters, Tensor};
use glmct::netmodules::{complexity_estimate, count_params, message_pass, network_forward, NetworkKind, SinogramNet};
use glmct::tomosim::{fbp_reconstruct, forward_project, shepp_logan_ellipses, Ellipse, Fbp, Phantom, ReconGrid};
use glmct::traineval::*;
use nalgebra::{DMatrix, SymmetricEigen};
use rand::seq::SliceRandom;
use rand::Rng;

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn parameter_counts() -> Outcome {
    let start = Instant::now();
    let expected = [
        (NetworkKind::Glm, 4, 417),
        (NetworkKind::Glm, 8, 1_497),
        (NetworkKind::Glm, 16, 5_673),
        (NetworkKind::Glm, 24, 12_537),
        (NetworkKind::Glm, 32, 22_089),
        (NetworkKind::Glm, 64, 87_177),
        (NetworkKind::Cnn, 4, 2_811),
        (NetworkKind::Cnn, 8, 10_275),
        (NetworkKind::Cnn, 16, 39_315),
        (NetworkKind::Cnn, 24, 87_171),
        (NetworkKind::Cnn, 32, 153_843),
        (NetworkKind::Cnn, 64, 608_691),
    ];
    let mut wrong = Vec::new();
    for (kind, c, n) in expected {
        let got = count_params(&spec(kind, c));
        if got != n {
            wrong.push(format!("{}: {got} != {n}", spec(kind, c).name()));
        }
    }
    let secs = start.elapsed().as_secs_f64();
    check(
        wrong.is_empty() && secs < 1.0,
        format!("{} of 12 counts exact in {secs:.2e} s {}", 12 - wrong.len(), wrong.join(", ")),
    )
}

fn circulant_spectrum() -> Outcome {
    let mut worst_val: f64 = 0.0;
    let mut worst_orth: f64 = 0.0;
    for n in [3, 4, 16, 128, 512] {
        let mut closed: Vec<f64> = (0..n).map(|j| 2.0 - 2.0 * (TAU * j as f64 / n as f64).cos()).collect();
        closed.sort_by(f64::total_cmp);
        let mut ours = CirculantSpectrum::new(n).map_err(|e| e.to_string())?.eigenvalues().to_vec();
        ours.sort_by(f64::total_cmp);
        let eig = SymmetricEigen::new(dense_laplacian(&GeometryGraph::unit_cycle(n).unwrap()));
        let mut dense: Vec<f64> = eig.eigenvalues.iter().copied().collect();
        dense.sort_by(f64::total_cmp);
        worst_val = worst_val.max(max_abs_diff(&closed, &dense)).max(max_abs_diff(&closed, &ours));

        let u = &eig.eigenvectors;
        worst_orth = worst_orth.max((u.transpose() * u - DMatrix::<f64>::identity(n, n)).amax());
        let spectrum = CirculantSpectrum::new(n).unwrap();
        for a in 0..n {
            for b in a..n {
                let dot: num_complex::Complex64 =
                    spectrum.eigenvector(a).iter().zip(spectrum.eigenvector(b)).map(|(x, y)| x.conj() * y).sum();
                let target = if a == b { 1.0 } else { 0.0 };
                worst_orth = worst_orth.max((dot - target).norm());
            }
        }
    }
    check(
        worst_val <= 1e-9 && worst_orth <= 1e-10,
        format!("max eigenvalue error {worst_val:.2e} (tol 1e-9), orthonormality error {worst_orth:.2e} (tol 1e-10)"),
    )
}

fn spectral_equivalence() -> Outcome {
    let mut rng = seeded_rng(2024);
    let mut worst_spec: f64 = 0.0;
    for i in 0..100 {
        let n = rng.random_range(3..=64);
        let g = if i % 4 == 0 {
            GeometryGraph::unit_cycle(n).unwrap()
        } else {
            random_graph(n, rng.random_range(0..n), &mut rng)
        };
        let k = rng.random_range(0..=4);
        let theta: Vec<f64> = (0..=k).map(|_| rng.random_range(-1.0..1.0)).collect();
        let x: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let ours = spectral_convolve(&g, &SpectralFilter::new(theta.clone()).unwrap(), &x).map_err(|e| e.to_string())?;
        let oracle = poly_in_laplacian(&dense_laplacian(&g), &theta, &x);
        let scale = oracle.iter().fold(1.0f64, |m, v| m.max(v.abs()));
        worst_spec = worst_spec.max(max_abs_diff(&ours, &oracle) / scale);
    }
    let mut worst_mp: f64 = 0.0;
    for n in [1, 2, 5, 16, 64] {
        let g = random_graph(n, n, &mut rng);
        let x = random_tensor(&[3, n, 9], &mut rng);
        let ours = message_pass(&g, &x).map_err(|e| e.to_string())?;
        worst_mp = worst_mp.max(max_abs_diff(ours.data(), apply_node_matrix(&dense_propagation(&g), &x).data()));
    }
    check(
        worst_spec <= 1e-8 && worst_mp <= 1e-10,
        format!("spectral vs polynomial {worst_spec:.2e} over 100 instances (tol 1e-8), message passing vs dense {worst_mp:.2e} (tol 1e-10)"),
    )
}

fn gradients() -> Outcome {
    let reports = grad_check_suite(7).map_err(|e| e.to_string())?;
    let failed: Vec<String> = reports.iter().filter(|r| !r.passed || r.checked == 0).map(|r| r.summary()).collect();
    let worst = reports.iter().map(|r| r.max_rel_error).fold(0.0, f64::max);

    let mut rng = seeded_rng(8);
    let mut worst_adj: f64 = 0.0;
    for geom in [
        AcquisitionGeometry::circular(36, 48, BeamKind::Parallel, f64::INFINITY, 2.0 / 32.0).unwrap(),
        AcquisitionGeometry::circular(36, 48, BeamKind::Fan, 3.0, 2.0 / 32.0).unwrap(),
    ] {
        let fbp = Fbp::new(&geom, ReconGrid::unit(32, 32)).map_err(|e| e.to_string())?;
        for _ in 0..50 {
            let s = random_tensor(&[36, 48], &mut rng);
            let r = random_tensor(&[32, 32], &mut rng);
            let lhs = fbp.apply(&s).unwrap().dot(&r).unwrap();
            let rhs = s.dot(&fbp.transpose(&r).unwrap()).unwrap();
            worst_adj = worst_adj.max((lhs - rhs).abs() / lhs.abs().max(rhs.abs()));
        }
    }
    check(
        failed.is_empty() && worst_adj <= 1e-6,
        format!(
            "{} of {} finite-difference checks pass (worst rel err {worst:.2e}, tol 1e-4); FBP adjoint rel err {worst_adj:.2e} (tol 1e-6) {}",
            reports.len() - failed.len(),
            reports.len(),
            failed.join("; ")
        ),
    )
}

fn equivariance_and_reach() -> Outcome {
    let mut rng = seeded_rng(5);
    let mut worst: f64 = 0.0;
    for trial in 0..10 {
        let n = rng.random_range(3..40);
        let g = if trial % 2 == 0 {
            GeometryGraph::from_geometry(
                &AcquisitionGeometry::circular(n.max(5), 16, BeamKind::Parallel, f64::INFINITY, 0.1).unwrap(),
            )
            .unwrap()
        } else {
            random_graph(n, n / 2, &mut rng)
        };
        let n = g.node_count();
        let p = 16;
        let mut perm: Vec<usize> = (0..n).collect();
        perm.shuffle(&mut rng);
        let net = SinogramNet::init(spec(NetworkKind::Glm, 8), trial).unwrap();
        let y = random_tensor(&[1, n, p], &mut rng).map(f64::abs);
        let mut py = Tensor::zeros(&[1, n, p]);
        for i in 0..n {
            py.data_mut()[perm[i] * p..(perm[i] + 1) * p].copy_from_slice(&y.data()[i * p..(i + 1) * p]);
        }
        let out = network_forward(&net, Some(&g), &y).unwrap();
        let pout = network_forward(&net, Some(&g.permuted(&perm).unwrap()), &py).unwrap();
        for i in 0..n {
            for q in 0..p {
                worst = worst.max((pout.data()[perm[i] * p + q] - out.data()[i * p + q]).abs());
            }
        }
    }

    // receptive field on a 24-view full rotation
    let n = 24;
    let g = GeometryGraph::from_geometry(
        &AcquisitionGeometry::circular(n, 8, BeamKind::Parallel, f64::INFINITY, 0.1).unwrap(),
    )
    .unwrap();
    let net = positive_net(NetworkKind::Glm, 4, 1);
    let y = Tensor::filled(&[1, n, 8], 0.4);
    let base = network_forward(&net, Some(&g), &y).unwrap();
    let mut reach_ok = true;
    for src in 0..n {
        let mut bumped = y.clone();
        bumped.data_mut()[src * 8..(src + 1) * 8].iter_mut().for_each(|v| *v += 0.5);
        let out = network_forward(&net, Some(&g), &bumped).unwrap();
        let hops = g.hop_distances(src);
        for r in 0..n {
            let changed = (0..8).any(|q| out.data()[r * 8 + q] != base.data()[r * 8 + q]);
            reach_ok &= changed == (hops[r] <= 3);
        }
    }
    check(
        worst <= 1e-9 && reach_ok,
        format!("max equivariance error {worst:.2e} (tol 1e-9); receptive field exactly 3 hops: {reach_ok}"),
    )
}

fn tomography() -> Outcome {
    let size = 256;
    let r = 0.5;
    let disc = Phantom::from_ellipses(
        size,
        size,
        vec![Ellipse {
            center: (0.0, 0.0),
            axes: (r, r),
            angle: 0.0,
            value: 1.0,
        }],
    )
    .unwrap();
    let geom = AcquisitionGeometry::circular(16, 65, BeamKind::Parallel, f64::INFINITY, 2.0 / size as f64).unwrap();
    let s = forward_project(&disc, &geom).map_err(|e| e.to_string())?;
    let mut chord_err: f64 = 0.0;
    for v in 0..16 {
        for k in 0..65 {
            let t = geom.detector_coordinate(k);
            let chord = 2.0 * (r * r - t * t).sqrt();
            chord_err = chord_err.max((s.view(v)[k] - chord).abs() / chord);
        }
    }

    let size = 128;
    let phantom = Phantom::from_ellipses(size, size, shepp_logan_ellipses()).unwrap();
    let geom = AcquisitionGeometry::circular(360, 192, BeamKind::Parallel, f64::INFINITY, 2.0 / size as f64).unwrap();
    let sino = forward_project(&phantom, &geom).map_err(|e| e.to_string())?;
    let rec = fbp_reconstruct(&sino, ReconGrid::unit(size, size)).map_err(|e| e.to_string())?;
    let peak = phantom.grid().data().iter().fold(0.0f64, |a, &b| a.max(b));
    let q = psnr(&rec, phantom.grid(), peak).unwrap();

    let mut rng = seeded_rng(6);
    let geom = AcquisitionGeometry::circular(30, 48, BeamKind::Parallel, f64::INFINITY, 2.0 / 32.0).unwrap();
    let fbp = Fbp::new(&geom, ReconGrid::unit(32, 32)).unwrap();
    let (a, b) = (rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0));
    let x = random_tensor(&[32, 32], &mut rng);
    let y = random_tensor(&[32, 32], &mut rng);
    let proj = |t: &Tensor| forward_project(&Phantom::from_grid(t.clone()).unwrap(), &geom).unwrap().into_data();
    let mix = x.scale(a).add(&y.scale(b)).unwrap();
    let lhs = proj(&mix);
    let rhs = proj(&x).scale(a).add(&proj(&y).scale(b)).unwrap();
    let a_err = lhs.max_abs_diff(&rhs).unwrap();
    let fbp_err = fbp
        .apply(&lhs)
        .unwrap()
        .max_abs_diff(&fbp.apply(&proj(&x)).unwrap().scale(a).add(&fbp.apply(&proj(&y)).unwrap().scale(b)).unwrap())
        .unwrap();
    check(
        chord_err < 0.01 && q >= 24.0 && a_err < 1e-10 && fbp_err < 1e-10,
        format!(
            "chord rel err {chord_err:.2e} (< 1%); Shepp-Logan 128x128/360 views PSNR {q:.2} dB (pinned >= 24); superposition A {a_err:.1e}, FBP {fbp_err:.1e}"
        ),
    )
}

struct DeskRun {
    curve: Vec<EpochRecord>,
    pretrain: Vec<f64>,
    params: Vec<f64>,
    seconds: f64,
    pipe: Pipeline,
}

fn desk_run(cfg: &ExperimentConfig, data: &Dataset) -> glmct::Result<DeskRun> {
    let start = Instant::now();
    let mut pipe = Pipeline::init(cfg)?;
    let pretrain = pretrain_autoencode(&mut pipe.net, &data.geometry, &data.train, &cfg.training)?;
    let curve = train_pipeline(&mut pipe, &data.geometry, cfg.dataset.grid(), &data.train, &data.val, &cfg.training)?;
    Ok(DeskRun {
        curve,
        pretrain,
        params: pipe.flat(),
        seconds: start.elapsed().as_secs_f64(),
        pipe,
    })
}

fn desk_config() -> ExperimentConfig {
    let mut cfg = ExperimentConfig::default();
    cfg.network = spec(NetworkKind::Glm, 8);
    cfg
}

fn training_smoke(first: &DeskRun, data_seconds: f64, second: &DeskRun) -> Outcome {
    let v0 = first.curve[0].val_loss;
    let last = first.curve.last().unwrap();
    let halved = last.val_loss <= 0.5 * v0;
    let total = data_seconds + first.seconds;
    let same = first.params.iter().zip(&second.params).all(|(a, b)| a.to_bits() == b.to_bits())
        && first.params.len() == second.params.len()
        && first.pretrain.iter().zip(&second.pretrain).all(|(a, b)| a.to_bits() == b.to_bits())
        && first
            .curve
            .iter()
            .zip(&second.curve)
            .all(|(a, b)| a.val_loss.to_bits() == b.val_loss.to_bits() && a.train_loss.to_bits() == b.train_loss.to_bits());
    check(
        halved && total < 900.0 && same,
        format!(
            "GLM-8 val MSE {v0:.4} -> {:.4} after {} epochs (ratio {:.3}, need <= 0.5); run {total:.0} s (< 900); identical reruns: {same}",
            last.val_loss,
            last.epoch,
            last.val_loss / v0
        ),
    )
}

fn generalization(run: &DeskRun, cfg: &ExperimentConfig, data: &Dataset) -> Outcome {
    let rows = generalization_sweep(&run.pipe, &data.geometry, cfg.dataset.grid(), &data.test, &cfg.sweep.factors)
        .map_err(|e| e.to_string())?;
    let psnrs: Vec<f64> = rows.iter().map(|r| r.psnr_mean).collect();
    let worst_rise = psnrs.windows(2).map(|w| w[1] - w[0]).fold(f64::NEG_INFINITY, f64::max);
    let listing: Vec<String> = rows.iter().map(|r| format!("{}:{:.2}", r.factor, r.psnr_mean)).collect();
    check(
        rows.len() == 10 && worst_rise <= 0.5,
        format!("PSNR by factor [{}] dB; largest rise {worst_rise:.3} dB (slack 0.5)", listing.join(" ")),
    )
}

fn complexity() -> Outcome {
    let mut rng = seeded_rng(9);
    let mut mismatches = 0;
    let mut ratio_ok = true;
    for _ in 0..20 {
        let (n, p, s) = (rng.random_range(1..1000u64), rng.random_range(1..1000u64), rng.random_range(1..12u64));
        let (ci, co) = (rng.random_range(1..128u64), rng.random_range(1..128u64));
        mismatches += (complexity_estimate(NetworkKind::Glm, n, p, s, ci, co) != glm_complexity(n, p, s, ci, co)) as usize;
        mismatches += (complexity_estimate(NetworkKind::Cnn, n, p, s, ci, co) != cnn_complexity(n, p, s, ci, co)) as usize;
        let glm = complexity_estimate(NetworkKind::Glm, n, p, s, co, co) - 3 * n;
        ratio_ok &= complexity_estimate(NetworkKind::Cnn, n, p, s, co, co) == s * glm;
    }
    check(
        mismatches == 0 && ratio_ok,
        format!("{mismatches} mismatches over 20 random tuples; CNN/GLM ratio equals S: {ratio_ok}"),
    )
}

fn timing_order() -> Outcome {
    let scaling = ScalingConfig {
        kinds: vec![NetworkKind::Glm, NetworkKind::Cnn],
        channels: vec![16],
        batch_sizes: vec![2, 8],
        timing_channels: vec![16],
        repeats: 2,
    };
    let report = scaling_report(&scaling, &DatasetConfig::default(), 0).map_err(|e| e.to_string())?;
    let mut ok = true;
    let mut parts = Vec::new();
    for b in [2, 8] {
        let glm = timing_of(&report, NetworkKind::Glm, 16, b).unwrap();
        let cnn = timing_of(&report, NetworkKind::Cnn, 16, b).unwrap();
        ok &= glm < cnn;
        parts.push(format!("batch {b}: GLM-16 {glm:.3} s vs CNN-16 {cnn:.3} s"));
    }
    check(ok, parts.join("; "))
}

fn run(id: usize, name: &str, f: impl FnOnce() -> Outcome) -> bool {
    let start = Instant::now();
    let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|e| {
        let msg = e
            .downcast_ref::<String>()
            .cloned()
            .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
            .unwrap_or_default();
        Err(format!("panicked: {msg}"))
    });
    let secs = start.elapsed().as_secs_f64();
    match outcome {
        Ok(detail) => {
            println!("PASS criterion {id:>2} ({name}): {detail} [{secs:.1} s]");
            true
        }
        Err(detail) => {
            println!("FAIL criterion {id:>2} ({name}): {detail} [{secs:.1} s]");
            false
        }
    }
}

fn main() {
    let mut results = Vec::new();
    results.push(run(1, "parameter counts", parameter_counts));
    results.push(run(2, "circulant spectrum", circulant_spectrum));
    results.push(run(3, "spectral / message-passing equivalence", spectral_equivalence));
    results.push(run(4, "gradient correctness", gradients));
    results.push(run(5, "permutation equivariance and receptive field", equivariance_and_reach));
    results.push(run(6, "tomography sanity", tomography));

    let cfg = desk_config();
    let t = Instant::now();
    let data = generate_dataset(&cfg.dataset);
    let data_seconds = t.elapsed().as_secs_f64();
    let runs = data.as_ref().map_err(|e| e.to_string()).and_then(|data| {
        let a = desk_run(&cfg, data).map_err(|e| e.to_string())?;
        let b = desk_run(&cfg, data).map_err(|e| e.to_string())?;
        Ok((a, b))
    });
    match (&data, &runs) {
        (Ok(data), Ok((a, b))) => {
            results.push(run(7, "desk-scale training", || training_smoke(a, data_seconds, b)));
            results.push(run(8, "angular-subsampling generalization", || generalization(a, &cfg, data)));
        }
        (_, Err(e)) => {
            results.push(run(7, "desk-scale training", || Err(e.clone())));
            results.push(run(8, "angular-subsampling generalization", || Err(e.clone())));
        }
        _ => unreachable!(),
    }
    results.push(run(9, "complexity counters", complexity));
    results.push(run(10, "training time ordering", timing_order));

    let passed = results.iter().filter(|&&r| r).count();
    println!("{passed}/{} criteria passed", results.len());
    if passed != results.len() {
        std::process::exit(1);
    }
}
