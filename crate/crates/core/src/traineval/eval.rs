use std::time::Instant;

use serde::Serialize;

use super::config::{DatasetConfig, ScalingConfig};
use super::dataset::{make_sample, Sample};
use super::metrics::{mean_std, psnr, ssim};
use super::train::{pipeline_loss_grad, reconstruct, Operators, Pipeline};
use crate::error::{Error, Result};
use crate::geomgraph::AcquisitionGeometry;
use crate::ndcore::{AdamConfig, AdamState, Parameters};
use crate::netmodules::{count_params, memory_estimate, GammaNet, NetworkKind, NetworkSpec, SinogramNet};
use crate::tomosim::{ReconGrid, Sinogram};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SampleMetrics {
    pub psnr: f64,
    pub ssim: f64,
}

/// PSNR (peak = maximum of the ground truth) and SSIM of each
/// reconstruction against its ground truth.
pub fn evaluate(pipe: &Pipeline, ops: &Operators, samples: &[Sample]) -> Result<Vec<SampleMetrics>> {
    samples
        .iter()
        .map(|s| {
            let rec = reconstruct(pipe, ops, &s.sinogram)?;
            let peak = s.image.data().iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            Ok(SampleMetrics {
                psnr: psnr(&rec, &s.image, peak)?,
                ssim: ssim(&rec, &s.image)?,
            })
        })
        .collect()
}

/// One row of the generalisation table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub network: String,
    pub c: usize,
    pub factor: usize,
    pub psnr_mean: f64,
    pub psnr_std: f64,
    pub ssim_mean: f64,
    pub ssim_std: f64,
    pub params: u64,
}

/// Evaluates a trained pipeline on angularly subsampled test sinograms,
/// without retraining. For each factor the geometry is subsampled, the GLM
/// graph and the FBP are rebuilt for it, and the CNN sees the reduced rows.
pub fn generalization_sweep(
    pipe: &Pipeline,
    geometry: &AcquisitionGeometry,
    grid: ReconGrid,
    test: &[Sample],
    factors: &[usize],
) -> Result<Vec<SweepRow>> {
    let spec = *pipe.net.spec();
    factors
        .iter()
        .map(|&factor| {
            let sub_geometry = geometry.subsample(factor)?;
            let ops = Operators::new(spec.kind, &sub_geometry, grid)?;
            let sub: Vec<Sample> = test
                .iter()
                .map(|s| {
                    let sino = Sinogram::new(s.sinogram.clone(), geometry.clone())?.subsample(factor)?;
                    Ok(Sample {
                        image: s.image.clone(),
                        sinogram: sino.into_data(),
                    })
                })
                .collect::<Result<_>>()?;
            let m = evaluate(pipe, &ops, &sub)?;
            let (psnr_mean, psnr_std) = mean_std(&m.iter().map(|r| r.psnr).collect::<Vec<_>>());
            let (ssim_mean, ssim_std) = mean_std(&m.iter().map(|r| r.ssim).collect::<Vec<_>>());
            Ok(SweepRow {
                network: spec.kind.to_string(),
                c: spec.channels,
                factor,
                psnr_mean,
                psnr_std,
                ssim_mean,
                ssim_std,
                params: count_params(&spec),
            })
        })
        .collect()
}

/// PSNR and SSIM drop between the first and the last factor of a sweep.
pub fn sweep_drop(rows: &[SweepRow]) -> Option<(f64, f64)> {
    let (first, last) = (rows.first()?, rows.last()?);
    Some((first.psnr_mean - last.psnr_mean, first.ssim_mean - last.ssim_mean))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScalingRow {
    pub network: String,
    pub c: usize,
    pub params: u64,
    pub memory_bytes: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TimingRow {
    pub network: String,
    pub c: usize,
    pub batch_size: usize,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScalingReport {
    pub sizes: Vec<ScalingRow>,
    pub timings: Vec<TimingRow>,
}

/// Wall-clock seconds of one Adam step of the full pipeline on `batch`.
pub fn time_training_step(pipe: &Pipeline, ops: &Operators, batch: &[Sample]) -> Result<f64> {
    let mut pipe = pipe.clone();
    let mut flat = pipe.flat();
    let mut adam = AdamState::new(AdamConfig::default(), flat.len());
    let start = Instant::now();
    let mut grad = vec![0.0; flat.len()];
    for s in batch {
        let (_, g) = pipeline_loss_grad(&pipe, ops, s)?;
        grad.iter_mut().zip(&g).for_each(|(a, b)| *a += b / batch.len() as f64);
    }
    adam.step(&mut flat, &grad)?;
    pipe.set_flat(&flat)?;
    Ok(start.elapsed().as_secs_f64())
}

/// Parameter counts, memory estimates and measured batch training times.
pub fn scaling_report(scaling: &ScalingConfig, dataset: &DatasetConfig, seed: u64) -> Result<ScalingReport> {
    let geometry = dataset.geometry()?;
    let mut sizes = Vec::new();
    for &kind in &scaling.kinds {
        for &c in &scaling.channels {
            let spec = NetworkSpec::standard(kind, c);
            sizes.push(ScalingRow {
                network: kind.to_string(),
                c,
                params: count_params(&spec),
                memory_bytes: memory_estimate(&spec, geometry.n_views(), geometry.detector_pixels()),
            });
        }
    }
    let max_batch = scaling.batch_sizes.iter().copied().max().unwrap_or(0);
    let samples = (0..max_batch)
        .map(|i| make_sample(dataset, &geometry, seed.wrapping_add(i as u64)))
        .collect::<Result<Vec<_>>>()?;
    let mut timings = Vec::new();
    for &c in &scaling.timing_channels {
        for &kind in &scaling.kinds {
            let pipe = Pipeline {
                net: SinogramNet::init(NetworkSpec::standard(kind, c), seed)?,
                gamma: GammaNet::init(Default::default(), seed)?,
            };
            let ops = Operators::new(kind, &geometry, dataset.grid())?;
            for &b in &scaling.batch_sizes {
                let mut best = f64::INFINITY;
                for _ in 0..scaling.repeats {
                    best = best.min(time_training_step(&pipe, &ops, &samples[..b])?);
                }
                timings.push(TimingRow {
                    network: kind.to_string(),
                    c,
                    batch_size: b,
                    seconds: best,
                });
            }
        }
    }
    Ok(ScalingReport { sizes, timings })
}

/// Looks up a timing entry.
pub fn timing_of(report: &ScalingReport, kind: NetworkKind, c: usize, batch: usize) -> Option<f64> {
    report
        .timings
        .iter()
        .find(|t| t.network == kind.to_string() && t.c == c && t.batch_size == batch)
        .map(|t| t.seconds)
}

/// Serialises rows as CSV with a header line.
pub fn to_csv<T: Serialize>(rows: &[T]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).map_err(|e| Error::arg(format!("csv: {e}")))?;
    }
    w.into_inner().map_err(|e| Error::arg(format!("csv: {e}")))
}
