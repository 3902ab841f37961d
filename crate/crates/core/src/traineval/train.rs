use rand::seq::SliceRandom;
use serde::Serialize;

use super::config::{ExperimentConfig, TrainingConfig};
use super::dataset::Sample;
use crate::error::{Error, Result};
use crate::geomgraph::{AcquisitionGeometry, GeometryGraph};
use crate::ndcore::{mse_grad, mse_loss, seeded_rng, AdamConfig, AdamState, Parameters, Tensor};
use crate::netmodules::{GammaNet, MessagePassing, NetworkKind, SinogramNet};
use crate::tomosim::{Fbp, ReconGrid};

/// Sinogram network followed by a fixed FBP and the image network:
/// `image = gamma(FBP(net(sinogram)))`.
#[derive(Debug, Clone, PartialEq)]
pub struct Pipeline {
    pub net: SinogramNet,
    pub gamma: GammaNet,
}

impl Pipeline {
    pub fn init(cfg: &ExperimentConfig) -> Result<Self> {
        let seed = cfg.training.seed;
        Ok(Self {
            net: SinogramNet::init(cfg.network, seed)?,
            gamma: GammaNet::init(cfg.gamma, seed ^ 0x5eed_6a33)?,
        })
    }
}

impl Parameters for Pipeline {
    fn collect_tensors<'a>(&'a self, prefix: &str, out: &mut Vec<(String, &'a Tensor)>) {
        self.net.collect_tensors(&crate::ndcore::join_name(prefix, "net"), out);
        self.gamma.collect_tensors(&crate::ndcore::join_name(prefix, "gamma"), out);
    }

    fn collect_tensors_mut<'a>(&'a mut self, out: &mut Vec<&'a mut Tensor>) {
        self.net.collect_tensors_mut(out);
        self.gamma.collect_tensors_mut(out);
    }
}

/// Everything needed to run a pipeline on one acquisition geometry: the
/// graph-derived aggregation operator (GLM only) and the FBP operator.
#[derive(Debug, Clone)]
pub struct Operators {
    pub aggregator: Option<MessagePassing>,
    pub fbp: Fbp,
}

impl Operators {
    pub fn new(kind: NetworkKind, geometry: &AcquisitionGeometry, grid: ReconGrid) -> Result<Self> {
        let aggregator = match kind {
            NetworkKind::Glm => Some(MessagePassing::new(&GeometryGraph::from_geometry(geometry)?)?),
            NetworkKind::Cnn => None,
        };
        Ok(Self {
            aggregator,
            fbp: Fbp::new(geometry, grid)?,
        })
    }
}

fn as_net_input(sino: &Tensor) -> Result<Tensor> {
    let [n, p] = *sino.shape() else {
        return Err(Error::shape(format!("sinogram must be (n, p), got {:?}", sino.shape())));
    };
    sino.clone().reshape(&[1, n, p])
}

/// Reconstructed image `(H, W)` of one sinogram `(n, P)`.
pub fn reconstruct(pipe: &Pipeline, ops: &Operators, sino: &Tensor) -> Result<Tensor> {
    let y = pipe.net.forward(ops.aggregator.as_ref(), &as_net_input(sino)?)?;
    let [_, n, p] = *y.shape() else { unreachable!() };
    let img = ops.fbp.apply(&y.reshape(&[n, p])?)?;
    let [h, w] = *img.shape() else { unreachable!() };
    pipe.gamma.forward(&img.reshape(&[1, h, w])?)?.reshape(&[h, w])
}

/// Loss and parameter gradient of one sample, in [`Parameters::flat`] order.
pub fn pipeline_loss_grad(pipe: &Pipeline, ops: &Operators, sample: &Sample) -> Result<(f64, Vec<f64>)> {
    let (y, net_cache) = pipe.net.forward_cached(ops.aggregator.as_ref(), &as_net_input(&sample.sinogram)?)?;
    let [_, n, p] = *y.shape() else { unreachable!() };
    let img = ops.fbp.apply(&y.reshape(&[n, p])?)?;
    let [h, w] = *img.shape() else { unreachable!() };
    let (out, gamma_cache) = pipe.gamma.forward_cached(&img.reshape(&[1, h, w])?)?;
    let target = sample.image.clone().reshape(&[1, h, w])?;
    let loss = mse_loss(&out, &target)?;
    let d_out = mse_grad(&out, &target)?;
    let (d_img, g_gamma) = pipe.gamma.backward(&gamma_cache, &d_out)?;
    let d_y = ops.fbp.transpose(&d_img.reshape(&[h, w])?)?.reshape(&[1, n, p])?;
    let (_, g_net) = pipe.net.backward(ops.aggregator.as_ref(), &net_cache, &d_y)?;
    let mut grad = g_net.flat();
    grad.extend(g_gamma.flat());
    Ok((loss, grad))
}

/// Autoencoding loss `mse(net(y), y)` and its parameter gradient.
pub fn autoencode_loss_grad(net: &SinogramNet, mp: Option<&MessagePassing>, sino: &Tensor) -> Result<(f64, Vec<f64>)> {
    let y = as_net_input(sino)?;
    let (out, cache) = net.forward_cached(mp, &y)?;
    let loss = mse_loss(&out, &y)?;
    let (_, g) = net.backward(mp, &cache, &mse_grad(&out, &y)?)?;
    Ok((loss, g.flat()))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Mean training loss over the epoch's steps (`NaN` for epoch 0, which
    /// is the untrained reference point).
    pub train_loss: f64,
    pub val_loss: f64,
}

fn check_loss(loss: f64, epoch: usize, step: usize) -> Result<()> {
    if loss.is_finite() {
        Ok(())
    } else {
        Err(Error::Diverged { epoch, step, loss })
    }
}

/// Runs mini-batch Adam on `params` for `epochs` epochs. `loss_grad(i)`
/// returns the loss and gradient of training item `i`; the batch gradient is
/// the mean over the batch, accumulated in a fixed order.
fn run_epochs<P: Parameters>(
    params: &mut P,
    n_items: usize,
    cfg: &TrainingConfig,
    epochs: usize,
    shuffle_seed: u64,
    mut loss_grad: impl FnMut(&P, usize) -> Result<(f64, Vec<f64>)>,
    mut on_epoch: impl FnMut(&P, usize, f64) -> Result<()>,
) -> Result<()> {
    let mut adam = AdamState::new(AdamConfig::with_lr(cfg.lr), params.param_count());
    let mut order: Vec<usize> = (0..n_items).collect();
    let mut flat = params.flat();
    for epoch in 1..=epochs {
        order.shuffle(&mut seeded_rng(shuffle_seed.wrapping_add(epoch as u64)));
        let mut epoch_loss = 0.0;
        for (step, batch) in order.chunks(cfg.batch_size).enumerate() {
            let mut grad = vec![0.0; flat.len()];
            let mut batch_loss = 0.0;
            for &i in batch {
                let (loss, g) = loss_grad(params, i)?;
                check_loss(loss, epoch, step)?;
                batch_loss += loss;
                grad.iter_mut().zip(&g).for_each(|(a, b)| *a += b);
            }
            let inv = 1.0 / batch.len() as f64;
            grad.iter_mut().for_each(|g| *g *= inv);
            adam.step(&mut flat, &grad).map_err(|_| Error::Diverged {
                epoch,
                step,
                loss: batch_loss * inv,
            })?;
            params.set_flat(&flat)?;
            epoch_loss += batch_loss;
        }
        on_epoch(params, epoch, epoch_loss / n_items.max(1) as f64)?;
    }
    Ok(())
}

/// Sinogram-to-sinogram autoencoding on the training sinograms. Returns the
/// mean loss of each epoch.
pub fn pretrain_autoencode(
    net: &mut SinogramNet,
    geometry: &AcquisitionGeometry,
    train: &[Sample],
    cfg: &TrainingConfig,
) -> Result<Vec<f64>> {
    if cfg.pretrain_epochs == 0 || train.is_empty() {
        return Ok(Vec::new());
    }
    let mp = net.aggregator(Some(&GeometryGraph::from_geometry(geometry)?))?;
    let mut losses = Vec::with_capacity(cfg.pretrain_epochs);
    run_epochs(
        net,
        train.len(),
        cfg,
        cfg.pretrain_epochs,
        cfg.seed ^ 0x7072_6574,
        |net, i| autoencode_loss_grad(net, mp.as_ref(), &train[i].sinogram),
        |_, _, loss| {
            losses.push(loss);
            Ok(())
        },
    )?;
    Ok(losses)
}

/// Mean pipeline loss over `samples`.
pub fn evaluate_loss(pipe: &Pipeline, ops: &Operators, samples: &[Sample]) -> Result<f64> {
    let mut total = 0.0;
    for s in samples {
        let rec = reconstruct(pipe, ops, &s.sinogram)?;
        total += mse_loss(&rec, &s.image)?;
    }
    Ok(total / samples.len().max(1) as f64)
}

/// End-to-end training of `gamma(FBP(net(y)))` against the ground-truth
/// images. Returns the loss curve, starting with the untrained epoch 0.
pub fn train_pipeline(
    pipe: &mut Pipeline,
    geometry: &AcquisitionGeometry,
    grid: ReconGrid,
    train: &[Sample],
    val: &[Sample],
    cfg: &TrainingConfig,
) -> Result<Vec<EpochRecord>> {
    let ops = Operators::new(pipe.net.spec().kind, geometry, grid)?;
    let mut curve = vec![EpochRecord {
        epoch: 0,
        train_loss: f64::NAN,
        val_loss: evaluate_loss(pipe, &ops, val)?,
    }];
    if train.is_empty() {
        return Ok(curve);
    }
    run_epochs(
        pipe,
        train.len(),
        cfg,
        cfg.epochs,
        cfg.seed ^ 0x7472_6169,
        |pipe, i| pipeline_loss_grad(pipe, &ops, &train[i]),
        |pipe, epoch, train_loss| {
            let val_loss = evaluate_loss(pipe, &ops, val)?;
            check_loss(val_loss, epoch, 0)?;
            curve.push(EpochRecord {
                epoch,
                train_loss,
                val_loss,
            });
            Ok(())
        },
    )?;
    Ok(curve)
}
