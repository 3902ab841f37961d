//! Finite-difference checks of every hand-written backward pass, from single
//! operators up to the full reconstruction pipeline.

use rand::Rng;

use super::dataset::Sample;
use super::train::{pipeline_loss_grad, Operators, Pipeline};
use crate::error::Result;
use crate::geomgraph::{AcquisitionGeometry, BeamKind, GeometryGraph};
use crate::ndcore::{
    activation_signature, grad_check, mse_grad, mse_loss, relu, relu_backward, seeded_rng, Conv1dKernel,
    Conv2dKernel, GradCheckOptions, GradCheckReport, Parameters, Probe, Tensor,
};
use crate::netmodules::{GammaNet, GammaSpec, MessagePassing, NetworkKind, NetworkSpec, SinoModule, SinogramNet};
use crate::tomosim::{Fbp, ReconGrid};

fn random_tensor<R: Rng>(shape: &[usize], rng: &mut R) -> Tensor {
    let n = shape.iter().product();
    Tensor::from_vec(shape, (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()).expect("finite values")
}

fn split(point: &[f64], at: usize, shape: &[usize]) -> (Vec<f64>, Tensor) {
    let x = Tensor::from_vec(shape, point[at..].to_vec()).expect("finite probe");
    (point[..at].to_vec(), x)
}

fn with_params<P: Parameters + Clone>(base: &P, flat: &[f64]) -> P {
    let mut p = base.clone();
    p.set_flat(flat).expect("probe point has the parameter length");
    p
}

/// Checks `L = <g(params, x), r>` with respect to parameters and input.
/// `forward` returns the output and the ReLU signature; `backward` returns
/// `(dx, parameter gradient)` for the upstream gradient `r`.
fn check_layer<P: Parameters + Clone>(
    label: &str,
    params: &P,
    x: &Tensor,
    r: &Tensor,
    forward: impl Fn(&P, &Tensor) -> Result<(Tensor, u64)>,
    backward: impl Fn(&P, &Tensor, &Tensor) -> Result<(Tensor, P)>,
) -> Result<GradCheckReport> {
    let (dx, g) = backward(params, x, r)?;
    let mut point = params.flat();
    let n_params = point.len();
    point.extend_from_slice(x.data());
    let mut analytic = g.flat();
    analytic.extend_from_slice(dx.data());
    Ok(grad_check(
        label,
        &point,
        &analytic,
        |pt| {
            let (flat, xi) = split(pt, n_params, x.shape());
            let (out, signature) = forward(&with_params(params, &flat), &xi).expect("probe forward");
            Probe {
                loss: out.dot(r).expect("same shape"),
                signature,
            }
        },
        GradCheckOptions::default(),
    ))
}

/// Runs the full suite. Sizes are small so that the whole suite finishes in
/// seconds.
pub fn grad_check_suite(seed: u64) -> Result<Vec<GradCheckReport>> {
    let mut rng = seeded_rng(seed);
    let mut reports = Vec::new();

    // conv1d
    let k = Conv1dKernel::init_uniform(3, 2, 5, &mut rng)?;
    let x = random_tensor(&[2, 4, 7], &mut rng);
    let r = random_tensor(&[3, 4, 7], &mut rng);
    reports.push(check_layer(
        "conv1d",
        &k,
        &x,
        &r,
        |k, x| Ok((k.forward(x)?, 0)),
        |k, x, r| k.backward(x, r),
    )?);

    // conv2d
    let k = Conv2dKernel::init_uniform(2, 3, 3, &mut rng)?;
    let x = random_tensor(&[3, 5, 6], &mut rng);
    let r = random_tensor(&[2, 5, 6], &mut rng);
    reports.push(check_layer(
        "conv2d",
        &k,
        &x,
        &r,
        |k, x| Ok((k.forward(x)?, 0)),
        |k, x, r| k.backward(x, r),
    )?);

    // relu
    let z = random_tensor(&[40], &mut rng);
    let r = random_tensor(&[40], &mut rng);
    let dz = relu_backward(&z, &r)?;
    reports.push(grad_check(
        "relu",
        z.data(),
        dz.data(),
        |pt| {
            let zi = Tensor::from_vec(&[40], pt.to_vec()).expect("finite");
            Probe {
                loss: relu(&zi).dot(&r).expect("same shape"),
                signature: activation_signature([&zi]),
            }
        },
        GradCheckOptions::default(),
    ));

    // mse
    let a = random_tensor(&[3, 5], &mut rng);
    let b = random_tensor(&[3, 5], &mut rng);
    let ga = mse_grad(&a, &b)?;
    reports.push(grad_check(
        "mse",
        a.data(),
        ga.data(),
        |pt| Probe::smooth(mse_loss(&Tensor::from_vec(&[3, 5], pt.to_vec()).expect("finite"), &b).expect("shape")),
        GradCheckOptions::default(),
    ));

    // message passing, on an open path with cosine weights
    let angles: Vec<f64> = (0..7).map(|i| 0.3 * i as f64).collect();
    let graph = GeometryGraph::from_node_angles(&angles, false)?;
    let mp = MessagePassing::new(&graph)?;
    let x = random_tensor(&[2, 7, 3], &mut rng);
    let r = random_tensor(&[2, 7, 3], &mut rng);
    let dx = mp.backward(&r)?;
    reports.push(grad_check(
        "message_pass",
        x.data(),
        dx.data(),
        |pt| {
            let xi = Tensor::from_vec(&[2, 7, 3], pt.to_vec()).expect("finite");
            Probe::smooth(mp.forward(&xi).expect("shape").dot(&r).expect("shape"))
        },
        GradCheckOptions::default(),
    ));

    // single modules
    let cycle = GeometryGraph::unit_cycle(6)?;
    let mp6 = MessagePassing::new(&cycle)?;
    let glm = SinoModule::init_line(2, 3, 3, &mut rng)?;
    let cnn = SinoModule::init_grid(2, 3, 3, &mut rng)?;
    let x = random_tensor(&[2, 6, 5], &mut rng);
    let r = random_tensor(&[3, 6, 5], &mut rng);
    for (label, module, agg) in [("glm_module", &glm, Some(&mp6)), ("cnn_module", &cnn, None)] {
        reports.push(check_layer(
            label,
            module,
            &x,
            &r,
            |m, x| {
                let (out, c) = m.forward(agg, x)?;
                Ok((out, activation_signature([&c.z0, &c.z1])))
            },
            |m, x, r| {
                let (_, c) = m.forward(agg, x)?;
                m.backward(agg, &c, r)
            },
        )?);
    }

    // full stacks
    let graph8 = GeometryGraph::unit_cycle(8)?;
    let mp8 = MessagePassing::new(&graph8)?;
    for kind in [NetworkKind::Glm, NetworkKind::Cnn] {
        let net = SinogramNet::init(NetworkSpec::standard(kind, 4), rng.random())?;
        let agg = net.aggregator(Some(&graph8))?.map(|_| &mp8);
        let x = random_tensor(&[1, 8, 9], &mut rng).map(f64::abs);
        let r = random_tensor(&[1, 8, 9], &mut rng);
        reports.push(check_layer(
            &format!("{}_stack", net.spec().name()),
            &net,
            &x,
            &r,
            |n, x| {
                let (out, c) = n.forward_cached(agg, x)?;
                Ok((out, activation_signature(c.pre_activations())))
            },
            |n, x, r| {
                let (_, c) = n.forward_cached(agg, x)?;
                n.backward(agg, &c, r)
            },
        )?);
    }

    // image network
    let gamma = GammaNet::init(GammaSpec { channels: 3 }, rng.random())?;
    let x = random_tensor(&[1, 6, 7], &mut rng);
    let r = random_tensor(&[1, 6, 7], &mut rng);
    reports.push(check_layer(
        "gamma",
        &gamma,
        &x,
        &r,
        |g, x| {
            let (out, c) = g.forward_cached(x)?;
            Ok((out, activation_signature(c.pre_activations())))
        },
        |g, x, r| {
            let (_, c) = g.forward_cached(x)?;
            g.backward(&c, r)
        },
    )?);

    // FBP as a linear map: d<FBP(s), r>/ds = FBP^T(r)
    let geometry = AcquisitionGeometry::circular(8, 24, BeamKind::Parallel, f64::INFINITY, 2.0 / 16.0)?;
    let grid = ReconGrid::unit(16, 16);
    let fbp = Fbp::new(&geometry, grid)?;
    let s = random_tensor(&[8, 24], &mut rng);
    let r = random_tensor(&[16, 16], &mut rng);
    let ds = fbp.transpose(&r)?;
    reports.push(grad_check(
        "fbp",
        s.data(),
        ds.data(),
        |pt| {
            let si = Tensor::from_vec(&[8, 24], pt.to_vec()).expect("finite");
            Probe::smooth(fbp.apply(&si).expect("shape").dot(&r).expect("shape"))
        },
        GradCheckOptions::default(),
    ));

    // whole pipeline, parameters only
    let pipe = Pipeline {
        net: SinogramNet::init(NetworkSpec::standard(NetworkKind::Glm, 2), rng.random())?,
        gamma: GammaNet::init(GammaSpec { channels: 2 }, rng.random())?,
    };
    let ops = Operators::new(NetworkKind::Glm, &geometry, grid)?;
    let sample = Sample {
        image: random_tensor(&[16, 16], &mut rng).map(f64::abs),
        sinogram: random_tensor(&[8, 24], &mut rng).map(f64::abs),
    };
    let (_, grad) = pipeline_loss_grad(&pipe, &ops, &sample)?;
    reports.push(grad_check(
        "pipeline",
        &pipe.flat(),
        &grad,
        |pt| {
            let p = with_params(&pipe, pt);
            let (loss, signature) = pipeline_probe(&p, &ops, &sample).expect("probe forward");
            Probe { loss, signature }
        },
        GradCheckOptions::default(),
    ));

    Ok(reports)
}

fn pipeline_probe(pipe: &Pipeline, ops: &Operators, sample: &Sample) -> Result<(f64, u64)> {
    let [n, p] = *sample.sinogram.shape() else { unreachable!() };
    let y = sample.sinogram.clone().reshape(&[1, n, p])?;
    let (out, net_cache) = pipe.net.forward_cached(ops.aggregator.as_ref(), &y)?;
    let img = ops.fbp.apply(&out.reshape(&[n, p])?)?;
    let [h, w] = *img.shape() else { unreachable!() };
    let (rec, gamma_cache) = pipe.gamma.forward_cached(&img.reshape(&[1, h, w])?)?;
    let loss = mse_loss(&rec, &sample.image.clone().reshape(&[1, h, w])?)?;
    let signature = activation_signature(net_cache.pre_activations().chain(gamma_cache.pre_activations()));
    Ok((loss, signature))
}
