//! Independent reference implementations shared by the integration tests and
//! the acceptance runner. Everything here is written densely and directly
//! from the definitions, without going through the library's fast paths.

#![allow(dead_code)]

use glmct::geomgraph::GeometryGraph;
use glmct::ndcore::Tensor;
use glmct::netmodules::{NetworkKind, NetworkSpec};
use nalgebra::{DMatrix, DVector};
use rand::Rng;

pub fn dense_adjacency(g: &GeometryGraph) -> DMatrix<f64> {
    let n = g.node_count();
    let mut w = DMatrix::zeros(n, n);
    for e in g.edges() {
        w[(e.i, e.j)] = e.weight;
        w[(e.j, e.i)] = e.weight;
    }
    w
}

/// `L = D - W`.
pub fn dense_laplacian(g: &GeometryGraph) -> DMatrix<f64> {
    let w = dense_adjacency(g);
    let d = DMatrix::from_diagonal(&DVector::from_iterator(w.nrows(), w.row_iter().map(|r| r.sum())));
    d - w
}

/// `D̃^{-1/2} (W + I) D̃^{-1/2}` with `D̃` the degree matrix of `W + I`.
pub fn dense_propagation(g: &GeometryGraph) -> DMatrix<f64> {
    let n = g.node_count();
    let wt = dense_adjacency(g) + DMatrix::identity(n, n);
    let inv_sqrt: Vec<f64> = wt.row_iter().map(|r| 1.0 / r.sum().sqrt()).collect();
    DMatrix::from_fn(n, n, |i, j| inv_sqrt[i] * wt[(i, j)] * inv_sqrt[j])
}

/// `Σ_k θ_k L^k x`, by Horner's rule on matrix-vector products.
pub fn poly_in_laplacian(l: &DMatrix<f64>, theta: &[f64], x: &[f64]) -> Vec<f64> {
    let x = DVector::from_column_slice(x);
    let mut acc = DVector::zeros(x.len());
    for &t in theta.iter().rev() {
        acc = l * acc + &x * t;
    }
    acc.iter().copied().collect()
}

/// Connected random graph: a random spanning tree plus extra random edges,
/// weights in `(0.05, 1]`.
pub fn random_graph<R: Rng>(n: usize, extra: usize, rng: &mut R) -> GeometryGraph {
    let mut edges = Vec::new();
    let mut seen = std::collections::HashSet::new();
    for v in 1..n {
        let u = rng.random_range(0..v);
        seen.insert((u, v));
        edges.push((u, v, rng.random_range(0.05..=1.0)));
    }
    for _ in 0..extra {
        let (a, b) = (rng.random_range(0..n), rng.random_range(0..n));
        let (u, v) = (a.min(b), a.max(b));
        if u != v && seen.insert((u, v)) {
            edges.push((u, v, rng.random_range(0.05..=1.0)));
        }
    }
    GeometryGraph::from_edges(n, &edges, false).expect("valid random graph")
}

pub fn random_tensor<R: Rng>(shape: &[usize], rng: &mut R) -> Tensor {
    let n = shape.iter().product();
    Tensor::from_vec(shape, (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
}

/// Multiplies every `(c, :, q)` column of `(c, n, p)` features by `m`.
pub fn apply_node_matrix(m: &DMatrix<f64>, x: &Tensor) -> Tensor {
    let [c, n, p] = *x.shape() else { panic!("rank 3 expected") };
    let mut out = vec![0.0; c * n * p];
    for ch in 0..c {
        for i in 0..n {
            for j in 0..n {
                for q in 0..p {
                    out[(ch * n + i) * p + q] += m[(i, j)] * x.data()[(ch * n + j) * p + q];
                }
            }
        }
    }
    Tensor::from_vec(x.shape(), out).unwrap()
}

/// Zero-padded "same" cross-correlation along the last axis:
/// `y[o, r, j] = b[o] + Σ_i Σ_k w[o, i, k] x[i, r, j + k - S/2]`.
pub fn conv1d_reference(w: &Tensor, b: &Tensor, x: &Tensor) -> Tensor {
    let [c_out, c_in, s] = *w.shape() else { panic!() };
    let [_, n, p] = *x.shape() else { panic!() };
    let mut y = vec![0.0; c_out * n * p];
    for o in 0..c_out {
        for r in 0..n {
            for j in 0..p {
                let mut acc = b.data()[o];
                for i in 0..c_in {
                    for k in 0..s {
                        let src = j as isize + k as isize - (s / 2) as isize;
                        if (0..p as isize).contains(&src) {
                            acc += w.data()[(o * c_in + i) * s + k] * x.data()[(i * n + r) * p + src as usize];
                        }
                    }
                }
                y[(o * n + r) * p + j] = acc;
            }
        }
    }
    Tensor::from_vec(&[c_out, n, p], y).unwrap()
}

/// Same as [`conv1d_reference`] over both spatial axes.
pub fn conv2d_reference(w: &Tensor, b: &Tensor, x: &Tensor) -> Tensor {
    let [c_out, c_in, s, _] = *w.shape() else { panic!() };
    let [_, n, p] = *x.shape() else { panic!() };
    let h = (s / 2) as isize;
    let mut y = vec![0.0; c_out * n * p];
    for o in 0..c_out {
        for r in 0..n {
            for j in 0..p {
                let mut acc = b.data()[o];
                for i in 0..c_in {
                    for ky in 0..s {
                        for kx in 0..s {
                            let (sr, sc) = (r as isize + ky as isize - h, j as isize + kx as isize - h);
                            if (0..n as isize).contains(&sr) && (0..p as isize).contains(&sc) {
                                acc += w.data()[((o * c_in + i) * s + ky) * s + kx]
                                    * x.data()[(i * n + sr as usize) * p + sc as usize];
                            }
                        }
                    }
                }
                y[(o * n + r) * p + j] = acc;
            }
        }
    }
    Tensor::from_vec(&[c_out, n, p], y).unwrap()
}

/// Parameter count written out per layer: each module holds two
/// convolutions `c_in -> c_out` and `c_out -> c_out`, each with bias; the
/// kernel has `S` taps (line) or `S²` taps (grid).
pub fn params_reference(kind: NetworkKind, c: u64, s: u64) -> u64 {
    let taps = match kind {
        NetworkKind::Glm => s,
        NetworkKind::Cnn => s * s,
    };
    let conv = |ci: u64, co: u64| ci * co * taps + co;
    let module = |ci: u64, co: u64| conv(ci, co) + conv(co, co);
    module(1, c) + module(c, c) + module(c, 1)
}

pub fn spec(kind: NetworkKind, c: usize) -> NetworkSpec {
    NetworkSpec::standard(kind, c)
}

/// Multiply-accumulate formulas for a single module.
pub fn glm_complexity(n: u64, p: u64, s: u64, ci: u64, co: u64) -> u64 {
    n * p * s * ci * co + 3 * n + n * p * s * co * co
}

pub fn cnn_complexity(n: u64, p: u64, s: u64, ci: u64, co: u64) -> u64 {
    n * p * s * s * ci * co + n * p * s * s * co * co
}

pub fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let den: f64 = b.iter().map(|y| y * y).sum::<f64>().sqrt().max(1e-300);
    num / den
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Network whose weights and biases are all positive, so that on a positive
/// input every ReLU is active and every connection carries signal.
pub fn positive_net(kind: NetworkKind, c: usize, seed: u64) -> glmct::netmodules::SinogramNet {
    use glmct::ndcore::Parameters;
    let mut net = glmct::netmodules::SinogramNet::init(spec(kind, c), seed).unwrap();
    let mut rng = glmct::ndcore::seeded_rng(seed);
    let flat: Vec<f64> = (0..net.param_count()).map(|_| rng.random_range(0.01..0.2)).collect();
    net.set_flat(&flat).unwrap();
    net
}
