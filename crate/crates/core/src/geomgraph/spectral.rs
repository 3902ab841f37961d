//! Spectral view of graph convolution.
//!
//! Message-passing networks never diagonalise the Laplacian; the routines
//! here exist to check the polynomial/message-passing path against the
//! graph Fourier definition `U g(Λ) Uᴴ x`.

use std::f64::consts::TAU;

use nalgebra::{DVector, SymmetricEigen};
use num_complex::Complex64;

use super::graph::GeometryGraph;
use crate::error::{Error, Result};

/// Largest graph handled by the dense eigensolver path.
pub const MAX_DENSE_EIGEN_NODES: usize = 1024;

/// Closed-form eigendecomposition of the Laplacian of the unit-weight cycle
/// `C_n`, a circulant matrix with associated polynomial `2 - (x + x^{n-1})`.
#[derive(Debug, Clone)]
pub struct CirculantSpectrum {
    n: usize,
    eigenvalues: Vec<f64>,
    /// Row-major `n x n`; row `j` is `u_j`.
    eigenvectors: Vec<Complex64>,
}

impl CirculantSpectrum {
    pub fn new(n: usize) -> Result<Self> {
        if n < 3 {
            return Err(Error::Graph(format!("circulant spectrum needs n >= 3, got {n}")));
        }
        let root = |k: usize| Complex64::from_polar(1.0, TAU * (k % n) as f64 / n as f64);
        // λ_j = f(w^j) with f(x) = 2 - (x + x^{n-1}); exponents reduced mod n.
        let eigenvalues = (0..n)
            .map(|j| (Complex64::new(2.0, 0.0) - (root(j) + root(j * (n - 1)))).re)
            .collect();
        let scale = (n as f64).sqrt().recip();
        let mut eigenvectors = Vec::with_capacity(n * n);
        for j in 0..n {
            eigenvectors.extend((0..n).map(|k| root(j * k) * scale));
        }
        Ok(Self {
            n,
            eigenvalues,
            eigenvectors,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn eigenvector(&self, j: usize) -> &[Complex64] {
        &self.eigenvectors[j * self.n..(j + 1) * self.n]
    }

    /// `Σ_j u_j g(λ_j) ⟨u_j, x⟩`.
    pub fn filter(&self, filter: &SpectralFilter, x: &[f64]) -> Vec<f64> {
        let mut out = vec![Complex64::new(0.0, 0.0); self.n];
        for j in 0..self.n {
            let u = self.eigenvector(j);
            let coeff: Complex64 = u.iter().zip(x).map(|(uk, &xk)| uk.conj() * xk).sum();
            let scaled = coeff * filter.evaluate(self.eigenvalues[j]);
            for (o, uk) in out.iter_mut().zip(u) {
                *o += uk * scaled;
            }
        }
        out.into_iter().map(|c| c.re).collect()
    }
}

/// Polynomial spectral response `g(λ) = Σ_k θ_k λ^k`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralFilter {
    coefficients: Vec<f64>,
}

impl SpectralFilter {
    pub fn new(coefficients: Vec<f64>) -> Result<Self> {
        if coefficients.is_empty() {
            return Err(Error::arg("spectral filter needs at least one coefficient"));
        }
        if coefficients.iter().any(|c| !c.is_finite()) {
            return Err(Error::NonFinite("spectral filter coefficient".into()));
        }
        Ok(Self { coefficients })
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    pub fn order(&self) -> usize {
        self.coefficients.len() - 1
    }

    pub fn evaluate(&self, lambda: f64) -> f64 {
        self.coefficients.iter().rev().fold(0.0, |acc, &c| acc * lambda + c)
    }
}

/// Numeric eigendecomposition of the (dense) graph Laplacian.
pub fn laplacian_eigen(gr: &GeometryGraph) -> Result<SymmetricEigen<f64, nalgebra::Dyn>> {
    let n = gr.node_count();
    if n > MAX_DENSE_EIGEN_NODES {
        return Err(Error::Eigen(format!(
            "{n} nodes exceeds the dense eigensolver limit of {MAX_DENSE_EIGEN_NODES}"
        )));
    }
    let dense = gr.laplacian().to_dense();
    let eig = SymmetricEigen::try_new(dense, 1e-14, 10_000)
        .ok_or_else(|| Error::Eigen(format!("no convergence on a {n}-node graph")))?;
    if eig.eigenvalues.iter().any(|v| !v.is_finite())
        || eig.eigenvectors.iter().any(|v| !v.is_finite())
    {
        return Err(Error::Eigen("non-finite eigenpairs".into()));
    }
    Ok(eig)
}

/// Spectral graph convolution `U g(Λ) Uᴴ x`. Uses the closed-form Fourier
/// basis for unit-weight cycles and a dense eigensolver otherwise.
pub fn spectral_convolve(gr: &GeometryGraph, filter: &SpectralFilter, x: &[f64]) -> Result<Vec<f64>> {
    let n = gr.node_count();
    if x.len() != n {
        return Err(Error::shape(format!("signal has {} entries, graph has {n} nodes", x.len())));
    }
    if gr.is_unit_cycle() {
        return Ok(CirculantSpectrum::new(n)?.filter(filter, x));
    }
    let eig = laplacian_eigen(gr)?;
    let u = &eig.eigenvectors;
    let xv = DVector::from_column_slice(x);
    let mut coeffs = u.tr_mul(&xv);
    for (c, &lambda) in coeffs.iter_mut().zip(eig.eigenvalues.iter()) {
        *c *= filter.evaluate(lambda);
    }
    Ok((u * coeffs).as_slice().to_vec())
}
