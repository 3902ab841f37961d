mod common;

use std::f64::consts::TAU;

use common::*;
use glmct::geomgraph::{
    laplacian_eigen, spectral_convolve, AcquisitionGeometry, BeamKind, CirculantSpectrum, GeometryGraph,
    SpectralFilter,
};
use glmct::ndcore::seeded_rng;
use nalgebra::{DMatrix, SymmetricEigen};
use proptest::prelude::*;

fn parallel(n: usize) -> AcquisitionGeometry {
    AcquisitionGeometry::circular(n, 8, BeamKind::Parallel, f64::INFINITY, 0.1).unwrap()
}

#[test]
fn full_rotation_graph_is_weighted_cycle() {
    for n in [5, 7, 90, 360] {
        let g = GeometryGraph::from_geometry(&parallel(n)).unwrap();
        assert!(g.cyclic());
        assert_eq!(g.edges().len(), n);
        let w = (TAU / n as f64).cos();
        for i in 0..n {
            assert!((g.weight(i, (i + 1) % n) - w).abs() < 1e-12, "n={n} i={i}");
            assert_eq!(g.neighbors(i).len(), 2);
        }
    }
}

#[test]
fn non_divisor_subsampling_opens_the_cycle() {
    let geom = parallel(90).subsample(7).unwrap();
    assert_eq!(geom.n_views(), 12);
    assert!(!geom.full_rotation());
    let g = GeometryGraph::from_geometry(&geom).unwrap();
    assert!(!g.cyclic());
    assert_eq!(g.edges().len(), 11);
    assert_eq!(g.hop_distances(0)[11], 11);

    let geom = parallel(90).subsample(9).unwrap();
    assert!(geom.full_rotation());
    assert_eq!(GeometryGraph::from_geometry(&geom).unwrap().edges().len(), 10);
}

#[test]
fn quarter_turn_gaps_rejected() {
    // 4 views are exactly a quarter turn apart: cos = 0
    assert!(GeometryGraph::from_geometry(&parallel(4)).is_err());
    assert!(GeometryGraph::from_node_angles(&[0.0, 2.0], false).is_err());
}

#[test]
fn circulant_spectrum_matches_dense_eigensolver() {
    for n in [3, 4, 5, 16, 33, 128] {
        let spectrum = CirculantSpectrum::new(n).unwrap();
        let mut closed: Vec<f64> = (0..n).map(|j| 2.0 - 2.0 * (TAU * j as f64 / n as f64).cos()).collect();
        let mut ours = spectrum.eigenvalues().to_vec();
        let eig = SymmetricEigen::new(dense_laplacian(&GeometryGraph::unit_cycle(n).unwrap()));
        let mut dense: Vec<f64> = eig.eigenvalues.iter().copied().collect();
        for v in [&mut closed, &mut ours, &mut dense] {
            v.sort_by(f64::total_cmp);
        }
        assert!(max_abs_diff(&ours, &closed) < 1e-12, "n={n}");
        assert!(max_abs_diff(&dense, &closed) < 1e-9, "n={n}");

        // each Fourier vector is an eigenvector of the dense Laplacian
        let l = dense_laplacian(&GeometryGraph::unit_cycle(n).unwrap());
        for j in 0..n {
            let u = spectrum.eigenvector(j);
            for r in 0..n {
                let lu: num_complex::Complex64 = (0..n).map(|c| u[c] * l[(r, c)]).sum();
                assert!((lu - u[r] * spectrum.eigenvalues()[j]).norm() < 1e-10);
            }
        }
    }
}

#[test]
fn spectral_filter_on_cycle_matches_polynomial_in_l() {
    let mut rng = seeded_rng(4);
    for n in [3, 8, 31] {
        let g = GeometryGraph::unit_cycle(n).unwrap();
        let l = dense_laplacian(&g);
        let theta: Vec<f64> = (0..4).map(|_| rand::Rng::random_range(&mut rng, -1.0..1.0)).collect();
        let x: Vec<f64> = (0..n).map(|_| rand::Rng::random_range(&mut rng, -1.0..1.0)).collect();
        let ours = spectral_convolve(&g, &SpectralFilter::new(theta.clone()).unwrap(), &x).unwrap();
        assert!(max_abs_diff(&ours, &poly_in_laplacian(&l, &theta, &x)) < 1e-9);
    }
}

#[test]
fn eigensolver_refuses_huge_graphs() {
    assert!(laplacian_eigen(&GeometryGraph::unit_cycle(2000).unwrap()).is_err());
    assert!(laplacian_eigen(&GeometryGraph::unit_cycle(1000).unwrap()).is_ok());
}

#[test]
fn propagation_spectrum_in_unit_interval() {
    let mut rng = seeded_rng(8);
    for n in [2, 5, 20, 40] {
        let g = random_graph(n, n, &mut rng);
        let p = g.normalized_propagation().unwrap();
        assert!(p.is_symmetric(1e-15));
        let eig = SymmetricEigen::new(p.to_dense());
        let max = eig.eigenvalues.max();
        assert!((max - 1.0).abs() < 1e-10, "top eigenvalue {max}");
        assert!(eig.eigenvalues.min() > -1.0 - 1e-12);
    }
}

#[test]
fn laplacian_spectral_ranges() {
    // unnormalised cycle Laplacian reaches 4; the normalised one stays in [0, 2]
    let cycle = GeometryGraph::unit_cycle(16).unwrap();
    let l = SymmetricEigen::new(cycle.laplacian().to_dense()).eigenvalues;
    assert!((l.max() - 4.0).abs() < 1e-12);
    let mut rng = seeded_rng(10);
    for g in [cycle, random_graph(25, 30, &mut rng)] {
        let nl = SymmetricEigen::new(g.normalized_laplacian().unwrap().to_dense()).eigenvalues;
        assert!(nl.min() > -1e-12 && nl.max() < 2.0 + 1e-12);
    }
}

#[test]
fn normalized_laplacian_definition() {
    let mut rng = seeded_rng(9);
    let g = random_graph(12, 10, &mut rng);
    let w = dense_adjacency(&g);
    let d: Vec<f64> = w.row_iter().map(|r| r.sum()).collect();
    let expect = DMatrix::from_fn(12, 12, |i, j| if i == j { 1.0 } else { 0.0 } - w[(i, j)] / (d[i] * d[j]).sqrt());
    assert!((g.normalized_laplacian().unwrap().to_dense() - expect).amax() < 1e-14);
}

fn graph_strategy() -> impl Strategy<Value = (GeometryGraph, u64)> {
    (2usize..40, 0usize..30, any::<u64>()).prop_map(|(n, extra, seed)| {
        let mut rng = seeded_rng(seed);
        (random_graph(n, extra, &mut rng), seed)
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn laplacian_matches_dense((g, _) in graph_strategy()) {
        let sparse = g.laplacian().to_dense();
        prop_assert!((sparse.clone() - dense_laplacian(&g)).amax() < 1e-14);
        // rows sum to zero, positive semidefinite
        for r in sparse.row_iter() {
            prop_assert!(r.sum().abs() < 1e-12);
        }
        prop_assert!(SymmetricEigen::new(sparse).eigenvalues.min() > -1e-10);
    }

    #[test]
    fn propagation_matches_dense((g, _) in graph_strategy()) {
        let p = g.normalized_propagation().unwrap().to_dense();
        prop_assert!((p - dense_propagation(&g)).amax() < 1e-14);
    }

    #[test]
    fn spectral_matches_polynomial((g, seed) in graph_strategy(), k in 0usize..5) {
        let mut rng = seeded_rng(seed ^ 1);
        let theta: Vec<f64> = (0..=k).map(|_| rand::Rng::random_range(&mut rng, -1.0..1.0)).collect();
        let x: Vec<f64> = (0..g.node_count()).map(|_| rand::Rng::random_range(&mut rng, -1.0..1.0)).collect();
        let ours = spectral_convolve(&g, &SpectralFilter::new(theta.clone()).unwrap(), &x).unwrap();
        let oracle = poly_in_laplacian(&dense_laplacian(&g), &theta, &x);
        let scale = oracle.iter().fold(1.0f64, |m, v| m.max(v.abs()));
        prop_assert!(max_abs_diff(&ours, &oracle) < 1e-8 * scale);
    }

    #[test]
    fn permutation_conjugates_laplacian((g, seed) in graph_strategy()) {
        let n = g.node_count();
        let mut perm: Vec<usize> = (0..n).collect();
        rand::seq::SliceRandom::shuffle(perm.as_mut_slice(), &mut seeded_rng(seed));
        let pg = g.permuted(&perm).unwrap();
        let (l, pl) = (g.laplacian().to_dense(), pg.laplacian().to_dense());
        for i in 0..n {
            for j in 0..n {
                prop_assert!((pl[(perm[i], perm[j])] - l[(i, j)]).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn dump_round_trips((g, _) in graph_strategy()) {
        let back = GeometryGraph::from_dump(&g.to_dump()).unwrap();
        prop_assert_eq!(back.edges(), g.edges());
        prop_assert_eq!(back.cyclic(), g.cyclic());
    }

    #[test]
    fn relabelled_angles_give_relabelled_graph(n in 3usize..30, seed in any::<u64>()) {
        let step = TAU / n as f64;
        let angles: Vec<f64> = (0..n).map(|i| i as f64 * step).collect();
        let mut perm: Vec<usize> = (0..n).collect();
        rand::seq::SliceRandom::shuffle(perm.as_mut_slice(), &mut seeded_rng(seed));
        let mut shuffled = vec![0.0; n];
        for i in 0..n {
            shuffled[perm[i]] = angles[i];
        }
        let Ok(g) = GeometryGraph::from_node_angles(&angles, true) else { return Ok(()) };
        let h = GeometryGraph::from_node_angles(&shuffled, true).unwrap();
        let pg = g.permuted(&perm).unwrap();
        prop_assert_eq!(h.edges(), pg.edges());
    }

    #[test]
    fn subsample_keeps_every_factor_th_view(n in 3usize..400, f in 1usize..12) {
        let geom = parallel(n);
        match geom.subsample(f) {
            Ok(sub) => {
                prop_assert_eq!(sub.n_views(), n / f);
                prop_assert_eq!(sub.full_rotation(), n % f == 0);
                for (i, a) in sub.angles().iter().enumerate() {
                    prop_assert_eq!(*a, geom.angles()[i * f]);
                }
            }
            Err(_) => prop_assert!(n / f == 0),
        }
    }
}
