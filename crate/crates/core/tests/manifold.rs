mod common;

use std::f64::consts::TAU;

use common::{affine_oracle, brute_neighbours, cloud, faer_eigen};

use manrom::linalg::subspace_angle;
use manrom::manifold::{
    build_graph, correlation_dimension, global_linearise, lem_embed, lle_embed, lle_weights, local_linearise, nearest_in_reduced,
    GraphMethod,
};
use manrom::Error;
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn line_graph_examples() {
    let x = DMatrix::from_row_slice(1, 3, &[0.0, 1.0, 3.0]);
    let g = build_graph(&x, GraphMethod::SymmetricKnn { k: 1 }, None).unwrap();
    assert_eq!(g.neighbors(0), vec![1]);
    assert_eq!(g.neighbors(1), vec![0, 2]);
    assert_eq!(g.neighbors(2), vec![1]);
    assert!(matches!(
        build_graph(&x, GraphMethod::MutualKnn { k: 1 }, None),
        Err(Error::DisconnectedGraph { components: 2 })
    ));
    assert!(matches!(build_graph(&x, GraphMethod::EpsBall { eps: 1.5 }, None), Err(Error::DisconnectedGraph { .. })));
    let e = build_graph(&x, GraphMethod::EpsBall { eps: 2.5 }, Some(2.0)).unwrap();
    assert_eq!(e.degrees(), vec![1, 2, 1]);
    assert!((e.weights[(1, 2)] - (-2.0f64).exp()).abs() < 1e-15);
    assert!((e.weights[(0, 1)] - (-0.5f64).exp()).abs() < 1e-15);
    assert!(build_graph(&x, GraphMethod::SymmetricKnn { k: 3 }, None).is_err());
    assert!(build_graph(&x, GraphMethod::SymmetricKnn { k: 1 }, Some(0.0)).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn graphs_are_symmetric(seed in 0u64..10_000, k in 2usize..8, t in proptest::option::of(0.1f64..10.0)) {
        let x = cloud(3, 25, seed);
        for method in [GraphMethod::SymmetricKnn { k }, GraphMethod::MutualKnn { k }] {
            let Ok(g) = build_graph(&x, method, t) else { continue };
            for i in 0..25 {
                prop_assert!(!g.adjacency[i][i]);
                for j in 0..25 {
                    prop_assert_eq!(g.adjacency[i][j], g.adjacency[j][i]);
                    prop_assert_eq!(g.weights[(i, j)], g.weights[(j, i)]);
                    prop_assert_eq!(g.adjacency[i][j], g.weights[(i, j)] > 0.0);
                    if t.is_none() {
                        prop_assert!(g.weights[(i, j)] == 0.0 || g.weights[(i, j)] == 1.0);
                    }
                }
            }
            let deg = g.degrees();
            match method {
                GraphMethod::SymmetricKnn { .. } => prop_assert!(deg.iter().all(|&v| v >= k)),
                _ => prop_assert!(deg.iter().all(|&v| v <= k)),
            }
        }
    }

    #[test]
    fn lem_matches_generalised_oracle(seed in 0u64..10_000, d in 1usize..5) {
        let x = cloud(4, 18, seed);
        let g = build_graph(&x, GraphMethod::SymmetricKnn { k: 5 }, Some(4.0)).unwrap();
        let e = lem_embed(&g, d).unwrap();
        let s = 18;
        let deg = DVector::from_fn(s, |i, _| g.weights.row(i).sum());
        let l = DMatrix::from_diagonal(&deg) - &g.weights;
        // L v = λ D v holds row by row for the returned coordinates
        for r in 0..d {
            let v = e.y.row(r).transpose();
            let lam = e.eigenvalues[r];
            let res = &l * &v - lam * deg.component_mul(&v);
            prop_assert!(res.amax() < 1e-9 * (1.0 + (&l * &v).amax()));
            prop_assert!(v.dot(&deg).abs() < 1e-9 * v.amax());
        }
        let dis = DMatrix::from_diagonal(&deg.map(|v| 1.0 / v.sqrt()));
        let (vals, vecs) = faer_eigen(&(&dis * &l * &dis));
        prop_assert!(vals[0].abs() < 1e-10);
        prop_assume!(vals[d + 1] - vals[d] > 1e-6 * vals[s - 1]);
        let oracle = &dis * vecs.columns(1, d);
        prop_assert!(subspace_angle(&e.y.transpose(), &oracle) < 1e-8);
        for r in 0..d {
            prop_assert!((e.eigenvalues[r] - vals[r + 1]).abs() < 1e-10);
        }
    }

    #[test]
    fn lle_matches_oracle(seed in 0u64..10_000, d in 1usize..4, delta in 1e-3f64..0.1) {
        // ambient dimension above k, so points are not reconstructed exactly
        let x = cloud(8, 16, seed);
        let g = build_graph(&x, GraphMethod::SymmetricKnn { k: 5 }, None).unwrap();
        let w = lle_weights(&x, &g, delta).unwrap();
        for i in 0..16 {
            prop_assert!((w.row(i).sum() - 1.0).abs() < 1e-12);
            for j in 0..16 {
                prop_assert!(g.adjacency[i][j] || w[(i, j)] == 0.0);
            }
        }
        let e = lle_embed(&w, d).unwrap();
        prop_assert!((&e.y * e.y.transpose() - DMatrix::identity(d, d)).amax() < 1e-10);
        let a = DMatrix::identity(16, 16) - &w;
        let (vals, vecs) = faer_eigen(&(a.transpose() * a));
        prop_assert!(vals[0].abs() < 1e-10);
        prop_assume!(vals[1] > 1e-6 * vals[15] && vals[d + 1] - vals[d] > 1e-6 * vals[15]);
        prop_assert!(e.y.column_sum().amax() < 1e-9);
        prop_assert!(subspace_angle(&e.y.transpose(), &vecs.columns(1, d).into_owned()) < 1e-8);
    }
}

#[test]
fn lem_on_path_and_complete_graphs() {
    let x = DMatrix::from_row_slice(1, 6, &[0.0, 1.0, 2.0, 3.0, 4.0, 5.0]);
    let g = build_graph(&x, GraphMethod::SymmetricKnn { k: 1 }, None).unwrap();
    let y = lem_embed(&g, 1).unwrap().y;
    let row: Vec<f64> = y.row(0).iter().cloned().collect();
    assert!(row.windows(2).all(|p| p[1] > p[0]) || row.windows(2).all(|p| p[1] < p[0]));
    // complete graph: every nontrivial eigenvalue of D⁻¹L is s/(s−1)
    let x = cloud(2, 7, 1);
    let g = build_graph(&x, GraphMethod::SymmetricKnn { k: 6 }, None).unwrap();
    let e = lem_embed(&g, 6).unwrap();
    assert!(e.eigenvalues.iter().all(|&v| (v - 7.0 / 6.0).abs() < 1e-12));
    assert!(lem_embed(&g, 7).is_err());
}

#[test]
fn lle_square_ring() {
    let x = DMatrix::from_row_slice(2, 4, &[0.0, 1.0, 1.0, 0.0, 0.0, 0.0, 1.0, 1.0]);
    let g = build_graph(&x, GraphMethod::EpsBall { eps: 1.1 }, None).unwrap();
    let w = lle_weights(&x, &g, 1e-3).unwrap();
    let expect = DMatrix::from_row_slice(4, 4, &[0.0, 0.5, 0.0, 0.5, 0.5, 0.0, 0.5, 0.0, 0.0, 0.5, 0.0, 0.5, 0.5, 0.0, 0.5, 0.0]);
    assert!((&w - expect).amax() < 1e-12);
    // M = (I − W)ᵀ(I − W) has eigenvalues 0, 1, 1, 4 on the ring
    let e = lle_embed(&w, 3).unwrap();
    let ev: Vec<f64> = e.eigenvalues.iter().cloned().collect();
    assert!((ev[0] - 1.0).abs() < 1e-12 && (ev[1] - 1.0).abs() < 1e-12 && (ev[2] - 4.0).abs() < 1e-12);
}

#[test]
fn nearest_ties_and_order() {
    let y_all = DMatrix::from_row_slice(1, 5, &[2.0, -1.0, 1.0, 0.5, -1.0]);
    assert_eq!(nearest_in_reduced(&DVector::from_element(1, 0.0), &y_all, 5), vec![3, 1, 2, 4, 0]);
    assert_eq!(nearest_in_reduced(&DVector::from_element(1, 0.0), &y_all, 2), vec![3, 1]);
    let y_all = cloud(3, 40, 2);
    let q = DVector::from_fn(3, |i, _| 0.1 * i as f64);
    let ids = nearest_in_reduced(&q, &y_all, 10);
    let mut brute: Vec<(f64, usize)> = (0..40).map(|j| ((y_all.column(j) - &q).norm(), j)).collect();
    brute.sort_by(|a, b| a.partial_cmp(b).unwrap());
    assert_eq!(ids, brute.iter().take(10).map(|p| p.1).collect::<Vec<_>>());
}

#[test]
fn coincident_points_are_picked_by_index_under_rounding() {
    // columns 1 and 2 coincide; the query sits on the bisector up to rounding
    let y_all = DMatrix::from_row_slice(2, 4, &[1.0, -1.0, -1.0, 5.0, 0.0, 0.0, 0.0, 5.0]);
    for dx in [1e-14, 0.0, -1e-14] {
        let q = DVector::from_vec(vec![dx, 0.0]);
        assert_eq!(nearest_in_reduced(&q, &y_all, 2), vec![0, 1], "dx = {dx}");
        assert_eq!(nearest_in_reduced(&q, &y_all, 3), vec![0, 1, 2]);
    }
    // a real gap still decides
    assert_eq!(nearest_in_reduced(&DVector::from_vec(vec![-1e-3, 0.0]), &y_all, 2), vec![1, 2]);
}

#[test]
fn local_linearise_matches_svd_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(44);
    for inst in 0..50 {
        let d = 1 + inst % 4;
        let s = 30 + inst;
        let y_all = cloud(d, s, inst as u64);
        let u = cloud(12, s, 1000 + inst as u64);
        let n = d + 2 + inst % 7;
        let q = DVector::from_fn(d, |_, _| rng.random_range(-1.0..1.0));
        let t = local_linearise(&q, &y_all, &u, n).unwrap();
        let ids = brute_neighbours(&y_all, &q, n);
        assert_eq!(t.neighbor_ids, ids);
        let (phi, off) = affine_oracle(&y_all, &u, &ids);
        assert!((&t.phi - &phi).amax() < 1e-8 * (1.0 + phi.amax()), "instance {inst}");
        assert!((&t.offset - &off).amax() < 1e-8 * (1.0 + off.amax()));
        assert!((&t.phi_perp * &t.r_perp - &t.phi).amax() < 1e-12 * (1.0 + phi.amax()));
        assert!((t.phi_perp.transpose() * &t.phi_perp - DMatrix::identity(d, d)).amax() < 1e-12);
    }
    let y_all = cloud(3, 10, 0);
    let u = cloud(5, 10, 1);
    let q = DVector::zeros(3);
    assert!(matches!(local_linearise(&q, &y_all, &u, 3), Err(Error::SingularNeighborhood { n: 3, d: 3 })));
    assert!(local_linearise(&q, &y_all, &u, 11).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn local_fit_is_exact_on_affine_data(seed in 0u64..10_000, d in 1usize..4, extra in 1usize..6) {
        let y_all = cloud(d, 20, seed);
        let a = cloud(7, d, seed + 1);
        let b = cloud(7, 1, seed + 2);
        let u = &a * &y_all + &b * DMatrix::from_element(1, 20, 1.0);
        let q = y_all.column(3).into_owned();
        let t = local_linearise(&q, &y_all, &u, d + extra).unwrap();
        prop_assert!((&t.phi - &a).amax() < 1e-8 * (1.0 + a.amax()));
        prop_assert!((&t.offset - b.column(0)).amax() < 1e-8 * (1.0 + b.amax()));
    }
}

#[test]
fn global_linearise_is_least_squares() {
    let u = cloud(15, 30, 5);
    let mut y = cloud(3, 30, 6);
    y.set_column(0, &DVector::from_vec(vec![0.3, -0.2, 0.1]));
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for zero in [Some(0), None] {
        let map = global_linearise(&u, &y, zero).unwrap();
        let yc = match zero {
            Some(c) => {
                let y0 = y.column(c).into_owned();
                DMatrix::from_fn(3, 30, |i, j| y[(i, j)] - y0[i])
            }
            None => y.clone(),
        };
        let cost = |psi: &DMatrix<f64>| (&u - psi * &yc).norm_squared();
        let best = cost(&map.psi);
        // normal equations: the residual is orthogonal to the reduced rows
        assert!(((&u - &map.psi * &yc) * yc.transpose()).amax() < 1e-10 * u.amax() * yc.amax() * 30.0);
        for _ in 0..100 {
            let delta = DMatrix::from_fn(15, 3, |_, _| rng.random_range(-0.1..0.1));
            assert!(cost(&(&map.psi + delta)) >= best);
        }
        assert!(subspace_angle(&map.psi_perp, &map.psi) < 1e-10);
    }
    // exact when U is linear in the centred coordinates
    let psi = cloud(15, 3, 9);
    let y0 = y.column(0).into_owned();
    let yc = DMatrix::from_fn(3, 30, |i, j| y[(i, j)] - y0[i]);
    let map = global_linearise(&(&psi * &yc), &y, Some(0)).unwrap();
    assert!((map.psi - psi).amax() < 1e-10);
    let flat = DMatrix::from_fn(2, 30, |i, j| if i == 0 { j as f64 } else { 2.0 * j as f64 });
    assert!(matches!(global_linearise(&u, &flat, Some(0)), Err(Error::RankDeficientEmbedding)));
}

#[test]
fn corrdim_basic_properties() {
    let u = cloud(3, 60, 2);
    let a = correlation_dimension(&u, 40).unwrap();
    assert_eq!(a.eps_grid.len(), 41);
    assert_eq!(a.delta_sd.len(), 40);
    assert!(a.p_cd.windows(2).all(|p| p[1] >= p[0]));
    assert_eq!(*a.p_cd.last().unwrap(), 1.0);
    // permuting the points leaves the estimate unchanged
    let perm: Vec<usize> = (0..60).rev().collect();
    let v = DMatrix::from_fn(3, 60, |i, j| u[(i, perm[j])]);
    let b = correlation_dimension(&v, 40).unwrap();
    assert_eq!(a.p_cd, b.p_cd);
    assert!(correlation_dimension(&u.columns(0, 1).into_owned(), 10).is_err());
}

#[test]
fn corrdim_small_circle_and_plane() {
    let s = 600;
    let circle = DMatrix::from_fn(4, s, |i, j| {
        let t = TAU * j as f64 / s as f64;
        [t.cos(), t.sin(), 0.0, 0.0][i]
    });
    let p = correlation_dimension(&circle, 60).unwrap().plateau(0.2).unwrap();
    assert!((p - 1.0).abs() < 0.2, "circle {p}");
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let plane = DMatrix::from_fn(4, 1500, |i, _| if i < 2 { rng.random_range(0.0..1.0) } else { 0.0 });
    let p = correlation_dimension(&plane, 60).unwrap().plateau(0.2).unwrap();
    assert!((p - 2.0).abs() < 0.3, "plane {p}");
}

