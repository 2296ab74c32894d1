mod common;

use nnperc::graphmetrics::{components, sssp};
use nnperc::nngraph::{build_knn_graph, build_knn_graph_with_cell};
use nnperc::pointproc::{sample_binomial, PointSet, Window, Point};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn grid_knn_matches_exhaustive_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for inst in 0..60 {
        let n = rng.random_range(12..=500);
        let k = [1, 3, 5, 10][inst % 4];
        let ps = sample_binomial(Window::square(rng.random_range(1.0..50.0)).unwrap(), n, inst as u64).unwrap();
        let want = common::knn_edges(&common::coords(&ps), k);
        assert_eq!(common::graph_edges(&build_knn_graph(&ps, k).unwrap()), want, "instance {inst}");
        // The answer must not depend on the grid resolution.
        let cell = rng.random_range(0.05..3.0);
        assert_eq!(common::graph_edges(&build_knn_graph_with_cell(&ps, k, cell).unwrap()), want);
    }
}

#[test]
fn lattice_points_with_ties() {
    // Integer grid: many equidistant neighbours, resolved by index.
    let pts: Vec<Point> = (0..15).flat_map(|y| (0..15).map(move |x| Point::new(x as f64, y as f64))).collect();
    let ps = PointSet::from_points(pts, Window::square(14.0).unwrap(), 0).unwrap();
    for k in [1, 2, 3, 4, 5, 8] {
        assert_eq!(common::graph_edges(&build_knn_graph(&ps, k).unwrap()), common::knn_edges(&common::coords(&ps), k));
    }
}

#[test]
fn dijkstra_matches_bellman_ford() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for inst in 0..25 {
        let n = rng.random_range(5..=200);
        let k = rng.random_range(1..=6).min(n - 1);
        let ps = sample_binomial(Window::square(10.0).unwrap(), n, 100 + inst).unwrap();
        let g = build_knn_graph(&ps, k).unwrap();
        let edges: Vec<_> = g.edges().collect();
        for src in [0, n / 2, n - 1] {
            let got = sssp(&g, src);
            let want = common::bellman_ford(n, &edges, src);
            for v in 0..n {
                assert!(common::rel_close(got[v], want[v], 1e-9), "inst {inst} src {src} v {v}: {} vs {}", got[v], want[v]);
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn distances_behave_like_a_metric(seed in 0u64..10_000, n in 20usize..150, k in 2usize..7) {
        let ps = sample_binomial(Window::square(5.0).unwrap(), n, seed).unwrap();
        let g = build_knn_graph(&ps, k).unwrap();
        let lab = components(&g);
        let members = lab.members(lab.largest().unwrap());
        let dist: Vec<Vec<f64>> = members.iter().take(12).map(|&s| sssp(&g, s)).collect();
        for (i, &u) in members.iter().take(12).enumerate() {
            for (j, &v) in members.iter().take(12).enumerate() {
                // Symmetric and never shorter than the straight line.
                prop_assert!((dist[i][v] - dist[j][u]).abs() <= 1e-9 * dist[i][v].max(1.0));
                prop_assert!(dist[i][v] >= ps.point(u).dist(ps.point(v)) * (1.0 - 1e-12));
                for &w in members.iter().take(12) {
                    prop_assert!(dist[i][w] <= dist[i][v] + dist[j][w] + 1e-9);
                }
            }
        }
    }

    #[test]
    fn graph_is_symmetric_and_degree_bounded(seed in 0u64..10_000, n in 2usize..200, k in 1usize..12) {
        let k = k.min(n - 1);
        let ps = sample_binomial(Window::square(3.0).unwrap(), n, seed).unwrap();
        let g = build_knn_graph(&ps, k).unwrap();
        for v in 0..n {
            prop_assert!(g.degree(v) >= k);
            for (u, len) in g.neighbors(v) {
                prop_assert!(g.has_edge(u, v));
                prop_assert!((len - ps.point(u).dist(ps.point(v))).abs() < 1e-12);
            }
        }
    }
}
