mod common;

use hdnf_core::channel::{ChannelParams, Position3D};
use hdnf_core::topology::{BackhaulGraph, algebraic_connectivity, build_backhaul_graph, connectivity_report};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::{lambda2_oracle, random_edges, union_find_connected};

#[test]
fn reference_graphs() {
    let split = BackhaulGraph::from_edges(4, &[(0, 1), (2, 3)]);
    assert_eq!(algebraic_connectivity(&split), 0.0);
    let path = BackhaulGraph::from_edges(3, &[(0, 1), (1, 2)]);
    assert!((algebraic_connectivity(&path) - 1.0).abs() < 1e-6);
    for n in 2..=6 {
        let edges: Vec<_> = (0..n).flat_map(|a| ((a + 1)..n).map(move |b| (a, b))).collect();
        let k = BackhaulGraph::from_edges(n, &edges);
        assert!((algebraic_connectivity(&k) - n as f64).abs() < 1e-6, "K_{n}");
    }
}

#[test]
fn edge_addition_never_lowers_lambda2() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for _ in 0..200 {
        let n = rng.random_range(2..=12);
        let edges = random_edges(&mut rng, n, 0.3);
        let mut g = BackhaulGraph::from_edges(n, &edges);
        let before = algebraic_connectivity(&g);
        let (a, b) = (rng.random_range(0..n), rng.random_range(0..n));
        g.add_edge(a, b);
        assert!(algebraic_connectivity(&g) >= before - 1e-9);
    }
}

#[test]
fn backhaul_links_follow_range() {
    // Noise-limited links close within a few km at 12 dB.
    let params = ChannelParams::default();
    let nodes = [
        Position3D::new(0.0, 0.0, 0.0),
        Position3D::new(300.0, 0.0, 100.0),
        Position3D::new(600.0, 0.0, 100.0),
        Position3D::new(60_000.0, 0.0, 100.0),
    ];
    let g = build_backhaul_graph(&nodes, &params, 12.0).unwrap();
    assert!(g.has_edge(0, 1) && g.has_edge(1, 2));
    assert!((1..3).all(|j| !g.has_edge(j, 3)));
    let r = connectivity_report(&g, 0.5).unwrap();
    assert!(!r.is_connected);
    assert_eq!(r.utility, 0.0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn lambda2_matches_reference_solver(seed in any::<u64>(), n in 2usize..=12, p in 0.0f64..1.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let edges = random_edges(&mut rng, n, p);
        let g = BackhaulGraph::from_edges(n, &edges);
        let got = algebraic_connectivity(&g);
        let want = lambda2_oracle(n, &edges);
        prop_assert!((got - want.max(0.0)).abs() < 1e-6, "{} vs {}", got, want);
        prop_assert_eq!(got > 1e-9, union_find_connected(n, &edges));
    }
}
