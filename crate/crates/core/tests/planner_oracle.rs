mod common;

use hdnf_core::channel::{ChannelParams, Position3D, db_to_linear};
use hdnf_core::planner::{CommField, CostWeights, SearchLattice, find_path, heuristic, path_cost};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::{GAMMA, dijkstra, random_field, random_node};

fn weights() -> CostWeights {
    CostWeights {
        omega_e: 1.0,
        lambda_out: 1000.0,
    }
}

fn toy_lattice() -> SearchLattice {
    // 20 x 20 x 5 levels
    SearchLattice::new(20, 1000.0, 10.0, 40.0)
}

#[test]
fn astar_matches_dijkstra_on_random_fields() {
    let l = toy_lattice();
    let w = weights();
    let mut solved = 0;
    for seed in 0..20u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let f = random_field(&l, &mut rng, 0.25);
        for _ in 0..3 {
            let (s, g) = (random_node(&l, &mut rng), random_node(&l, &mut rng));
            let oracle = dijkstra(&l, &f, &w, s, g);
            let got = find_path(&l, &f, s, g, &w);
            match (oracle, got) {
                (Some(c), Ok(p)) => {
                    assert!((c - p.cost).abs() < 1e-9, "seed {seed}: dijkstra {c} vs a* {}", p.cost);
                    assert!(p.nodes.iter().all(|&n| !f.in_outage(n)));
                    assert!(p.per_node_sinr_db.iter().all(|&s| s >= 10.0 * GAMMA.log10() - 1e-9));
                    let again = path_cost(&l, &f, &p.nodes, &w).unwrap();
                    assert!((again - p.cost).abs() < 1e-9);
                    assert_eq!((p.nodes[0], *p.nodes.last().unwrap()), (s, g));
                    solved += 1;
                }
                (None, Err(_)) => {}
                (o, g) => panic!("seed {seed}: oracle {o:?} vs search {:?}", g.map(|p| p.cost)),
            }
        }
    }
    assert!(solved >= 20);
}

#[test]
fn uniform_coverage_matches_dijkstra() {
    let l = toy_lattice();
    let w = weights();
    let f = CommField::from_values(vec![100.0; l.node_count()], GAMMA);
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    for _ in 0..20 {
        let (s, g) = (random_node(&l, &mut rng), random_node(&l, &mut rng));
        let c = dijkstra(&l, &f, &w, s, g).unwrap();
        let p = find_path(&l, &f, s, g, &w).unwrap();
        assert!((c - p.cost).abs() < 1e-9);
    }
}

#[test]
fn heuristic_never_exceeds_optimal_cost() {
    let l = toy_lattice();
    let w = weights();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let f = random_field(&l, &mut rng, 0.0);
    for _ in 0..50 {
        let (s, g) = (random_node(&l, &mut rng), random_node(&l, &mut rng));
        let c = dijkstra(&l, &f, &w, s, g).unwrap();
        assert!(heuristic(&l, s, g, w.omega_e) <= c + 1e-9);
    }
}

#[test]
fn heuristic_is_consistent() {
    let l = toy_lattice();
    let w = weights();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let f = random_field(&l, &mut rng, 0.1);
    let mut nb = Vec::new();
    for _ in 0..30 {
        let g = random_node(&l, &mut rng);
        for u in (0..l.node_count()).step_by(7) {
            l.neighbors(u, &mut nb);
            for &(v, _) in &nb {
                if let Some(c) = hdnf_core::planner::edge_cost(&l, &f, u, v, &w) {
                    assert!(heuristic(&l, u, g, 1.0) <= c + heuristic(&l, v, g, 1.0) + 1e-9);
                }
            }
        }
    }
}

/// Ground-level strip of strong coverage along row 0 next to a weak but
/// feasible straight route along row 4.
#[test]
fn penalty_routing_prefers_corridor() {
    let l = SearchLattice::new(12, 1200.0, 10.0, 0.0);
    let w = weights();
    let mut vals = vec![GAMMA * 1.05; l.node_count()];
    for c in 0..12 {
        for r in 0..4 {
            vals[l.node_id(r, c, 0)] = 1000.0;
        }
    }
    let f = CommField::from_values(vals, GAMMA);
    let (s, g) = (l.node_id(4, 0, 0), l.node_id(4, 11, 0));
    let straight: Vec<usize> = (0..12).map(|c| l.node_id(4, c, 0)).collect();
    let straight_cost = path_cost(&l, &f, &straight, &w).unwrap();
    let p = find_path(&l, &f, s, g, &w).unwrap();
    assert!(p.cost < straight_cost);
    let detoured = p.nodes.iter().filter(|&&n| l.coords(n).0 < 4).count();
    assert!(detoured > 0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    /// Every node feasible under a deployment stays feasible under a
    /// superset, so reachability and motion-only cost are monotone. The
    /// penalty term is not: a stronger new station raises `s_max` and with
    /// it the normalized shortfall of untouched nodes.
    #[test]
    fn larger_deployment_never_costs_more_without_interference(seed in any::<u64>()) {
        let l = SearchLattice::new(10, 1000.0, 10.0, 40.0);
        let params = ChannelParams {
            access_interference: false,
            ..ChannelParams::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut pick = || Position3D::new(rng.random_range(0.0..1000.0), rng.random_range(0.0..1000.0), rng.random_range(30.0..200.0));
        let base = vec![pick(), pick()];
        let mut more = base.clone();
        more.push(pick());
        let f1 = CommField::build(&l, &base, &params, 14.0);
        let f2 = CommField::build(&l, &more, &params, 14.0);
        prop_assert!((f1.gamma_ctrl - db_to_linear(14.0)).abs() < 1e-12);
        for id in 0..l.node_count() {
            prop_assert!(f1.in_outage(id) || !f2.in_outage(id));
        }
        let motion = CostWeights { omega_e: 1.0, lambda_out: 0.0 };
        let (s, g) = (l.node_id(0, 0, 0), l.node_id(9, 9, 0));
        if let Ok(p1) = find_path(&l, &f1, s, g, &motion) {
            let p2 = find_path(&l, &f2, s, g, &motion);
            prop_assert!(p2.is_ok());
            prop_assert!(p2.unwrap().cost <= p1.cost + 1e-9);
        }
    }

    #[test]
    fn returned_nodes_are_never_in_outage(seed in any::<u64>(), frac in 0.0f64..0.5) {
        let l = SearchLattice::new(8, 800.0, 10.0, 20.0);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let f = random_field(&l, &mut rng, frac);
        let (s, g) = (random_node(&l, &mut rng), random_node(&l, &mut rng));
        if let Ok(p) = find_path(&l, &f, s, g, &weights()) {
            prop_assert!(p.nodes.iter().all(|&n| !f.in_outage(n)));
            for pair in p.nodes.windows(2) {
                prop_assert!(l.are_adjacent(pair[0], pair[1]));
            }
        }
    }
}
