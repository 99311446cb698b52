//! Independent oracles shared by the integration and acceptance tests.
#![allow(dead_code)]

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use hdnf_core::channel::Position3D;
use hdnf_core::planner::{CommField, CostWeights, SearchLattice};
use hdnf_core::scenario::{Scenario, ScenarioConfig, Task};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const GAMMA: f64 = 25.0;

pub fn random_field(l: &SearchLattice, rng: &mut ChaCha8Rng, outage_frac: f64) -> CommField {
    let vals = (0..l.node_count())
        .map(|_| {
            if rng.random::<f64>() < outage_frac {
                rng.random::<f64>() * GAMMA * 0.9
            } else {
                GAMMA + rng.random::<f64>() * 500.0
            }
        })
        .collect();
    CommField::from_values(vals, GAMMA)
}

/// Plain Dijkstra over explicitly enumerated 26-neighbour moves, costs from
/// coordinates directly.
pub fn dijkstra(l: &SearchLattice, f: &CommField, w: &CostWeights, start: usize, goal: usize) -> Option<f64> {
    if f.in_outage(start) || f.in_outage(goal) {
        return None;
    }
    let n = l.node_count();
    let mut dist = vec![f64::INFINITY; n];
    let mut heap = BinaryHeap::new();
    dist[start] = 0.0;
    heap.push(Reverse((ordered(0.0), start)));
    while let Some(Reverse((d, u))) = heap.pop() {
        let d = f64::from_bits(d);
        if d > dist[u] {
            continue;
        }
        if u == goal {
            return Some(d);
        }
        let (r, c, lv) = l.coords(u);
        for dl in -1i64..=1 {
            for dr in -1i64..=1 {
                for dc in -1i64..=1 {
                    let (nl, nr, nc) = (lv as i64 + dl, r as i64 + dr, c as i64 + dc);
                    if (dl, dr, dc) == (0, 0, 0)
                        || nl < 0
                        || nr < 0
                        || nc < 0
                        || nl >= l.levels as i64
                        || nr >= l.k as i64
                        || nc >= l.k as i64
                    {
                        continue;
                    }
                    let v = l.node_id(nr as usize, nc as usize, nl as usize);
                    if f.in_outage(v) {
                        continue;
                    }
                    let motion = ((dc as f64 * l.cell).powi(2) + (dr as f64 * l.cell).powi(2) + (dl as f64 * l.delta_h).powi(2)).sqrt();
                    let psi = if f.s_max <= f.gamma_ctrl + f.eps_psi {
                        0.0
                    } else {
                        ((f.s_max - f.sinr[v]) / (f.s_max - f.gamma_ctrl)).max(0.0)
                    };
                    let nd = d + w.omega_e * motion + w.lambda_out * psi;
                    if nd < dist[v] {
                        dist[v] = nd;
                        heap.push(Reverse((ordered(nd), v)));
                    }
                }
            }
        }
    }
    None
}

// Nonnegative f64 bit patterns order like the values.
pub fn ordered(x: f64) -> u64 {
    x.to_bits()
}

pub fn random_node(l: &SearchLattice, rng: &mut ChaCha8Rng) -> usize {
    rng.random_range(0..l.node_count())
}

pub fn instance(seed: u64) -> Scenario {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = 1 + (seed % 5) as usize;
    let tasks = (0..n)
        .map(|id| {
            let open = rng.random_range(0.0..60.0);
            Task {
                id,
                location: Position3D::new(rng.random_range(0.0..1500.0), rng.random_range(0.0..1500.0), 0.0),
                payload: rng.random_range(0.5..3.0),
                window_open: open,
                window_close: open + rng.random_range(10.0..120.0),
            }
        })
        .collect();
    let mut cfg = ScenarioConfig::default();
    cfg.depot = Position3D::new(750.0, 750.0, 0.0);
    cfg.fleet.num_delivery_uavs = 2;
    Scenario::from_config(&cfg, 1500.0, tasks, seed)
}

/// Energy and total wait of a route, or `None` if it breaks a constraint.
pub fn route_oracle(s: &Scenario, seq: &[usize]) -> Option<(f64, f64)> {
    let d = |a: &Position3D, b: &Position3D| ((a.x - b.x).powi(2) + (a.y - b.y).powi(2)).sqrt();
    let payload: f64 = seq.iter().map(|&t| s.tasks[t].payload).sum();
    if payload > s.fleet.max_payload {
        return None;
    }
    let (mut here, mut clock, mut len, mut wait) = (s.depot, 0.0, 0.0, 0.0);
    for &t in seq {
        let task = &s.tasks[t];
        let leg = d(&here, &task.location);
        len += leg;
        clock += leg / s.fleet.max_speed;
        if clock < task.window_open {
            wait += task.window_open - clock;
            clock = task.window_open;
        }
        if clock > task.window_close {
            return None;
        }
        here = task.location;
    }
    if !seq.is_empty() {
        len += d(&here, &s.depot);
    }
    let energy = s.fleet.energy_coeff * len * payload;
    (energy <= s.fleet.battery).then_some((energy, wait))
}

pub fn plan_oracle(s: &Scenario, seqs: &[Vec<usize>]) -> Option<f64> {
    let mut total = 0.0;
    for seq in seqs {
        let (e, w) = route_oracle(s, seq)?;
        total += s.weights.omega_e * e + s.weights.omega_wait * w;
    }
    Some(total)
}

pub fn permutations(items: &[usize]) -> Vec<Vec<usize>> {
    if items.len() <= 1 {
        return vec![items.to_vec()];
    }
    let mut out = Vec::new();
    for i in 0..items.len() {
        let mut rest = items.to_vec();
        let x = rest.remove(i);
        for mut p in permutations(&rest) {
            p.insert(0, x);
            out.push(p);
        }
    }
    out
}

/// Exhaustive optimum over every split of every ordering into two routes.
pub fn brute_force(s: &Scenario) -> Option<f64> {
    let ids: Vec<usize> = (0..s.tasks.len()).collect();
    let mut best: Option<f64> = None;
    for p in permutations(&ids) {
        for k in 0..=p.len() {
            let seqs = [p[..k].to_vec(), p[k..].to_vec()];
            if let Some(v) = plan_oracle(s, &seqs) {
                best = Some(best.map_or(v, |b: f64| b.min(v)));
            }
        }
    }
    best
}


/// λ2 of the Laplacian of an edge list via nalgebra's symmetric solver.
pub fn lambda2_oracle(n: usize, edges: &[(usize, usize)]) -> f64 {
    let mut l = nalgebra::DMatrix::<f64>::zeros(n, n);
    let mut seen = std::collections::HashSet::new();
    for &(a, b) in edges {
        let key = (a.min(b), a.max(b));
        if a == b || !seen.insert(key) {
            continue;
        }
        l[(a, b)] -= 1.0;
        l[(b, a)] -= 1.0;
        l[(a, a)] += 1.0;
        l[(b, b)] += 1.0;
    }
    let mut ev: Vec<f64> = l.symmetric_eigenvalues().iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    ev[1]
}

pub fn union_find_connected(n: usize, edges: &[(usize, usize)]) -> bool {
    let mut parent: Vec<usize> = (0..n).collect();
    fn root(p: &mut [usize], mut x: usize) -> usize {
        while p[x] != x {
            p[x] = p[p[x]];
            x = p[x];
        }
        x
    }
    for &(a, b) in edges {
        let (ra, rb) = (root(&mut parent, a), root(&mut parent, b));
        parent[ra] = rb;
    }
    let r0 = root(&mut parent, 0);
    (0..n).all(|i| root(&mut parent, i) == r0)
}

pub fn random_edges(rng: &mut ChaCha8Rng, n: usize, p: f64) -> Vec<(usize, usize)> {
    let mut e = Vec::new();
    for a in 0..n {
        for b in (a + 1)..n {
            if rng.random::<f64>() < p {
                e.push((a, b));
            }
        }
    }
    e
}

/// Two tasks, one UAV. The far task has the earlier deadline and the near
/// task opens late, so the route is depot -> far -> near -> depot.
pub fn two_task_toy() -> Scenario {
    let mut cfg = ScenarioConfig::default();
    cfg.fleet.num_delivery_uavs = 1;
    let tasks = vec![
        Task {
            id: 0,
            location: Position3D::new(250.0, 300.0, 0.0),
            payload: 1.0,
            window_open: 150.0,
            window_close: 3000.0,
        },
        Task {
            id: 1,
            location: Position3D::new(900.0, 900.0, 0.0),
            payload: 1.0,
            window_open: 0.0,
            window_close: 1000.0,
        },
    ];
    Scenario::from_config(&cfg, 1000.0, tasks, 0)
}

/// One high station whose control range covers the depot and both tasks.
pub fn full_cover() -> Vec<Position3D> {
    vec![Position3D::new(550.0, 500.0, 200.0)]
}

/// One station near the depot; the far task is out of range.
pub fn near_cover() -> Vec<Position3D> {
    vec![Position3D::new(200.0, 200.0, 100.0)]
}
