//! Communication-aware A* over a 3D lattice of cell nodes.

use alloc::collections::BinaryHeap;
use alloc::vec::Vec;
use core::cmp::Ordering;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::c2::best_sinr_or_zero;
use crate::channel::{self, ChannelParams, Position3D};
use crate::math;
use crate::scenario::Scenario;

pub const EPS_PSI: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum NoPath {
    #[error("start node {0} is in outage")]
    StartInOutage(usize),
    #[error("goal node {0} is in outage")]
    GoalInOutage(usize),
    #[error("frontier exhausted after expanding {expanded} nodes")]
    FrontierExhausted { expanded: usize },
}

/// K x K horizontal cells with altitude levels `0, dh, 2dh, ...` up to
/// `h_max`. Node id is row-major `(level * K + row) * K + col`.
#[derive(Debug, Clone, PartialEq)]
pub struct SearchLattice {
    pub k: usize,
    pub levels: usize,
    pub cell: f64,
    pub delta_h: f64,
    offsets: Vec<(i32, i32, i32, f64)>,
}

impl SearchLattice {
    pub fn new(k: usize, area_side: f64, delta_h: f64, h_max: f64) -> Self {
        assert!(k >= 1 && area_side > 0.0 && delta_h > 0.0 && h_max >= 0.0);
        let levels = math::floor(h_max / delta_h + 1e-9) as usize + 1;
        let cell = area_side / k as f64;
        let mut offsets = Vec::with_capacity(26);
        for dl in -1i32..=1 {
            for dr in -1i32..=1 {
                for dc in -1i32..=1 {
                    if dl == 0 && dr == 0 && dc == 0 {
                        continue;
                    }
                    let (x, y, z) = (dc as f64 * cell, dr as f64 * cell, dl as f64 * delta_h);
                    offsets.push((dl, dr, dc, math::sqrt(x * x + y * y + z * z)));
                }
            }
        }
        Self {
            k,
            levels,
            cell,
            delta_h,
            offsets,
        }
    }

    pub fn for_scenario(s: &Scenario) -> Self {
        Self::new(s.sampling.k, s.area_side, s.sampling.delta_h_m, s.h_max())
    }

    pub fn node_count(&self) -> usize {
        self.k * self.k * self.levels
    }

    pub fn node_id(&self, row: usize, col: usize, level: usize) -> usize {
        (level * self.k + row) * self.k + col
    }

    /// `(row, col, level)` of a node.
    pub fn coords(&self, id: usize) -> (usize, usize, usize) {
        let col = id % self.k;
        let row = (id / self.k) % self.k;
        (row, col, id / (self.k * self.k))
    }

    pub fn center(&self, id: usize) -> Position3D {
        let (r, c, l) = self.coords(id);
        Position3D::new(
            (c as f64 + 0.5) * self.cell,
            (r as f64 + 0.5) * self.cell,
            l as f64 * self.delta_h,
        )
    }

    pub fn are_adjacent(&self, a: usize, b: usize) -> bool {
        let (r1, c1, l1) = self.coords(a);
        let (r2, c2, l2) = self.coords(b);
        a != b && r1.abs_diff(r2) <= 1 && c1.abs_diff(c2) <= 1 && l1.abs_diff(l2) <= 1
    }

    /// Lattice neighbours of `id` with the motion length of each move.
    pub fn neighbors(&self, id: usize, out: &mut Vec<(usize, f64)>) {
        out.clear();
        let (r, c, l) = self.coords(id);
        let (k, lv) = (self.k as i32, self.levels as i32);
        for &(dl, dr, dc, len) in &self.offsets {
            let (nl, nr, nc) = (l as i32 + dl, r as i32 + dr, c as i32 + dc);
            if nl < 0 || nl >= lv || nr < 0 || nr >= k || nc < 0 || nc >= k {
                continue;
            }
            out.push((self.node_id(nr as usize, nc as usize, nl as usize), len));
        }
    }

    /// Nearest level-0 node by Euclidean distance to the center; ties go
    /// to the lower id.
    pub fn snap_ground(&self, p: &Position3D) -> usize {
        let idx = |v: f64| -> usize {
            let i = math::floor(v / self.cell);
            if i.is_nan() || i < 0.0 {
                0
            } else if i >= self.k as f64 {
                self.k - 1
            } else {
                i as usize
            }
        };
        // Candidate box around the containing cell, scanned in id order.
        let (r0, c0) = (idx(p.y), idx(p.x));
        let target = p.with_z(0.0);
        let mut best = (f64::INFINITY, 0);
        for r in r0.saturating_sub(1)..=(r0 + 1).min(self.k - 1) {
            for c in c0.saturating_sub(1)..=(c0 + 1).min(self.k - 1) {
                let id = self.node_id(r, c, 0);
                let d = self.center(id).distance(&target);
                if d < best.0 {
                    best = (d, id);
                }
            }
        }
        best.1
    }
}

/// Per-node best-server SINR for one deployment, with its maximum.
#[derive(Debug, Clone, PartialEq)]
pub struct CommField {
    pub sinr: Vec<f64>,
    pub s_max: f64,
    pub gamma_ctrl: f64,
    pub eps_psi: f64,
}

impl CommField {
    pub fn build(lattice: &SearchLattice, deployment: &[Position3D], params: &ChannelParams, gamma_ctrl_db: f64) -> Self {
        let sinr = (0..lattice.node_count())
            .map(|id| best_sinr_or_zero(&lattice.center(id), deployment, params))
            .collect();
        Self::from_values(sinr, channel::db_to_linear(gamma_ctrl_db))
    }

    pub fn from_values(sinr: Vec<f64>, gamma_ctrl: f64) -> Self {
        let s_max = sinr.iter().copied().fold(0.0, f64::max);
        Self {
            sinr,
            s_max,
            gamma_ctrl,
            eps_psi: EPS_PSI,
        }
    }

    pub fn in_outage(&self, id: usize) -> bool {
        !(self.sinr[id] >= self.gamma_ctrl)
    }

    pub fn penalty(&self, id: usize) -> Option<f64> {
        node_penalty(self.sinr[id], self.gamma_ctrl, self.s_max, self.eps_psi)
    }
}

/// Outage penalty: `None` below the control threshold, otherwise the
/// normalized SINR shortfall relative to the best node.
pub fn node_penalty(sinr: f64, gamma_ctrl: f64, s_max: f64, eps_psi: f64) -> Option<f64> {
    if !(sinr >= gamma_ctrl) {
        return None;
    }
    if s_max <= gamma_ctrl + eps_psi {
        return Some(0.0);
    }
    let v = (s_max - sinr) / (s_max - gamma_ctrl);
    Some(if v > 0.0 { v } else { 0.0 })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CostWeights {
    pub omega_e: f64,
    pub lambda_out: f64,
}

impl CostWeights {
    pub fn from_scenario(s: &Scenario) -> Self {
        Self {
            omega_e: s.weights.omega_e,
            lambda_out: s.weights.lambda_out,
        }
    }
}

pub fn edge_cost(lattice: &SearchLattice, field: &CommField, from: usize, to: usize, w: &CostWeights) -> Option<f64> {
    let psi = field.penalty(to)?;
    let motion = lattice.center(from).distance(&lattice.center(to));
    Some(w.omega_e * motion + w.lambda_out * psi)
}

pub fn heuristic(lattice: &SearchLattice, node: usize, goal: usize, omega_e: f64) -> f64 {
    omega_e * lattice.center(node).distance(&lattice.center(goal))
}

/// Sum of edge costs along a node list, or `None` if any edge is
/// infeasible or non-adjacent.
pub fn path_cost(lattice: &SearchLattice, field: &CommField, nodes: &[usize], w: &CostWeights) -> Option<f64> {
    let mut total = 0.0;
    for pair in nodes.windows(2) {
        if !lattice.are_adjacent(pair[0], pair[1]) {
            return None;
        }
        total += edge_cost(lattice, field, pair[0], pair[1], w)?;
    }
    Some(total)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathResult {
    pub nodes: Vec<usize>,
    pub cost: f64,
    pub per_node_sinr_db: Vec<f64>,
    pub expanded: usize,
}

#[derive(Clone, Copy, PartialEq)]
struct Entry {
    f: f64,
    g: f64,
    id: usize,
}

impl Eq for Entry {}

impl Ord for Entry {
    // Reversed so the max-heap pops the smallest (f, g, id).
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .f
            .total_cmp(&self.f)
            .then(other.g.total_cmp(&self.g))
            .then(other.id.cmp(&self.id))
    }
}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Minimum-cost path under [`edge_cost`]. Outage nodes are never entered.
pub fn find_path(
    lattice: &SearchLattice,
    field: &CommField,
    start: usize,
    goal: usize,
    w: &CostWeights,
) -> Result<PathResult, NoPath> {
    if field.in_outage(start) {
        return Err(NoPath::StartInOutage(start));
    }
    if field.in_outage(goal) {
        return Err(NoPath::GoalInOutage(goal));
    }
    search(lattice, start, goal, w.omega_e, |_, to, len| {
        field.penalty(to).map(|psi| w.omega_e * len + w.lambda_out * psi)
    })
    .map(|(nodes, cost, expanded)| PathResult {
        per_node_sinr_db: nodes.iter().map(|&n| channel::linear_to_db(field.sinr[n])).collect(),
        nodes,
        cost,
        expanded,
    })
}

/// Shortest motion-only path ignoring coverage, used to trace the route a
/// UAV would fly when no covered path exists.
pub fn find_path_blind(lattice: &SearchLattice, start: usize, goal: usize) -> Vec<usize> {
    match search(lattice, start, goal, 1.0, |_, _, len| Some(len)) {
        Ok((nodes, _, _)) => nodes,
        Err(_) => alloc::vec![start],
    }
}

fn search<F>(lattice: &SearchLattice, start: usize, goal: usize, omega_e: f64, cost: F) -> Result<(Vec<usize>, f64, usize), NoPath>
where
    F: Fn(usize, usize, f64) -> Option<f64>,
{
    let n = lattice.node_count();
    let mut g = alloc::vec![f64::INFINITY; n];
    let mut parent = alloc::vec![usize::MAX; n];
    let mut heap = BinaryHeap::new();
    let mut nbrs = Vec::with_capacity(26);
    let goal_center = lattice.center(goal);
    g[start] = 0.0;
    heap.push(Entry {
        f: omega_e * lattice.center(start).distance(&goal_center),
        g: 0.0,
        id: start,
    });
    let mut expanded = 0;
    while let Some(Entry { g: gc, id, .. }) = heap.pop() {
        if gc > g[id] {
            continue;
        }
        if id == goal {
            let mut nodes = alloc::vec![goal];
            let mut cur = goal;
            while cur != start {
                cur = parent[cur];
                nodes.push(cur);
            }
            nodes.reverse();
            return Ok((nodes, gc, expanded));
        }
        expanded += 1;
        lattice.neighbors(id, &mut nbrs);
        for &(nb, len) in &nbrs {
            let Some(c) = cost(id, nb, len) else {
                continue;
            };
            let cand = gc + c;
            if cand < g[nb] {
                g[nb] = cand;
                parent[nb] = id;
                heap.push(Entry {
                    f: cand + omega_e * lattice.center(nb).distance(&goal_center),
                    g: cand,
                    id: nb,
                });
            }
        }
    }
    Err(NoPath::FrontierExhausted { expanded })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub waypoints: Vec<Position3D>,
    pub per_waypoint_sinr_db: Vec<f64>,
    pub length: f64,
    pub energy: f64,
    /// Waypoint index of each stop reached after the start (tasks in
    /// order, then the depot).
    pub stops: Vec<usize>,
}

impl Trajectory {
    fn from_nodes(
        lattice: &SearchLattice,
        field: &CommField,
        nodes: &[usize],
        stops: Vec<usize>,
        payload: f64,
        eta: f64,
    ) -> Self {
        let waypoints: Vec<Position3D> = nodes.iter().map(|&n| lattice.center(n)).collect();
        let length = waypoints.windows(2).map(|w| w[0].distance(&w[1])).sum::<f64>();
        Self {
            per_waypoint_sinr_db: nodes.iter().map(|&n| channel::linear_to_db(field.sinr[n])).collect(),
            waypoints,
            length,
            energy: eta * length * payload,
            stops,
        }
    }

    /// Waypoints whose SINR is below the control threshold.
    pub fn outage_count(&self, gamma_ctrl_db: f64) -> usize {
        self.per_waypoint_sinr_db.iter().filter(|&&s| !(s >= gamma_ctrl_db)).count()
    }
}

/// A leg that could not be planned. `flown` covers the legs completed
/// before it plus a coverage-blind trace of the failed leg.
#[derive(Debug, Clone, PartialEq)]
pub struct LegFailure {
    /// 1-based leg index; leg `i` ends at the `i`-th task, and the last leg
    /// returns to the depot.
    pub leg: usize,
    pub reason: NoPath,
    pub flown: Trajectory,
    /// Node index within `flown.waypoints` where the failed leg begins.
    pub failed_leg_start: usize,
}

/// Shared lattice, SINR cache and weights for one deployment.
#[derive(Debug, Clone)]
pub struct Planner {
    pub lattice: SearchLattice,
    pub field: CommField,
    pub weights: CostWeights,
}

impl Planner {
    pub fn new(scenario: &Scenario, deployment: &[Position3D]) -> Self {
        let lattice = SearchLattice::for_scenario(scenario);
        let field = CommField::build(&lattice, deployment, &scenario.channel, scenario.thresholds.gamma_ctrl_db);
        Self {
            lattice,
            field,
            weights: CostWeights::from_scenario(scenario),
        }
    }

    /// Depot -> tasks -> depot, one A* search per leg.
    pub fn route_to_trajectory(&self, sequence: &[usize], scenario: &Scenario) -> Result<Trajectory, LegFailure> {
        let payload = scenario.route_payload(sequence);
        let eta = scenario.fleet.energy_coeff;
        let depot = self.lattice.snap_ground(&scenario.depot);
        if sequence.is_empty() {
            return Ok(Trajectory {
                waypoints: alloc::vec![scenario.depot],
                per_waypoint_sinr_db: alloc::vec![channel::linear_to_db(self.field.sinr[depot])],
                length: 0.0,
                energy: 0.0,
                stops: Vec::new(),
            });
        }
        let mut stops = Vec::with_capacity(sequence.len() + 2);
        stops.push(depot);
        stops.extend(sequence.iter().map(|&t| self.lattice.snap_ground(&scenario.tasks[t].location)));
        stops.push(depot);
        let mut nodes: Vec<usize> = alloc::vec![depot];
        let mut reached = Vec::with_capacity(sequence.len() + 1);
        for (leg, pair) in stops.windows(2).enumerate() {
            match find_path(&self.lattice, &self.field, pair[0], pair[1], &self.weights) {
                Ok(p) => {
                    nodes.extend_from_slice(&p.nodes[1..]);
                    reached.push(nodes.len() - 1);
                }
                Err(reason) => {
                    let failed_leg_start = nodes.len() - 1;
                    let blind = find_path_blind(&self.lattice, pair[0], pair[1]);
                    nodes.extend_from_slice(&blind[1..]);
                    return Err(LegFailure {
                        leg: leg + 1,
                        reason,
                        flown: Trajectory::from_nodes(&self.lattice, &self.field, &nodes, reached, payload, eta),
                        failed_leg_start,
                    });
                }
            }
        }
        Ok(Trajectory::from_nodes(&self.lattice, &self.field, &nodes, reached, payload, eta))
    }
}
