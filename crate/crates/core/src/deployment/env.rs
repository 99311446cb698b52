//! Multi-agent placement environment: kinematics, observations and the
//! shared team reward.

use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::c2::{self, GridMap, LayerMetrics, SampleEvaluation, SampleLayers};
use crate::channel::Position3D;
use crate::math;
use crate::scenario::{Scenario, Weights};
use crate::topology;

use super::TrainingFault;

/// Which service layers the agents are rewarded for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    /// All three layers.
    #[default]
    Full,
    /// Terminal layer only.
    Flat2d,
}

impl Scheme {
    pub fn effective_weights(self, w: &Weights) -> Weights {
        let mut w = w.clone();
        if self == Scheme::Flat2d {
            w.gamma_v = 0.0;
            w.gamma_c = 0.0;
            w.omega_t = 1.0;
            w.omega_v = 0.0;
            w.omega_c = 0.0;
        }
        w
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnvConfig {
    pub num_agents: usize,
    pub t_step: usize,
    pub dt_s: f64,
    pub k_nn: usize,
    /// Side of the pooled grid fed to the networks.
    pub pool: usize,
    pub gate_threshold: f64,
    pub scheme: Scheme,
}

impl Default for EnvConfig {
    fn default() -> Self {
        Self {
            num_agents: 15,
            t_step: 50,
            dt_s: 1.0,
            k_nn: 3,
            pool: 10,
            gate_threshold: 0.5,
            scheme: Scheme::Full,
        }
    }
}

impl EnvConfig {
    pub fn obs_dim(&self) -> usize {
        3 + 4 + 3 * self.k_nn + 1 + 3
    }

    pub fn grid_dim(&self) -> usize {
        3 * self.pool * self.pool
    }

    /// Flat joint state: every agent's observation, then the pooled grid.
    pub fn state_dim(&self) -> usize {
        self.num_agents * self.obs_dim() + self.grid_dim()
    }

    pub fn action_dim(&self) -> usize {
        self.num_agents * ACTION_DIM
    }
}

/// Motion command (3) and gate score (1).
pub const ACTION_DIM: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct RewardBreakdown {
    pub total: f64,
    pub r_vol: f64,
    pub r_net: f64,
    pub r_topo: f64,
    pub metrics: LayerMetrics,
    pub c_conn: f64,
    pub active: usize,
}

/// Layer metrics of a deployment; all zero when the scenario has no tasks.
pub fn metrics_or_zero(eval: &SampleEvaluation, scenario: &Scenario, weights: &Weights) -> LayerMetrics {
    eval.metrics(&scenario.thresholds, weights).unwrap_or_default()
}

/// Team reward of an active deployment. Returns the sample evaluation so
/// callers can reuse it for the grid map.
pub fn compute_reward(
    active: &[Position3D],
    scenario: &Scenario,
    layers: &SampleLayers,
    scheme: Scheme,
) -> (RewardBreakdown, SampleEvaluation) {
    let w = scheme.effective_weights(&scenario.weights);
    let eval = SampleEvaluation::evaluate(layers, active, &scenario.channel);
    let metrics = metrics_or_zero(&eval, scenario, &w);
    let c_conn = topology::deployment_connectivity(
        &scenario.depot,
        active,
        &scenario.channel,
        scenario.thresholds.gamma_bh_db,
        scenario.thresholds.lambda_req,
    )
    .map(|r| r.utility)
    .unwrap_or(0.0);
    let r_vol = w.gamma_t * metrics.c_term + w.gamma_v * metrics.c_vert + w.gamma_c * metrics.c_corr;
    let r_net = w.lambda_conn * c_conn + w.lambda_cap * (metrics.cbar_syn - scenario.thresholds.cbar_req);
    let r_topo = topology_penalty(active, &w, scenario.h_max());
    (
        RewardBreakdown {
            total: r_vol + r_net + r_topo,
            r_vol,
            r_net,
            r_topo,
            metrics,
            c_conn,
            active: active.len(),
        },
        eval,
    )
}

/// Gaussian collision penalty over each station's two nearest neighbours
/// plus the altitude regularizer.
pub fn topology_penalty(active: &[Position3D], w: &Weights, h_max: f64) -> f64 {
    let d2 = w.delta_safe_m * w.delta_safe_m;
    let mut total = 0.0;
    for (i, p) in active.iter().enumerate() {
        for j in nearest(active, i, 2) {
            let dd = p.distance(&active[j]);
            total -= w.eta_coll * math::exp(-dd * dd / d2);
        }
        total -= w.w_h * p.z / h_max;
    }
    total
}

/// Indices of the `k` nearest other points to `points[i]`, ties by index.
pub fn nearest(points: &[Position3D], i: usize, k: usize) -> Vec<usize> {
    let mut others: Vec<(f64, usize)> = points
        .iter()
        .enumerate()
        .filter(|&(j, _)| j != i)
        .map(|(j, q)| (points[i].distance(q), j))
        .collect();
    others.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    others.truncate(k);
    others.into_iter().map(|(_, j)| j).collect()
}

/// Average-pools a K x K grid to `pool x pool`; every pooled cell covers
/// at least one source cell.
pub fn pool_grid(grid: &GridMap, pool: usize, out: &mut Vec<f32>) {
    out.clear();
    let k = grid.k;
    let span = |p: usize| -> (usize, usize) {
        let lo = p * k / pool;
        let hi = ((p + 1) * k / pool).max(lo + 1).min(k);
        (lo.min(k - 1), hi)
    };
    for ch in 0..3 {
        let data = grid.channel(ch);
        for pr in 0..pool {
            let (r0, r1) = span(pr);
            for pc in 0..pool {
                let (c0, c1) = span(pc);
                let mut s = 0.0;
                for r in r0..r1 {
                    for c in c0..c1 {
                        s += data[r * k + c];
                    }
                }
                out.push((s / ((r1 - r0) * (c1 - c0)) as f64) as f32);
            }
        }
    }
}

/// Outage-weighted centroid of the grid with cells at `h_ref`.
pub fn demand_centroid(grid: &GridMap, h_ref: f64) -> Option<Position3D> {
    let density = grid.total_density();
    let mut wsum = 0.0;
    let mut acc = Position3D::new(0.0, 0.0, 0.0);
    for r in 0..grid.k {
        for c in 0..grid.k {
            let w = density[r * grid.k + c];
            if w > 0.0 {
                wsum += w;
                acc = acc + grid.cell_center(r, c, h_ref) * w;
            }
        }
    }
    (wsum > 0.0).then(|| acc * (1.0 / wsum))
}

#[derive(Debug, Clone)]
pub struct DeploymentEnv {
    pub scenario: Scenario,
    pub config: EnvConfig,
    pub layers: SampleLayers,
    pub seed: u64,
    pub positions: Vec<Position3D>,
    pub gates: Vec<f64>,
    pub grid: GridMap,
    pub last: RewardBreakdown,
    pub step_index: usize,
    pooled: Vec<f32>,
}

impl DeploymentEnv {
    pub fn new(scenario: &Scenario, config: EnvConfig, seed: u64) -> Self {
        let layers = c2::build_sample_layers(scenario);
        let grid = GridMap::zeros(scenario.sampling.k, scenario.area_side);
        Self {
            scenario: scenario.clone(),
            layers,
            seed,
            positions: alloc::vec![Position3D::new(0.0, 0.0, 0.0); config.num_agents],
            gates: alloc::vec![0.0; config.num_agents],
            grid,
            last: RewardBreakdown::default(),
            step_index: 0,
            pooled: Vec::new(),
            config,
        }
    }

    /// Seeded uniform placement in area x altitude band. Each episode
    /// draws from its own stream so different policies see the same starts.
    pub fn reset(&mut self, episode: u64) -> Vec<f32> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(episode);
        let (a, lo, hi) = (self.scenario.area_side, self.scenario.h_min(), self.scenario.h_max());
        for p in self.positions.iter_mut() {
            let x = rng.random::<f64>() * a;
            let y = rng.random::<f64>() * a;
            let z = lo + rng.random::<f64>() * (hi - lo);
            *p = Position3D::new(x, y, z);
        }
        self.gates.iter_mut().for_each(|g| *g = 0.0);
        self.step_index = 0;
        self.refresh();
        self.state()
    }

    pub fn active_deployment(&self) -> Vec<Position3D> {
        self.positions
            .iter()
            .zip(&self.gates)
            .filter(|&(_, &g)| g >= self.config.gate_threshold)
            .map(|(p, _)| *p)
            .collect()
    }

    fn refresh(&mut self) {
        let active = self.active_deployment();
        let (breakdown, eval) = compute_reward(&active, &self.scenario, &self.layers, self.config.scheme);
        self.last = breakdown;
        let mut grid = eval
            .grid_map(
                &self.layers,
                self.scenario.thresholds.gamma_ctrl_db,
                self.scenario.sampling.k,
                self.scenario.area_side,
            )
            .unwrap_or_else(|_| GridMap::zeros(self.scenario.sampling.k.max(2), self.scenario.area_side));
        if self.config.scheme == Scheme::Flat2d {
            let kk = grid.k * grid.k;
            grid.data[kk..].iter_mut().for_each(|v| *v = 0.0);
        }
        self.grid = grid;
        let mut pooled = core::mem::take(&mut self.pooled);
        pool_grid(&self.grid, self.config.pool, &mut pooled);
        self.pooled = pooled;
    }

    /// Applies one joint action `[vx, vy, vz, gate]` per agent.
    pub fn step(&mut self, actions: &[f32]) -> Result<(RewardBreakdown, bool), TrainingFault> {
        assert_eq!(actions.len(), self.config.action_dim());
        if let Some(i) = actions.iter().position(|a| !a.is_finite()) {
            return Err(TrainingFault::NonFiniteAction { index: i });
        }
        let reach = self.scenario.fleet.max_speed * self.config.dt_s;
        let (a, lo, hi) = (self.scenario.area_side, self.scenario.h_min(), self.scenario.h_max());
        for (i, act) in actions.chunks_exact(ACTION_DIM).enumerate() {
            let v = |c: f32| (c as f64).clamp(-1.0, 1.0);
            let p = self.positions[i];
            self.positions[i] = Position3D::new(
                (p.x + reach * v(act[0])).clamp(0.0, a),
                (p.y + reach * v(act[1])).clamp(0.0, a),
                (p.z + reach * v(act[2])).clamp(lo, hi),
            );
            self.gates[i] = (act[3] as f64).clamp(0.0, 1.0);
        }
        self.step_index += 1;
        self.refresh();
        Ok((self.last, self.step_index >= self.config.t_step))
    }

    pub fn observation(&self, i: usize, out: &mut Vec<f32>) {
        let s = &self.scenario;
        let (a, lo, hi) = (s.area_side, s.h_min(), s.h_max());
        let band = hi - lo;
        let p = self.positions[i];
        out.push((p.x / a) as f32);
        out.push((p.y / a) as f32);
        out.push(((p.z - lo) / band) as f32);
        let m = &self.last.metrics;
        let flat = self.config.scheme == Scheme::Flat2d;
        out.push(m.c_term as f32);
        out.push(if flat { 0.0 } else { m.c_vert as f32 });
        out.push(if flat { 0.0 } else { m.c_corr as f32 });
        out.push(self.last.c_conn as f32);
        let nb = nearest(&self.positions, i, self.config.k_nn);
        for slot in 0..self.config.k_nn {
            match nb.get(slot) {
                Some(&j) => {
                    let q = self.positions[j];
                    out.push(((q.x - p.x) / a) as f32);
                    out.push(((q.y - p.y) / a) as f32);
                    out.push(((q.z - p.z) / band) as f32);
                }
                None => out.extend_from_slice(&[0.0; 3]),
            }
        }
        out.push(if p.z > 0.5 * (lo + hi) { 1.0 } else { 0.0 });
        let g = match demand_centroid(&self.grid, s.fleet.cruise_altitude) {
            Some(c) => {
                let d = c - p;
                let n = d.norm();
                if n > 0.0 { d * (1.0 / n) } else { Position3D::new(0.0, 0.0, 0.0) }
            }
            None => Position3D::new(0.0, 0.0, 0.0),
        };
        out.extend_from_slice(&[g.x as f32, g.y as f32, g.z as f32]);
    }

    pub fn state(&self) -> Vec<f32> {
        let mut s = Vec::with_capacity(self.config.state_dim());
        for i in 0..self.config.num_agents {
            self.observation(i, &mut s);
        }
        s.extend_from_slice(&self.pooled);
        s
    }
}
