//! Base-station placement: environment, trainer, gate extraction, pruning
//! and baseline generators.

pub mod env;
pub mod matd3;
pub mod nn;
pub mod replay;
mod train;

use alloc::boxed::Box;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::c2::{self, SampleEvaluation, SampleLayers};
use crate::channel::Position3D;
use crate::math;
use crate::scenario::Scenario;
use crate::topology;

pub use env::{DeploymentEnv, EnvConfig, RewardBreakdown, Scheme, compute_reward};
pub use matd3::{Ablation, PolicyBundle, TrainConfig};
pub use train::{EVAL_EPISODE, EpisodeLog, TrainOutcome, extract_deployment, random_baseline, rollout, train, train_with};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TrainingFault {
    #[error("non-finite action component at index {index}")]
    NonFiniteAction { index: usize },
    #[error("non-finite critic loss")]
    NonFiniteLoss,
    #[error("non-finite {0} gradient")]
    NonFiniteGradient(&'static str),
    #[error("invalid training configuration: {0}")]
    InvalidConfig(&'static str),
    #[error("episode {episode}, step {step}: {cause}")]
    At {
        episode: usize,
        step: usize,
        cause: Box<TrainingFault>,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DeploymentError {
    #[error("no agent's gate exceeded the threshold")]
    NoGatedAgents,
    #[error("policy rollout failed: {0}")]
    Rollout(TrainingFault),
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Deployment {
    #[serde(rename = "positions_m")]
    pub positions: Vec<Position3D>,
    pub gate_scores: Vec<f64>,
}

impl Deployment {
    pub fn new(positions: Vec<Position3D>) -> Self {
        let gate_scores = alloc::vec![1.0; positions.len()];
        Self { positions, gate_scores }
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    /// Count limit and area x altitude band.
    pub fn is_valid_for(&self, s: &Scenario) -> bool {
        self.positions.len() <= s.max_bs
            && self.gate_scores.len() == self.positions.len()
            && self.positions.iter().all(|p| {
                s.contains_xy(p) && p.z >= s.h_min() && p.z <= s.h_max()
            })
    }

    fn without(&self, idx: usize) -> Self {
        let mut d = self.clone();
        d.positions.remove(idx);
        d.gate_scores.remove(idx);
        d
    }
}

/// Agents whose gate is strictly above the threshold.
pub fn filter_by_gate(positions: &[Position3D], gates: &[f64], threshold: f64) -> Deployment {
    let mut d = Deployment::default();
    for (p, &g) in positions.iter().zip(gates) {
        if g > threshold {
            d.positions.push(*p);
            d.gate_scores.push(g);
        }
    }
    d
}

/// `ceil(sqrt(n))^2` lattice of cell centres in row-major order, truncated
/// to `n`.
pub fn grid_baseline(scenario: &Scenario, n_bs: usize, altitude: f64) -> Deployment {
    let side = math::ceil(math::sqrt(n_bs as f64)) as usize;
    let cell = scenario.area_side / side.max(1) as f64;
    let mut positions = Vec::with_capacity(n_bs);
    'outer: for r in 0..side {
        for c in 0..side {
            if positions.len() == n_bs {
                break 'outer;
            }
            positions.push(Position3D::new((c as f64 + 0.5) * cell, (r as f64 + 0.5) * cell, altitude));
        }
    }
    Deployment::new(positions)
}

/// Synchronized capacity of a station set over the scenario's samples.
pub fn synchronized_capacity(positions: &[Position3D], scenario: &Scenario, layers: &SampleLayers) -> f64 {
    let eval = SampleEvaluation::evaluate(layers, positions, &scenario.channel);
    env::metrics_or_zero(&eval, scenario, &scenario.weights).cbar_syn
}

pub fn connectivity(positions: &[Position3D], scenario: &Scenario) -> f64 {
    topology::deployment_connectivity(
        &scenario.depot,
        positions,
        &scenario.channel,
        scenario.thresholds.gamma_bh_db,
        scenario.thresholds.lambda_req,
    )
    .map(|r| r.utility)
    .unwrap_or(0.0)
}

/// Greedy removal in ascending order of each station's sole-removal
/// contribution to synchronized capacity, keeping full connectivity and
/// capacity within `eps` of the input.
pub fn prune_deployment(deployment: &Deployment, scenario: &Scenario, eps: f64) -> Deployment {
    if deployment.is_empty() {
        return deployment.clone();
    }
    let layers = c2::build_sample_layers(scenario);
    let syn_init = synchronized_capacity(&deployment.positions, scenario, &layers);
    let mut order: Vec<(f64, usize)> = (0..deployment.len())
        .map(|b| {
            let rest = deployment.without(b);
            (syn_init - synchronized_capacity(&rest.positions, scenario, &layers), b)
        })
        .collect();
    order.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let mut keep = alloc::vec![true; deployment.len()];
    for &(_, b) in &order {
        keep[b] = false;
        let cand: Vec<Position3D> = deployment
            .positions
            .iter()
            .zip(&keep)
            .filter(|&(_, &k)| k)
            .map(|(p, _)| *p)
            .collect();
        let ok = !cand.is_empty()
            && connectivity(&cand, scenario) >= 1.0
            && synchronized_capacity(&cand, scenario, &layers) >= syn_init - eps;
        if !ok {
            keep[b] = true;
        }
    }
    let mut out = Deployment::default();
    for (i, &k) in keep.iter().enumerate() {
        if k {
            out.positions.push(deployment.positions[i]);
            out.gate_scores.push(deployment.gate_scores[i]);
        }
    }
    out
}
