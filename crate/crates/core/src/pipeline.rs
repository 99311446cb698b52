//! End-to-end orchestration: task assignment, deployment, pruning, per-UAV
//! planning and mission metrics under the strict failure policy.

use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::c2::{self, LayerMetrics, SampleEvaluation};
use crate::channel::Position3D;
use crate::deployment::{self, Deployment, DeploymentError, PolicyBundle};
use crate::planner::{LegFailure, Planner, Trajectory};
use crate::scenario::{Scenario, Weights};
use crate::tasking::{self, RoutePlan, TaskingError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PipelineError {
    #[error("stage one infeasible: {0}")]
    Infeasible(TaskingError),
    #[error("configuration mismatch: {0}")]
    Config(String),
    #[error("deployment failed: {0}")]
    Deployment(DeploymentError),
}

/// Where the station set comes from.
#[derive(Debug, Clone)]
pub enum DeploymentSource<'a> {
    Fixed(Deployment),
    Policy { bundle: &'a PolicyBundle, threshold: f64 },
    Grid { n_bs: usize, altitude: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineOptions {
    pub prune: bool,
    pub prune_eps: f64,
}

impl Default for PipelineOptions {
    fn default() -> Self {
        Self {
            prune: true,
            prune_eps: 0.01,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct UavReport {
    pub tasks: Vec<usize>,
    /// Service time of each task in sequence order; `None` when failed.
    pub delivery_times_s: Vec<Option<f64>>,
    pub delivered: usize,
    pub length_m: f64,
    pub energy_j: f64,
    pub outage_slots: usize,
    /// 1-based index of the leg that could not be planned.
    pub failed_leg: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct MetricsReport {
    pub outage_slots: usize,
    pub deployed_bs: usize,
    pub tasks_total: usize,
    pub tasks_succeeded: usize,
    pub task_success_rate: f64,
    /// Mean over delivered tasks; 0 when none were delivered.
    pub mean_delivery_time_s: f64,
    pub total_energy_j: f64,
    pub c_conn: f64,
    pub connectivity_ok: bool,
    pub coverage: LayerMetrics,
    pub objective_value: f64,
    pub uavs: Vec<UavReport>,
}

#[derive(Debug, Clone)]
pub struct PipelineOutcome {
    pub plan: RoutePlan,
    /// Stations after pruning.
    pub deployment: Deployment,
    pub unpruned_bs: usize,
    pub trajectories: Vec<Trajectory>,
    pub metrics: MetricsReport,
}

/// `omega_d * n_bs + omega_e * energy - sum(gamma * coverage)`.
pub fn objective_value(n_bs: usize, total_energy: f64, coverage: &LayerMetrics, w: &Weights) -> f64 {
    w.omega_d * n_bs as f64 + w.omega_e * total_energy
        - (w.gamma_t * coverage.c_term + w.gamma_v * coverage.c_vert + w.gamma_c * coverage.c_corr)
}

pub fn coverage_metrics(positions: &[Position3D], scenario: &Scenario) -> LayerMetrics {
    let layers = c2::build_sample_layers(scenario);
    let eval = SampleEvaluation::evaluate(&layers, positions, &scenario.channel);
    deployment::env::metrics_or_zero(&eval, scenario, &scenario.weights)
}

/// Objective with energies taken from the planned trajectories (failed
/// legs contribute what was flown).
pub fn evaluate_objective(plan: &RoutePlan, deployment: &Deployment, scenario: &Scenario) -> f64 {
    let planner = Planner::new(scenario, &deployment.positions);
    let energy: f64 = plan
        .sequences
        .iter()
        .map(|seq| match planner.route_to_trajectory(seq, scenario) {
            Ok(t) => t.energy,
            Err(f) => f.flown.energy,
        })
        .sum();
    objective_value(deployment.len(), energy, &coverage_metrics(&deployment.positions, scenario), &scenario.weights)
}

/// Applies the strict failure policy to one UAV: a task counts only if its
/// stop is reached before the first waypoint below the control threshold.
pub fn score_uav(
    sequence: &[usize],
    planned: &Result<Trajectory, LegFailure>,
    scenario: &Scenario,
) -> UavReport {
    let (traj, failed_leg) = match planned {
        Ok(t) => (t, None),
        Err(f) => (&f.flown, Some(f.leg)),
    };
    let gamma = scenario.thresholds.gamma_ctrl_db;
    let first_outage = traj
        .per_waypoint_sinr_db
        .iter()
        .position(|&s| !(s >= gamma))
        .unwrap_or(usize::MAX);
    let mut times = Vec::with_capacity(sequence.len());
    let mut clock = 0.0;
    let mut travelled_to = 0usize;
    let mut ok = true;
    for (i, &t) in sequence.iter().enumerate() {
        let stop = traj.stops.get(i).copied();
        match stop {
            Some(w) if ok && w < first_outage => {
                let d: f64 = traj.waypoints[travelled_to..=w].windows(2).map(|p| p[0].distance(&p[1])).sum();
                clock += d / scenario.fleet.max_speed;
                let open = scenario.tasks[t].window_open;
                if clock < open {
                    clock = open;
                }
                travelled_to = w;
                times.push(Some(clock));
            }
            _ => {
                ok = false;
                times.push(None);
            }
        }
    }
    UavReport {
        tasks: sequence.to_vec(),
        delivered: times.iter().filter(|t| t.is_some()).count(),
        delivery_times_s: times,
        length_m: traj.length,
        energy_j: traj.energy,
        outage_slots: if sequence.is_empty() { 0 } else { traj.outage_count(gamma) },
        failed_leg,
    }
}

fn resolve_deployment(source: DeploymentSource<'_>, scenario: &Scenario) -> Result<Deployment, PipelineError> {
    match source {
        DeploymentSource::Fixed(d) => {
            if d.gate_scores.len() != d.positions.len() {
                return Err(PipelineError::Config("gate_scores and positions differ in length".into()));
            }
            Ok(d)
        }
        DeploymentSource::Grid { n_bs, altitude } => Ok(deployment::grid_baseline(scenario, n_bs, altitude)),
        DeploymentSource::Policy { bundle, threshold } => {
            if bundle.config.env.num_agents > scenario.max_bs {
                return Err(PipelineError::Config(alloc::format!(
                    "policy has {} agents but the scenario allows {} stations",
                    bundle.config.env.num_agents,
                    scenario.max_bs
                )));
            }
            match deployment::extract_deployment(bundle, scenario, threshold) {
                Ok(d) => Ok(d),
                Err(DeploymentError::NoGatedAgents) => Ok(Deployment::default()),
                Err(e) => Err(PipelineError::Deployment(e)),
            }
        }
    }
}

/// Assignment, deployment, optional pruning, then one planned trajectory
/// per UAV. A leg failure marks the rest of that UAV's tasks failed and
/// the other UAVs continue.
pub fn run_pipeline(
    scenario: &Scenario,
    source: DeploymentSource<'_>,
    options: &PipelineOptions,
) -> Result<PipelineOutcome, PipelineError> {
    let plan = tasking::assign_tasks(scenario).map_err(PipelineError::Infeasible)?;
    run_with_plan(scenario, plan, source, options)
}

/// As [`run_pipeline`] with a precomputed route plan.
pub fn run_with_plan(
    scenario: &Scenario,
    plan: RoutePlan,
    source: DeploymentSource<'_>,
    options: &PipelineOptions,
) -> Result<PipelineOutcome, PipelineError> {
    let raw = resolve_deployment(source, scenario)?;
    let unpruned_bs = raw.len();
    let dep = if options.prune {
        deployment::prune_deployment(&raw, scenario, options.prune_eps)
    } else {
        raw
    };
    let planner = Planner::new(scenario, &dep.positions);
    let mut trajectories = Vec::with_capacity(plan.sequences.len());
    let mut uavs = Vec::with_capacity(plan.sequences.len());
    for seq in &plan.sequences {
        let planned = planner.route_to_trajectory(seq, scenario);
        uavs.push(score_uav(seq, &planned, scenario));
        trajectories.push(match planned {
            Ok(t) => t,
            Err(f) => f.flown,
        });
    }
    let coverage = coverage_metrics(&dep.positions, scenario);
    let c_conn = if dep.is_empty() {
        0.0
    } else {
        deployment::connectivity(&dep.positions, scenario)
    };
    let tasks_succeeded: usize = uavs.iter().map(|u| u.delivered).sum();
    let tasks_total = scenario.tasks.len();
    let times: Vec<f64> = uavs.iter().flat_map(|u| u.delivery_times_s.iter().flatten().copied()).collect();
    let total_energy_j: f64 = uavs.iter().map(|u| u.energy_j).sum();
    let metrics = MetricsReport {
        outage_slots: uavs.iter().map(|u| u.outage_slots).sum(),
        deployed_bs: dep.len(),
        tasks_total,
        tasks_succeeded,
        task_success_rate: if tasks_total == 0 {
            1.0
        } else {
            tasks_succeeded as f64 / tasks_total as f64
        },
        mean_delivery_time_s: if times.is_empty() {
            0.0
        } else {
            times.iter().sum::<f64>() / times.len() as f64
        },
        total_energy_j,
        c_conn,
        connectivity_ok: c_conn >= scenario.thresholds.conn_constraint,
        objective_value: objective_value(dep.len(), total_energy_j, &coverage, &scenario.weights),
        coverage,
        uavs,
    };
    Ok(PipelineOutcome {
        plan,
        deployment: dep,
        unpruned_bs,
        trajectories,
        metrics,
    })
}
