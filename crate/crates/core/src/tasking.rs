//! Task assignment and ordering by sequential cheapest insertion.

use alloc::vec::Vec;
use core::cmp::Ordering;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scenario::{Scenario, Task};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum TaskingError {
    #[error("task {task} has no feasible insertion on any UAV")]
    Infeasible { task: usize },
    #[error("scenario has no delivery UAVs")]
    NoUavs,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoutePlan {
    /// `assignment[u][t]` is 1 when UAV `u` serves task `t`.
    pub assignment: Vec<Vec<u8>>,
    pub sequences: Vec<Vec<usize>>,
    pub estimated_energy: Vec<f64>,
    /// Hover wait at each stop of each sequence.
    pub waits: Vec<Vec<f64>>,
    pub total_estimated_energy: f64,
}

impl RoutePlan {
    pub fn from_sequences(scenario: &Scenario, sequences: Vec<Vec<usize>>) -> Self {
        let n_tasks = scenario.tasks.len();
        let mut assignment = alloc::vec![alloc::vec![0u8; n_tasks]; sequences.len()];
        for (u, seq) in sequences.iter().enumerate() {
            for &t in seq {
                assignment[u][t] = 1;
            }
        }
        let estimated_energy: Vec<f64> = sequences.iter().map(|s| scenario.route_energy(s)).collect();
        let waits = sequences
            .iter()
            .map(|s| scenario.arrival_times(s).iter().map(|a| a.wait).collect())
            .collect();
        Self {
            assignment,
            total_estimated_energy: estimated_energy.iter().sum(),
            estimated_energy,
            waits,
            sequences,
        }
    }

    pub fn num_uavs(&self) -> usize {
        self.sequences.len()
    }

    pub fn total_wait(&self) -> f64 {
        self.waits.iter().flatten().sum()
    }

    /// `omega_e * sum(E) + omega_wait * sum(wait)` of the final routes.
    pub fn objective(&self, scenario: &Scenario) -> f64 {
        scenario.weights.omega_e * self.total_estimated_energy + scenario.weights.omega_wait * self.total_wait()
    }

    /// Checks payload, battery, windows and exactly-once coverage.
    pub fn is_feasible(&self, scenario: &Scenario) -> bool {
        let mut seen = alloc::vec![0u32; scenario.tasks.len()];
        for seq in &self.sequences {
            for &t in seq {
                if t >= seen.len() {
                    return false;
                }
                seen[t] += 1;
            }
            if !route_feasible(seq, scenario) {
                return false;
            }
        }
        seen.iter().all(|&c| c == 1)
    }
}

/// Ascending deadline, then opening time, then id.
pub fn urgency_order(a: &Task, b: &Task) -> Ordering {
    a.window_close
        .total_cmp(&b.window_close)
        .then(a.window_open.total_cmp(&b.window_open))
        .then(a.id.cmp(&b.id))
}

pub fn urgency_sort(tasks: &[Task]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..tasks.len()).collect();
    idx.sort_by(|&a, &b| urgency_order(&tasks[a], &tasks[b]));
    idx
}

pub fn route_feasible(seq: &[usize], scenario: &Scenario) -> bool {
    if scenario.route_payload(seq) > scenario.fleet.max_payload {
        return false;
    }
    if scenario.route_energy(seq) > scenario.fleet.battery {
        return false;
    }
    scenario
        .arrival_times(seq)
        .iter()
        .zip(seq)
        .all(|(a, &t)| a.effective <= scenario.tasks[t].window_close)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Insertion {
    pub delta_energy: f64,
    pub wait: f64,
    pub cost: f64,
}

/// Marginal cost of inserting `task` at `position`, or `None` when the
/// resulting route breaks payload, battery or any time window.
pub fn evaluate_insertion(route: &[usize], task: usize, position: usize, scenario: &Scenario) -> Option<Insertion> {
    assert!(position <= route.len(), "insertion position out of range");
    let mut candidate = Vec::with_capacity(route.len() + 1);
    candidate.extend_from_slice(&route[..position]);
    candidate.push(task);
    candidate.extend_from_slice(&route[position..]);
    if !route_feasible(&candidate, scenario) {
        return None;
    }
    let delta_energy = scenario.route_energy(&candidate) - scenario.route_energy(route);
    let wait = scenario.arrival_times(&candidate)[position].wait;
    let w = &scenario.weights;
    Some(Insertion {
        delta_energy,
        wait,
        cost: w.omega_e * delta_energy + w.omega_wait * wait,
    })
}

/// [`evaluate_insertion`] collapsed to a number: infeasible is `m_inf`.
pub fn insertion_cost(route: &[usize], task: usize, position: usize, scenario: &Scenario) -> f64 {
    evaluate_insertion(route, task, position, scenario).map_or(scenario.weights.m_inf, |i| i.cost)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct AssignStats {
    pub insertion_evaluations: u64,
    /// Stops visited while evaluating insertions.
    pub stop_visits: u64,
}

pub fn assign_tasks(scenario: &Scenario) -> Result<RoutePlan, TaskingError> {
    assign_tasks_with_stats(scenario).map(|(p, _)| p)
}

pub fn assign_tasks_with_stats(scenario: &Scenario) -> Result<(RoutePlan, AssignStats), TaskingError> {
    let n_uavs = scenario.fleet.num_delivery_uavs;
    if n_uavs == 0 {
        return Err(TaskingError::NoUavs);
    }
    let m_inf = scenario.weights.m_inf;
    let mut routes: Vec<Vec<usize>> = alloc::vec![Vec::new(); n_uavs];
    let mut stats = AssignStats::default();
    for t in urgency_sort(&scenario.tasks) {
        let mut best = m_inf;
        let mut choice = None;
        for (u, route) in routes.iter().enumerate() {
            for pos in 0..=route.len() {
                stats.insertion_evaluations += 1;
                stats.stop_visits += route.len() as u64 + 1;
                let c = insertion_cost(route, t, pos, scenario);
                if c < best {
                    best = c;
                    choice = Some((u, pos));
                }
            }
        }
        let Some((u, pos)) = choice else {
            return Err(TaskingError::Infeasible { task: scenario.tasks[t].id });
        };
        routes[u].insert(pos, t);
    }
    Ok((RoutePlan::from_sequences(scenario, routes), stats))
}
