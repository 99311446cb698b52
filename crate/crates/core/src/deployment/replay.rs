//! Replay buffer with optional proportional prioritization (sum tree).

use alloc::vec::Vec;

use rand::Rng;
use thiserror::Error;

use crate::math;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum ReplayError {
    #[error("cannot sample from an empty replay buffer")]
    Empty,
}

/// Binary sum tree over a power-of-two number of leaves.
#[derive(Debug, Clone, PartialEq)]
pub struct SumTree {
    leaves: usize,
    nodes: Vec<f64>,
}

impl SumTree {
    pub fn new(capacity: usize) -> Self {
        let leaves = capacity.max(1).next_power_of_two();
        Self {
            leaves,
            nodes: alloc::vec![0.0; 2 * leaves],
        }
    }

    pub fn total(&self) -> f64 {
        self.nodes[1]
    }

    pub fn get(&self, i: usize) -> f64 {
        self.nodes[self.leaves + i]
    }

    pub fn set(&mut self, i: usize, value: f64) {
        let mut n = self.leaves + i;
        self.nodes[n] = value;
        while n > 1 {
            n /= 2;
            self.nodes[n] = self.nodes[2 * n] + self.nodes[2 * n + 1];
        }
    }

    /// Leaf whose cumulative interval contains `u`, skipping zero leaves.
    pub fn find(&self, mut u: f64) -> usize {
        let mut n = 1;
        while n < self.leaves {
            let left = self.nodes[2 * n];
            if u < left || self.nodes[2 * n + 1] <= 0.0 {
                n *= 2;
            } else {
                u -= left;
                n = 2 * n + 1;
            }
        }
        n - self.leaves
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PerParams {
    pub alpha: f64,
    pub eps: f64,
}

impl Default for PerParams {
    fn default() -> Self {
        Self { alpha: 0.6, eps: 1e-6 }
    }
}

#[derive(Debug, Clone, PartialEq)]
struct Prioritized {
    params: PerParams,
    tree: SumTree,
    priorities: Vec<f64>,
    max_priority: f64,
}

/// Fixed-capacity ring of transitions stored as flat f32 rows.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplayBuffer {
    pub state_dim: usize,
    pub action_dim: usize,
    pub capacity: usize,
    states: Vec<f32>,
    actions: Vec<f32>,
    rewards: Vec<f32>,
    next_states: Vec<f32>,
    dones: Vec<f32>,
    len: usize,
    head: usize,
    per: Option<Prioritized>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Batch {
    pub indices: Vec<usize>,
    pub states: Vec<f32>,
    pub actions: Vec<f32>,
    pub rewards: Vec<f32>,
    pub next_states: Vec<f32>,
    pub dones: Vec<f32>,
    pub weights: Vec<f32>,
}

impl Batch {
    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }
}

impl ReplayBuffer {
    /// `per = None` gives uniform sampling with unit weights.
    pub fn new(state_dim: usize, action_dim: usize, capacity: usize, per: Option<PerParams>) -> Self {
        assert!(capacity > 0);
        Self {
            state_dim,
            action_dim,
            capacity,
            states: Vec::new(),
            actions: Vec::new(),
            rewards: Vec::new(),
            next_states: Vec::new(),
            dones: Vec::new(),
            len: 0,
            head: 0,
            per: per.map(|params| Prioritized {
                params,
                tree: SumTree::new(capacity),
                priorities: Vec::new(),
                max_priority: 1.0,
            }),
        }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn is_prioritized(&self) -> bool {
        self.per.is_some()
    }

    pub fn priority(&self, index: usize) -> Option<f64> {
        self.per.as_ref().map(|p| p.priorities[index])
    }

    pub fn push(&mut self, state: &[f32], action: &[f32], reward: f32, next_state: &[f32], done: bool) {
        assert_eq!(state.len(), self.state_dim);
        assert_eq!(next_state.len(), self.state_dim);
        assert_eq!(action.len(), self.action_dim);
        let i = self.head;
        let write = |dst: &mut Vec<f32>, src: &[f32], w: usize| {
            if dst.len() < (i + 1) * w {
                dst.extend_from_slice(src);
            } else {
                dst[i * w..(i + 1) * w].copy_from_slice(src);
            }
        };
        write(&mut self.states, state, self.state_dim);
        write(&mut self.actions, action, self.action_dim);
        write(&mut self.rewards, &[reward], 1);
        write(&mut self.next_states, next_state, self.state_dim);
        write(&mut self.dones, &[if done { 1.0 } else { 0.0 }], 1);
        if let Some(p) = &mut self.per {
            let pr = p.max_priority;
            if p.priorities.len() <= i {
                p.priorities.push(pr);
            } else {
                p.priorities[i] = pr;
            }
            p.tree.set(i, libm::pow(pr, p.params.alpha));
        }
        self.head = (self.head + 1) % self.capacity;
        self.len = (self.len + 1).min(self.capacity);
    }

    /// Stratified proportional sampling; importance weights are
    /// `(N * P(j))^-beta` divided by the batch maximum.
    pub fn sample<R: Rng>(&self, batch_size: usize, beta: f64, rng: &mut R) -> Result<Batch, ReplayError> {
        if self.len == 0 {
            return Err(ReplayError::Empty);
        }
        let mut indices = Vec::with_capacity(batch_size);
        let mut weights = Vec::with_capacity(batch_size);
        match &self.per {
            None => {
                for _ in 0..batch_size {
                    indices.push(rng.random_range(0..self.len));
                    weights.push(1.0f32);
                }
            }
            Some(p) => {
                let total = p.tree.total();
                let seg = total / batch_size as f64;
                let mut raw = Vec::with_capacity(batch_size);
                for j in 0..batch_size {
                    let u = (j as f64 + rng.random::<f64>()) * seg;
                    let idx = p.tree.find(u.min(total * (1.0 - 1e-12))).min(self.len - 1);
                    let prob = p.tree.get(idx) / total;
                    raw.push(libm::pow(self.len as f64 * prob, -beta));
                    indices.push(idx);
                }
                let max_w = raw.iter().copied().fold(0.0, f64::max);
                weights.extend(raw.iter().map(|w| (w / max_w) as f32));
            }
        }
        let mut b = Batch {
            states: Vec::with_capacity(batch_size * self.state_dim),
            actions: Vec::with_capacity(batch_size * self.action_dim),
            rewards: Vec::with_capacity(batch_size),
            next_states: Vec::with_capacity(batch_size * self.state_dim),
            dones: Vec::with_capacity(batch_size),
            weights,
            indices: Vec::new(),
        };
        for &i in &indices {
            b.states.extend_from_slice(&self.states[i * self.state_dim..(i + 1) * self.state_dim]);
            b.actions.extend_from_slice(&self.actions[i * self.action_dim..(i + 1) * self.action_dim]);
            b.rewards.push(self.rewards[i]);
            b.next_states.extend_from_slice(&self.next_states[i * self.state_dim..(i + 1) * self.state_dim]);
            b.dones.push(self.dones[i]);
        }
        b.indices = indices;
        Ok(b)
    }

    /// Sets priority `|td| + eps`; no-op for uniform buffers.
    pub fn update_priorities(&mut self, indices: &[usize], td_errors: &[f64]) {
        let Some(p) = &mut self.per else {
            return;
        };
        for (&i, &td) in indices.iter().zip(td_errors) {
            let td = if td.is_finite() { math::abs(td) } else { 0.0 };
            let pr = td + p.params.eps;
            p.priorities[i] = pr;
            p.tree.set(i, libm::pow(pr, p.params.alpha));
            if pr > p.max_priority {
                p.max_priority = pr;
            }
        }
    }
}
