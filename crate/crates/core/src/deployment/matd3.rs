//! Shared-backbone actor, twin centralized critics and their updates.

use alloc::vec::Vec;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::TrainingFault;
use super::env::{ACTION_DIM, EnvConfig};
use super::nn::{Activation, Adam, Mlp, MlpCache, all_finite, soft_update};
use super::replay::Batch;
use crate::math;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Ablation {
    /// Uniform replay with unit weights.
    pub no_per: bool,
    /// One encoder per agent instead of a shared one.
    pub no_shared_backbone: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    pub env: EnvConfig,
    pub episodes: usize,
    pub gamma: f64,
    pub tau: f64,
    pub sigma: f64,
    pub policy_delay: usize,
    pub actor_lr: f64,
    pub critic_lr: f64,
    pub batch_size: usize,
    pub buffer_size: usize,
    pub per_alpha: f64,
    pub per_beta_start: f64,
    pub per_beta_end: f64,
    pub per_eps: f64,
    pub target_noise: f64,
    pub target_noise_clip: f64,
    pub encoder_hidden: [usize; 2],
    pub head_hidden: usize,
    pub critic_hidden: [usize; 2],
    pub ablation: Ablation,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            env: EnvConfig::default(),
            episodes: 900,
            gamma: 0.99,
            tau: 0.005,
            sigma: 0.2,
            policy_delay: 2,
            actor_lr: 1e-4,
            critic_lr: 5e-4,
            batch_size: 128,
            buffer_size: 1_000_000,
            per_alpha: 0.6,
            per_beta_start: 0.4,
            per_beta_end: 1.0,
            per_eps: 1e-6,
            target_noise: 0.2,
            target_noise_clip: 0.5,
            encoder_hidden: [256, 128],
            head_hidden: 64,
            critic_hidden: [256, 256],
            ablation: Ablation::default(),
            seed: 0,
        }
    }
}

/// `r + gamma * (1 - done) * min(q1', q2')`.
pub fn twin_target(reward: f64, gamma: f64, done: bool, q1: f64, q2: f64) -> f64 {
    let next = if q1 < q2 { q1 } else { q2 };
    reward + if done { 0.0 } else { gamma * next }
}

/// `(1/|B|) * sum_j w_j (y_j - q_j)^2`.
pub fn weighted_critic_loss(targets: &[f64], preds: &[f64], weights: &[f64]) -> f64 {
    let n = targets.len() as f64;
    targets
        .iter()
        .zip(preds)
        .zip(weights)
        .map(|((y, q), w)| w * (y - q) * (y - q))
        .sum::<f64>()
        / n
}

fn sigmoid(x: f32) -> f32 {
    1.0 / (1.0 + math::expf(-x))
}

/// Clamps motion to `[-1, 1]` and the gate to `[0, 1]`.
pub fn clip_action(a: &mut [f32]) {
    for chunk in a.chunks_exact_mut(ACTION_DIM) {
        for v in &mut chunk[..3] {
            *v = v.clamp(-1.0, 1.0);
        }
        chunk[3] = chunk[3].clamp(0.0, 1.0);
    }
}

/// Per-agent policy: encoder over `[own observation, pooled grid]`, then a
/// role head over `[embedding, layer indicator]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActorNet {
    pub num_agents: usize,
    pub obs_dim: usize,
    pub grid_dim: usize,
    /// One shared encoder, or one per agent.
    pub encoders: Vec<Mlp>,
    pub head: Mlp,
}

pub struct ActorPass {
    batch: usize,
    enc_caches: Vec<MlpCache>,
    head_cache: MlpCache,
    /// `batch * num_agents` rows of 4 squashed outputs.
    pub actions: Vec<f32>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ActorGrads {
    pub encoders: Vec<Vec<f32>>,
    pub head: Vec<f32>,
}

impl ActorNet {
    pub fn new<R: Rng>(cfg: &TrainConfig, rng: &mut R) -> Self {
        let env = &cfg.env;
        let (obs_dim, grid_dim) = (env.obs_dim(), env.grid_dim());
        let enc_dims = [obs_dim + grid_dim, cfg.encoder_hidden[0], cfg.encoder_hidden[1]];
        let n_enc = if cfg.ablation.no_shared_backbone { env.num_agents } else { 1 };
        let encoders = (0..n_enc)
            .map(|_| Mlp::new(&enc_dims, &[Activation::Tanh, Activation::Tanh], 1.0, rng))
            .collect();
        let head = Mlp::new(
            &[cfg.encoder_hidden[1] + 1, cfg.head_hidden, ACTION_DIM],
            &[Activation::Tanh, Activation::Identity],
            0.1,
            rng,
        );
        Self {
            num_agents: env.num_agents,
            obs_dim,
            grid_dim,
            encoders,
            head,
        }
    }

    pub fn shared(&self) -> bool {
        self.encoders.len() == 1
    }

    fn layer_indicator_index(&self) -> usize {
        self.obs_dim - 4
    }

    pub fn zero_grads(&self) -> ActorGrads {
        ActorGrads {
            encoders: self.encoders.iter().map(|e| alloc::vec![0.0; e.params.len()]).collect(),
            head: alloc::vec![0.0; self.head.params.len()],
        }
    }

    fn agent_input(&self, state: &[f32], i: usize, out: &mut Vec<f32>) {
        let n = self.num_agents;
        out.extend_from_slice(&state[i * self.obs_dim..(i + 1) * self.obs_dim]);
        out.extend_from_slice(&state[n * self.obs_dim..n * self.obs_dim + self.grid_dim]);
    }

    pub fn forward(&self, states: &[f32], batch: usize) -> ActorPass {
        let n = self.num_agents;
        let sd = n * self.obs_dim + self.grid_dim;
        assert_eq!(states.len(), batch * sd);
        let in_dim = self.obs_dim + self.grid_dim;
        let emb = self.head.input_dim() - 1;
        let mut embeddings = alloc::vec![0.0f32; batch * n * emb];
        let mut enc_caches = Vec::with_capacity(self.encoders.len());
        if self.shared() {
            let mut x = Vec::with_capacity(batch * n * in_dim);
            for b in 0..batch {
                for i in 0..n {
                    self.agent_input(&states[b * sd..(b + 1) * sd], i, &mut x);
                }
            }
            let mut cache = MlpCache::default();
            self.encoders[0].forward(&x, batch * n, &mut cache);
            embeddings.copy_from_slice(cache.output());
            enc_caches.push(cache);
        } else {
            for (i, enc) in self.encoders.iter().enumerate() {
                let mut x = Vec::with_capacity(batch * in_dim);
                for b in 0..batch {
                    self.agent_input(&states[b * sd..(b + 1) * sd], i, &mut x);
                }
                let mut cache = MlpCache::default();
                enc.forward(&x, batch, &mut cache);
                for (b, row) in cache.output().chunks_exact(emb).enumerate() {
                    let r = b * n + i;
                    embeddings[r * emb..(r + 1) * emb].copy_from_slice(row);
                }
                enc_caches.push(cache);
            }
        }
        let li = self.layer_indicator_index();
        let mut head_in = Vec::with_capacity(batch * n * (emb + 1));
        for b in 0..batch {
            for i in 0..n {
                let r = b * n + i;
                head_in.extend_from_slice(&embeddings[r * emb..(r + 1) * emb]);
                head_in.push(states[b * sd + i * self.obs_dim + li]);
            }
        }
        let mut head_cache = MlpCache::default();
        self.head.forward(&head_in, batch * n, &mut head_cache);
        let mut actions = head_cache.output().to_vec();
        for chunk in actions.chunks_exact_mut(ACTION_DIM) {
            for v in &mut chunk[..3] {
                *v = math::tanhf(*v);
            }
            chunk[3] = sigmoid(chunk[3]);
        }
        ActorPass {
            batch,
            enc_caches,
            head_cache,
            actions,
        }
    }

    pub fn act(&self, states: &[f32], batch: usize) -> Vec<f32> {
        self.forward(states, batch).actions
    }

    /// Accumulates gradients of a loss given `d_actions` (loss gradient
    /// w.r.t. the squashed actions). Shared modules average over agents.
    pub fn backward(&self, pass: &ActorPass, d_actions: &[f32], grads: &mut ActorGrads) {
        let n = self.num_agents;
        let batch = pass.batch;
        let mut d_raw = d_actions.to_vec();
        for (d, a) in d_raw.chunks_exact_mut(ACTION_DIM).zip(pass.actions.chunks_exact(ACTION_DIM)) {
            for k in 0..3 {
                d[k] *= 1.0 - a[k] * a[k];
            }
            d[3] *= a[3] * (1.0 - a[3]);
        }
        let inv_n = 1.0 / n as f32;
        d_raw.iter_mut().for_each(|v| *v *= inv_n);
        let d_head_in = self
            .head
            .backward(&pass.head_cache, &d_raw, &mut grads.head, true)
            .unwrap_or_default();
        let emb = self.head.input_dim() - 1;
        if self.shared() {
            let mut d_emb = Vec::with_capacity(batch * n * emb);
            for row in d_head_in.chunks_exact(emb + 1) {
                d_emb.extend_from_slice(&row[..emb]);
            }
            self.encoders[0].backward(&pass.enc_caches[0], &d_emb, &mut grads.encoders[0], false);
        } else {
            for (i, enc) in self.encoders.iter().enumerate() {
                let mut d_emb = Vec::with_capacity(batch * emb);
                for b in 0..batch {
                    let r = b * n + i;
                    // Undo the 1/N averaging: per-agent encoders are not shared.
                    d_emb.extend(d_head_in[r * (emb + 1)..r * (emb + 1) + emb].iter().map(|v| v * n as f32));
                }
                enc.backward(&pass.enc_caches[i], &d_emb, &mut grads.encoders[i], false);
            }
        }
    }

    pub fn nets(&self) -> impl Iterator<Item = &Mlp> {
        self.encoders.iter().chain(core::iter::once(&self.head))
    }

    pub fn nets_mut(&mut self) -> impl Iterator<Item = &mut Mlp> {
        self.encoders.iter_mut().chain(core::iter::once(&mut self.head))
    }
}

pub fn make_critic<R: Rng>(cfg: &TrainConfig, rng: &mut R) -> Mlp {
    let input = cfg.env.state_dim() + cfg.env.action_dim();
    Mlp::new(
        &[input, cfg.critic_hidden[0], cfg.critic_hidden[1], 1],
        &[Activation::Relu, Activation::Relu, Activation::Identity],
        1.0,
        rng,
    )
}

fn critic_input(states: &[f32], actions: &[f32], batch: usize, sd: usize, ad: usize) -> Vec<f32> {
    let mut x = Vec::with_capacity(batch * (sd + ad));
    for b in 0..batch {
        x.extend_from_slice(&states[b * sd..(b + 1) * sd]);
        x.extend_from_slice(&actions[b * ad..(b + 1) * ad]);
    }
    x
}

/// One deterministic-policy-gradient step ascending `critic`. The closure
/// returns Q values and dQ/da for a batch of joint actions.
pub fn policy_gradient_step<F>(
    actor: &mut ActorNet,
    opts: &mut [Adam],
    states: &[f32],
    batch: usize,
    mut critic: F,
) -> Result<f64, TrainingFault>
where
    F: FnMut(&[f32]) -> (Vec<f32>, Vec<f32>),
{
    let pass = actor.forward(states, batch);
    let (q, dq_da) = critic(&pass.actions);
    let mean_q = q.iter().map(|&v| v as f64).sum::<f64>() / batch as f64;
    let scale = -1.0 / batch as f32;
    let d_actions: Vec<f32> = dq_da.iter().map(|g| g * scale).collect();
    let mut grads = actor.zero_grads();
    actor.backward(&pass, &d_actions, &mut grads);
    let all = grads.encoders.iter().chain(core::iter::once(&grads.head));
    if !all.clone().all(|g| all_finite(g)) {
        return Err(TrainingFault::NonFiniteGradient("actor"));
    }
    for ((net, opt), g) in actor.nets_mut().zip(opts.iter_mut()).zip(all) {
        opt.step(&mut net.params, g);
    }
    Ok(mean_q)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyBundle {
    pub config: TrainConfig,
    pub actor: ActorNet,
    pub actor_target: ActorNet,
    pub critics: [Mlp; 2],
    pub critic_targets: [Mlp; 2],
    pub actor_opts: Vec<Adam>,
    pub critic_opts: [Adam; 2],
    pub critic_updates: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CriticStats {
    pub td_errors: Vec<f64>,
    pub loss: f64,
}

impl PolicyBundle {
    pub fn new<R: Rng>(config: &TrainConfig, rng: &mut R) -> Self {
        let actor = ActorNet::new(config, rng);
        let critics = [make_critic(config, rng), make_critic(config, rng)];
        let actor_opts = actor.nets().map(|n| Adam::new(config.actor_lr as f32, n.params.len())).collect();
        let critic_opts = [
            Adam::new(config.critic_lr as f32, critics[0].params.len()),
            Adam::new(config.critic_lr as f32, critics[1].params.len()),
        ];
        Self {
            config: config.clone(),
            actor_target: actor.clone(),
            critic_targets: critics.clone(),
            actor,
            critics,
            actor_opts,
            critic_opts,
            critic_updates: 0,
        }
    }

    fn dims(&self) -> (usize, usize) {
        (self.config.env.state_dim(), self.config.env.action_dim())
    }

    /// Deterministic joint action for one state.
    pub fn act(&self, state: &[f32]) -> Vec<f32> {
        self.actor.act(state, 1)
    }

    /// Target-policy actions with clipped Gaussian smoothing noise.
    pub fn smoothed_target_actions<R: Rng>(&self, next_states: &[f32], batch: usize, rng: &mut R) -> Vec<f32> {
        let mut a = self.actor_target.act(next_states, batch);
        if self.config.target_noise > 0.0 {
            let normal = Normal::new(0.0, self.config.target_noise).expect("positive std");
            let c = self.config.target_noise_clip;
            for v in a.iter_mut() {
                *v += normal.sample(rng).clamp(-c, c) as f32;
            }
        }
        clip_action(&mut a);
        a
    }

    pub fn critic_update<R: Rng>(&mut self, batch: &Batch, rng: &mut R) -> Result<CriticStats, TrainingFault> {
        let b = batch.len();
        let (sd, ad) = self.dims();
        let next_a = self.smoothed_target_actions(&batch.next_states, b, rng);
        let next_in = critic_input(&batch.next_states, &next_a, b, sd, ad);
        let q1t = self.critic_targets[0].predict(&next_in, b);
        let q2t = self.critic_targets[1].predict(&next_in, b);
        let targets: Vec<f64> = (0..b)
            .map(|j| {
                twin_target(
                    batch.rewards[j] as f64,
                    self.config.gamma,
                    batch.dones[j] > 0.5,
                    q1t[j] as f64,
                    q2t[j] as f64,
                )
            })
            .collect();
        let x = critic_input(&batch.states, &batch.actions, b, sd, ad);
        let weights: Vec<f64> = batch.weights.iter().map(|&w| w as f64).collect();
        let mut td_errors = Vec::new();
        let mut loss = 0.0;
        for k in 0..2 {
            let mut cache = MlpCache::default();
            self.critics[k].forward(&x, b, &mut cache);
            let preds: Vec<f64> = cache.output().iter().map(|&q| q as f64).collect();
            let l = weighted_critic_loss(&targets, &preds, &weights);
            if !l.is_finite() {
                return Err(TrainingFault::NonFiniteLoss);
            }
            let grad_out: Vec<f32> = (0..b)
                .map(|j| (-2.0 * weights[j] * (targets[j] - preds[j]) / b as f64) as f32)
                .collect();
            let mut grads = alloc::vec![0.0f32; self.critics[k].params.len()];
            self.critics[k].backward(&cache, &grad_out, &mut grads, false);
            if !all_finite(&grads) {
                return Err(TrainingFault::NonFiniteGradient("critic"));
            }
            self.critic_opts[k].step(&mut self.critics[k].params, &grads);
            if k == 0 {
                td_errors = targets.iter().zip(&preds).map(|(y, q)| math::abs(y - q)).collect();
                loss = l;
            }
        }
        self.critic_updates += 1;
        Ok(CriticStats { td_errors, loss })
    }

    /// Policy step against the first critic; returns batch-mean Q before
    /// the step.
    pub fn actor_update(&mut self, batch: &Batch) -> Result<f64, TrainingFault> {
        let b = batch.len();
        let (sd, ad) = self.dims();
        let Self {
            actor,
            actor_opts,
            critics,
            ..
        } = self;
        let critic = &critics[0];
        policy_gradient_step(actor, actor_opts, &batch.states, b, |actions| {
            let x = critic_input(&batch.states, actions, b, sd, ad);
            let mut cache = MlpCache::default();
            critic.forward(&x, b, &mut cache);
            let q = cache.output().to_vec();
            let mut scratch = alloc::vec![0.0f32; critic.params.len()];
            let dx = critic
                .backward(&cache, &alloc::vec![1.0; b], &mut scratch, true)
                .unwrap_or_default();
            let mut da = Vec::with_capacity(b * ad);
            for row in dx.chunks_exact(sd + ad) {
                da.extend_from_slice(&row[sd..]);
            }
            (q, da)
        })
    }

    pub fn soft_update_targets(&mut self) {
        let tau = self.config.tau as f32;
        for (t, o) in self.actor_target.nets_mut().zip(self.actor.nets()) {
            soft_update(&mut t.params, &o.params, tau);
        }
        for k in 0..2 {
            soft_update(&mut self.critic_targets[k].params, &self.critics[k].params, tau);
        }
    }
}
