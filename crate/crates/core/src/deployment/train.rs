use alloc::boxed::Box;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::env::DeploymentEnv;
use super::matd3::{PolicyBundle, TrainConfig, clip_action};
use super::replay::{PerParams, ReplayBuffer};
use super::{Deployment, DeploymentError, TrainingFault, filter_by_gate};
use crate::scenario::Scenario;

/// Reset stream used for deterministic policy extraction.
pub const EVAL_EPISODE: u64 = u64::MAX - 1;
const TRAINER_STREAM: u64 = u64::MAX;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct EpisodeLog {
    pub episode: usize,
    /// Sum of team rewards over the episode.
    pub reward: f64,
    pub r_vol: f64,
    pub r_net: f64,
    pub r_topo: f64,
    pub final_c_conn: f64,
    pub final_cbar_syn: f64,
    pub final_active: usize,
    pub critic_loss: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub bundle: PolicyBundle,
    pub log: Vec<EpisodeLog>,
}

fn validate(cfg: &TrainConfig) -> Result<(), TrainingFault> {
    let bad = |m| Err(TrainingFault::InvalidConfig(m));
    if cfg.env.num_agents == 0 {
        return bad("num_agents must be positive");
    }
    if cfg.env.t_step == 0 {
        return bad("t_step must be positive");
    }
    if cfg.batch_size == 0 || cfg.buffer_size == 0 {
        return bad("batch and buffer sizes must be positive");
    }
    if cfg.policy_delay == 0 {
        return bad("policy_delay must be positive");
    }
    if cfg.env.pool == 0 {
        return bad("pool must be positive");
    }
    if !(cfg.sigma >= 0.0 && cfg.target_noise >= 0.0 && cfg.gamma >= 0.0 && cfg.tau >= 0.0 && cfg.tau <= 1.0) {
        return bad("noise, discount and tau must be nonnegative (tau <= 1)");
    }
    Ok(())
}

pub fn train(scenario: &Scenario, config: &TrainConfig) -> Result<TrainOutcome, TrainingFault> {
    train_with(scenario, config, |_| {})
}

/// Full training run; `on_episode` sees each log row as it is produced.
pub fn train_with<F>(scenario: &Scenario, config: &TrainConfig, mut on_episode: F) -> Result<TrainOutcome, TrainingFault>
where
    F: FnMut(&EpisodeLog),
{
    validate(config)?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(TRAINER_STREAM);
    let mut bundle = PolicyBundle::new(config, &mut rng);
    let mut env = DeploymentEnv::new(scenario, config.env.clone(), config.seed);
    let total_steps = (config.episodes * config.env.t_step).max(1);
    let per = (!config.ablation.no_per).then_some(PerParams {
        alpha: config.per_alpha,
        eps: config.per_eps,
    });
    let mut buffer = ReplayBuffer::new(
        config.env.state_dim(),
        config.env.action_dim(),
        config.buffer_size.min(total_steps),
        per,
    );
    let noise = Normal::new(0.0, config.sigma.max(0.0)).expect("finite std");
    let mut log = Vec::with_capacity(config.episodes);
    let mut global_step = 0usize;
    for episode in 0..config.episodes {
        let mut state = env.reset(episode as u64);
        let mut row = EpisodeLog {
            episode,
            ..EpisodeLog::default()
        };
        let mut losses = 0.0;
        let mut n_losses = 0usize;
        for step in 0..config.env.t_step {
            let at = |cause| TrainingFault::At {
                episode,
                step,
                cause: Box::new(cause),
            };
            let mut action = bundle.act(&state);
            if config.sigma > 0.0 {
                for a in action.iter_mut() {
                    *a += noise.sample(&mut rng) as f32;
                }
            }
            clip_action(&mut action);
            let (r, done) = env.step(&action).map_err(at)?;
            let next = env.state();
            buffer.push(&state, &action, r.total as f32, &next, done);
            row.reward += r.total;
            row.r_vol += r.r_vol;
            row.r_net += r.r_net;
            row.r_topo += r.r_topo;
            global_step += 1;
            if buffer.len() >= config.batch_size {
                let frac = (global_step as f64 / total_steps as f64).min(1.0);
                let beta = config.per_beta_start + (config.per_beta_end - config.per_beta_start) * frac;
                let batch = buffer
                    .sample(config.batch_size, beta, &mut rng)
                    .expect("buffer holds at least one batch");
                let stats = bundle.critic_update(&batch, &mut rng).map_err(at)?;
                buffer.update_priorities(&batch.indices, &stats.td_errors);
                losses += stats.loss;
                n_losses += 1;
                if bundle.critic_updates.is_multiple_of(config.policy_delay as u64) {
                    bundle.actor_update(&batch).map_err(at)?;
                    bundle.soft_update_targets();
                }
            }
            state = next;
        }
        let n = config.env.t_step as f64;
        row.r_vol /= n;
        row.r_net /= n;
        row.r_topo /= n;
        row.final_c_conn = env.last.c_conn;
        row.final_cbar_syn = env.last.metrics.cbar_syn;
        row.final_active = env.last.active;
        row.critic_loss = if n_losses > 0 { losses / n_losses as f64 } else { 0.0 };
        on_episode(&row);
        log.push(row);
    }
    Ok(TrainOutcome { bundle, log })
}

/// Uniform random actions (motion in `[-1, 1]`, gate in `[0, 1]`) on the
/// same seeded resets a trained policy would see.
pub fn random_baseline(scenario: &Scenario, config: &TrainConfig, seed: u64) -> Result<Vec<EpisodeLog>, TrainingFault> {
    validate(config)?;
    let mut env = DeploymentEnv::new(scenario, config.env.clone(), config.seed);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut log = Vec::with_capacity(config.episodes);
    for episode in 0..config.episodes {
        env.reset(episode as u64);
        let mut row = EpisodeLog {
            episode,
            ..EpisodeLog::default()
        };
        for _ in 0..config.env.t_step {
            let action: Vec<f32> = (0..config.env.action_dim())
                .map(|k| {
                    if k % 4 == 3 {
                        rng.random::<f32>()
                    } else {
                        rng.random::<f32>() * 2.0 - 1.0
                    }
                })
                .collect();
            let (r, _) = env.step(&action)?;
            row.reward += r.total;
            row.r_vol += r.r_vol;
            row.r_net += r.r_net;
            row.r_topo += r.r_topo;
        }
        let n = config.env.t_step as f64;
        row.r_vol /= n;
        row.r_net /= n;
        row.r_topo /= n;
        row.final_c_conn = env.last.c_conn;
        row.final_cbar_syn = env.last.metrics.cbar_syn;
        row.final_active = env.last.active;
        log.push(row);
    }
    Ok(log)
}

/// Deterministic rollout of the policy from the evaluation reset; returns
/// the final environment.
pub fn rollout(bundle: &PolicyBundle, scenario: &Scenario) -> Result<DeploymentEnv, TrainingFault> {
    let mut env = DeploymentEnv::new(scenario, bundle.config.env.clone(), bundle.config.seed);
    let mut state = env.reset(EVAL_EPISODE);
    for _ in 0..bundle.config.env.t_step {
        let action = bundle.act(&state);
        env.step(&action)?;
        state = env.state();
    }
    Ok(env)
}

/// Stations whose final gate is strictly above `threshold`.
pub fn extract_deployment(bundle: &PolicyBundle, scenario: &Scenario, threshold: f64) -> Result<Deployment, DeploymentError> {
    let env = rollout(bundle, scenario).map_err(DeploymentError::Rollout)?;
    let d = filter_by_gate(&env.positions, &env.gates, threshold);
    if d.is_empty() {
        Err(DeploymentError::NoGatedAgents)
    } else {
        Ok(d)
    }
}
