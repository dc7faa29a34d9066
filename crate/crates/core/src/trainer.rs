//! Training loop: collect one episode at a time with the current policy,
//! estimate advantages, run clipped-objective policy optimization on the
//! episode batch, and let the curriculum strategy pick the traffic
//! density for the next episode.

use crate::bandit::BanditState;
use crate::config::{ConfigError, CurriculumStrategy, RunConfig, TrainerConfig};
use crate::env::road::{build_intersection, Maneuver, RoadNetwork};
use crate::env::{spawn_scenario, EnvError, WorldState};
use crate::mdp::{Action, EpisodeOutcome, EpisodeRunner, N_ACTIONS};
use crate::net::checkpoint::{self, CheckpointError, RunMeta};
use crate::net::{categorical_sample, entropy, log_prob, softmax, Adam, Mlp};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum TrainError {
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Checkpoint(#[from] CheckpointError),
    #[error("non-finite {what} at episode {episode}")]
    Numeric { what: &'static str, episode: u64 },
    #[error("checkpoint does not match this run: {0}")]
    ResumeMismatch(String),
}

/// One episode of on-policy experience.
#[derive(Debug, Clone)]
pub struct Rollout {
    pub obs: Vec<Vec<f64>>,
    pub actions: Vec<usize>,
    pub log_probs: Vec<f64>,
    pub values: Vec<f64>,
    pub rewards: Vec<f64>,
    pub outcome: EpisodeOutcome,
    /// Episode wall-clock at termination, seconds.
    pub t_c: f64,
    pub n_lc: u32,
}

impl Rollout {
    pub fn len(&self) -> usize {
        self.rewards.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rewards.is_empty()
    }

    pub fn total_reward(&self) -> f64 {
        self.rewards.iter().sum()
    }
}

/// Run one episode, sampling actions from the actor and recording what
/// the optimizer will need.
pub fn collect_episode<R: Rng>(
    actor: &Mlp,
    critic: &Mlp,
    world: WorldState,
    road: &RoadNetwork,
    cfg: &RunConfig,
    rng: &mut R,
) -> Rollout {
    let mut runner = EpisodeRunner::new(world, road, &cfg.env, &cfg.mdp);
    let mut rollout = Rollout {
        obs: Vec::new(),
        actions: Vec::new(),
        log_probs: Vec::new(),
        values: Vec::new(),
        rewards: Vec::new(),
        outcome: EpisodeOutcome::Timeout,
        t_c: 0.0,
        n_lc: 0,
    };
    loop {
        let input = runner.observe(cfg.n_sv_max).to_input(&cfg.net);
        let logits = actor.output(&input);
        let probs = softmax(&logits);
        let action = categorical_sample(&probs, rng);
        let value = critic.output(&input)[0];
        let (reward, done) = runner.step(Action::from_index(action).expect("valid action"));

        rollout.obs.push(input);
        rollout.actions.push(action);
        rollout.log_probs.push(log_prob(&logits, action));
        rollout.values.push(value);
        rollout.rewards.push(reward.total());

        if let Some(outcome) = done {
            rollout.outcome = outcome;
            break;
        }
    }
    rollout.t_c = runner.world.time;
    rollout.n_lc = runner.n_lc;
    rollout
}

/// Generalized advantage estimation over a finished episode (terminal
/// value zero), returning `(advantages, returns)`.
pub fn compute_gae(rewards: &[f64], values: &[f64], gamma: f64, lambda: f64) -> (Vec<f64>, Vec<f64>) {
    assert_eq!(rewards.len(), values.len());
    let mut advantages = vec![0.0; rewards.len()];
    let mut acc = 0.0;
    for t in (0..rewards.len()).rev() {
        let next_value = if t + 1 < values.len() { values[t + 1] } else { 0.0 };
        let delta = rewards[t] + gamma * next_value - values[t];
        acc = delta + gamma * lambda * acc;
        advantages[t] = acc;
    }
    let returns = advantages
        .iter()
        .zip(values)
        .map(|(a, v)| a + v)
        .collect();
    (advantages, returns)
}

/// Losses observed in the final optimization epoch.
#[derive(Debug, Clone, Copy, Default)]
pub struct UpdateStats {
    pub actor_loss: f64,
    pub critic_loss: f64,
    pub entropy: f64,
}

/// Gradient of the clipped surrogate objective with an entropy bonus,
/// accumulated over the episode into `grads` (zeroed first). Returns
/// `(loss, mean entropy)`.
pub fn actor_pass(
    actor: &Mlp,
    rollout: &Rollout,
    advantages: &[f64],
    clip: f64,
    ent_coef: f64,
    grads: &mut [f64],
) -> (f64, f64) {
    grads.fill(0.0);
    let t_len = rollout.len() as f64;
    let mut loss = 0.0;
    let mut ent_sum = 0.0;
    let mut dlogits = vec![0.0; N_ACTIONS];
    for t in 0..rollout.len() {
        let (logits, cache) = actor.forward(&rollout.obs[t]);
        let probs = softmax(&logits);
        let action = rollout.actions[t];
        let ratio = (log_prob(&logits, action) - rollout.log_probs[t]).exp();
        let adv = advantages[t];
        let clipped = ratio.clamp(1.0 - clip, 1.0 + clip);
        loss -= (ratio * adv).min(clipped * adv) / t_len;
        let ent = entropy(&probs);
        ent_sum += ent;

        // Outside the clip boundary (in the direction the advantage
        // pushes) the surrogate is constant and contributes no gradient.
        let active = !((ratio > 1.0 + clip && adv > 0.0) || (ratio < 1.0 - clip && adv < 0.0));
        for k in 0..N_ACTIONS {
            let indicator = if k == action { 1.0 } else { 0.0 };
            let mut d = 0.0;
            if active {
                d -= adv * ratio * (indicator - probs[k]) / t_len;
            }
            if probs[k] > 0.0 {
                d += ent_coef * probs[k] * (probs[k].ln() + ent) / t_len;
            }
            dlogits[k] = d;
        }
        actor.backward_into(&cache, &dlogits, grads);
    }
    let mean_entropy = ent_sum / t_len;
    (loss - ent_coef * mean_entropy, mean_entropy)
}

/// Mean-squared value error and its gradient, accumulated into `grads`
/// (zeroed first). The loss is reported unscaled; the gradient carries
/// the configured coefficient.
pub fn critic_pass(
    critic: &Mlp,
    rollout: &Rollout,
    returns: &[f64],
    value_coef: f64,
    grads: &mut [f64],
) -> f64 {
    grads.fill(0.0);
    let t_len = rollout.len() as f64;
    let mut loss = 0.0;
    for t in 0..rollout.len() {
        let (v, cache) = critic.forward(&rollout.obs[t]);
        let err = v[0] - returns[t];
        loss += err * err / t_len;
        critic.backward_into(&cache, &[value_coef * 2.0 * err / t_len], grads);
    }
    loss
}

/// Normalize advantages in place (skipped for single-step episodes or a
/// degenerate spread).
fn normalize_advantages(advantages: &mut [f64]) {
    if advantages.len() < 2 {
        return;
    }
    let n = advantages.len() as f64;
    let mean = advantages.iter().sum::<f64>() / n;
    let var = advantages.iter().map(|a| (a - mean) * (a - mean)).sum::<f64>() / n;
    let std = var.sqrt();
    if std > 1e-8 {
        for a in advantages.iter_mut() {
            *a = (*a - mean) / std;
        }
    } else {
        for a in advantages.iter_mut() {
            *a -= mean;
        }
    }
}

/// Full-batch clipped-objective update on one episode: several epochs of
/// actor and critic steps over the same data.
pub fn ppo_update(
    actor: &mut Mlp,
    critic: &mut Mlp,
    actor_opt: &mut Adam,
    critic_opt: &mut Adam,
    rollout: &Rollout,
    gamma: f64,
    cfg: &TrainerConfig,
    episode: u64,
) -> Result<UpdateStats, TrainError> {
    let (mut advantages, returns) =
        compute_gae(&rollout.rewards, &rollout.values, gamma, cfg.gae_lambda);
    normalize_advantages(&mut advantages);

    let mut actor_grads = vec![0.0; actor.params.len()];
    let mut critic_grads = vec![0.0; critic.params.len()];
    let mut stats = UpdateStats::default();
    for _ in 0..cfg.epochs {
        let (actor_loss, ent) = actor_pass(
            actor,
            rollout,
            &advantages,
            cfg.clip_epsilon,
            cfg.entropy_coef,
            &mut actor_grads,
        );
        let critic_loss = critic_pass(critic, rollout, &returns, cfg.value_coef, &mut critic_grads);
        if !actor_loss.is_finite() {
            return Err(TrainError::Numeric {
                what: "actor loss",
                episode,
            });
        }
        if !critic_loss.is_finite() {
            return Err(TrainError::Numeric {
                what: "critic loss",
                episode,
            });
        }
        actor_opt.step(&mut actor.params, &actor_grads);
        critic_opt.step(&mut critic.params, &critic_grads);
        stats = UpdateStats {
            actor_loss,
            critic_loss,
            entropy: ent,
        };
    }
    Ok(stats)
}

/// Pick the traffic density for the next episode. Returns the arm and
/// the distribution it was drawn from (degenerate for the deterministic
/// strategies), so logs always carry the schedule state.
pub fn select_curriculum<R: Rng>(
    strategy: CurriculumStrategy,
    bandit: &BanditState,
    episode: u64,
    total_episodes: u64,
    rng: &mut R,
) -> (usize, Vec<f64>) {
    let n = bandit.n_arms();
    match strategy {
        CurriculumStrategy::Adaptive => {
            let probs = bandit.arm_probabilities();
            (bandit.sample_arm(rng), probs)
        }
        CurriculumStrategy::Fixed => {
            let mut probs = vec![0.0; n];
            probs[n - 1] = 1.0;
            (n - 1, probs)
        }
        CurriculumStrategy::Manual => {
            let arm = ((episode * n as u64) / total_episodes.max(1)).min(n as u64 - 1) as usize;
            let mut probs = vec![0.0; n];
            probs[arm] = 1.0;
            (arm, probs)
        }
        CurriculumStrategy::Random => {
            let probs = vec![1.0 / n as f64; n];
            (rng.gen_range(0..n), probs)
        }
    }
}

/// Everything worth recording about one training episode.
#[derive(Debug, Clone)]
pub struct EpisodeLog {
    pub episode: u64,
    pub arm: usize,
    pub reward: f64,
    pub outcome: EpisodeOutcome,
    pub t_c: f64,
    pub n_lc: u32,
    pub steps: usize,
    pub actor_loss: f64,
    pub critic_loss: f64,
    pub entropy: f64,
    pub r_norm: f64,
    pub r_hat: f64,
    /// Distribution the arm was drawn from.
    pub probs: Vec<f64>,
    /// Live scheduler weights after the update.
    pub weights: Vec<f64>,
}

/// Owns the networks, optimizers, scheduler, and random stream of one
/// training run, and advances them an episode at a time.
pub struct Trainer {
    cfg: RunConfig,
    road: RoadNetwork,
    actor: Mlp,
    critic: Mlp,
    actor_opt: Adam,
    critic_opt: Adam,
    bandit: BanditState,
    rng: ChaCha8Rng,
    episode: u64,
}

impl Trainer {
    pub fn new(cfg: RunConfig) -> Result<Trainer, TrainError> {
        cfg.validate()?;
        let road = build_intersection(&cfg.env).map_err(EnvError::from)?;
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let obs_len = cfg.obs_len();
        let mut actor = Mlp::init(obs_len, cfg.net.actor_hidden, N_ACTIONS, 0.01, &mut rng);
        let mut critic = Mlp::init(obs_len, cfg.net.critic_hidden, 1, 1.0, &mut rng);
        let mut bandit = BanditState::new(cfg.n_arms(), &cfg.bandit);

        if let Some(path) = cfg.trainer.resume_from.clone() {
            let (a, c, meta) = checkpoint::load(std::path::Path::new(&path))?;
            if a.in_dim != obs_len || a.hidden != cfg.net.actor_hidden || a.out_dim != N_ACTIONS {
                return Err(TrainError::ResumeMismatch(format!(
                    "actor is {}x{}x{}, expected {}x{}x{}",
                    a.in_dim, a.hidden, a.out_dim, obs_len, cfg.net.actor_hidden, N_ACTIONS
                )));
            }
            if c.in_dim != obs_len || c.hidden != cfg.net.critic_hidden || c.out_dim != 1 {
                return Err(TrainError::ResumeMismatch(format!(
                    "critic is {}x{}x{}, expected {}x{}x1",
                    c.in_dim, c.hidden, c.out_dim, obs_len, cfg.net.critic_hidden
                )));
            }
            if meta.n_sv_max != cfg.n_sv_max {
                return Err(TrainError::ResumeMismatch(format!(
                    "checkpoint was trained with n_sv_max = {}, this run uses {}",
                    meta.n_sv_max, cfg.n_sv_max
                )));
            }
            if meta.pos_scale != cfg.net.pos_scale || meta.vel_scale != cfg.net.vel_scale {
                return Err(TrainError::ResumeMismatch(
                    "input normalization differs from the checkpoint".into(),
                ));
            }
            actor = a;
            critic = c;
            bandit = BanditState::from_parts(
                &cfg.bandit,
                meta.bandit_live,
                meta.bandit_target,
                meta.bandit_episodes,
                meta.reward_min,
                meta.reward_max,
            );
        }

        let actor_opt = Adam::new(
            actor.params.len(),
            cfg.net.actor_lr,
            cfg.net.adam_beta1,
            cfg.net.adam_beta2,
            cfg.net.adam_eps,
        );
        let critic_opt = Adam::new(
            critic.params.len(),
            cfg.net.critic_lr,
            cfg.net.adam_beta1,
            cfg.net.adam_beta2,
            cfg.net.adam_eps,
        );
        Ok(Trainer {
            cfg,
            road,
            actor,
            critic,
            actor_opt,
            critic_opt,
            bandit,
            rng,
            episode: 0,
        })
    }

    pub fn config(&self) -> &RunConfig {
        &self.cfg
    }

    pub fn actor(&self) -> &Mlp {
        &self.actor
    }

    pub fn critic(&self) -> &Mlp {
        &self.critic
    }

    pub fn bandit(&self) -> &BanditState {
        &self.bandit
    }

    pub fn episodes_done(&self) -> u64 {
        self.episode
    }

    /// Sidecar state for a checkpoint written right now.
    pub fn meta(&self) -> RunMeta {
        let (r_min, r_max) = self.bandit.reward_extrema();
        RunMeta {
            seed: self.cfg.seed,
            episodes_done: self.episode,
            n_sv_max: self.cfg.n_sv_max,
            pos_scale: self.cfg.net.pos_scale,
            vel_scale: self.cfg.net.vel_scale,
            bandit_live: self.bandit.live_weights().to_vec(),
            bandit_target: self.bandit.target_weights().to_vec(),
            bandit_episodes: self.bandit.episodes(),
            reward_min: r_min,
            reward_max: r_max,
        }
    }

    /// Run one full episode: pick a density, spawn, collect, optimize,
    /// and feed the scheduler.
    pub fn step_episode(&mut self) -> Result<EpisodeLog, TrainError> {
        let (arm, probs) = select_curriculum(
            self.cfg.trainer.strategy,
            &self.bandit,
            self.episode,
            self.cfg.trainer.episodes,
            &mut self.rng,
        );
        let maneuver = Maneuver::ALL[self.rng.gen_range(0..Maneuver::ALL.len())];
        let world = spawn_scenario(&self.road, &self.cfg.env, arm, maneuver, &mut self.rng)?;
        let rollout = collect_episode(
            &self.actor,
            &self.critic,
            world,
            &self.road,
            &self.cfg,
            &mut self.rng,
        );
        let stats = ppo_update(
            &mut self.actor,
            &mut self.critic,
            &mut self.actor_opt,
            &mut self.critic_opt,
            &rollout,
            self.cfg.mdp.gamma,
            &self.cfg.trainer,
            self.episode,
        )?;

        let reward = rollout.total_reward();
        let (r_norm, r_hat) = if self.cfg.trainer.strategy == CurriculumStrategy::Adaptive {
            let update = self.bandit.record_episode(arm, reward);
            (update.r_norm, update.r_hat)
        } else {
            (0.0, 0.0)
        };

        let log = EpisodeLog {
            episode: self.episode,
            arm,
            reward,
            outcome: rollout.outcome,
            t_c: rollout.t_c,
            n_lc: rollout.n_lc,
            steps: rollout.len(),
            actor_loss: stats.actor_loss,
            critic_loss: stats.critic_loss,
            entropy: stats.entropy,
            r_norm,
            r_hat,
            probs,
            weights: self.bandit.live_weights().to_vec(),
        };
        self.episode += 1;
        Ok(log)
    }

    /// Run the configured episode budget, collecting every log.
    pub fn run_to_end(&mut self) -> Result<Vec<EpisodeLog>, TrainError> {
        let mut logs = Vec::with_capacity(self.cfg.trainer.episodes as usize);
        while self.episode < self.cfg.trainer.episodes {
            logs.push(self.step_episode()?);
        }
        Ok(logs)
    }
}
