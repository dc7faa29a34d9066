//! Deterministic evaluation: roll the greedy policy through a fixed
//! battery of scenarios at every traffic density and tally the outcomes.

use crate::config::{ConfigError, RunConfig};
use crate::env::road::{build_intersection, Maneuver};
use crate::env::{spawn_scenario, EnvError};
use crate::mdp::{Action, EpisodeOutcome, EpisodeRunner};
use crate::net::Mlp;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("evaluation needs at least one trial per scenario")]
    NoTrials,
}

/// Outcome tallies for one traffic density.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioStats {
    pub n_sv: usize,
    pub trials: u32,
    pub success: u32,
    pub collision: u32,
    pub offroad: u32,
    pub timeout: u32,
    /// Mean completion time over successful trials (NaN if none).
    pub avg_time: f64,
    /// Mean episode return over all trials.
    pub avg_reward: f64,
}

impl ScenarioStats {
    pub fn success_rate(&self) -> f64 {
        self.success as f64 / self.trials as f64
    }

    pub fn collision_rate(&self) -> f64 {
        self.collision as f64 / self.trials as f64
    }

    pub fn offroad_rate(&self) -> f64 {
        self.offroad as f64 / self.trials as f64
    }

    pub fn timeout_rate(&self) -> f64 {
        self.timeout as f64 / self.trials as f64
    }
}

/// Per-density statistics, index 0 holding the empty junction.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub scenarios: Vec<ScenarioStats>,
}

impl EvalReport {
    pub fn scenario(&self, n_sv: usize) -> &ScenarioStats {
        &self.scenarios[n_sv]
    }
}

/// Highest-scoring action, breaking ties toward the lowest index.
pub fn greedy_action(logits: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in logits.iter().enumerate().skip(1) {
        if v > logits[best] {
            best = i;
        }
    }
    best
}

/// Trial seeds are derived from the master seed so every (density, trial)
/// pair replays the same scenario regardless of evaluation order.
pub fn trial_seed(master: u64, n_sv: usize, trial: u32) -> u64 {
    master ^ ((n_sv as u64 + 1) << 48) ^ (trial as u64 + 1)
}

/// Evaluate the greedy policy over `cfg.eval.trials` scenarios per density
/// from 0 to `cfg.n_sv_max`, cycling the ego maneuver across trials.
pub fn run_eval(actor: &Mlp, cfg: &RunConfig, master_seed: u64) -> Result<EvalReport, EvalError> {
    cfg.validate()?;
    if cfg.eval.trials == 0 {
        return Err(EvalError::NoTrials);
    }
    let road = build_intersection(&cfg.env).map_err(EnvError::from)?;
    let mut scenarios = Vec::with_capacity(cfg.n_sv_max + 1);
    for n_sv in 0..=cfg.n_sv_max {
        let mut stats = ScenarioStats {
            n_sv,
            trials: cfg.eval.trials,
            success: 0,
            collision: 0,
            offroad: 0,
            timeout: 0,
            avg_time: f64::NAN,
            avg_reward: 0.0,
        };
        let mut time_sum = 0.0;
        let mut reward_sum = 0.0;
        for trial in 0..cfg.eval.trials {
            let maneuver = Maneuver::ALL[trial as usize % Maneuver::ALL.len()];
            let mut rng = ChaCha8Rng::seed_from_u64(trial_seed(master_seed, n_sv, trial));
            let world = spawn_scenario(&road, &cfg.env, n_sv, maneuver, &mut rng)?;
            let mut runner = EpisodeRunner::new(world, &road, &cfg.env, &cfg.mdp);
            let mut episode_reward = 0.0;
            let outcome = loop {
                let input = runner.observe(cfg.n_sv_max).to_input(&cfg.net);
                let action = greedy_action(&actor.output(&input));
                let (reward, done) = runner.step(Action::from_index(action).expect("valid action"));
                episode_reward += reward.total();
                if let Some(outcome) = done {
                    break outcome;
                }
            };
            match outcome {
                EpisodeOutcome::Success => {
                    stats.success += 1;
                    time_sum += runner.world.time;
                }
                EpisodeOutcome::Collision => stats.collision += 1,
                EpisodeOutcome::OffRoad => stats.offroad += 1,
                EpisodeOutcome::Timeout => stats.timeout += 1,
            }
            reward_sum += episode_reward;
        }
        if stats.success > 0 {
            stats.avg_time = time_sum / stats.success as f64;
        }
        stats.avg_reward = reward_sum / stats.trials as f64;
        scenarios.push(stats);
    }
    Ok(EvalReport { scenarios })
}
