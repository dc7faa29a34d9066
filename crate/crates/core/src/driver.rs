//! End-to-end run orchestration: wires the trainer, the evaluator, and
//! the curve exporter to their on-disk artifacts.

use crate::config::{ConfigError, RunConfig};
use crate::csvio::{
    self, CsvError, MetricsWriter, TraceWriter, TrajectorySample,
};
use crate::env::road::{build_intersection, Maneuver};
use crate::env::{spawn_scenario, EnvError};
use crate::eval::{self, EvalError, EvalReport};
use crate::mdp::{Action, EpisodeOutcome, EpisodeRunner, N_ACTIONS};
use crate::net::checkpoint::{self, CheckpointError};
use crate::net::Mlp;
use crate::savgol::{self, SavgolError};
use crate::trainer::{EpisodeLog, TrainError, Trainer};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::path::{Path, PathBuf};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DriverError {
    #[error(transparent)]
    Train(#[from] TrainError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Csv(#[from] CsvError),
    #[error(transparent)]
    Checkpoint(#[from] CheckpointError),
    #[error(transparent)]
    Smoothing(#[from] SavgolError),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("cannot create output directory {path}: {source}")]
    OutDir {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("checkpoint does not fit this configuration: {0}")]
    CheckpointMismatch(String),
}

/// Outcome tallies over a whole training run.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct OutcomeTally {
    pub success: u64,
    pub collision: u64,
    pub offroad: u64,
    pub timeout: u64,
}

impl OutcomeTally {
    fn record(&mut self, outcome: EpisodeOutcome) {
        match outcome {
            EpisodeOutcome::Success => self.success += 1,
            EpisodeOutcome::Collision => self.collision += 1,
            EpisodeOutcome::OffRoad => self.offroad += 1,
            EpisodeOutcome::Timeout => self.timeout += 1,
        }
    }
}

#[derive(Debug, Clone)]
pub struct TrainSummary {
    pub episodes: u64,
    pub outcomes: OutcomeTally,
    pub final_checkpoint: PathBuf,
}

fn ensure_dir(path: &Path) -> Result<(), DriverError> {
    std::fs::create_dir_all(path).map_err(|source| DriverError::OutDir {
        path: path.display().to_string(),
        source,
    })
}

/// Train per the configuration, streaming `metrics.csv` and
/// `bandit_trace.csv` into `cfg.out_dir`, saving periodic checkpoints and
/// the final model, and echoing every episode to `progress`.
pub fn run_train(
    cfg: &RunConfig,
    mut progress: impl FnMut(&EpisodeLog),
) -> Result<TrainSummary, DriverError> {
    let out_dir = PathBuf::from(&cfg.out_dir);
    ensure_dir(&out_dir)?;
    std::fs::write(out_dir.join("config.toml"), cfg.to_toml()).map_err(|source| {
        DriverError::OutDir {
            path: out_dir.display().to_string(),
            source,
        }
    })?;

    let mut trainer = Trainer::new(cfg.clone())?;
    let mut metrics = MetricsWriter::create(&out_dir.join("metrics.csv"), cfg.n_arms())?;
    let mut trace = TraceWriter::create(&out_dir.join("bandit_trace.csv"), cfg.n_arms())?;
    let mut outcomes = OutcomeTally::default();

    let interval = cfg.trainer.checkpoint_interval;
    while trainer.episodes_done() < cfg.trainer.episodes {
        let log = trainer.step_episode()?;
        metrics.write(&log)?;
        trace.write(&log)?;
        outcomes.record(log.outcome);
        let done = log.episode + 1;
        if interval > 0 && done % interval == 0 && done < cfg.trainer.episodes {
            let path = out_dir.join(format!("checkpoint_{done:06}.ckpt"));
            checkpoint::save(&path, trainer.actor(), trainer.critic(), &trainer.meta())?;
        }
        progress(&log);
    }
    metrics.flush()?;
    trace.flush()?;

    let final_checkpoint = out_dir.join("model.ckpt");
    checkpoint::save(
        &final_checkpoint,
        trainer.actor(),
        trainer.critic(),
        &trainer.meta(),
    )?;
    Ok(TrainSummary {
        episodes: trainer.episodes_done(),
        outcomes,
        final_checkpoint,
    })
}

/// Load the actor from a checkpoint, adopting the input normalization it
/// was trained with.
pub fn load_actor(path: &Path, cfg: &mut RunConfig) -> Result<Mlp, DriverError> {
    let (actor, _critic, meta) = checkpoint::load(path)?;
    if meta.n_sv_max != cfg.n_sv_max {
        return Err(DriverError::CheckpointMismatch(format!(
            "trained with n_sv_max = {}, this run uses {}",
            meta.n_sv_max, cfg.n_sv_max
        )));
    }
    if actor.in_dim != cfg.obs_len() || actor.out_dim != N_ACTIONS {
        return Err(DriverError::CheckpointMismatch(format!(
            "actor is {}x{}, expected {}x{N_ACTIONS}",
            actor.in_dim,
            actor.out_dim,
            cfg.obs_len(),
        )));
    }
    cfg.net.pos_scale = meta.pos_scale;
    cfg.net.vel_scale = meta.vel_scale;
    Ok(actor)
}

/// Evaluate a checkpoint and write `eval.csv` (and optionally the pose
/// trace of the first trial at the highest density) into `out_dir`.
pub fn run_eval(
    checkpoint_path: &Path,
    cfg: &RunConfig,
    master_seed: u64,
    out_dir: &Path,
    with_trajectory: bool,
) -> Result<EvalReport, DriverError> {
    let mut cfg = cfg.clone();
    let actor = load_actor(checkpoint_path, &mut cfg)?;
    let report = eval::run_eval(&actor, &cfg, master_seed)?;
    ensure_dir(out_dir)?;
    csvio::write_eval_report(&out_dir.join("eval.csv"), &report)?;
    if with_trajectory {
        let seed = eval::trial_seed(master_seed, cfg.n_sv_max, 0);
        let samples = record_trajectory(&actor, &cfg, cfg.n_sv_max, Maneuver::ALL[0], seed)?;
        csvio::write_trajectory(&out_dir.join("trajectory.csv"), &samples)?;
    }
    Ok(report)
}

/// Replay one greedy episode, recording every vehicle pose at each
/// decision tick (including the spawn poses at time zero).
pub fn record_trajectory(
    actor: &Mlp,
    cfg: &RunConfig,
    n_sv: usize,
    maneuver: Maneuver,
    seed: u64,
) -> Result<Vec<TrajectorySample>, DriverError> {
    let road = build_intersection(&cfg.env).map_err(|e| EvalError::from(EnvError::from(e)))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let world = spawn_scenario(&road, &cfg.env, n_sv, maneuver, &mut rng)
        .map_err(EvalError::from)?;
    let mut runner = EpisodeRunner::new(world, &road, &cfg.env, &cfg.mdp);

    let mut samples = Vec::new();
    let mut record = |runner: &EpisodeRunner| {
        for (id, v) in runner.world.vehicles.iter().enumerate() {
            if !v.active {
                continue;
            }
            samples.push(TrajectorySample {
                time: runner.world.time,
                vehicle_id: id,
                x: v.pos.x,
                y: v.pos.y,
                speed: v.speed,
                heading: v.heading,
            });
        }
    };
    record(&runner);
    loop {
        let input = runner.observe(cfg.n_sv_max).to_input(&cfg.net);
        let action = eval::greedy_action(&actor.output(&input));
        let (_, done) = runner.step(Action::from_index(action).expect("valid action"));
        record(&runner);
        if done.is_some() {
            break;
        }
    }
    Ok(samples)
}

/// Rebuild plotting curves from a `metrics.csv`: smoothed episode returns
/// next to the raw ones and the arm probabilities.
pub fn export_curves(
    metrics_path: &Path,
    out_path: &Path,
    window: usize,
    poly: usize,
) -> Result<usize, DriverError> {
    let rows = csvio::read_metrics(metrics_path)?;
    let rewards: Vec<f64> = rows.iter().map(|r| r.reward).collect();
    let smoothed = savgol::smooth(&rewards, window, poly)?;
    csvio::write_curves(out_path, &rows, &smoothed)?;
    Ok(rows.len())
}
