//! Command-line front end for training, evaluating, and exporting runs.

use clap::{Args, Parser, Subcommand};
use crossway::config::{CurriculumStrategy, InitScheme, RunConfig};
use crossway::driver;
use crossway::mdp::EpisodeOutcome;
use std::error::Error;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "crossway",
    version,
    about = "Adaptive-curriculum reinforcement learning for unsignalized intersections"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a policy and stream run artifacts to the output directory.
    Train(TrainArgs),
    /// Evaluate a trained checkpoint across traffic densities.
    Eval(EvalArgs),
    /// Rebuild smoothed training curves from a metrics.csv.
    Export(ExportArgs),
    /// Tiny end-to-end train + eval run to sanity-check an install.
    Smoke(SmokeArgs),
}

/// Overrides applied on top of the (optional) TOML configuration.
#[derive(Args)]
struct ConfigOverrides {
    /// Run configuration file; defaults apply when omitted.
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Master random seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Training episode budget.
    #[arg(long)]
    episodes: Option<u64>,
    /// Curriculum strategy: adaptive | fixed | manual | random.
    #[arg(long)]
    strategy: Option<CurriculumStrategy>,
    /// Scheduler weight initialization: exp | equal.
    #[arg(long)]
    init_weights: Option<InitScheme>,
    /// Densest scenario trained and evaluated (arm count is this + 1).
    #[arg(long)]
    n_sv_max: Option<usize>,
    /// Output directory.
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
}

impl ConfigOverrides {
    fn resolve(&self) -> Result<RunConfig, Box<dyn Error>> {
        let mut cfg = match &self.config {
            Some(path) => RunConfig::from_file(path)?,
            None => RunConfig::default(),
        };
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        if let Some(episodes) = self.episodes {
            cfg.trainer.episodes = episodes;
        }
        if let Some(strategy) = self.strategy {
            cfg.trainer.strategy = strategy;
        }
        if let Some(init) = self.init_weights {
            cfg.bandit.init = init;
        }
        if let Some(n_sv_max) = self.n_sv_max {
            cfg.n_sv_max = n_sv_max;
        }
        if let Some(out) = &self.out {
            cfg.out_dir = out.display().to_string();
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Args)]
struct TrainArgs {
    #[command(flatten)]
    overrides: ConfigOverrides,
    /// Print the resolved configuration as TOML and exit.
    #[arg(long)]
    print_config: bool,
    /// Episodes between progress lines (0 silences progress).
    #[arg(long, default_value_t = 100)]
    log_every: u64,
}

#[derive(Args)]
struct EvalArgs {
    /// Checkpoint to evaluate (model.ckpt from a training run).
    checkpoint: PathBuf,
    #[command(flatten)]
    overrides: ConfigOverrides,
    /// Trials per traffic density.
    #[arg(long)]
    trials: Option<u32>,
    /// Also record the pose trace of one episode at the highest density.
    #[arg(long)]
    trajectory: bool,
}

#[derive(Args)]
struct ExportArgs {
    /// metrics.csv produced by a training run.
    metrics: PathBuf,
    /// Destination file.
    #[arg(long, default_value = "curves.csv")]
    out: PathBuf,
    /// Smoothing window (odd).
    #[arg(long, default_value_t = 51)]
    window: usize,
    /// Polynomial order of the smoother.
    #[arg(long, default_value_t = 3)]
    poly: usize,
}

#[derive(Args)]
struct SmokeArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = "out/smoke")]
    out: PathBuf,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Train(args) => train(args),
        Command::Eval(args) => eval(args),
        Command::Export(args) => export(args),
        Command::Smoke(args) => smoke(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            let mut source = err.source();
            while let Some(cause) = source {
                eprintln!("  caused by: {cause}");
                source = cause.source();
            }
            ExitCode::FAILURE
        }
    }
}

fn train(args: TrainArgs) -> Result<(), Box<dyn Error>> {
    let cfg = args.overrides.resolve()?;
    if args.print_config {
        print!("{}", cfg.to_toml());
        return Ok(());
    }
    let total = cfg.trainer.episodes;
    let mut window_reward = 0.0;
    let mut window_success = 0u64;
    let summary = driver::run_train(&cfg, |log| {
        window_reward += log.reward;
        window_success += u64::from(log.outcome == EpisodeOutcome::Success);
        let done = log.episode + 1;
        if args.log_every > 0 && done % args.log_every == 0 {
            let window = args.log_every.min(done);
            let probs = log
                .probs
                .iter()
                .map(|p| format!("{p:.2}"))
                .collect::<Vec<_>>()
                .join(" ");
            println!(
                "episode {done}/{total} | success {window_success}/{window} | mean reward {:.2} | p = [{probs}]",
                window_reward / window as f64
            );
            window_reward = 0.0;
            window_success = 0;
        }
    })?;
    println!(
        "trained {} episodes: {} success, {} collision, {} offroad, {} timeout",
        summary.episodes,
        summary.outcomes.success,
        summary.outcomes.collision,
        summary.outcomes.offroad,
        summary.outcomes.timeout
    );
    println!("model: {}", summary.final_checkpoint.display());
    Ok(())
}

fn eval(args: EvalArgs) -> Result<(), Box<dyn Error>> {
    let mut cfg = args.overrides.resolve()?;
    if let Some(trials) = args.trials {
        cfg.eval.trials = trials;
    }
    let out_dir = match &args.overrides.out {
        Some(out) => out.clone(),
        None => args
            .checkpoint
            .parent()
            .filter(|p| !p.as_os_str().is_empty())
            .unwrap_or(Path::new("."))
            .to_path_buf(),
    };
    let report = driver::run_eval(&args.checkpoint, &cfg, cfg.seed, &out_dir, args.trajectory)?;
    for s in &report.scenarios {
        let avg_time = if s.avg_time.is_nan() {
            "-".to_string()
        } else {
            format!("{:.1}s", s.avg_time)
        };
        println!(
            "n_sv {} | success {:5.1}% | collision {:5.1}% | offroad {:5.1}% | timeout {:5.1}% | avg time {}",
            s.n_sv,
            100.0 * s.success_rate(),
            100.0 * s.collision_rate(),
            100.0 * s.offroad_rate(),
            100.0 * s.timeout_rate(),
            avg_time
        );
    }
    println!("report: {}", out_dir.join("eval.csv").display());
    Ok(())
}

fn export(args: ExportArgs) -> Result<(), Box<dyn Error>> {
    let rows = driver::export_curves(&args.metrics, &args.out, args.window, args.poly)?;
    println!("wrote {} rows to {}", rows, args.out.display());
    Ok(())
}

fn smoke(args: SmokeArgs) -> Result<(), Box<dyn Error>> {
    let mut cfg = RunConfig::smoke_profile(args.seed);
    cfg.out_dir = args.out.display().to_string();
    let summary = driver::run_train(&cfg, |_| {})?;
    let report = driver::run_eval(&summary.final_checkpoint, &cfg, cfg.seed, &args.out, true)?;
    driver::export_curves(
        &args.out.join("metrics.csv"),
        &args.out.join("curves.csv"),
        5,
        2,
    )?;
    let evaluated: u32 = report.scenarios.iter().map(|s| s.trials).sum();
    println!(
        "smoke ok: {} episodes trained, {} trials evaluated, artifacts in {}",
        summary.episodes,
        evaluated,
        args.out.display()
    );
    Ok(())
}
