//! CSV artifact schemas. Floats are written with Rust's shortest
//! round-trip formatting so identical runs produce byte-identical files.

use crate::eval::EvalReport;
use crate::trainer::EpisodeLog;
use std::fs::File;
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CsvError {
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("{path}: missing column {column}")]
    MissingColumn { path: String, column: String },
    #[error("{path} record {record}: {what}")]
    BadField {
        path: String,
        record: u64,
        what: String,
    },
}

fn fmt(v: f64) -> String {
    format!("{v}")
}

/// Streams one `metrics.csv` row per training episode.
pub struct MetricsWriter {
    writer: csv::Writer<File>,
    n_arms: usize,
}

impl MetricsWriter {
    pub fn create(path: &Path, n_arms: usize) -> Result<MetricsWriter, CsvError> {
        let mut writer = csv::Writer::from_path(path)?;
        let mut header = vec![
            "episode".to_string(),
            "arm".to_string(),
            "reward".to_string(),
            "outcome".to_string(),
            "t_c".to_string(),
            "n_lc".to_string(),
            "steps".to_string(),
            "actor_loss".to_string(),
            "critic_loss".to_string(),
            "entropy".to_string(),
        ];
        header.extend((0..n_arms).map(|i| format!("p_{i}")));
        writer.write_record(&header)?;
        Ok(MetricsWriter { writer, n_arms })
    }

    pub fn write(&mut self, log: &EpisodeLog) -> Result<(), CsvError> {
        debug_assert_eq!(log.probs.len(), self.n_arms);
        let mut record = vec![
            log.episode.to_string(),
            log.arm.to_string(),
            fmt(log.reward),
            log.outcome.label().to_string(),
            fmt(log.t_c),
            log.n_lc.to_string(),
            log.steps.to_string(),
            fmt(log.actor_loss),
            fmt(log.critic_loss),
            fmt(log.entropy),
        ];
        record.extend(log.probs.iter().map(|&p| fmt(p)));
        self.writer.write_record(&record)?;
        Ok(())
    }

    pub fn flush(&mut self) -> Result<(), CsvError> {
        self.writer.flush()?;
        Ok(())
    }
}

/// Streams one `bandit_trace.csv` row per episode: the scheduler's inputs
/// and its live weights after the update.
pub struct TraceWriter {
    writer: csv::Writer<File>,
    n_arms: usize,
}

impl TraceWriter {
    pub fn create(path: &Path, n_arms: usize) -> Result<TraceWriter, CsvError> {
        let mut writer = csv::Writer::from_path(path)?;
        let mut header = vec![
            "episode".to_string(),
            "arm".to_string(),
            "reward".to_string(),
            "r_norm".to_string(),
            "r_hat".to_string(),
        ];
        header.extend((0..n_arms).map(|i| format!("p_{i}")));
        header.extend((0..n_arms).map(|i| format!("w_{i}")));
        writer.write_record(&header)?;
        Ok(TraceWriter { writer, n_arms })
    }

    pub fn write(&mut self, log: &EpisodeLog) -> Result<(), CsvError> {
        debug_assert_eq!(log.weights.len(), self.n_arms);
        let mut record = vec![
            log.episode.to_string(),
            log.arm.to_string(),
            fmt(log.reward),
            fmt(log.r_norm),
            fmt(log.r_hat),
        ];
        record.extend(log.probs.iter().map(|&p| fmt(p)));
        record.extend(log.weights.iter().map(|&w| fmt(w)));
        self.writer.write_record(&record)?;
        Ok(())
    }

    pub fn flush(&mut self) -> Result<(), CsvError> {
        self.writer.flush()?;
        Ok(())
    }
}

/// The columns of `metrics.csv` needed to rebuild training curves.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsRow {
    pub episode: u64,
    pub reward: f64,
    pub probs: Vec<f64>,
}

pub fn read_metrics(path: &Path) -> Result<Vec<MetricsRow>, CsvError> {
    let shown = path.display().to_string();
    let mut reader = csv::Reader::from_path(path)?;
    let header = reader.headers()?.clone();
    let find = |name: &str| {
        header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| CsvError::MissingColumn {
                path: shown.clone(),
                column: name.to_string(),
            })
    };
    let episode_col = find("episode")?;
    let reward_col = find("reward")?;
    let prob_cols: Vec<usize> = (0..)
        .map_while(|i| header.iter().position(|h| h == format!("p_{i}")))
        .collect();
    if prob_cols.is_empty() {
        return Err(CsvError::MissingColumn {
            path: shown,
            column: "p_0".to_string(),
        });
    }

    let mut rows = Vec::new();
    for (idx, record) in reader.records().enumerate() {
        let record = record?;
        let field = |col: usize| -> Result<f64, CsvError> {
            record[col].parse().map_err(|_| CsvError::BadField {
                path: shown.clone(),
                record: idx as u64,
                what: format!("cannot parse {:?} as a number", &record[col]),
            })
        };
        rows.push(MetricsRow {
            episode: record[episode_col].parse().map_err(|_| CsvError::BadField {
                path: shown.clone(),
                record: idx as u64,
                what: format!("cannot parse {:?} as an episode index", &record[episode_col]),
            })?,
            reward: field(reward_col)?,
            probs: prob_cols
                .iter()
                .map(|&c| field(c))
                .collect::<Result<_, _>>()?,
        });
    }
    Ok(rows)
}

/// Write `curves.csv`: raw and smoothed episode returns plus the arm
/// probabilities, one row per episode.
pub fn write_curves(
    path: &Path,
    rows: &[MetricsRow],
    smoothed: &[f64],
) -> Result<(), CsvError> {
    assert_eq!(rows.len(), smoothed.len());
    let n_arms = rows.first().map_or(0, |r| r.probs.len());
    let mut writer = csv::Writer::from_path(path)?;
    let mut header = vec![
        "episode".to_string(),
        "reward_raw".to_string(),
        "reward_smooth".to_string(),
    ];
    header.extend((0..n_arms).map(|i| format!("p_{i}")));
    writer.write_record(&header)?;
    for (row, &smooth) in rows.iter().zip(smoothed) {
        let mut record = vec![row.episode.to_string(), fmt(row.reward), fmt(smooth)];
        record.extend(row.probs.iter().map(|&p| fmt(p)));
        writer.write_record(&record)?;
    }
    writer.flush()?;
    Ok(())
}

/// Write `eval.csv`: one row per traffic density.
pub fn write_eval_report(path: &Path, report: &EvalReport) -> Result<(), CsvError> {
    let mut writer = csv::Writer::from_path(path)?;
    writer.write_record([
        "n_sv",
        "trials",
        "success",
        "collision",
        "offroad",
        "timeout",
        "success_rate",
        "collision_rate",
        "offroad_rate",
        "timeout_rate",
        "avg_time",
        "avg_reward",
    ])?;
    for s in &report.scenarios {
        writer.write_record([
            s.n_sv.to_string(),
            s.trials.to_string(),
            s.success.to_string(),
            s.collision.to_string(),
            s.offroad.to_string(),
            s.timeout.to_string(),
            fmt(s.success_rate()),
            fmt(s.collision_rate()),
            fmt(s.offroad_rate()),
            fmt(s.timeout_rate()),
            fmt(s.avg_time),
            fmt(s.avg_reward),
        ])?;
    }
    writer.flush()?;
    Ok(())
}

/// One vehicle pose at one decision tick.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectorySample {
    pub time: f64,
    pub vehicle_id: usize,
    pub x: f64,
    pub y: f64,
    pub speed: f64,
    pub heading: f64,
}

/// Write `trajectory.csv` from recorded samples.
pub fn write_trajectory(path: &Path, samples: &[TrajectorySample]) -> Result<(), CsvError> {
    let mut writer = csv::Writer::from_path(path)?;
    writer.write_record(["time", "vehicle_id", "x", "y", "speed", "heading"])?;
    for s in samples {
        writer.write_record([
            fmt(s.time),
            s.vehicle_id.to_string(),
            fmt(s.x),
            fmt(s.y),
            fmt(s.speed),
            fmt(s.heading),
        ])?;
    }
    writer.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::ScenarioStats;
    use crate::mdp::EpisodeOutcome;

    fn sample_log(episode: u64) -> EpisodeLog {
        EpisodeLog {
            episode,
            arm: (episode % 3) as usize,
            reward: 1.25 + episode as f64 * 0.1,
            outcome: EpisodeOutcome::Success,
            t_c: 12.3,
            n_lc: 1,
            steps: 42,
            actor_loss: -0.015625,
            critic_loss: 3.5,
            entropy: 1.6094379124341003,
            r_norm: 0.5,
            r_hat: 1.25,
            probs: vec![0.5, 0.375, 0.125],
            weights: vec![1.0, 0.1353352832366127, 0.01831563888873418],
        }
    }

    #[test]
    fn metrics_round_trip_bit_exactly() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("metrics.csv");
        let logs: Vec<EpisodeLog> = (0..5).map(sample_log).collect();
        let mut writer = MetricsWriter::create(&path, 3).unwrap();
        for log in &logs {
            writer.write(log).unwrap();
        }
        writer.flush().unwrap();

        let rows = read_metrics(&path).unwrap();
        assert_eq!(rows.len(), logs.len());
        for (row, log) in rows.iter().zip(&logs) {
            assert_eq!(row.episode, log.episode);
            assert_eq!(row.reward, log.reward);
            assert_eq!(row.probs, log.probs);
        }
    }

    #[test]
    fn missing_columns_are_reported_by_name() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.csv");
        std::fs::write(&path, "episode,arm\n0,1\n").unwrap();
        match read_metrics(&path) {
            Err(CsvError::MissingColumn { column, .. }) => assert_eq!(column, "reward"),
            other => panic!("expected a missing-column error, got {other:?}"),
        }
    }

    #[test]
    fn trace_eval_and_curves_files_have_the_expected_shape() {
        let dir = tempfile::tempdir().unwrap();

        let trace_path = dir.path().join("bandit_trace.csv");
        let mut trace = TraceWriter::create(&trace_path, 3).unwrap();
        trace.write(&sample_log(0)).unwrap();
        trace.flush().unwrap();
        let text = std::fs::read_to_string(&trace_path).unwrap();
        assert!(text.starts_with("episode,arm,reward,r_norm,r_hat,p_0,p_1,p_2,w_0,w_1,w_2\n"));
        assert_eq!(text.lines().count(), 2);

        let eval_path = dir.path().join("eval.csv");
        let report = EvalReport {
            scenarios: vec![ScenarioStats {
                n_sv: 0,
                trials: 4,
                success: 3,
                collision: 1,
                offroad: 0,
                timeout: 0,
                avg_time: 9.5,
                avg_reward: 3.25,
            }],
        };
        write_eval_report(&eval_path, &report).unwrap();
        let text = std::fs::read_to_string(&eval_path).unwrap();
        assert_eq!(text.lines().count(), 2);
        assert!(text.contains("0,4,3,1,0,0,0.75,0.25,0,0,9.5,3.25"));

        let curves_path = dir.path().join("curves.csv");
        let rows = vec![
            MetricsRow {
                episode: 0,
                reward: 1.0,
                probs: vec![0.5, 0.5],
            },
            MetricsRow {
                episode: 1,
                reward: 2.0,
                probs: vec![0.25, 0.75],
            },
        ];
        write_curves(&curves_path, &rows, &[1.5, 1.5]).unwrap();
        let text = std::fs::read_to_string(&curves_path).unwrap();
        assert!(text.starts_with("episode,reward_raw,reward_smooth,p_0,p_1\n"));
        assert_eq!(text.lines().count(), 3);
    }

    #[test]
    fn trajectory_file_has_one_row_per_sample() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("trajectory.csv");
        let samples = vec![
            TrajectorySample {
                time: 0.2,
                vehicle_id: 0,
                x: 2.0,
                y: -30.0,
                speed: 6.0,
                heading: 1.5707963267948966,
            },
            TrajectorySample {
                time: 0.2,
                vehicle_id: 1,
                x: 30.0,
                y: 2.0,
                speed: 8.0,
                heading: 3.141592653589793,
            },
        ];
        write_trajectory(&path, &samples).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("time,vehicle_id,x,y,speed,heading\n"));
        assert_eq!(text.lines().count(), 3);
        assert!(text.contains("0.2,1,30,2,8,3.141592653589793"));
    }
}
