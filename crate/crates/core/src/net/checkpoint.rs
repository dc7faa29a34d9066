//! Checkpoint format: actor and critic parameters in a small binary
//! container, plus a TOML sidecar with the run state needed to resume
//! (seed, progress, input scaling, and scheduler weights).

use super::Mlp;
use serde::{Deserialize, Serialize};
use std::io::{Read, Write};
use std::path::{Path, PathBuf};
use thiserror::Error;

const MAGIC: &[u8; 4] = b"ACPK";
const VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("cannot access checkpoint {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path} is not a checkpoint file (bad magic)")]
    BadMagic { path: String },
    #[error("checkpoint {path} has unsupported version {found}")]
    BadVersion { path: String, found: u32 },
    #[error("checkpoint {path} is truncated or inconsistent")]
    Malformed { path: String },
    #[error("cannot parse sidecar {path}: {message}")]
    Sidecar { path: String, message: String },
}

fn io_err(path: &Path, source: std::io::Error) -> CheckpointError {
    CheckpointError::Io {
        path: path.display().to_string(),
        source,
    }
}

/// Run state stored beside the parameter file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMeta {
    pub seed: u64,
    pub episodes_done: u64,
    pub n_sv_max: usize,
    pub pos_scale: f64,
    pub vel_scale: f64,
    pub bandit_live: Vec<f64>,
    pub bandit_target: Vec<f64>,
    pub bandit_episodes: u64,
    pub reward_min: f64,
    pub reward_max: f64,
}

/// Sidecar path for a given checkpoint path.
pub fn meta_path(checkpoint: &Path) -> PathBuf {
    checkpoint.with_extension("meta.toml")
}

/// Write both networks to `path` and the sidecar next to it.
pub fn save(
    path: &Path,
    actor: &Mlp,
    critic: &Mlp,
    meta: &RunMeta,
) -> Result<(), CheckpointError> {
    let mut buf = Vec::new();
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&VERSION.to_le_bytes());
    for net in [actor, critic] {
        buf.extend_from_slice(&(net.in_dim as u32).to_le_bytes());
        buf.extend_from_slice(&(net.hidden as u32).to_le_bytes());
        buf.extend_from_slice(&(net.out_dim as u32).to_le_bytes());
        buf.extend_from_slice(&(net.params.len() as u64).to_le_bytes());
        for p in &net.params {
            buf.extend_from_slice(&p.to_le_bytes());
        }
    }
    let mut file = std::fs::File::create(path).map_err(|e| io_err(path, e))?;
    file.write_all(&buf).map_err(|e| io_err(path, e))?;

    let sidecar = meta_path(path);
    let text = toml::to_string_pretty(meta).expect("meta serializes");
    std::fs::write(&sidecar, text).map_err(|e| io_err(&sidecar, e))
}

/// Load both networks and the sidecar written by [`save`].
pub fn load(path: &Path) -> Result<(Mlp, Mlp, RunMeta), CheckpointError> {
    let mut file = std::fs::File::open(path).map_err(|e| io_err(path, e))?;
    let mut buf = Vec::new();
    file.read_to_end(&mut buf).map_err(|e| io_err(path, e))?;
    let display = path.display().to_string();

    let mut cursor = 0usize;
    let mut take = |n: usize| -> Result<&[u8], CheckpointError> {
        if cursor + n > buf.len() {
            return Err(CheckpointError::Malformed {
                path: display.clone(),
            });
        }
        let slice = &buf[cursor..cursor + n];
        cursor += n;
        Ok(slice)
    };

    if take(4)? != MAGIC {
        return Err(CheckpointError::BadMagic { path: display });
    }
    let version = u32::from_le_bytes(take(4)?.try_into().unwrap());
    if version != VERSION {
        return Err(CheckpointError::BadVersion {
            path: display,
            found: version,
        });
    }

    let mut nets = Vec::with_capacity(2);
    for _ in 0..2 {
        let in_dim = u32::from_le_bytes(take(4)?.try_into().unwrap()) as usize;
        let hidden = u32::from_le_bytes(take(4)?.try_into().unwrap()) as usize;
        let out_dim = u32::from_le_bytes(take(4)?.try_into().unwrap()) as usize;
        let count = u64::from_le_bytes(take(8)?.try_into().unwrap()) as usize;
        if count != Mlp::param_count(in_dim, hidden, out_dim) {
            return Err(CheckpointError::Malformed { path: display });
        }
        let mut params = Vec::with_capacity(count);
        for _ in 0..count {
            params.push(f64::from_le_bytes(take(8)?.try_into().unwrap()));
        }
        nets.push(Mlp {
            in_dim,
            hidden,
            out_dim,
            params,
        });
    }
    if cursor != buf.len() {
        return Err(CheckpointError::Malformed { path: display });
    }

    let sidecar = meta_path(path);
    let text = std::fs::read_to_string(&sidecar).map_err(|e| io_err(&sidecar, e))?;
    let meta: RunMeta = toml::from_str(&text).map_err(|e| CheckpointError::Sidecar {
        path: sidecar.display().to_string(),
        message: e.to_string(),
    })?;

    let critic = nets.pop().expect("two networks read");
    let actor = nets.pop().expect("two networks read");
    Ok((actor, critic, meta))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn sample_meta() -> RunMeta {
        RunMeta {
            seed: 17,
            episodes_done: 420,
            n_sv_max: 4,
            pos_scale: 64.0,
            vel_scale: 12.0,
            bandit_live: vec![1.0, 0.5, 0.25],
            bandit_target: vec![1.1, 0.4, 0.3],
            bandit_episodes: 420,
            reward_min: -12.5,
            reward_max: 17.25,
        }
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.ckpt");
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let actor = Mlp::init(12, 16, 5, 0.01, &mut rng);
        let critic = Mlp::init(12, 8, 1, 1.0, &mut rng);
        let meta = sample_meta();
        save(&path, &actor, &critic, &meta).unwrap();
        let (a, c, m) = load(&path).unwrap();
        assert_eq!(a, actor);
        assert_eq!(c, critic);
        assert_eq!(m, meta);
    }

    #[test]
    fn infinite_extrema_survive_the_sidecar() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("fresh.ckpt");
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let actor = Mlp::init(6, 4, 5, 0.01, &mut rng);
        let critic = Mlp::init(6, 4, 1, 1.0, &mut rng);
        let mut meta = sample_meta();
        meta.reward_min = f64::INFINITY;
        meta.reward_max = f64::NEG_INFINITY;
        save(&path, &actor, &critic, &meta).unwrap();
        let (_, _, m) = load(&path).unwrap();
        assert_eq!(m.reward_min, f64::INFINITY);
        assert_eq!(m.reward_max, f64::NEG_INFINITY);
    }

    #[test]
    fn damaged_files_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.ckpt");
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let actor = Mlp::init(4, 4, 5, 0.01, &mut rng);
        let critic = Mlp::init(4, 4, 1, 1.0, &mut rng);
        save(&path, &actor, &critic, &sample_meta()).unwrap();

        let original = std::fs::read(&path).unwrap();

        let mut bad_magic = original.clone();
        bad_magic[0] = b'X';
        std::fs::write(&path, &bad_magic).unwrap();
        assert!(matches!(
            load(&path),
            Err(CheckpointError::BadMagic { .. })
        ));

        let mut bad_version = original.clone();
        bad_version[4] = 9;
        std::fs::write(&path, &bad_version).unwrap();
        assert!(matches!(
            load(&path),
            Err(CheckpointError::BadVersion { .. })
        ));

        std::fs::write(&path, &original[..original.len() - 5]).unwrap();
        assert!(matches!(
            load(&path),
            Err(CheckpointError::Malformed { .. })
        ));
    }
}
