//! Learner checkpoints: a flat binary parameter file plus a small text
//! manifest.
//!
//! `params.bin` layout, all little endian: the magic bytes `CPV1`,
//! then the policy net followed by the value net, each as a u32 layer
//! count and per layer u32 rows, u32 cols, rows*cols f32 weights
//! (row-major) and rows f32 biases. `manifest.txt` carries
//! `version`, `config_hash` and `train_steps` as key=value lines.
//! Optimizer moments are deliberately not persisted; a resumed run
//! restarts them cold.

use std::fs;
use std::io::{self, Read, Write};
use std::path::Path;

use thiserror::Error;

use crate::features::FeatureConfig;

use super::mlp::{Dense, Mlp};
use super::{Learner, LearnerConfig};

const MAGIC: &[u8; 4] = b"CPV1";
const VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error("malformed checkpoint: {0}")]
    Format(String),
    #[error("checkpoint shape mismatch: expected {expected}, found {found}")]
    ShapeMismatch { expected: String, found: String },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CheckpointManifest {
    pub version: u32,
    pub config_hash: String,
    pub train_steps: u64,
}

fn write_net(out: &mut Vec<u8>, net: &Mlp) {
    out.extend_from_slice(&(net.layers.len() as u32).to_le_bytes());
    for l in &net.layers {
        out.extend_from_slice(&(l.rows as u32).to_le_bytes());
        out.extend_from_slice(&(l.cols as u32).to_le_bytes());
        for &w in &l.w {
            out.extend_from_slice(&(w as f32).to_le_bytes());
        }
        for &b in &l.b {
            out.extend_from_slice(&(b as f32).to_le_bytes());
        }
    }
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], CheckpointError> {
        if self.pos + n > self.buf.len() {
            return Err(CheckpointError::Format(format!(
                "truncated at byte {} of {}",
                self.pos,
                self.buf.len()
            )));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32, CheckpointError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn f32(&mut self) -> Result<f32, CheckpointError> {
        Ok(f32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }
}

fn read_net(r: &mut Reader<'_>) -> Result<Mlp, CheckpointError> {
    let layer_count = r.u32()? as usize;
    if layer_count == 0 || layer_count > 64 {
        return Err(CheckpointError::Format(format!(
            "implausible layer count {layer_count}"
        )));
    }
    let mut layers = Vec::with_capacity(layer_count);
    for _ in 0..layer_count {
        let rows = r.u32()? as usize;
        let cols = r.u32()? as usize;
        if rows == 0 || cols == 0 || rows * cols > 1 << 28 {
            return Err(CheckpointError::Format(format!(
                "implausible layer shape {rows}x{cols}"
            )));
        }
        let mut w = Vec::with_capacity(rows * cols);
        for _ in 0..rows * cols {
            w.push(f64::from(r.f32()?));
        }
        let mut b = Vec::with_capacity(rows);
        for _ in 0..rows {
            b.push(f64::from(r.f32()?));
        }
        layers.push(Dense { rows, cols, w, b });
    }
    Ok(Mlp { layers })
}

fn shape_string(net: &Mlp) -> String {
    net.layers
        .iter()
        .map(|l| format!("{}x{}", l.rows, l.cols))
        .collect::<Vec<_>>()
        .join(",")
}

fn expect_shapes(net: &Mlp, in_dim: usize, cfg: &LearnerConfig) -> Result<(), CheckpointError> {
    let reference = Mlp::new(in_dim, cfg.hidden, cfg.hidden_layers, 0);
    let ok = net.layers.len() == reference.layers.len()
        && net
            .layers
            .iter()
            .zip(&reference.layers)
            .all(|(a, b)| a.rows == b.rows && a.cols == b.cols);
    if ok {
        Ok(())
    } else {
        Err(CheckpointError::ShapeMismatch {
            expected: shape_string(&reference),
            found: shape_string(net),
        })
    }
}

fn atomic_write(path: &Path, bytes: &[u8]) -> io::Result<()> {
    let tmp = path.with_extension("tmp");
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)
}

pub(super) fn save(
    learner: &Learner,
    dir: &Path,
    config_hash: &str,
    train_steps: u64,
) -> Result<(), CheckpointError> {
    fs::create_dir_all(dir)?;
    let (policy, value) = learner.nets();
    let mut bin = Vec::new();
    bin.extend_from_slice(MAGIC);
    write_net(&mut bin, policy);
    write_net(&mut bin, value);
    atomic_write(&dir.join("params.bin"), &bin)?;

    let manifest =
        format!("version={VERSION}\nconfig_hash={config_hash}\ntrain_steps={train_steps}\n");
    atomic_write(&dir.join("manifest.txt"), manifest.as_bytes())?;
    Ok(())
}

fn parse_manifest(text: &str) -> Result<CheckpointManifest, CheckpointError> {
    let mut version = None;
    let mut config_hash = None;
    let mut train_steps = None;
    for line in text.lines() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let (key, val) = line
            .split_once('=')
            .ok_or_else(|| CheckpointError::Format(format!("manifest line without '=': {line}")))?;
        match key {
            "version" => {
                version = Some(val.parse::<u32>().map_err(|_| {
                    CheckpointError::Format(format!("bad version: {val}"))
                })?)
            }
            "config_hash" => config_hash = Some(val.to_string()),
            "train_steps" => {
                train_steps = Some(val.parse::<u64>().map_err(|_| {
                    CheckpointError::Format(format!("bad train_steps: {val}"))
                })?)
            }
            other => {
                return Err(CheckpointError::Format(format!(
                    "unknown manifest key: {other}"
                )))
            }
        }
    }
    let version =
        version.ok_or_else(|| CheckpointError::Format("manifest missing version".into()))?;
    if version != VERSION {
        return Err(CheckpointError::Format(format!(
            "unsupported checkpoint version {version}"
        )));
    }
    Ok(CheckpointManifest {
        version,
        config_hash: config_hash
            .ok_or_else(|| CheckpointError::Format("manifest missing config_hash".into()))?,
        train_steps: train_steps
            .ok_or_else(|| CheckpointError::Format("manifest missing train_steps".into()))?,
    })
}

/// Loads a checkpoint written by [`Learner::save_checkpoint`]. The
/// given configs must produce the stored layer shapes; the manifest's
/// config hash is returned for the caller to cross-check.
pub fn load_checkpoint(
    dir: &Path,
    features: FeatureConfig,
    cfg: LearnerConfig,
) -> Result<(Learner, CheckpointManifest), CheckpointError> {
    let manifest = parse_manifest(&fs::read_to_string(dir.join("manifest.txt"))?)?;

    let mut bytes = Vec::new();
    fs::File::open(dir.join("params.bin"))?.read_to_end(&mut bytes)?;
    let mut r = Reader { buf: &bytes, pos: 0 };
    if r.take(4)? != MAGIC {
        return Err(CheckpointError::Format("bad magic".into()));
    }
    let policy = read_net(&mut r)?;
    let value = read_net(&mut r)?;
    if r.pos != bytes.len() {
        return Err(CheckpointError::Format(format!(
            "{} trailing bytes",
            bytes.len() - r.pos
        )));
    }
    expect_shapes(&policy, features.state_dim() + features.action_dim(), &cfg)?;
    expect_shapes(&value, features.state_dim(), &cfg)?;
    Ok((
        // The update counter is not persisted; a loaded learner starts
        // counting its own updates from zero.
        Learner::restore(features, cfg, policy, value, 0),
        manifest,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::SparseVec;

    fn small() -> (FeatureConfig, LearnerConfig) {
        let features = FeatureConfig::new(8);
        let cfg = LearnerConfig {
            hidden: 5,
            hidden_layers: 2,
            ..LearnerConfig::default()
        };
        (features, cfg)
    }

    #[test]
    fn round_trip_preserves_outputs_to_f32_precision() {
        let (features, cfg) = small();
        let learner = Learner::new(features, cfg, 77);
        let dir = tempfile::tempdir().unwrap();
        learner.save_checkpoint(dir.path(), "deadbeef", 0).unwrap();

        let (loaded, manifest) = load_checkpoint(dir.path(), features, cfg).unwrap();
        assert_eq!(manifest.config_hash, "deadbeef");
        assert_eq!(manifest.train_steps, 0);
        assert_eq!(manifest.version, 1);

        let mut state = SparseVec::zeros(features.state_dim());
        state.bump(3, 2);
        state.bump(17, 1);
        let mut action = SparseVec::zeros(features.action_dim());
        action.bump(5, 1);
        let p0 = learner.policy_probs(&state, &[action.clone()]).unwrap();
        let p1 = loaded.policy_probs(&state, &[action]).unwrap();
        assert_eq!(p0, p1, "single-action probs are exactly 1.0");
        let v0 = learner.value_of(&state);
        let v1 = loaded.value_of(&state);
        assert!((v0 - v1).abs() < 1e-5, "{v0} vs {v1}");
    }

    #[test]
    fn second_save_after_load_is_byte_identical() {
        let (features, cfg) = small();
        let learner = Learner::new(features, cfg, 12);
        let d1 = tempfile::tempdir().unwrap();
        let d2 = tempfile::tempdir().unwrap();
        learner.save_checkpoint(d1.path(), "h", 4).unwrap();
        let (loaded, _) = load_checkpoint(d1.path(), features, cfg).unwrap();
        loaded.save_checkpoint(d2.path(), "h", 4).unwrap();
        let a = std::fs::read(d1.path().join("params.bin")).unwrap();
        let b = std::fs::read(d2.path().join("params.bin")).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn shape_mismatch_is_detected() {
        let (features, cfg) = small();
        let learner = Learner::new(features, cfg, 5);
        let dir = tempfile::tempdir().unwrap();
        learner.save_checkpoint(dir.path(), "h", 0).unwrap();
        let wider = LearnerConfig { hidden: 6, ..cfg };
        let err = load_checkpoint(dir.path(), features, wider).unwrap_err();
        assert!(matches!(err, CheckpointError::ShapeMismatch { .. }), "{err}");
    }

    #[test]
    fn corrupt_files_are_reported_not_panicked() {
        let (features, cfg) = small();
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("manifest.txt"), "version=1\nconfig_hash=x\n").unwrap();
        std::fs::write(dir.path().join("params.bin"), b"CPV1junk").unwrap();
        let err = load_checkpoint(dir.path(), features, cfg).unwrap_err();
        assert!(matches!(err, CheckpointError::Format(_)), "{err}");

        std::fs::write(
            dir.path().join("manifest.txt"),
            "version=1\nconfig_hash=x\ntrain_steps=0\nmystery=1\n",
        )
        .unwrap();
        let err = load_checkpoint(dir.path(), features, cfg).unwrap_err();
        assert!(matches!(err, CheckpointError::Format(_)), "{err}");
    }
}
