//! Rewards, replay memory, and the supervised and value-network trainers.

mod replay;
mod reward;
mod rl;
mod sl;

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use replay::{ReplayBuffer, Transition, DEFAULT_REPLAY_CAPACITY};
pub use reward::{reward, EpisodeContext, RewardKind};
pub use rl::{train_rl, RlOutcome, TrainConfig};
pub use sl::{train_sl, SlConfig, SlOutcome};

/// Linear annealing from `start` at step 0 to `end` at `total_steps`,
/// constant afterwards.
pub fn epsilon_at(start: f64, end: f64, global_step: usize, total_steps: usize) -> f64 {
    if total_steps == 0 || global_step >= total_steps {
        return end;
    }
    start + (end - start) * (global_step as f64 / total_steps as f64)
}

/// Starting weights for a fresh model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelInit {
    /// Glorot-uniform weights from the run seed.
    Glorot,
    Zeros,
}

/// Training summary written beside a checkpoint.
#[derive(Debug, Serialize)]
pub struct RunManifest<'a, C: Serialize> {
    pub trainer: &'a str,
    pub config: &'a C,
    pub seed: u64,
    pub loss_log: &'a [f64],
    pub reward_log: &'a [f64],
    pub validation_log: &'a [f64],
    pub wall_time_secs: f64,
}

pub fn write_manifest<C: Serialize>(
    path: impl AsRef<Path>,
    manifest: &RunManifest<'_, C>,
) -> Result<()> {
    let path = path.as_ref();
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    let text = serde_json::to_string_pretty(manifest)
        .map_err(|e| Error::Contract(format!("manifest serialization failed: {e}")))?;
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn epsilon_schedule() {
        assert_eq!(epsilon_at(1.0, 0.1, 0, 100), 1.0);
        assert!((epsilon_at(1.0, 0.1, 50, 100) - 0.55).abs() < 1e-12);
        assert_eq!(epsilon_at(1.0, 0.1, 100, 100), 0.1);
        assert_eq!(epsilon_at(1.0, 0.1, 5000, 100), 0.1);
    }
}
