use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::dynamics::StepOutcome;
use crate::error::{Error, Result};

/// Reward shapes for value-network training. All but R3 are penalties.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RewardKind {
    /// Negative change in infection rate.
    R0,
    /// Negative frontier size after the step.
    R1,
    /// R1 + R0.
    R2,
    /// `1 - t / max_steps`, paid only on the terminal step.
    R3,
    /// Negative infection rate after the step.
    R4,
    /// R1 every step plus `-t / max_steps` on the terminal step.
    R5,
}

impl RewardKind {
    pub const ALL: [RewardKind; 6] = [
        RewardKind::R0,
        RewardKind::R1,
        RewardKind::R2,
        RewardKind::R3,
        RewardKind::R4,
        RewardKind::R5,
    ];

    pub fn id(self) -> &'static str {
        match self {
            RewardKind::R0 => "r0",
            RewardKind::R1 => "r1",
            RewardKind::R2 => "r2",
            RewardKind::R3 => "r3",
            RewardKind::R4 => "r4",
            RewardKind::R5 => "r5",
        }
    }
}

impl fmt::Display for RewardKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl FromStr for RewardKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        RewardKind::ALL
            .into_iter()
            .find(|k| k.id().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Config(format!("unknown reward `{s}`")))
    }
}

/// Where in the episode a step sits.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpisodeContext {
    /// Steps taken so far, including the one being scored.
    pub t: usize,
    pub max_steps: usize,
    pub terminal: bool,
}

pub fn reward(kind: RewardKind, outcome: &StepOutcome, ctx: EpisodeContext) -> f64 {
    let r0 = -(outcome.infection_rate_after - outcome.infection_rate_before);
    let r1 = -(outcome.candidate_count_after as f64);
    let elapsed = ctx.t as f64 / ctx.max_steps as f64;
    match kind {
        RewardKind::R0 => r0,
        RewardKind::R1 => r1,
        RewardKind::R2 => r1 + r0,
        RewardKind::R3 => {
            if ctx.terminal {
                1.0 - elapsed
            } else {
                0.0
            }
        }
        RewardKind::R4 => -outcome.infection_rate_after,
        RewardKind::R5 => {
            if ctx.terminal {
                r1 - elapsed
            } else {
                r1
            }
        }
    }
}
