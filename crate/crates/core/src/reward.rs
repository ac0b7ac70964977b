//! Five-term step reward.
//!
//! Individual terms: discovery `r_s = c0 + alpha*c1 + beta*c2`, a fixed
//! penalty per sync request and per colliding step. Group terms: a time
//! penalty every step and a one-off completion bonus.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::complex::InsertionDelta;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RewardError {
    #[error("invalid reward weights: {0}")]
    InvalidWeights(&'static str),
    #[error("per-agent inputs disagree in length ({deltas}, {communicated}, {collided})")]
    LengthMismatch {
        deltas: usize,
        communicated: usize,
        collided: usize,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RewardWeights {
    pub alpha: f64,
    pub beta: f64,
    pub r_comm: f64,
    pub r_coll: f64,
    pub r_comp: f64,
    pub r_t: f64,
}

impl Default for RewardWeights {
    fn default() -> Self {
        RewardWeights {
            alpha: 1.5,
            beta: 2.0,
            r_comm: -2.0,
            r_coll: -5.0,
            r_comp: 5000.0,
            r_t: -0.2,
        }
    }
}

impl RewardWeights {
    pub fn validate(&self) -> Result<(), RewardError> {
        if !(self.alpha > 0.0 && self.beta > 0.0) {
            return Err(RewardError::InvalidWeights("alpha and beta must be positive"));
        }
        if !(self.r_comm <= 0.0 && self.r_coll <= 0.0 && self.r_t <= 0.0) {
            return Err(RewardError::InvalidWeights("penalties must be non-positive"));
        }
        if self.r_comp.is_nan() || self.r_comp <= 0.0 {
            return Err(RewardError::InvalidWeights("completion bonus must be positive"));
        }
        Ok(())
    }

    /// `c0 + alpha*c1 + beta*c2`.
    pub fn discovery(&self, counts: [usize; 3]) -> f64 {
        counts[0] as f64 + self.alpha * counts[1] as f64 + self.beta * counts[2] as f64
    }
}

/// Which complex decides whether a simplex is new for reward purposes.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CreditMode {
    /// Simplices the agent's sync inserted into the server complex.
    #[default]
    Global,
    /// Simplices newly added to the agent's local database by a sync reply.
    Local,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct AgentReward {
    pub discovery: f64,
    pub comm: f64,
    pub collision: f64,
    pub total: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RewardBreakdown {
    pub agents: Vec<AgentReward>,
    pub time: f64,
    pub completion: f64,
    pub group: f64,
}

impl RewardBreakdown {
    pub fn agent_totals(&self) -> Vec<f64> {
        self.agents.iter().map(|a| a.total).collect()
    }
}

pub fn step_rewards(
    deltas: &[InsertionDelta],
    communicated: &[bool],
    collided: &[bool],
    completed: bool,
    weights: &RewardWeights,
) -> Result<RewardBreakdown, RewardError> {
    let counts: Vec<[usize; 3]> = deltas.iter().map(|d| d.counts3()).collect();
    step_rewards_from_counts(&counts, communicated, collided, completed, weights)
}

/// Same as [`step_rewards`] with the per-agent `(c0, c1, c2)` given directly.
pub fn step_rewards_from_counts(
    counts: &[[usize; 3]],
    communicated: &[bool],
    collided: &[bool],
    completed: bool,
    weights: &RewardWeights,
) -> Result<RewardBreakdown, RewardError> {
    if counts.len() != communicated.len() || counts.len() != collided.len() {
        return Err(RewardError::LengthMismatch {
            deltas: counts.len(),
            communicated: communicated.len(),
            collided: collided.len(),
        });
    }
    let agents = counts
        .iter()
        .zip(communicated)
        .zip(collided)
        .map(|((&c, &comm), &coll)| {
            let discovery = weights.discovery(c);
            let comm = if comm { weights.r_comm } else { 0.0 };
            let collision = if coll { weights.r_coll } else { 0.0 };
            AgentReward {
                discovery,
                comm,
                collision,
                total: discovery + comm + collision,
            }
        })
        .collect();
    let time = weights.r_t;
    let completion = if completed { weights.r_comp } else { 0.0 };
    Ok(RewardBreakdown {
        agents,
        time,
        completion,
        group: time + completion,
    })
}

/// Reports the completion edge exactly once per episode.
#[derive(Clone, Copy, Debug, Default)]
pub struct CompletionLatch {
    fired: bool,
}

impl CompletionLatch {
    /// True only on the first call where `complete` is true.
    pub fn update(&mut self, complete: bool) -> bool {
        if complete && !self.fired {
            self.fired = true;
            true
        } else {
            false
        }
    }

    pub fn fired(&self) -> bool {
        self.fired
    }
}
