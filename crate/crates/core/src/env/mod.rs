//! Goal-conditioned environment contract: observations with a tactile
//! extension, goals, actions and the success predicate shared by all tasks.
//!
//! # Observation layout
//!
//! Observations flatten to a fixed-length vector per task. Index tables with
//! the tactile channels included:
//!
//! | Task        | indices   | content                          |
//! |-------------|-----------|----------------------------------|
//! | Push, Slide | 0..2      | effector position (m)            |
//! |             | 2..4      | effector velocity (m/s)          |
//! |             | 4..6      | object position (m)              |
//! |             | 6..8      | object velocity (m/s)            |
//! |             | 8         | instantaneous force `f_t` (N)    |
//! |             | 9         | cumulative force `Σf` (N)        |
//! | Lift        | 0..2      | effector position (m)            |
//! |             | 2..4      | effector velocity (m/s)          |
//! |             | 4         | gripper aperture (m)             |
//! |             | 5..7      | finger forces (N)                |
//! |             | 7..9      | object position (m)              |
//! |             | 9..11     | object velocity (m/s)            |
//! |             | 11        | instantaneous force `f_t` (N)    |
//! |             | 12        | cumulative force `Σf` (N)        |
//!
//! Without the tactile extension the two trailing force entries are dropped
//! and all other indices are unchanged. The achieved goal is always the
//! object-position slice. [`ObservationLayout`] exposes the same table
//! programmatically.

pub mod physics;
pub mod tasks;

use serde::{Deserialize, Serialize};
use std::ops::Range;
use thiserror::Error;

use physics::Task;

/// Errors raised by environment construction and stepping.
#[derive(Debug, Error)]
pub enum EnvError {
    #[error("unknown task '{0}' (expected push, slide or lift)")]
    UnknownTask(String),
    #[error("unknown difficulty '{0}' (expected simple, intermediate or hard)")]
    UnknownDifficulty(String),
    #[error("invalid physics config: {0}")]
    BadConfig(String),
    #[error("environment must be reset before stepping")]
    NotReset,
    #[error("episode horizon of {0} steps exhausted; reset the environment")]
    PastHorizon(usize),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("non-finite state produced by the integrator")]
    NonFiniteState,
}

/// Goal-space difficulty. Simple and Intermediate shrink the Hard goal
/// region about its center by 0.5 and 0.75.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Difficulty {
    Simple,
    Intermediate,
    Hard,
}

impl Difficulty {
    pub fn scale_factor(self) -> f64 {
        match self {
            Difficulty::Simple => 0.5,
            Difficulty::Intermediate => 0.75,
            Difficulty::Hard => 1.0,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Difficulty::Simple => "simple",
            Difficulty::Intermediate => "intermediate",
            Difficulty::Hard => "hard",
        }
    }

    pub const ALL: [Difficulty; 3] =
        [Difficulty::Simple, Difficulty::Intermediate, Difficulty::Hard];
}

impl std::str::FromStr for Difficulty {
    type Err = EnvError;

    fn from_str(s: &str) -> Result<Self, EnvError> {
        match s.to_ascii_lowercase().as_str() {
            "simple" => Ok(Difficulty::Simple),
            "intermediate" => Ok(Difficulty::Intermediate),
            "hard" => Ok(Difficulty::Hard),
            other => Err(EnvError::UnknownDifficulty(other.to_string())),
        }
    }
}

/// Target position in task space (m).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Goal(pub Vec<f64>);

impl Goal {
    pub fn xy(x: f64, y: f64) -> Self {
        Goal(vec![x, y])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    /// Euclidean distance to another goal of the same dimension.
    pub fn distance(&self, other: &Goal) -> Result<f64, EnvError> {
        if self.dim() != other.dim() {
            return Err(EnvError::DimensionMismatch {
                expected: self.dim(),
                got: other.dim(),
            });
        }
        Ok(self
            .0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt())
    }
}

/// Effector command; every component is clamped to `[-1, 1]` before the
/// physics sees it. Dimension 2 for Push/Slide, 3 for Lift (planar force
/// plus gripper open/close).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Action(pub Vec<f64>);

impl Action {
    pub fn zeros(dim: usize) -> Self {
        Action(vec![0.0; dim])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn clamped(&self) -> Action {
        Action(self.0.iter().map(|a| a.clamp(-1.0, 1.0)).collect())
    }
}

/// Raw-unit observation split into its documented blocks. `to_vector`
/// flattens it in the layout order above; normalization is the agent's job.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    /// Effector pose/velocity, plus aperture and finger forces for Lift.
    pub proprio: Vec<f64>,
    /// Object position then velocity.
    pub object: Vec<f64>,
    /// Instantaneous contact force `f_t` (N).
    pub force_now: f64,
    /// Cumulative contact force `Σ_{i<=t} f_i` (N).
    pub force_sum: f64,
}

impl Observation {
    /// Achieved goal: the object-position slice, nothing else.
    pub fn achieved_goal(&self) -> Goal {
        Goal(self.object[..2].to_vec())
    }

    /// Flatten in layout order, with or without the tactile channels.
    pub fn to_vector(&self, tactile: bool) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.proprio.len() + self.object.len() + 2);
        v.extend_from_slice(&self.proprio);
        v.extend_from_slice(&self.object);
        if tactile {
            v.push(self.force_now);
            v.push(self.force_sum);
        }
        v
    }
}

/// Index table for the flattened observation of one task.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ObservationLayout {
    pub proprio: Range<usize>,
    pub object_pos: Range<usize>,
    pub object_vel: Range<usize>,
    pub force_now: Option<usize>,
    pub force_sum: Option<usize>,
    pub len: usize,
}

impl ObservationLayout {
    pub fn new(task: Task, tactile: bool) -> Self {
        let proprio_len = match task {
            Task::Push | Task::Slide => 4,
            Task::Lift => 7,
        };
        let object_pos = proprio_len..proprio_len + 2;
        let object_vel = object_pos.end..object_pos.end + 2;
        let (force_now, force_sum, len) = if tactile {
            (
                Some(object_vel.end),
                Some(object_vel.end + 1),
                object_vel.end + 2,
            )
        } else {
            (None, None, object_vel.end)
        };
        ObservationLayout {
            proprio: 0..proprio_len,
            object_pos,
            object_vel,
            force_now,
            force_sum,
            len,
        }
    }
}

/// Result of one control step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepOutcome {
    pub next_obs: Observation,
    /// Object-position slice of `next_obs`.
    pub achieved: Goal,
    /// Contact force measured this step (N); also `next_obs.force_now`.
    pub force_reading: f64,
}

/// Sparse success predicate: strictly closer than `eps_pos` to the goal.
pub fn is_success(achieved: &Goal, desired: &Goal, eps_pos: f64) -> Result<bool, EnvError> {
    Ok(achieved.distance(desired)? < eps_pos)
}
