//! Sparse extrinsic reward, force-based intrinsic reward, and their weighted
//! combination. All functions are pure and reusable under hindsight goal
//! substitution: the intrinsic term depends only on the stored cumulative
//! force, never on the goal.

use serde::{Deserialize, Serialize};

use crate::env::{EnvError, Goal};
use crate::replay::Transition;

/// Weights and thresholds of the combined reward.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RewardParams {
    /// Weight on the extrinsic (goal-distance) indicator.
    pub w_ext: f64,
    /// Weight on the intrinsic (contact) indicator.
    pub w_int: f64,
    /// Success radius around the goal (m).
    pub eps_pos: f64,
    /// Cumulative-force threshold for the intrinsic reward (N).
    pub eps_force: f64,
}

impl Default for RewardParams {
    fn default() -> Self {
        RewardParams {
            w_ext: 0.75,
            w_int: 0.25,
            eps_pos: 0.05,
            eps_force: 10.0,
        }
    }
}

impl RewardParams {
    /// Same thresholds with the intrinsic term disabled and full weight on
    /// the extrinsic indicator, i.e. the plain sparse-reward baseline.
    pub fn extrinsic_only(&self) -> RewardParams {
        RewardParams {
            w_ext: 1.0,
            w_int: 0.0,
            ..*self
        }
    }

    /// Largest attainable reward.
    pub fn max_reward(&self) -> f64 {
        self.w_ext + self.w_int
    }
}

/// 1 iff the achieved position lies strictly within `eps_pos` of the goal.
pub fn extrinsic_reward(
    achieved: &Goal,
    desired: &Goal,
    params: &RewardParams,
) -> Result<f64, EnvError> {
    Ok(if achieved.distance(desired)? < params.eps_pos {
        1.0
    } else {
        0.0
    })
}

/// 1 iff the cumulative force strictly exceeds `eps_force`. Goal-independent.
pub fn intrinsic_reward(force_sum: f64, params: &RewardParams) -> f64 {
    if force_sum > params.eps_force {
        1.0
    } else {
        0.0
    }
}

/// Weighted sum of the two indicators.
pub fn combined_reward(
    achieved: &Goal,
    desired: &Goal,
    force_sum: f64,
    params: &RewardParams,
) -> Result<f64, EnvError> {
    Ok(params.w_ext * extrinsic_reward(achieved, desired, params)?
        + params.w_int * intrinsic_reward(force_sum, params))
}

/// Reward of a stored transition under a substituted goal. The extrinsic
/// term is evaluated against the transition's post-step achieved goal; the
/// intrinsic term reuses the stored cumulative force and is unchanged by the
/// substitution.
pub fn recompute_hindsight(
    transition: &Transition,
    new_goal: &Goal,
    params: &RewardParams,
) -> Result<f64, EnvError> {
    combined_reward(
        &transition.achieved_next,
        new_goal,
        transition.force_sum_next,
        params,
    )
}
