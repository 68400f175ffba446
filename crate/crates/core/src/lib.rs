//! Goal-conditioned reinforcement learning with tactile intrinsic motivation
//! on deterministic planar manipulation tasks.
//!
//! The crate bundles:
//!
//! * [`env`] — the goal-conditioned environment contract and three planar
//!   task analogs (Push, Slide, Lift) with penalty contact forces feeding a
//!   tactile channel;
//! * [`reward`] — the sparse extrinsic reward, the cumulative-force intrinsic
//!   reward and their weighted combination;
//! * [`replay`] — an episode replay buffer with contact-prioritized sampling
//!   plus uniform-hindsight and ablation samplers;
//! * [`agent`] — DDPG with hand-written backprop, target networks and input
//!   normalization;
//! * [`trainer`] — seeded, bit-reproducible experiment runs producing
//!   per-epoch success-rate metrics.

pub mod agent;
pub mod env;
pub mod replay;
pub mod reward;
pub mod trainer;

pub use agent::{DdpgAgent, DdpgHyper};
pub use env::physics::{PhysicsConfig, Task};
pub use env::tasks::PlanarEnv;
pub use env::{Action, Difficulty, Goal, Observation};
pub use replay::{EpisodeBuffer, MiniBatchItem, Transition};
pub use reward::RewardParams;
pub use trainer::{Arm, ExperimentConfig, MetricsRow};
