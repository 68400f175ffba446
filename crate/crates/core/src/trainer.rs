//! Experiment orchestration: rollout collection, replay sampling, network
//! updates, target syncs, periodic greedy evaluation, and metrics output.
//!
//! One experiment runs strictly single-threaded so that a `(config, seed)`
//! pair always reproduces the same metrics byte for byte; parallelism
//! belongs one level up, across independent runs.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::time::Instant;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agent::{AgentError, DdpgAgent, DdpgHyper};
use crate::env::physics::{PhysicsConfig, Task};
use crate::env::tasks::PlanarEnv;
use crate::env::{is_success, Action, Difficulty, EnvError, Goal, Observation, ObservationLayout};
use crate::replay::{EpisodeBuffer, MiniBatchItem, ReplayError, Transition};
use crate::reward::{combined_reward, RewardParams};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("config file not found: {0}")]
    NotFound(String),
    #[error("cannot parse config: {0}")]
    Parse(String),
    #[error("invalid config:\n{}", .0.join("\n"))]
    Invalid(Vec<String>),
}

#[derive(Debug, Error)]
pub enum TrainError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("run {label}: {source}")]
    Run {
        label: String,
        #[source]
        source: Box<TrainError>,
    },
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error(transparent)]
    Agent(#[from] AgentError),
    #[error(transparent)]
    Replay(#[from] ReplayError),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

/// The seven experiment arms. Each arm pins a sampler, whether the force
/// channels appear in the state vector, and whether the intrinsic reward is
/// active:
///
/// | arm                  | sampler             | tactile state | intrinsic |
/// |----------------------|---------------------|---------------|-----------|
/// | `uniform_her`        | uniform hindsight   | no            | no        |
/// | `uniform_her_tactile`| uniform hindsight   | yes           | no        |
/// | `ir`                 | uniform hindsight   | yes           | yes       |
/// | `cper`               | contact-prioritized | yes           | no        |
/// | `cper_ir`            | contact-prioritized | yes           | yes       |
/// | `episode_ablation`   | contact episodes, uniform virtual goals | yes | yes |
/// | `reward_prioritized` | reward-weighted episodes | yes       | yes       |
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Arm {
    UniformHer,
    UniformHerTactile,
    Ir,
    Cper,
    CperIr,
    EpisodeAblation,
    RewardPrioritized,
}

impl Arm {
    pub const ALL: [Arm; 7] = [
        Arm::UniformHer,
        Arm::UniformHerTactile,
        Arm::Ir,
        Arm::Cper,
        Arm::CperIr,
        Arm::EpisodeAblation,
        Arm::RewardPrioritized,
    ];

    /// The five arms of the main comparison (baselines, ablations, full method).
    pub const MAIN_FIVE: [Arm; 5] = [
        Arm::UniformHer,
        Arm::UniformHerTactile,
        Arm::Ir,
        Arm::Cper,
        Arm::CperIr,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Arm::UniformHer => "uniform_her",
            Arm::UniformHerTactile => "uniform_her_tactile",
            Arm::Ir => "ir",
            Arm::Cper => "cper",
            Arm::CperIr => "cper_ir",
            Arm::EpisodeAblation => "episode_ablation",
            Arm::RewardPrioritized => "reward_prioritized",
        }
    }

    /// Whether the observation vector carries the force channels.
    pub fn tactile_in_state(self) -> bool {
        !matches!(self, Arm::UniformHer)
    }

    /// Whether the intrinsic force reward is part of the training reward.
    pub fn uses_intrinsic(self) -> bool {
        matches!(
            self,
            Arm::Ir | Arm::CperIr | Arm::EpisodeAblation | Arm::RewardPrioritized
        )
    }

    /// Reward parameters actually used by this arm.
    pub fn effective_reward(self, base: &RewardParams) -> RewardParams {
        if self.uses_intrinsic() {
            *base
        } else {
            base.extrinsic_only()
        }
    }

    /// Draw one training batch with this arm's sampler.
    pub fn sample<R: Rng>(
        self,
        buffer: &EpisodeBuffer,
        batch_size: usize,
        hindsight_prob: f64,
        params: &RewardParams,
        rng: &mut R,
    ) -> Result<Vec<MiniBatchItem>, ReplayError> {
        match self {
            Arm::UniformHer | Arm::UniformHerTactile | Arm::Ir => {
                buffer.sample_uniform_her(batch_size, hindsight_prob, params, rng)
            }
            Arm::Cper | Arm::CperIr => {
                buffer.sample_cper(batch_size, hindsight_prob, params, rng)
            }
            Arm::EpisodeAblation => {
                buffer.sample_episode_ablation(batch_size, hindsight_prob, params, rng)
            }
            Arm::RewardPrioritized => {
                buffer.sample_reward_prioritized(batch_size, hindsight_prob, params, rng)
            }
        }
    }
}

impl std::str::FromStr for Arm {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, ConfigError> {
        match s.to_ascii_lowercase().as_str() {
            "uniform_her" | "her" => Ok(Arm::UniformHer),
            "uniform_her_tactile" | "her_tactile" => Ok(Arm::UniformHerTactile),
            "ir" => Ok(Arm::Ir),
            "cper" => Ok(Arm::Cper),
            "cper_ir" => Ok(Arm::CperIr),
            "episode_ablation" => Ok(Arm::EpisodeAblation),
            "reward_prioritized" => Ok(Arm::RewardPrioritized),
            other => Err(ConfigError::Parse(format!("unknown arm '{other}'"))),
        }
    }
}

/// Full description of one training run. Serializes to JSON or TOML; every
/// field has a default so partial config files stay small.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub task: Task,
    pub difficulty: Difficulty,
    pub arm: Arm,
    pub seed: u64,
    pub epochs: usize,
    pub episodes_per_epoch: usize,
    pub optimizer_steps_per_episode: usize,
    pub eval_episodes: usize,
    /// Fixed episode length in control steps; no early termination.
    pub horizon: usize,
    /// Episode capacity of the FIFO replay buffer.
    pub buffer_capacity: usize,
    /// Contact up-weighting factor of the prioritized samplers.
    pub lambda: f64,
    /// Fraction of sampled items whose goal is replaced in hindsight.
    pub hindsight_prob: f64,
    /// Stop after the first epoch whose eval success reaches this value.
    pub early_stop_success: Option<f64>,
    /// Reward section; `None` resolves to task defaults (eps_force 10 N for
    /// Push/Lift, 3 N for Slide).
    pub reward: Option<RewardParams>,
    /// Physics section; `None` resolves to the task's default config.
    pub physics: Option<PhysicsConfig>,
    pub ddpg: DdpgHyper,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            task: Task::Push,
            difficulty: Difficulty::Simple,
            arm: Arm::CperIr,
            seed: 1,
            epochs: 50,
            episodes_per_epoch: 40,
            optimizer_steps_per_episode: 40,
            eval_episodes: 20,
            horizon: 50,
            buffer_capacity: 1000,
            lambda: 10.0,
            hindsight_prob: 0.8,
            early_stop_success: None,
            reward: None,
            physics: None,
            ddpg: DdpgHyper::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn for_task(task: Task) -> Self {
        ExperimentConfig {
            task,
            ..Default::default()
        }
    }

    /// Default intrinsic-force threshold per task.
    pub fn default_eps_force(task: Task) -> f64 {
        match task {
            Task::Push | Task::Lift => 10.0,
            Task::Slide => 3.0,
        }
    }

    /// Base reward parameters with task defaults applied.
    pub fn reward_params(&self) -> RewardParams {
        self.reward.unwrap_or(RewardParams {
            eps_force: Self::default_eps_force(self.task),
            ..RewardParams::default()
        })
    }

    /// Reward parameters after arm masking (extrinsic-only arms run with
    /// `w_ext = 1, w_int = 0`).
    pub fn effective_reward_params(&self) -> RewardParams {
        self.arm.effective_reward(&self.reward_params())
    }

    pub fn physics_config(&self) -> PhysicsConfig {
        self.physics
            .clone()
            .unwrap_or_else(|| PhysicsConfig::for_task(self.task))
    }

    /// Canonical output-directory name for this run.
    pub fn run_label(&self) -> String {
        format!(
            "{}-{}-{}-seed{}",
            self.task.name(),
            self.difficulty.name(),
            self.arm.name(),
            self.seed
        )
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let mut problems = Vec::new();
        if self.horizon == 0 {
            problems.push("horizon: must be >= 1".to_string());
        }
        if self.episodes_per_epoch == 0 {
            problems.push("episodes_per_epoch: must be >= 1".to_string());
        }
        if self.buffer_capacity == 0 {
            problems.push("buffer_capacity: must be >= 1".to_string());
        }
        if !(self.lambda > 0.0) {
            problems.push(format!("lambda: must be > 0, got {}", self.lambda));
        }
        if !(0.0..=1.0).contains(&self.hindsight_prob) {
            problems.push(format!(
                "hindsight_prob: must be in [0, 1], got {}",
                self.hindsight_prob
            ));
        }
        let reward = self.reward_params();
        if reward.w_ext < 0.0 || reward.w_int < 0.0 {
            problems.push("reward: weights must be nonnegative".to_string());
        }
        if !(reward.eps_pos > 0.0) {
            problems.push(format!("reward.eps_pos: must be > 0, got {}", reward.eps_pos));
        }
        if !(reward.eps_force > 0.0) {
            problems.push(format!(
                "reward.eps_force: must be > 0, got {}",
                reward.eps_force
            ));
        }
        let physics = self.physics_config();
        if physics.task != self.task {
            problems.push(format!(
                "physics.task: {} does not match task {}",
                physics.task.name(),
                self.task.name()
            ));
        }
        if let Err(e) = physics.validate() {
            problems.push(format!("physics: {e}"));
        }
        if let Err(e) = self.ddpg.validate() {
            problems.push(format!("ddpg: {e}"));
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(ConfigError::Invalid(problems))
        }
    }

    /// Load from a JSON or TOML document, picked by file extension.
    pub fn from_path(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|_| ConfigError::NotFound(path.display().to_string()))?;
        let config: ExperimentConfig = match path.extension().and_then(|e| e.to_str()) {
            Some("json") => serde_json::from_str(&text)
                .map_err(|e| ConfigError::Parse(format!("{}: {e}", path.display())))?,
            Some("toml") => toml::from_str(&text)
                .map_err(|e| ConfigError::Parse(format!("{}: {e}", path.display())))?,
            _ => serde_json::from_str(&text)
                .or_else(|_| toml::from_str(&text))
                .map_err(|e: toml::de::Error| {
                    ConfigError::Parse(format!("{}: {e}", path.display()))
                })?,
        };
        config.validate()?;
        Ok(config)
    }
}

/// One epoch's summary. `seconds` is wall-clock time and is written to a
/// separate timing file so the metrics CSV stays bit-reproducible.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub epoch: usize,
    pub train_success: f64,
    pub eval_success: f64,
    pub mean_reward: f64,
    /// Mean contact-onset step over the epoch's training episodes, or -1
    /// when no episode crossed the force threshold.
    pub onset_step: f64,
    pub seconds: f64,
}

pub const METRICS_HEADER: &str = "epoch,train_success,eval_success,mean_reward,onset_step";
pub const TIMING_HEADER: &str = "epoch,seconds";

pub fn metrics_csv_line(row: &MetricsRow) -> String {
    format!(
        "{},{},{},{},{}",
        row.epoch, row.train_success, row.eval_success, row.mean_reward, row.onset_step
    )
}

/// Write a complete metrics CSV (deterministic columns only).
pub fn write_metrics_csv(path: &Path, rows: &[MetricsRow]) -> std::io::Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "{METRICS_HEADER}")?;
    for row in rows {
        writeln!(w, "{}", metrics_csv_line(row))?;
    }
    w.flush()
}

/// Incremental writer producing `metrics.csv` and `timing.csv` in `dir`.
pub struct MetricsLogger {
    metrics: BufWriter<File>,
    timing: BufWriter<File>,
}

impl MetricsLogger {
    pub fn create(dir: &Path) -> std::io::Result<Self> {
        let mut metrics = BufWriter::new(File::create(dir.join("metrics.csv"))?);
        let mut timing = BufWriter::new(File::create(dir.join("timing.csv"))?);
        writeln!(metrics, "{METRICS_HEADER}")?;
        writeln!(timing, "{TIMING_HEADER}")?;
        Ok(MetricsLogger { metrics, timing })
    }

    pub fn log(&mut self, row: &MetricsRow) -> std::io::Result<()> {
        writeln!(self.metrics, "{}", metrics_csv_line(row))?;
        writeln!(self.timing, "{},{}", row.epoch, row.seconds)?;
        self.metrics.flush()?;
        self.timing.flush()
    }
}

/// Roll out one fixed-horizon episode and return its transitions plus a flag
/// marking a mid-episode simulation failure. On failure the remaining steps
/// are frozen copies of the last valid state (zero action, zero new force),
/// keeping the episode exactly `horizon` long; failed trials still feed the
/// buffer.
pub fn collect_episode(
    env: &mut PlanarEnv,
    agent: &DdpgAgent,
    params: &RewardParams,
    difficulty: Difficulty,
    seed: u64,
    explore: bool,
    rng: &mut ChaCha12Rng,
) -> Result<(Vec<Transition>, bool), TrainError> {
    let horizon = env.horizon();
    let (mut obs, goal) = env.reset(difficulty, seed);
    let mut transitions = Vec::with_capacity(horizon);
    let mut failed = false;

    for _ in 0..horizon {
        let action = if explore {
            agent.explore_action(&obs, &goal, rng)
        } else {
            agent.act(&obs, &goal)
        };
        match env.step(&action) {
            Ok(out) => {
                let reward =
                    combined_reward(&out.achieved, &goal, out.next_obs.force_sum, params)?;
                transitions.push(Transition {
                    obs: obs.clone(),
                    goal: goal.clone(),
                    action,
                    reward,
                    next_obs: out.next_obs.clone(),
                    achieved_next: out.achieved,
                    force_sum_next: out.next_obs.force_sum,
                });
                obs = out.next_obs;
            }
            Err(EnvError::NonFiniteState) => {
                failed = true;
                break;
            }
            Err(e) => return Err(e.into()),
        }
    }

    if failed {
        let frozen = obs.clone();
        let achieved = frozen.achieved_goal();
        let reward = combined_reward(&achieved, &goal, frozen.force_sum, params)?;
        let action_dim = env.action_dim();
        while transitions.len() < horizon {
            transitions.push(Transition {
                obs: frozen.clone(),
                goal: goal.clone(),
                action: Action::zeros(action_dim),
                reward,
                next_obs: frozen.clone(),
                achieved_next: achieved.clone(),
                force_sum_next: frozen.force_sum,
            });
        }
    }
    Ok((transitions, failed))
}

/// Fraction of greedy rollouts whose final object position satisfies the
/// success predicate. `policy` is any state-goal controller, which lets a
/// hand-scripted oracle validate the accounting independently of the agent.
pub fn evaluate_policy<F>(
    env: &mut PlanarEnv,
    mut policy: F,
    params: &RewardParams,
    difficulty: Difficulty,
    episodes: usize,
    rng: &mut ChaCha12Rng,
) -> Result<f64, TrainError>
where
    F: FnMut(&Observation, &Goal) -> Action,
{
    let mut successes = 0usize;
    for _ in 0..episodes {
        let seed = rng.next_u64();
        let (mut obs, goal) = env.reset(difficulty, seed);
        for _ in 0..env.horizon() {
            let action = policy(&obs, &goal);
            match env.step(&action) {
                Ok(out) => obs = out.next_obs,
                Err(EnvError::NonFiniteState) => break,
                Err(e) => return Err(e.into()),
            }
        }
        if is_success(&obs.achieved_goal(), &goal, params.eps_pos)? {
            successes += 1;
        }
    }
    Ok(successes as f64 / episodes.max(1) as f64)
}

/// Live state of one training run.
pub struct Experiment {
    config: ExperimentConfig,
    reward: RewardParams,
    env: PlanarEnv,
    agent: DdpgAgent,
    buffer: EpisodeBuffer,
    rollout_rng: ChaCha12Rng,
    sampler_rng: ChaCha12Rng,
    eval_rng: ChaCha12Rng,
    epoch: usize,
}

impl Experiment {
    pub fn new(config: ExperimentConfig) -> Result<Self, TrainError> {
        config.validate()?;
        let reward = config.effective_reward_params();
        let physics = config.physics_config();
        let env = PlanarEnv::new(physics, config.horizon)?;

        let tactile = config.arm.tactile_in_state();
        let layout = ObservationLayout::new(config.task, tactile);
        let hyper = config.ddpg.clone().with_reward_ceiling(reward.max_reward());

        // Independent deterministic streams for initialization, rollouts,
        // sampling and evaluation, all derived from the master seed.
        let mut master = ChaCha12Rng::seed_from_u64(config.seed);
        let mut agent_rng = ChaCha12Rng::seed_from_u64(master.next_u64());
        let rollout_rng = ChaCha12Rng::seed_from_u64(master.next_u64());
        let sampler_rng = ChaCha12Rng::seed_from_u64(master.next_u64());
        let eval_rng = ChaCha12Rng::seed_from_u64(master.next_u64());

        let agent = DdpgAgent::new(
            layout.len,
            2,
            config.task.action_dim(),
            tactile,
            hyper,
            &mut agent_rng,
        )?;
        let buffer = EpisodeBuffer::new(
            config.buffer_capacity,
            config.horizon,
            reward.eps_force,
            config.lambda,
        );
        Ok(Experiment {
            config,
            reward,
            env,
            agent,
            buffer,
            rollout_rng,
            sampler_rng,
            eval_rng,
            epoch: 0,
        })
    }

    pub fn config(&self) -> &ExperimentConfig {
        &self.config
    }

    pub fn agent(&self) -> &DdpgAgent {
        &self.agent
    }

    pub fn buffer(&self) -> &EpisodeBuffer {
        &self.buffer
    }

    pub fn into_agent(self) -> DdpgAgent {
        self.agent
    }

    /// One epoch: `episodes_per_epoch` exploratory episodes, each followed by
    /// `optimizer_steps_per_episode` sampler+update steps (targets synced
    /// every step), then a greedy evaluation pass.
    pub fn run_epoch(&mut self) -> Result<MetricsRow, TrainError> {
        let started = Instant::now();
        let cfg = self.config.clone();
        let mut train_successes = 0usize;
        let mut reward_total = 0.0;
        let mut onset_sum = 0.0;
        let mut onset_count = 0usize;

        for _ in 0..cfg.episodes_per_epoch {
            let seed = self.rollout_rng.next_u64();
            let (transitions, failed) = collect_episode(
                &mut self.env,
                &self.agent,
                &self.reward,
                cfg.difficulty,
                seed,
                true,
                &mut self.rollout_rng,
            )?;
            let episode_goal = &transitions[0].goal;
            let last = transitions.last().expect("fixed-horizon episode");
            if !failed && is_success(&last.achieved_next, episode_goal, self.reward.eps_pos)? {
                train_successes += 1;
            }
            reward_total += transitions.iter().map(|t| t.reward).sum::<f64>();
            self.agent.update_normalizers(&transitions);
            self.buffer.push_episode(transitions, failed)?;
            if let Some(onset) = self.buffer.episode(self.buffer.len() - 1).t_force {
                onset_sum += onset as f64;
                onset_count += 1;
            }

            for _ in 0..cfg.optimizer_steps_per_episode {
                let batch = cfg.arm.sample(
                    &self.buffer,
                    self.agent.hyper.batch_size,
                    cfg.hindsight_prob,
                    &self.reward,
                    &mut self.sampler_rng,
                )?;
                self.agent.train_batch(&batch)?;
            }
        }

        let agent = &self.agent;
        let eval_success = evaluate_policy(
            &mut self.env,
            |obs, goal| agent.act(obs, goal),
            &self.reward,
            cfg.difficulty,
            cfg.eval_episodes,
            &mut self.eval_rng,
        )?;

        let row = MetricsRow {
            epoch: self.epoch,
            train_success: train_successes as f64 / cfg.episodes_per_epoch as f64,
            eval_success,
            mean_reward: reward_total / cfg.episodes_per_epoch as f64,
            onset_step: if onset_count > 0 {
                onset_sum / onset_count as f64
            } else {
                -1.0
            },
            seconds: started.elapsed().as_secs_f64(),
        };
        self.epoch += 1;
        Ok(row)
    }
}

/// Product of a finished run.
pub struct RunResult {
    pub metrics: Vec<MetricsRow>,
    pub agent: DdpgAgent,
}

/// Run the configured number of epochs (or fewer with early stopping),
/// invoking `on_epoch` after each one.
pub fn run_experiment_with<F>(
    config: &ExperimentConfig,
    mut on_epoch: F,
) -> Result<RunResult, TrainError>
where
    F: FnMut(&MetricsRow),
{
    let label = config.run_label();
    let wrap = |e: TrainError| TrainError::Run {
        label: label.clone(),
        source: Box::new(e),
    };
    let mut experiment = Experiment::new(config.clone()).map_err(wrap)?;
    let mut metrics = Vec::with_capacity(config.epochs);
    for _ in 0..config.epochs {
        let row = experiment.run_epoch().map_err(|e| TrainError::Run {
            label: label.clone(),
            source: Box::new(e),
        })?;
        on_epoch(&row);
        let stop = config
            .early_stop_success
            .is_some_and(|threshold| row.eval_success >= threshold);
        metrics.push(row);
        if stop {
            break;
        }
    }
    Ok(RunResult {
        metrics,
        agent: experiment.into_agent(),
    })
}

/// Run a full experiment, discarding per-epoch callbacks.
pub fn run_experiment(config: &ExperimentConfig) -> Result<RunResult, TrainError> {
    run_experiment_with(config, |_| {})
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::tasks::scripted_push;

    fn smoke_config() -> ExperimentConfig {
        ExperimentConfig {
            epochs: 1,
            episodes_per_epoch: 3,
            optimizer_steps_per_episode: 2,
            eval_episodes: 3,
            buffer_capacity: 16,
            ddpg: DdpgHyper {
                hidden: vec![16, 16],
                batch_size: 8,
                ..DdpgHyper::default()
            },
            ..ExperimentConfig::default()
        }
    }

    #[test]
    fn arm_table_matches_the_legend() {
        assert!(!Arm::UniformHer.tactile_in_state());
        for arm in [Arm::UniformHerTactile, Arm::Ir, Arm::Cper, Arm::CperIr] {
            assert!(arm.tactile_in_state());
        }
        for (arm, intrinsic) in [
            (Arm::UniformHer, false),
            (Arm::UniformHerTactile, false),
            (Arm::Cper, false),
            (Arm::Ir, true),
            (Arm::CperIr, true),
            (Arm::EpisodeAblation, true),
            (Arm::RewardPrioritized, true),
        ] {
            assert_eq!(arm.uses_intrinsic(), intrinsic, "{arm:?}");
        }
        // Extrinsic-only arms keep the {0,1} reward scale.
        let base = RewardParams::default();
        let masked = Arm::Cper.effective_reward(&base);
        assert_eq!((masked.w_ext, masked.w_int), (1.0, 0.0));
        assert_eq!(Arm::CperIr.effective_reward(&base), base);
    }

    #[test]
    fn slide_defaults_to_the_low_force_threshold() {
        let config = ExperimentConfig::for_task(Task::Slide);
        assert_eq!(config.reward_params().eps_force, 3.0);
        assert_eq!(ExperimentConfig::for_task(Task::Push).reward_params().eps_force, 10.0);
    }

    #[test]
    fn config_validation_reports_field_level_problems() {
        let mut config = ExperimentConfig::default();
        config.lambda = 0.0;
        config.hindsight_prob = 1.5;
        let err = config.validate().unwrap_err();
        match err {
            ConfigError::Invalid(problems) => {
                assert!(problems.iter().any(|p| p.contains("lambda")));
                assert!(problems.iter().any(|p| p.contains("hindsight_prob")));
            }
            other => panic!("expected Invalid, got {other:?}"),
        }
    }

    #[test]
    fn config_round_trips_through_json_and_toml() {
        let dir = tempfile::tempdir().unwrap();
        let config = smoke_config();

        let json_path = dir.path().join("config.json");
        std::fs::write(&json_path, serde_json::to_string_pretty(&config).unwrap()).unwrap();
        assert_eq!(ExperimentConfig::from_path(&json_path).unwrap(), config);

        let toml_path = dir.path().join("config.toml");
        std::fs::write(&toml_path, toml::to_string(&config).unwrap()).unwrap();
        assert_eq!(ExperimentConfig::from_path(&toml_path).unwrap(), config);
    }

    #[test]
    fn missing_config_file_is_a_not_found_error() {
        let err = ExperimentConfig::from_path(Path::new("/nonexistent/config.json")).unwrap_err();
        assert!(matches!(err, ConfigError::NotFound(p) if p.contains("nonexistent")));
    }

    #[test]
    fn collected_episodes_satisfy_the_storage_invariants() {
        let config = smoke_config();
        let mut experiment = Experiment::new(config).unwrap();
        let mut rng = ChaCha12Rng::seed_from_u64(5);
        let (transitions, failed) = collect_episode(
            &mut experiment.env,
            &experiment.agent,
            &experiment.reward,
            Difficulty::Simple,
            99,
            true,
            &mut rng,
        )
        .unwrap();
        assert!(!failed);
        assert_eq!(transitions.len(), 50);
        let mut prev = 0.0;
        for t in &transitions {
            // Monotone cumulative force, stored fields consistent with obs.
            assert!(t.force_sum_next >= prev);
            prev = t.force_sum_next;
            assert_eq!(t.achieved_next, t.next_obs.achieved_goal());
            assert_eq!(t.force_sum_next, t.next_obs.force_sum);
            // Stored reward equals recomputation from stored fields.
            let recomputed = combined_reward(
                &t.achieved_next,
                &t.goal,
                t.force_sum_next,
                &experiment.reward,
            )
            .unwrap();
            assert_eq!(t.reward, recomputed);
        }
    }

    #[test]
    fn scripted_oracle_scores_full_eval_success() {
        let config = ExperimentConfig::default();
        let mut env = PlanarEnv::new(config.physics_config(), config.horizon).unwrap();
        let params = config.effective_reward_params();
        let mut rng = ChaCha12Rng::seed_from_u64(7);
        let cfg = env.config().clone();
        let success = evaluate_policy(
            &mut env,
            |obs, goal| scripted_push(obs, goal, &cfg),
            &params,
            Difficulty::Simple,
            20,
            &mut rng,
        )
        .unwrap();
        assert_eq!(success, 1.0);
    }

    #[test]
    fn zero_actor_scores_zero_on_push_hard() {
        // The goal region excludes the object's start position by more than
        // eps_pos, so an actor that never moves cannot succeed.
        let config = ExperimentConfig {
            difficulty: Difficulty::Hard,
            ..smoke_config()
        };
        let mut experiment = Experiment::new(config).unwrap();
        let zeros = vec![0.0; experiment.agent.actor.param_count()];
        experiment.agent.actor.set_params(&zeros);
        let agent = &experiment.agent;
        let mut rng = ChaCha12Rng::seed_from_u64(3);
        let success = evaluate_policy(
            &mut experiment.env,
            |obs, goal| agent.act(obs, goal),
            &experiment.reward,
            Difficulty::Hard,
            50,
            &mut rng,
        )
        .unwrap();
        assert_eq!(success, 0.0);
    }

    #[test]
    fn run_epoch_is_deterministic_for_identical_config_and_seed() {
        let run = || {
            let config = smoke_config();
            run_experiment(&config).unwrap().metrics
        };
        let a = run();
        let b = run();
        assert_eq!(a.len(), b.len());
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(metrics_csv_line(x), metrics_csv_line(y));
            assert_eq!(x.train_success, y.train_success);
            assert_eq!(x.eval_success, y.eval_success);
            assert_eq!(x.mean_reward, y.mean_reward);
            assert_eq!(x.onset_step, y.onset_step);
        }
    }

    #[test]
    fn zero_epochs_yields_an_empty_series_and_an_initial_agent() {
        let config = ExperimentConfig {
            epochs: 0,
            ..smoke_config()
        };
        let result = run_experiment(&config).unwrap();
        assert!(result.metrics.is_empty());
        assert!(result.agent.actor.all_finite());
    }

    #[test]
    fn exactly_the_configured_episode_count_trains_per_epoch() {
        let config = smoke_config();
        let mut experiment = Experiment::new(config.clone()).unwrap();
        experiment.run_epoch().unwrap();
        assert_eq!(experiment.buffer.len(), config.episodes_per_epoch);
        experiment.run_epoch().unwrap();
        assert_eq!(experiment.buffer.len(), 2 * config.episodes_per_epoch);
    }

    #[test]
    fn metrics_csv_writer_produces_the_documented_schema() {
        let dir = tempfile::tempdir().unwrap();
        let rows = vec![
            MetricsRow {
                epoch: 0,
                train_success: 0.25,
                eval_success: 0.5,
                mean_reward: 1.75,
                onset_step: 12.5,
                seconds: 3.25,
            },
            MetricsRow {
                epoch: 1,
                train_success: 0.5,
                eval_success: 0.55,
                mean_reward: 2.0,
                onset_step: -1.0,
                seconds: 3.5,
            },
        ];
        let path = dir.path().join("metrics.csv");
        write_metrics_csv(&path, &rows).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(
            text,
            "epoch,train_success,eval_success,mean_reward,onset_step\n\
             0,0.25,0.5,1.75,12.5\n\
             1,0.5,0.55,2,-1\n"
        );
    }
}
