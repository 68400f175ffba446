//! DDPG actor-critic with target networks, input normalization and
//! eps-greedy Gaussian exploration. Gradients come from the hand-written
//! backprop in [`mlp`]; optimization is plain SGD with a fixed learning rate
//! so the finite-difference gradient checks stay exact.

pub mod mlp;
pub mod normalizer;

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::env::{Action, Goal, Observation};
use crate::replay::MiniBatchItem;
use mlp::{Mlp, MlpGrads, OutputActivation};
use normalizer::Normalizer;

#[derive(Debug, Error)]
pub enum AgentError {
    #[error("non-finite {context} during update (value {value})")]
    NonFinite { context: &'static str, value: f64 },
    #[error("invalid hyperparameters: {0}")]
    BadHyper(String),
    #[error("checkpoint io: {0}")]
    Io(#[from] std::io::Error),
    #[error("checkpoint sidecar: {0}")]
    Json(#[from] serde_json::Error),
    #[error("corrupt checkpoint: {0}")]
    Corrupt(String),
}

/// DDPG hyperparameters. `q_clip` is the TD-target clamp; with rewards in
/// `[0, w_ext + w_int]` the valid value range is `[0, (w_ext+w_int)/(1-gamma)]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DdpgHyper {
    pub gamma: f64,
    pub tau: f64,
    pub lr_actor: f64,
    pub lr_critic: f64,
    pub noise_sigma: f64,
    pub random_eps: f64,
    pub batch_size: usize,
    pub q_clip: (f64, f64),
    /// Hidden layer widths shared by actor and critic.
    pub hidden: Vec<usize>,
    /// Coefficient of the pre-tanh action penalty in the actor objective.
    pub action_l2: f64,
    /// Normalizer clip range.
    pub norm_clip: f64,
}

impl Default for DdpgHyper {
    fn default() -> Self {
        DdpgHyper {
            gamma: 0.98,
            tau: 0.05,
            lr_actor: 1e-3,
            lr_critic: 1e-3,
            noise_sigma: 0.2,
            random_eps: 0.3,
            batch_size: 64,
            q_clip: (0.0, 50.0),
            hidden: vec![64, 64, 64],
            action_l2: 1.0,
            norm_clip: 5.0,
        }
    }
}

impl DdpgHyper {
    /// Clamp targets to the value range attainable with `max_reward` per step.
    pub fn with_reward_ceiling(mut self, max_reward: f64) -> Self {
        self.q_clip = (0.0, max_reward / (1.0 - self.gamma));
        self
    }

    pub fn validate(&self) -> Result<(), AgentError> {
        let positive = [
            ("tau", self.tau),
            ("lr_actor", self.lr_actor),
            ("lr_critic", self.lr_critic),
        ];
        for (name, v) in positive {
            if !(v > 0.0) {
                return Err(AgentError::BadHyper(format!("{name} must be > 0, got {v}")));
            }
        }
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return Err(AgentError::BadHyper(format!(
                "gamma must be in (0, 1), got {}",
                self.gamma
            )));
        }
        if self.tau > 1.0 {
            return Err(AgentError::BadHyper(format!(
                "tau must be in (0, 1], got {}",
                self.tau
            )));
        }
        if self.batch_size == 0 || self.hidden.is_empty() {
            return Err(AgentError::BadHyper(
                "batch_size and hidden layers must be nonzero".into(),
            ));
        }
        if self.q_clip.0 > self.q_clip.1 {
            return Err(AgentError::BadHyper("q_clip range is inverted".into()));
        }
        Ok(())
    }
}

/// Goal-conditioned DDPG agent with Polyak-averaged target copies.
#[derive(Debug, Clone)]
pub struct DdpgAgent {
    pub hyper: DdpgHyper,
    pub actor: Mlp,
    pub critic: Mlp,
    pub target_actor: Mlp,
    pub target_critic: Mlp,
    pub obs_norm: Normalizer,
    pub goal_norm: Normalizer,
    obs_dim: usize,
    goal_dim: usize,
    action_dim: usize,
    /// Whether observation vectors include the force channels.
    tactile: bool,
}

impl DdpgAgent {
    pub fn new<R: Rng>(
        obs_dim: usize,
        goal_dim: usize,
        action_dim: usize,
        tactile: bool,
        hyper: DdpgHyper,
        rng: &mut R,
    ) -> Result<Self, AgentError> {
        hyper.validate()?;
        let mut actor_sizes = vec![obs_dim + goal_dim];
        actor_sizes.extend_from_slice(&hyper.hidden);
        actor_sizes.push(action_dim);
        let mut critic_sizes = vec![obs_dim + goal_dim + action_dim];
        critic_sizes.extend_from_slice(&hyper.hidden);
        critic_sizes.push(1);

        let actor = Mlp::new(&actor_sizes, OutputActivation::Tanh, rng);
        let critic = Mlp::new(&critic_sizes, OutputActivation::Identity, rng);
        let target_actor = actor.clone();
        let target_critic = critic.clone();
        let norm_clip = hyper.norm_clip;
        Ok(DdpgAgent {
            hyper,
            actor,
            critic,
            target_actor,
            target_critic,
            obs_norm: Normalizer::new(obs_dim, norm_clip),
            goal_norm: Normalizer::new(goal_dim, norm_clip),
            obs_dim,
            goal_dim,
            action_dim,
            tactile,
        })
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        (self.obs_dim, self.goal_dim, self.action_dim)
    }

    pub fn tactile(&self) -> bool {
        self.tactile
    }

    fn obs_input(&self, obs: &Observation) -> Vec<f64> {
        self.obs_norm.normalize(&obs.to_vector(self.tactile))
    }

    fn actor_input(&self, obs: &Observation, goal: &Goal) -> Vec<f64> {
        let mut x = self.obs_input(obs);
        x.extend(self.goal_norm.normalize(&goal.0));
        x
    }

    /// Greedy policy action in `(-1, 1)^d`.
    pub fn act(&self, obs: &Observation, goal: &Goal) -> Action {
        Action(self.actor.forward(&self.actor_input(obs, goal)))
    }

    /// Critic value of a concrete (state, goal, action) triple.
    pub fn q_value(&self, obs: &Observation, goal: &Goal, action: &Action) -> f64 {
        let mut x = self.actor_input(obs, goal);
        x.extend_from_slice(&action.0);
        self.critic.forward(&x)[0]
    }

    /// Behavior policy: with probability `random_eps` a uniform action,
    /// otherwise the greedy action plus Gaussian noise, clamped to the box.
    pub fn explore_action<R: Rng>(&self, obs: &Observation, goal: &Goal, rng: &mut R) -> Action {
        if rng.random_range(0.0..1.0) < self.hyper.random_eps {
            return Action(
                (0..self.action_dim)
                    .map(|_| rng.random_range(-1.0..1.0))
                    .collect(),
            );
        }
        let mut action = self.act(obs, goal);
        if self.hyper.noise_sigma > 0.0 {
            let normal = Normal::new(0.0, self.hyper.noise_sigma).expect("sigma is finite");
            for a in action.0.iter_mut() {
                *a = (*a + normal.sample(rng)).clamp(-1.0, 1.0);
            }
        }
        action
    }

    /// Fold a rollout into the running input statistics: every observation,
    /// the episode's desired goal, and each achieved goal (the population
    /// hindsight substitution draws from).
    pub fn update_normalizers(&mut self, transitions: &[crate::replay::Transition]) {
        if let Some(first) = transitions.first() {
            self.obs_norm.update(&first.obs.to_vector(self.tactile));
            self.goal_norm.update(&first.goal.0);
        }
        for t in transitions {
            self.obs_norm.update(&t.next_obs.to_vector(self.tactile));
            self.goal_norm.update(&t.achieved_next.0);
        }
    }

    /// Clamped one-step TD targets `y_i = r_i + gamma * Q'(s', g, pi'(s', g))`
    /// computed with the frozen target networks.
    pub fn td_targets(&self, batch: &[MiniBatchItem]) -> Vec<f64> {
        batch
            .iter()
            .map(|item| {
                let t = &item.transition;
                let mut x = self.obs_norm.normalize(&t.next_obs.to_vector(self.tactile));
                x.extend(self.goal_norm.normalize(&t.goal.0));
                let next_action = self.target_actor.forward(&x);
                x.extend_from_slice(&next_action);
                let q_next = self.target_critic.forward(&x)[0];
                (t.reward + self.hyper.gamma * q_next)
                    .clamp(self.hyper.q_clip.0, self.hyper.q_clip.1)
            })
            .collect()
    }

    /// One SGD step on the mean squared Bellman error. Returns the pre-step
    /// loss.
    pub fn critic_update(
        &mut self,
        batch: &[MiniBatchItem],
        targets: &[f64],
    ) -> Result<f64, AgentError> {
        debug_assert_eq!(batch.len(), targets.len());
        let scale = 1.0 / batch.len() as f64;
        let mut grads = MlpGrads::zeros_like(&self.critic);
        let mut loss = 0.0;
        for (item, &y) in batch.iter().zip(targets) {
            let t = &item.transition;
            let mut x = self.actor_input(&t.obs, &t.goal);
            x.extend_from_slice(&t.action.0);
            let cache = self.critic.forward_cached(&x);
            let diff = cache.output[0] - y;
            loss += diff * diff * scale;
            self.critic
                .backward(&cache, &[2.0 * diff * scale], None, &mut grads);
        }
        if !loss.is_finite() {
            return Err(AgentError::NonFinite {
                context: "critic loss",
                value: loss,
            });
        }
        self.critic.apply_gradients(&grads, self.hyper.lr_critic);
        Ok(loss)
    }

    /// One ascent step on `mean Q(s, g, pi(s, g)) - action_l2 * mean(z^2)`
    /// where `z` is the pre-tanh action. The critic stays frozen; its only
    /// role is supplying dQ/da. Returns the pre-step objective.
    pub fn actor_update(&mut self, batch: &[MiniBatchItem]) -> Result<f64, AgentError> {
        let b = batch.len() as f64;
        let d = self.action_dim as f64;
        let c = self.hyper.action_l2;
        let mut grads = MlpGrads::zeros_like(&self.actor);
        let mut objective = 0.0;
        for item in batch {
            let t = &item.transition;
            let sg = self.actor_input(&t.obs, &t.goal);
            let actor_cache = self.actor.forward_cached(&sg);

            let mut x = sg.clone();
            x.extend_from_slice(&actor_cache.output);
            let critic_cache = self.critic.forward_cached(&x);
            let q = critic_cache.output[0];

            let pre = actor_cache.pre_output();
            let penalty: f64 = pre.iter().map(|z| z * z).sum::<f64>() / (b * d);
            objective += q / b - c * penalty;

            // dJ/da through the frozen critic, then into the actor.
            let input_grad = self.critic.input_gradient(&critic_cache, &[1.0 / b]);
            let grad_action = &input_grad[sg.len()..];
            let grad_pre: Vec<f64> = pre.iter().map(|z| -2.0 * c * z / (b * d)).collect();
            self.actor
                .backward(&actor_cache, grad_action, Some(&grad_pre), &mut grads);
        }
        if !objective.is_finite() {
            return Err(AgentError::NonFinite {
                context: "actor objective",
                value: objective,
            });
        }
        // Ascent on the objective.
        self.actor.apply_gradients(&grads, -self.hyper.lr_actor);
        Ok(objective)
    }

    /// Polyak-track both target networks toward the online ones.
    pub fn soft_update(&mut self) {
        self.target_actor
            .soft_update_from(&self.actor, self.hyper.tau);
        self.target_critic
            .soft_update_from(&self.critic, self.hyper.tau);
    }

    /// Full optimizer step: targets, critic, actor, target sync.
    pub fn train_batch(&mut self, batch: &[MiniBatchItem]) -> Result<(f64, f64), AgentError> {
        let targets = self.td_targets(batch);
        let loss = self.critic_update(batch, &targets)?;
        let objective = self.actor_update(batch)?;
        self.soft_update();
        Ok((loss, objective))
    }

    /// Write the flat binary weight file plus the JSON sidecar.
    pub fn save_checkpoint(&self, bin_path: &Path, json_path: &Path) -> Result<(), AgentError> {
        let mut w = BufWriter::new(File::create(bin_path)?);
        w.write_all(CHECKPOINT_MAGIC)?;
        let tensors = self.named_tensors();
        w.write_all(&(tensors.len() as u32).to_le_bytes())?;
        for (name, rows, cols, data) in tensors {
            w.write_all(&(name.len() as u16).to_le_bytes())?;
            w.write_all(name.as_bytes())?;
            w.write_all(&(rows as u32).to_le_bytes())?;
            w.write_all(&(cols as u32).to_le_bytes())?;
            for v in data {
                w.write_all(&v.to_le_bytes())?;
            }
        }
        w.flush()?;

        let meta = CheckpointMeta {
            hyper: self.hyper.clone(),
            obs_dim: self.obs_dim,
            goal_dim: self.goal_dim,
            action_dim: self.action_dim,
            tactile: self.tactile,
            obs_norm: self.obs_norm.clone(),
            goal_norm: self.goal_norm.clone(),
        };
        serde_json::to_writer_pretty(BufWriter::new(File::create(json_path)?), &meta)?;
        Ok(())
    }

    pub fn load_checkpoint(bin_path: &Path, json_path: &Path) -> Result<Self, AgentError> {
        let meta: CheckpointMeta = serde_json::from_reader(BufReader::new(File::open(json_path)?))?;
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(0);
        let mut agent = DdpgAgent::new(
            meta.obs_dim,
            meta.goal_dim,
            meta.action_dim,
            meta.tactile,
            meta.hyper,
            &mut rng,
        )?;
        agent.obs_norm = meta.obs_norm;
        agent.goal_norm = meta.goal_norm;

        let mut r = BufReader::new(File::open(bin_path)?);
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if &magic != CHECKPOINT_MAGIC {
            return Err(AgentError::Corrupt("bad magic bytes".into()));
        }
        let count = read_u32(&mut r)? as usize;
        for _ in 0..count {
            let name_len = read_u16(&mut r)? as usize;
            let mut name = vec![0u8; name_len];
            r.read_exact(&mut name)?;
            let name = String::from_utf8(name)
                .map_err(|_| AgentError::Corrupt("tensor name is not utf-8".into()))?;
            let rows = read_u32(&mut r)? as usize;
            let cols = read_u32(&mut r)? as usize;
            let mut data = vec![0f64; rows * cols];
            let mut buf = [0u8; 8];
            for v in data.iter_mut() {
                r.read_exact(&mut buf)?;
                *v = f64::from_le_bytes(buf);
            }
            agent.store_tensor(&name, rows, cols, data)?;
        }
        Ok(agent)
    }

    fn named_tensors(&self) -> Vec<(String, usize, usize, &[f64])> {
        let mut out = Vec::new();
        for (prefix, net) in [
            ("actor", &self.actor),
            ("critic", &self.critic),
            ("target_actor", &self.target_actor),
            ("target_critic", &self.target_critic),
        ] {
            for (i, layer) in net.layers.iter().enumerate() {
                out.push((
                    format!("{prefix}.l{i}.w"),
                    layer.out_dim,
                    layer.in_dim,
                    layer.w.as_slice(),
                ));
                out.push((format!("{prefix}.l{i}.b"), layer.out_dim, 1, layer.b.as_slice()));
            }
        }
        out
    }

    fn store_tensor(
        &mut self,
        name: &str,
        rows: usize,
        cols: usize,
        data: Vec<f64>,
    ) -> Result<(), AgentError> {
        let mut parts = name.split('.');
        let (net_name, layer_part, kind) = (
            parts.next().unwrap_or_default(),
            parts.next().unwrap_or_default(),
            parts.next().unwrap_or_default(),
        );
        let net = match net_name {
            "actor" => &mut self.actor,
            "critic" => &mut self.critic,
            "target_actor" => &mut self.target_actor,
            "target_critic" => &mut self.target_critic,
            _ => return Err(AgentError::Corrupt(format!("unknown tensor '{name}'"))),
        };
        let idx: usize = layer_part
            .strip_prefix('l')
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| AgentError::Corrupt(format!("bad layer in '{name}'")))?;
        let layer = net
            .layers
            .get_mut(idx)
            .ok_or_else(|| AgentError::Corrupt(format!("layer out of range in '{name}'")))?;
        match kind {
            "w" if rows == layer.out_dim && cols == layer.in_dim => layer.w = data,
            "b" if rows == layer.out_dim && cols == 1 => layer.b = data,
            _ => {
                return Err(AgentError::Corrupt(format!(
                    "shape mismatch for '{name}': {rows}x{cols}"
                )))
            }
        }
        Ok(())
    }
}

const CHECKPOINT_MAGIC: &[u8; 8] = b"CRLCKPT1";

fn read_u32<R: Read>(r: &mut R) -> Result<u32, AgentError> {
    let mut buf = [0u8; 4];
    r.read_exact(&mut buf)?;
    Ok(u32::from_le_bytes(buf))
}

fn read_u16<R: Read>(r: &mut R) -> Result<u16, AgentError> {
    let mut buf = [0u8; 2];
    r.read_exact(&mut buf)?;
    Ok(u16::from_le_bytes(buf))
}

#[derive(Serialize, Deserialize)]
struct CheckpointMeta {
    hyper: DdpgHyper,
    obs_dim: usize,
    goal_dim: usize,
    action_dim: usize,
    tactile: bool,
    obs_norm: Normalizer,
    goal_norm: Normalizer,
}
