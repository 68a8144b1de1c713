//! Off-policy actor-critic learners over the neural core.
//!
//! All three learners share the same interface: minibatches of
//! transitions in, one gradient update out, with diagnostics whose values
//! equal an independent re-evaluation of the defining losses on the same
//! minibatch. RNG draw order is part of each update's contract; the
//! `*_with_noise` variants take the draws as arguments so oracles can
//! inject them.

pub mod ddpg;
pub mod sac;
pub mod td3;

use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::Mlp;
use crate::replay::Transition;

pub use ddpg::DdpgAgent;
pub use sac::{sac_sample_action, SacAgent};
pub use td3::Td3Agent;

/// Actions are (linear velocity, angular velocity), normalized.
pub const ACTION_DIM: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    Ddpg,
    Td3,
    Sac,
}

impl Algorithm {
    pub fn as_str(&self) -> &'static str {
        match self {
            Algorithm::Ddpg => "ddpg",
            Algorithm::Td3 => "td3",
            Algorithm::Sac => "sac",
        }
    }

    pub fn from_str(s: &str) -> Result<Self> {
        match s {
            "ddpg" => Ok(Algorithm::Ddpg),
            "td3" => Ok(Algorithm::Td3),
            "sac" => Ok(Algorithm::Sac),
            other => Err(Error::Parse(format!("unknown algorithm '{other}'"))),
        }
    }
}

/// Learner hyperparameters. Defaults follow the non-default table of the
/// training setup: gamma 0.995, actor lr 5e-5, critic lr 5e-4, smoothing
/// 0.001, minibatch 128, buffer 10^6.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AgentConfig {
    pub algorithm: Algorithm,
    pub gamma: f64,
    pub actor_lr: f64,
    pub critic_lr: f64,
    pub tau: f64,
    pub batch_size: usize,
    pub buffer_capacity: usize,
    pub hidden_dims: Vec<usize>,
    /// Gaussian exploration noise on normalized actions (DDPG/TD3).
    pub explore_sigma: f64,
    /// TD3 target policy smoothing noise sigma.
    pub target_noise_sigma: f64,
    /// TD3 target noise clip c.
    pub target_noise_clip: f64,
    /// TD3 delayed policy update period d.
    pub policy_delay: u64,
    /// SAC target entropy H.
    pub target_entropy: f64,
    /// SAC initial entropy weight.
    pub initial_alpha: f64,
}

impl Default for AgentConfig {
    fn default() -> Self {
        AgentConfig {
            algorithm: Algorithm::Sac,
            gamma: 0.995,
            actor_lr: 5e-5,
            critic_lr: 5e-4,
            tau: 0.001,
            batch_size: 128,
            buffer_capacity: 1_000_000,
            hidden_dims: vec![256, 256],
            explore_sigma: 0.1,
            target_noise_sigma: 0.2,
            target_noise_clip: 0.5,
            policy_delay: 2,
            target_entropy: -(ACTION_DIM as f64),
            initial_alpha: 0.2,
        }
    }
}

impl AgentConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return Err(Error::Config(format!("gamma {} outside (0, 1]", self.gamma)));
        }
        if !(self.tau > 0.0 && self.tau <= 1.0) {
            return Err(Error::Config(format!("tau {} outside (0, 1]", self.tau)));
        }
        if self.batch_size == 0 || self.batch_size > self.buffer_capacity {
            return Err(Error::Config(format!(
                "batch_size {} must be in 1..=buffer_capacity {}",
                self.batch_size, self.buffer_capacity
            )));
        }
        if self.hidden_dims.is_empty() || self.hidden_dims.iter().any(|d| *d == 0) {
            return Err(Error::Config("hidden_dims must be non-empty and positive".into()));
        }
        if self.policy_delay == 0 {
            return Err(Error::Config("policy_delay must be >= 1".into()));
        }
        for (name, v) in [
            ("actor_lr", self.actor_lr),
            ("critic_lr", self.critic_lr),
            ("explore_sigma", self.explore_sigma),
            ("target_noise_sigma", self.target_noise_sigma),
            ("target_noise_clip", self.target_noise_clip),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} must be finite and >= 0, got {v}")));
            }
        }
        Ok(())
    }

    fn actor_dims(&self, obs_dim: usize, out: usize) -> Vec<usize> {
        let mut dims = vec![obs_dim];
        dims.extend_from_slice(&self.hidden_dims);
        dims.push(out);
        dims
    }

    fn critic_dims(&self, obs_dim: usize) -> Vec<usize> {
        let mut dims = vec![obs_dim + ACTION_DIM];
        dims.extend_from_slice(&self.hidden_dims);
        dims.push(1);
        dims
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ActionMode {
    Explore,
    Exploit,
}

/// A sampled minibatch in matrix form. `not_done` is 1.0 where the
/// bootstrap term survives (non-terminal transitions).
#[derive(Debug, Clone)]
pub struct MiniBatch {
    pub states: Array2<f64>,
    pub actions: Array2<f64>,
    pub rewards: Array1<f64>,
    pub next_states: Array2<f64>,
    pub not_done: Array1<f64>,
}

impl MiniBatch {
    pub fn from_transitions(transitions: &[&Transition]) -> Result<Self> {
        if transitions.is_empty() {
            return Err(Error::Usage("empty minibatch".into()));
        }
        let obs_dim = transitions[0].state.len();
        let m = transitions.len();
        let mut states = Array2::zeros((m, obs_dim));
        let mut actions = Array2::zeros((m, ACTION_DIM));
        let mut rewards = Array1::zeros(m);
        let mut next_states = Array2::zeros((m, obs_dim));
        let mut not_done = Array1::zeros(m);
        for (i, t) in transitions.iter().enumerate() {
            if t.state.len() != obs_dim || t.next_state.len() != obs_dim {
                return Err(Error::Dimension(format!(
                    "transition {i} state length {} does not match {obs_dim}",
                    t.state.len()
                )));
            }
            if !t.reward.is_finite() {
                return Err(Error::NonFinite(format!("transition {i} reward")));
            }
            states.row_mut(i).assign(&Array1::from_vec(t.state.clone()));
            next_states
                .row_mut(i)
                .assign(&Array1::from_vec(t.next_state.clone()));
            actions[[i, 0]] = t.action[0];
            actions[[i, 1]] = t.action[1];
            rewards[i] = t.reward;
            not_done[i] = if t.done { 0.0 } else { 1.0 };
        }
        Ok(MiniBatch { states, actions, rewards, next_states, not_done })
    }

    pub fn len(&self) -> usize {
        self.rewards.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rewards.is_empty()
    }
}

/// Per-update diagnostics. Every value equals an independent re-evaluation
/// of its defining loss on the same minibatch.
#[derive(Debug, Clone)]
pub struct UpdateDiagnostics {
    pub critic_losses: Vec<f64>,
    /// DDPG/TD3: the ascended objective mean Q(s, pi(s)) (None on delayed
    /// steps). SAC: the minimized actor loss.
    pub actor_metric: Option<f64>,
    /// SAC entropy weight after its gradient step.
    pub alpha: Option<f64>,
    /// SAC estimate of policy entropy, -mean(ln pi).
    pub entropy_estimate: Option<f64>,
}

impl UpdateDiagnostics {
    pub fn critic_loss(&self) -> f64 {
        self.critic_losses.iter().sum::<f64>() / self.critic_losses.len() as f64
    }
}

/// A learner of any of the three algorithms behind one interface.
#[derive(Debug, Clone)]
pub enum Agent {
    Ddpg(DdpgAgent),
    Td3(Td3Agent),
    Sac(SacAgent),
}

impl Agent {
    pub fn new(cfg: &AgentConfig, obs_dim: usize, rng: &mut ChaCha8Rng) -> Result<Agent> {
        cfg.validate()?;
        Ok(match cfg.algorithm {
            Algorithm::Ddpg => Agent::Ddpg(DdpgAgent::new(cfg.clone(), obs_dim, rng)),
            Algorithm::Td3 => Agent::Td3(Td3Agent::new(cfg.clone(), obs_dim, rng)),
            Algorithm::Sac => Agent::Sac(SacAgent::new(cfg.clone(), obs_dim, rng)),
        })
    }

    pub fn algorithm(&self) -> Algorithm {
        match self {
            Agent::Ddpg(_) => Algorithm::Ddpg,
            Agent::Td3(_) => Algorithm::Td3,
            Agent::Sac(_) => Algorithm::Sac,
        }
    }

    pub fn config(&self) -> &AgentConfig {
        match self {
            Agent::Ddpg(a) => &a.cfg,
            Agent::Td3(a) => &a.cfg,
            Agent::Sac(a) => &a.cfg,
        }
    }

    pub fn obs_dim(&self) -> usize {
        match self {
            Agent::Ddpg(a) => a.actor.input_dim(),
            Agent::Td3(a) => a.actor.input_dim(),
            Agent::Sac(a) => a.actor.input_dim(),
        }
    }

    /// Explore adds per-algorithm stochasticity; exploit is the
    /// deterministic policy. Outputs always lie in [-1, 1]^2.
    pub fn select_action(
        &self,
        obs: &[f64],
        mode: ActionMode,
        rng: &mut ChaCha8Rng,
    ) -> [f64; 2] {
        match self {
            Agent::Ddpg(a) => deterministic_policy_action(&a.actor, obs, a.cfg.explore_sigma, mode, rng),
            Agent::Td3(a) => deterministic_policy_action(&a.actor, obs, a.cfg.explore_sigma, mode, rng),
            Agent::Sac(a) => match mode {
                ActionMode::Explore => sac_sample_action(&a.actor, obs, rng).0,
                ActionMode::Exploit => a.exploit_action(obs),
            },
        }
    }

    /// One gradient update. `step_index` drives TD3's delayed policy
    /// updates; DDPG and SAC ignore it.
    pub fn update(
        &mut self,
        batch: &MiniBatch,
        step_index: u64,
        rng: &mut ChaCha8Rng,
    ) -> Result<UpdateDiagnostics> {
        match self {
            Agent::Ddpg(a) => a.update(batch),
            Agent::Td3(a) => a.update(batch, step_index, rng),
            Agent::Sac(a) => a.update(batch, rng),
        }
    }
}

/// Uniform random action in [-1, 1]^2 used to warm the buffer.
pub fn uniform_action(rng: &mut ChaCha8Rng) -> [f64; 2] {
    [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)]
}

fn deterministic_policy_action(
    actor: &Mlp,
    obs: &[f64],
    sigma: f64,
    mode: ActionMode,
    rng: &mut ChaCha8Rng,
) -> [f64; 2] {
    let out = actor.forward_one(obs);
    let mut a = [out[0], out[1]];
    if mode == ActionMode::Explore && sigma > 0.0 {
        for v in a.iter_mut() {
            let n: f64 = rng.sample(StandardNormal);
            *v = (*v + sigma * n).clamp(-1.0, 1.0);
        }
    }
    a
}

/// Standard-normal matrix drawn row-major; the draw order is part of the
/// update contracts.
pub(crate) fn standard_normal_matrix(
    rows: usize,
    cols: usize,
    rng: &mut ChaCha8Rng,
) -> Array2<f64> {
    Array2::from_shape_fn((rows, cols), |_| rng.sample(StandardNormal))
}

pub(crate) fn concat_cols(a: ArrayView2<f64>, b: ArrayView2<f64>) -> Array2<f64> {
    ndarray::concatenate(Axis(1), &[a, b]).expect("column concat")
}

pub(crate) fn elementwise_min(a: &Array1<f64>, b: &Array1<f64>) -> Array1<f64> {
    let mut out = a.clone();
    out.zip_mut_with(b, |x, &y| *x = x.min(y));
    out
}

/// Forward + MSE loss + Adam step for one critic against targets `y`.
/// Returns the loss as minimized (mean squared error over the minibatch).
pub(crate) fn critic_mse_step(
    critic: &mut Mlp,
    opt: &mut crate::nn::AdamState,
    state_actions: &Array2<f64>,
    y: &Array1<f64>,
    lr: f64,
) -> Result<f64> {
    let m = y.len() as f64;
    let (q, cache) = critic.forward_batch(state_actions.view());
    let diff = &q.column(0).to_owned() - y;
    let loss = diff.mapv(|d| d * d).mean().unwrap();
    if !loss.is_finite() {
        return Err(Error::NonFinite(format!("critic loss {loss}")));
    }
    let d_out = diff.mapv(|d| 2.0 * d / m).insert_axis(Axis(1));
    let (grads, _) = critic.backward_batch(&cache, d_out.view());
    crate::nn::adam_step(critic, &grads, opt, lr)?;
    Ok(loss)
}
