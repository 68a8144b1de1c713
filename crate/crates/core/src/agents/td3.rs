//! Twin-critic learner with smoothed, clipped target actions and delayed
//! policy updates.
//!
//! Both critics regress on a shared target built from the minimum of the
//! target critics; the actor (and all targets) move only every
//! `policy_delay` updates, ascending the per-sample minimum of the live
//! critics.

use ndarray::{s, Array1, Array2};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::nn::{adam_step, soft_update, AdamState, Head, Mlp};

use super::{
    concat_cols, critic_mse_step, elementwise_min, standard_normal_matrix, AgentConfig,
    MiniBatch, UpdateDiagnostics, ACTION_DIM,
};

#[derive(Debug, Clone)]
pub struct Td3Agent {
    pub cfg: AgentConfig,
    pub actor: Mlp,
    pub actor_target: Mlp,
    pub critic1: Mlp,
    pub critic2: Mlp,
    pub critic1_target: Mlp,
    pub critic2_target: Mlp,
    pub actor_opt: AdamState,
    pub critic1_opt: AdamState,
    pub critic2_opt: AdamState,
}

impl Td3Agent {
    pub fn new(cfg: AgentConfig, obs_dim: usize, rng: &mut ChaCha8Rng) -> Self {
        let actor = Mlp::new(&cfg.actor_dims(obs_dim, ACTION_DIM), Head::Tanh, 0.01, rng);
        let critic1 = Mlp::new(&cfg.critic_dims(obs_dim), Head::Linear, 1.0, rng);
        let critic2 = Mlp::new(&cfg.critic_dims(obs_dim), Head::Linear, 1.0, rng);
        Td3Agent {
            actor_target: actor.clone(),
            critic1_target: critic1.clone(),
            critic2_target: critic2.clone(),
            actor_opt: AdamState::new(&actor),
            critic1_opt: AdamState::new(&critic1),
            critic2_opt: AdamState::new(&critic2),
            actor,
            critic1,
            critic2,
            cfg,
        }
    }

    /// Raw smoothing noise, N(0, sigma_t^2) per action entry, drawn
    /// row-major. No draws happen when sigma_t is zero, so noise-free TD3
    /// consumes the RNG exactly like DDPG.
    pub fn draw_target_noise(&self, rows: usize, rng: &mut ChaCha8Rng) -> Array2<f64> {
        if self.cfg.target_noise_sigma > 0.0 {
            standard_normal_matrix(rows, ACTION_DIM, rng).mapv(|n| n * self.cfg.target_noise_sigma)
        } else {
            Array2::zeros((rows, ACTION_DIM))
        }
    }

    /// Targets y_i = R_i + gamma * min_k Q_tk(s', clip(pi_t(s') + eps)).
    /// `raw_noise` is clipped to [-c, c] here, and the perturbed action to
    /// [-1, 1]; the bootstrap is dropped on terminals.
    pub fn td_targets(&self, batch: &MiniBatch, raw_noise: &Array2<f64>) -> Array1<f64> {
        let c = self.cfg.target_noise_clip;
        let mut a_next = self.actor_target.infer_batch(batch.next_states.view());
        a_next.zip_mut_with(raw_noise, |a, &n| {
            *a = (*a + n.clamp(-c, c)).clamp(-1.0, 1.0);
        });
        let sa_next = concat_cols(batch.next_states.view(), a_next.view());
        let q1 = self.critic1_target.infer_batch(sa_next.view()).column(0).to_owned();
        let q2 = self.critic2_target.infer_batch(sa_next.view()).column(0).to_owned();
        let q_min = elementwise_min(&q1, &q2);
        &batch.rewards + &(&batch.not_done * &q_min * self.cfg.gamma)
    }

    pub fn update(
        &mut self,
        batch: &MiniBatch,
        step_index: u64,
        rng: &mut ChaCha8Rng,
    ) -> Result<UpdateDiagnostics> {
        let noise = self.draw_target_noise(batch.len(), rng);
        self.update_with_noise(batch, step_index, &noise)
    }

    /// Update with injected smoothing noise (the oracle entry point).
    pub fn update_with_noise(
        &mut self,
        batch: &MiniBatch,
        step_index: u64,
        raw_noise: &Array2<f64>,
    ) -> Result<UpdateDiagnostics> {
        let y = self.td_targets(batch, raw_noise);
        let sa = concat_cols(batch.states.view(), batch.actions.view());
        let l1 = critic_mse_step(&mut self.critic1, &mut self.critic1_opt, &sa, &y, self.cfg.critic_lr)?;
        let l2 = critic_mse_step(&mut self.critic2, &mut self.critic2_opt, &sa, &y, self.cfg.critic_lr)?;

        let mut actor_metric = None;
        if step_index % self.cfg.policy_delay == 0 {
            actor_metric = Some(self.actor_step(batch)?);
            soft_update(&mut self.actor_target, &self.actor, self.cfg.tau)?;
            soft_update(&mut self.critic1_target, &self.critic1, self.cfg.tau)?;
            soft_update(&mut self.critic2_target, &self.critic2, self.cfg.tau)?;
        }

        Ok(UpdateDiagnostics {
            critic_losses: vec![l1, l2],
            actor_metric,
            alpha: None,
            entropy_estimate: None,
        })
    }

    /// Ascends mean min_k Q_k(s, pi(s)). The per-sample minimum routes the
    /// action gradient through whichever critic is active (ties go to
    /// critic 1, which makes the noise-free identical-twin case reduce to
    /// the single-critic update exactly).
    fn actor_step(&mut self, batch: &MiniBatch) -> Result<f64> {
        let m = batch.len() as f64;
        let obs_dim = self.actor.input_dim();
        let (a_pi, actor_cache) = self.actor.forward_batch(batch.states.view());
        let sa_pi = concat_cols(batch.states.view(), a_pi.view());
        let (q1, c1_cache) = self.critic1.forward_batch(sa_pi.view());
        let (q2, c2_cache) = self.critic2.forward_batch(sa_pi.view());

        let rows = batch.len();
        let mut mask1 = Array2::zeros((rows, 1));
        let mut mask2 = Array2::zeros((rows, 1));
        let mut objective = 0.0;
        for i in 0..rows {
            let (v1, v2) = (q1[[i, 0]], q2[[i, 0]]);
            if v1 <= v2 {
                mask1[[i, 0]] = 1.0 / m;
                objective += v1;
            } else {
                mask2[[i, 0]] = 1.0 / m;
                objective += v2;
            }
        }
        objective /= m;
        if !objective.is_finite() {
            return Err(crate::error::Error::NonFinite(format!(
                "actor objective {objective}"
            )));
        }

        let (_, d_in1) = self.critic1.backward_batch(&c1_cache, mask1.view());
        let (_, d_in2) = self.critic2.backward_batch(&c2_cache, mask2.view());
        let d_action = (&d_in1.slice(s![.., obs_dim..]) + &d_in2.slice(s![.., obs_dim..])).mapv(|v| -v);
        let (actor_grads, _) = self.actor.backward_batch(&actor_cache, d_action.view());
        adam_step(&mut self.actor, &actor_grads, &mut self.actor_opt, self.cfg.actor_lr)?;
        Ok(objective)
    }
}
