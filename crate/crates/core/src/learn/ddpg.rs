//! Deep deterministic policy gradient: deterministic tanh actor, a single
//! critic, target copies of both, Gaussian exploration noise.
//!
//! Uses the same `[obs | prior]` state layout as the SAC agent.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::adam::AdamState;
use super::mlp::{Activation, Mlp};
use super::replay::Transition;
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DdpgConfig {
    pub obs_dim: usize,
    pub action_dim: usize,
    pub prior_dim: usize,
    pub hidden: Vec<usize>,
    pub activation: Activation,
    pub actor_lr: f64,
    pub critic_lr: f64,
    pub discount: f64,
    pub target_update_rate: f64,
    pub noise_std: f64,
    pub batch_size: usize,
}

impl DdpgConfig {
    pub fn new(obs_dim: usize, action_dim: usize) -> Self {
        Self {
            obs_dim,
            action_dim,
            prior_dim: 0,
            hidden: vec![64, 64],
            activation: Activation::Tanh,
            actor_lr: 3e-4,
            critic_lr: 3e-4,
            discount: 0.99,
            target_update_rate: 0.005,
            noise_std: 0.1,
            batch_size: 64,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct DdpgLosses {
    pub critic: f64,
    pub actor: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DdpgAgent {
    pub config: DdpgConfig,
    actor: Mlp,
    critic: Mlp,
    actor_target: Mlp,
    critic_target: Mlp,
    actor_opt: AdamState,
    critic_opt: AdamState,
}

impl DdpgAgent {
    pub fn new<R: Rng + ?Sized>(config: DdpgConfig, rng: &mut R) -> Result<Self> {
        if config.prior_dim > config.action_dim {
            return Err(Error::InvalidArgument("prior_dim exceeds action_dim".into()));
        }
        let mut actor_sizes = vec![config.obs_dim];
        actor_sizes.extend(&config.hidden);
        actor_sizes.push(config.action_dim);
        let mut critic_sizes = vec![config.obs_dim + config.action_dim];
        critic_sizes.extend(&config.hidden);
        critic_sizes.push(1);
        let mut actor = Mlp::random(&actor_sizes, config.activation, rng)?;
        actor.scale_output_layer(0.01);
        let critic = Mlp::random(&critic_sizes, config.activation, rng)?;
        Ok(Self {
            actor_opt: AdamState::new(actor.n_params(), config.actor_lr),
            critic_opt: AdamState::new(critic.n_params(), config.critic_lr),
            actor_target: actor.clone(),
            critic_target: critic.clone(),
            actor,
            critic,
            config,
        })
    }

    pub fn actor(&self) -> &Mlp {
        &self.actor
    }

    pub fn actor_mut(&mut self) -> &mut Mlp {
        &mut self.actor
    }

    pub fn critic(&self) -> &Mlp {
        &self.critic
    }

    fn split<'a>(&self, state: &'a [f64]) -> Result<(&'a [f64], &'a [f64])> {
        let len = self.config.obs_dim + self.config.prior_dim;
        if state.len() != len {
            return Err(Error::Shape {
                context: "DDPG state",
                expected: len,
                actual: state.len(),
            });
        }
        Ok(state.split_at(self.config.obs_dim))
    }

    fn policy(net: &Mlp, obs: &[f64], prior: &[f64]) -> Result<Vec<f64>> {
        let mut pre = net.forward(obs)?;
        for (p, b) in pre.iter_mut().zip(prior) {
            *p += b;
        }
        Ok(pre.into_iter().map(f64::tanh).collect())
    }

    /// Deterministic action, plus clipped Gaussian noise when exploring.
    pub fn select_action<R: Rng + ?Sized>(
        &self,
        state: &[f64],
        rng: &mut R,
        explore: bool,
    ) -> Result<Vec<f64>> {
        let (obs, prior) = self.split(state)?;
        let mut a = Self::policy(&self.actor, obs, prior)?;
        if explore && self.config.noise_std > 0.0 {
            for x in &mut a {
                let n: f64 = StandardNormal.sample(rng);
                *x = (*x + self.config.noise_std * n).clamp(-1.0, 1.0);
            }
        }
        Ok(a)
    }

    pub fn q_value(&self, state: &[f64], action: &[f64]) -> Result<f64> {
        let (obs, _) = self.split(state)?;
        let mut x = obs.to_vec();
        x.extend_from_slice(action);
        Ok(self.critic.forward(&x)?[0])
    }

    pub fn update(&mut self, batch: &[&Transition]) -> Result<DdpgLosses> {
        if batch.is_empty() {
            return Err(Error::InvalidArgument("DDPG update needs a non-empty batch".into()));
        }
        let m = batch.len() as f64;
        let mut losses = DdpgLosses::default();

        let mut critic_grad = vec![0.0; self.critic.n_params()];
        for t in batch {
            let mut y = t.reward;
            if !t.done {
                let (next_obs, next_prior) = self.split(&t.next_state)?;
                let a_next = Self::policy(&self.actor_target, next_obs, next_prior)?;
                let mut x = next_obs.to_vec();
                x.extend(&a_next);
                y += self.config.discount * self.critic_target.forward(&x)?[0];
            }
            let (obs, _) = self.split(&t.state)?;
            let mut x = obs.to_vec();
            x.extend_from_slice(&t.action);
            let cache = self.critic.forward_cached(&x)?;
            let err = cache.output()[0] - y;
            self.critic.backward(&cache, &[err / m], &mut critic_grad)?;
            losses.critic += 0.5 * err * err / m;
        }
        if !losses.critic.is_finite() {
            return Err(Error::NonFinite(format!("DDPG critic loss {}", losses.critic)));
        }
        self.critic_opt.step(self.critic.params_mut(), &critic_grad)?;

        let mut actor_grad = vec![0.0; self.actor.n_params()];
        for t in batch {
            let (obs, prior) = self.split(&t.state)?;
            let cache = self.actor.forward_cached(obs)?;
            let a: Vec<f64> = cache
                .output()
                .iter()
                .enumerate()
                .map(|(i, &z)| (z + prior.get(i).copied().unwrap_or(0.0)).tanh())
                .collect();
            let mut x = obs.to_vec();
            x.extend(&a);
            let c = self.critic.forward_cached(&x)?;
            let dq = self.critic.input_gradient(&c, &[1.0])?;
            let g_out: Vec<f64> = a
                .iter()
                .zip(&dq[self.config.obs_dim..])
                .map(|(ai, dqi)| -dqi * (1.0 - ai * ai) / m)
                .collect();
            self.actor.backward(&cache, &g_out, &mut actor_grad)?;
            losses.actor -= c.output()[0] / m;
        }
        if !losses.actor.is_finite() {
            return Err(Error::NonFinite(format!("DDPG actor loss {}", losses.actor)));
        }
        self.actor_opt.step(self.actor.params_mut(), &actor_grad)?;

        let rate = self.config.target_update_rate;
        self.critic_target.polyak_from(&self.critic, rate)?;
        self.actor_target.polyak_from(&self.actor, rate)?;
        Ok(losses)
    }
}
