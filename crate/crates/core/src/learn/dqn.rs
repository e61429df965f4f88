//! Deep Q-network with an optional branching head: the output holds
//! `branches * actions` values and each branch picks one action and gets its
//! own reward. A single branch is the ordinary DQN.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::adam::AdamState;
use super::mlp::{Activation, Mlp};
use super::replay::DiscreteTransition;
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DqnConfig {
    pub obs_dim: usize,
    pub branches: usize,
    pub actions: usize,
    pub hidden: Vec<usize>,
    pub activation: Activation,
    pub lr: f64,
    pub discount: f64,
    pub target_update_rate: f64,
    pub epsilon: f64,
    pub batch_size: usize,
}

impl DqnConfig {
    pub fn new(obs_dim: usize, actions: usize) -> Self {
        Self {
            obs_dim,
            branches: 1,
            actions,
            hidden: vec![64, 64],
            activation: Activation::Tanh,
            lr: 3e-4,
            discount: 0.99,
            target_update_rate: 0.005,
            epsilon: 0.1,
            batch_size: 64,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DqnAgent {
    pub config: DqnConfig,
    q: Mlp,
    target: Mlp,
    opt: AdamState,
}

impl DqnAgent {
    pub fn new<R: Rng + ?Sized>(config: DqnConfig, rng: &mut R) -> Result<Self> {
        if config.branches == 0 || config.actions == 0 {
            return Err(Error::InvalidArgument("DQN needs at least one branch and action".into()));
        }
        let mut sizes = vec![config.obs_dim];
        sizes.extend(&config.hidden);
        sizes.push(config.branches * config.actions);
        let q = Mlp::random(&sizes, config.activation, rng)?;
        Ok(Self {
            opt: AdamState::new(q.n_params(), config.lr),
            target: q.clone(),
            q,
            config,
        })
    }

    pub fn network(&self) -> &Mlp {
        &self.q
    }

    pub fn network_mut(&mut self) -> &mut Mlp {
        &mut self.q
    }

    pub fn target(&self) -> &Mlp {
        &self.target
    }

    pub fn q_values(&self, state: &[f64]) -> Result<Vec<f64>> {
        self.q.forward(state)
    }

    /// Epsilon-greedy choice per branch. `mask[branch * actions + a]`
    /// marks the admissible actions; greedy ties go to the lowest index.
    pub fn select_actions<R: Rng + ?Sized>(
        &self,
        state: &[f64],
        mask: Option<&[bool]>,
        rng: &mut R,
        explore: bool,
    ) -> Result<Vec<usize>> {
        let (nb, na) = (self.config.branches, self.config.actions);
        if let Some(m) = mask {
            if m.len() != nb * na {
                return Err(Error::Shape {
                    context: "DQN action mask",
                    expected: nb * na,
                    actual: m.len(),
                });
            }
        }
        let q = self.q.forward(state)?;
        let mut out = Vec::with_capacity(nb);
        for br in 0..nb {
            let valid: Vec<usize> = (0..na)
                .filter(|&a| mask.is_none_or(|m| m[br * na + a]))
                .collect();
            if valid.is_empty() {
                return Err(Error::InvalidArgument(format!("branch {br} has no valid action")));
            }
            let pick = if explore && rng.random::<f64>() < self.config.epsilon {
                valid[rng.random_range(0..valid.len())]
            } else {
                let mut best = valid[0];
                for &a in &valid[1..] {
                    if q[br * na + a] > q[br * na + best] {
                        best = a;
                    }
                }
                best
            };
            out.push(pick);
        }
        Ok(out)
    }

    /// TD(0) step against the target network, then Polyak tracking.
    pub fn update(&mut self, batch: &[&DiscreteTransition]) -> Result<f64> {
        if batch.is_empty() {
            return Err(Error::InvalidArgument("DQN update needs a non-empty batch".into()));
        }
        let (nb, na) = (self.config.branches, self.config.actions);
        let scale = 1.0 / (batch.len() * nb) as f64;
        let mut grads = vec![0.0; self.q.n_params()];
        let mut loss = 0.0;
        for t in batch {
            if t.actions.len() != nb || t.rewards.len() != nb {
                return Err(Error::Shape {
                    context: "DQN transition branches",
                    expected: nb,
                    actual: t.actions.len().min(t.rewards.len()),
                });
            }
            let next_q = if t.done {
                None
            } else {
                Some(self.target.forward(&t.next_state)?)
            };
            let cache = self.q.forward_cached(&t.state)?;
            let mut g_out = vec![0.0; nb * na];
            for br in 0..nb {
                let a = t.actions[br];
                if a >= na {
                    return Err(Error::InvalidArgument(format!("action {a} out of range")));
                }
                let mut y = t.rewards[br];
                if let Some(nq) = &next_q {
                    let best = nq[br * na..(br + 1) * na]
                        .iter()
                        .copied()
                        .fold(f64::NEG_INFINITY, f64::max);
                    y += self.config.discount * best;
                }
                let err = cache.output()[br * na + a] - y;
                g_out[br * na + a] = err * scale;
                loss += 0.5 * err * err * scale;
            }
            self.q.backward(&cache, &g_out, &mut grads)?;
        }
        if !loss.is_finite() {
            return Err(Error::NonFinite(format!("DQN loss {loss}")));
        }
        self.opt.step(self.q.params_mut(), &grads)?;
        self.target.polyak_from(&self.q, self.config.target_update_rate)?;
        Ok(loss)
    }
}
