//! Small deep-RL toolkit: dense networks with exact gradients, Adam, replay
//! memory and the SAC, DQN and DDPG learners.

pub mod adam;
pub mod checkpoint;
pub mod ddpg;
pub mod dqn;
pub mod mlp;
pub mod replay;
pub mod sac;

pub use adam::AdamState;
pub use ddpg::{DdpgAgent, DdpgConfig, DdpgLosses};
pub use dqn::{DqnAgent, DqnConfig};
pub use mlp::{Activation, ForwardCache, Mlp};
pub use replay::{DiscreteTransition, ReplayBuffer, Transition};
pub use sac::{SacAgent, SacConfig, SacLosses};
