//! Discrete-time simulator of a multi-cell OFDMA downlink in which an SDN
//! controller learns, slot by slot, whether resource allocation runs
//! centrally in the baseband pool or locally at each radio site.
//!
//! The per-slot loop is: traffic step, channel draw, mode decision,
//! allocation, metric evaluation, learning updates, record.

pub mod alloc;
pub mod config;
pub mod engine;
pub mod error;
pub mod experiments;
pub mod learn;
pub mod netmodel;
pub mod phy;
pub mod rng;
pub mod sdn;
pub mod validate;

pub use config::{Learner, ScenarioConfig, Scheme};
pub use error::{Error, Result};
pub use netmodel::{ChannelTensor, Topology, UserSet};
pub use engine::{run_episode, run_sweep, run_sweep_grid, Aggregates, Estimate, RunResult, SweepCell, SweepResult, SweepSpec};
pub use phy::{Allocation, BitBudget, ComplexityShape, Mode, TocWeights};
pub use sdn::{ModeDecision, SdnController, SdnMemory, SlotRecord};
