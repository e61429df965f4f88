//! Shared fixtures for the benchmarks.

use softran::netmodel::{generate_topology, sample_channels, spawn_users, PathLossModel};
use softran::{Allocation, ChannelTensor, Mode, ScenarioConfig, Topology, UserSet};

pub struct Slot {
    pub config: ScenarioConfig,
    pub topology: Topology,
    pub users: UserSet,
    pub channels: ChannelTensor,
    pub centralized: Allocation,
    pub distributed: Allocation,
}

/// One slot of the given scenario with a round-robin equal-power allocation.
pub fn slot(config: ScenarioConfig, n_users: usize) -> Slot {
    let topology = generate_topology(&config, 1).unwrap();
    let pathloss = PathLossModel::from_config(&config);
    let users = spawn_users(&topology, &pathloss, n_users, 1);
    let channels = sample_channels(&topology, &users, &pathloss, 1, 0);
    let k = config.subcarriers;
    let alloc = |mode| {
        let mut a = Allocation::zeros(mode, config.n_rrs, users.len(), k);
        for (b, rrs) in topology.rrs.iter().enumerate() {
            let served: Vec<usize> = (0..users.len()).filter(|&u| users.users[u].serving == b).collect();
            for kk in 0..k {
                if let Some(&u) = served.get(kk % served.len().max(1)) {
                    a.assign(b, u, kk, rrs.p_max / k as f64);
                }
            }
        }
        a
    };
    Slot {
        centralized: alloc(Mode::Centralized),
        distributed: alloc(Mode::Distributed),
        config,
        topology,
        users,
        channels,
    }
}
