//! Per-slot resource allocation: action decoding, allocator observations and
//! the learned and analytic allocation policies.
//!
//! A [`Scope`] is the set of cells one allocator acts for: every cell for the
//! centralized allocator, a single cell for each distributed one. Actions are
//! laid out as `[logits | power scores]`, each half indexed
//! `(cell, user slot, subcarrier)`.

use rand::Rng;

use crate::config::{Learner, ScenarioConfig};
use crate::error::{Error, Result};
use crate::learn::{
    DdpgAgent, DdpgConfig, DiscreteTransition, DqnAgent, DqnConfig, ReplayBuffer, SacAgent,
    SacConfig, Transition,
};
use crate::netmodel::{ChannelTensor, Topology, UserSet};
use crate::phy::{intercell_interference_centralized, intercell_interference_distributed};
use crate::phy::{Allocation, Mode};
use crate::rng::SimRng;

/// Softmax sharpness applied to power scores in `[-1, 1]`.
pub const POWER_SHARPNESS: f64 = 1.0;

/// Scale applied to the residual prior before it reaches the actor.
pub const PRIOR_GAIN: f64 = 5.0;

#[derive(Clone, Debug, PartialEq)]
pub struct CellScope {
    pub rrs: usize,
    /// Served users as indices into the slot's `UserSet`, ascending.
    pub users: Vec<usize>,
    /// User slots reserved in the action and observation layouts.
    pub capacity: usize,
    pub p_max: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Scope {
    pub n_rrs: usize,
    pub n_users: usize,
    pub subcarriers: usize,
    pub cells: Vec<CellScope>,
}

impl Scope {
    fn cell_scope(
        topology: &Topology,
        users: &UserSet,
        b: usize,
        capacity: usize,
    ) -> Result<CellScope> {
        let served = users.served_by(b);
        if served.len() > capacity {
            return Err(Error::InvalidArgument(format!(
                "RRS {b} serves {} users but has {capacity} slots",
                served.len()
            )));
        }
        Ok(CellScope {
            rrs: b,
            users: served,
            capacity,
            p_max: topology.rrs[b].p_max,
        })
    }

    /// All cells, with `capacities[b]` user slots for RRS `b`.
    pub fn centralized(topology: &Topology, users: &UserSet, capacities: &[usize]) -> Result<Self> {
        if capacities.len() != topology.n_rrs() {
            return Err(Error::Shape {
                context: "per-RRS capacities",
                expected: topology.n_rrs(),
                actual: capacities.len(),
            });
        }
        let cells = (0..topology.n_rrs())
            .map(|b| Self::cell_scope(topology, users, b, capacities[b]))
            .collect::<Result<_>>()?;
        Ok(Self {
            n_rrs: topology.n_rrs(),
            n_users: users.len(),
            subcarriers: topology.subcarriers,
            cells,
        })
    }

    /// RRS `b` alone.
    pub fn distributed(topology: &Topology, users: &UserSet, b: usize, capacity: usize) -> Result<Self> {
        Ok(Self {
            n_rrs: topology.n_rrs(),
            n_users: users.len(),
            subcarriers: topology.subcarriers,
            cells: vec![Self::cell_scope(topology, users, b, capacity)?],
        })
    }

    /// Number of `(cell, slot, subcarrier)` entries; half the action size.
    pub fn slot_entries(&self) -> usize {
        self.cells.iter().map(|c| c.capacity).sum::<usize>() * self.subcarriers
    }

    /// Feature length of this scope's observations in `mode`.
    pub fn feature_len(&self, mode: Mode) -> usize {
        match mode {
            Mode::Centralized => self.n_rrs * self.slot_entries(),
            Mode::Distributed => self.slot_entries(),
        }
    }

    pub fn action_dim(&self) -> usize {
        2 * self.slot_entries()
    }

    /// Number of `(cell, subcarrier)` pairs.
    pub fn pairs(&self) -> usize {
        self.cells.len() * self.subcarriers
    }

    fn offsets(&self) -> Vec<usize> {
        let mut off = 0;
        self.cells
            .iter()
            .map(|c| {
                let o = off;
                off += c.capacity * self.subcarriers;
                o
            })
            .collect()
    }

    pub fn empty_allocation(&self, mode: Mode) -> Allocation {
        Allocation::zeros(mode, self.n_rrs, self.n_users, self.subcarriers)
    }
}

/// Decodes a raw action into `alloc`. Per (cell, subcarrier) the served user
/// with the largest logit wins (ties to the lowest user); the cell's full
/// power is split over its assigned pairs by a softmax of the power scores.
pub fn decode_action(raw: &[f64], scope: &Scope, alloc: &mut Allocation) -> Result<()> {
    if raw.len() != scope.action_dim() {
        return Err(Error::Shape {
            context: "allocation action",
            expected: scope.action_dim(),
            actual: raw.len(),
        });
    }
    if raw.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("allocation action".into()));
    }
    let n_k = scope.subcarriers;
    let half = scope.slot_entries();
    for (cell, off) in scope.cells.iter().zip(scope.offsets()) {
        if cell.users.is_empty() {
            continue;
        }
        let mut chosen = Vec::with_capacity(n_k);
        for k in 0..n_k {
            let mut best = 0;
            for s in 1..cell.users.len() {
                if raw[off + s * n_k + k] > raw[off + best * n_k + k] {
                    best = s;
                }
            }
            chosen.push(best);
        }
        let scores: Vec<f64> = chosen
            .iter()
            .enumerate()
            .map(|(k, &s)| POWER_SHARPNESS * raw[half + off + s * n_k + k])
            .collect();
        let top = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let weights: Vec<f64> = scores.iter().map(|s| (s - top).exp()).collect();
        let total: f64 = weights.iter().sum();
        for (k, (&s, w)) in chosen.iter().zip(&weights).enumerate() {
            alloc.assign(cell.rrs, cell.users[s], k, cell.p_max * w / total);
        }
    }
    Ok(())
}

/// Round-robin subcarriers over each cell's users with the power split
/// equally over the assigned pairs.
pub fn allocate_equal_power(scope: &Scope, mode: Mode) -> Allocation {
    let mut alloc = scope.empty_allocation(mode);
    equal_power_into(scope, &mut alloc);
    alloc
}

fn equal_power_into(scope: &Scope, alloc: &mut Allocation) {
    for cell in &scope.cells {
        if cell.users.is_empty() {
            continue;
        }
        let p = cell.p_max / scope.subcarriers as f64;
        for k in 0..scope.subcarriers {
            alloc.assign(cell.rrs, cell.users[k % cell.users.len()], k, p);
        }
    }
}

/// Input to an allocator: network features and the residual prior added to
/// the actor's logits.
#[derive(Clone, Debug, PartialEq)]
pub struct AllocObservation {
    pub mode: Mode,
    pub features: Vec<f64>,
    pub prior: Vec<f64>,
}

impl AllocObservation {
    /// `[features | prior]`, the state layout of the actor-critic agents.
    pub fn state(&self) -> Vec<f64> {
        let mut s = Vec::with_capacity(self.features.len() + self.prior.len());
        s.extend_from_slice(&self.features);
        s.extend_from_slice(&self.prior);
        s
    }
}

/// Shifts and scales the entries flagged in `present` to zero mean and unit
/// variance; other entries are left at zero.
fn standardize(values: &mut [f64], present: &[bool]) {
    let n = present.iter().filter(|&&p| p).count();
    if n == 0 {
        return;
    }
    let mean = values
        .iter()
        .zip(present)
        .filter(|(_, &p)| p)
        .map(|(v, _)| v)
        .sum::<f64>()
        / n as f64;
    let var = values
        .iter()
        .zip(present)
        .filter(|(_, &p)| p)
        .map(|(v, _)| (v - mean).powi(2))
        .sum::<f64>()
        / n as f64;
    let scale = if var.sqrt() > 1e-12 { 1.0 / var.sqrt() } else { 1.0 };
    for (v, &p) in values.iter_mut().zip(present) {
        *v = if p { (*v - mean) * scale } else { 0.0 };
    }
}

/// Fills a `(cell, slot, k)` vector with `f(cell, user, k)`, zero-padding
/// unused slots, then standardizes.
fn per_slot_vector(scope: &Scope, mut f: impl FnMut(&CellScope, usize, usize) -> f64) -> Vec<f64> {
    let n_k = scope.subcarriers;
    let mut values = vec![0.0; scope.slot_entries()];
    let mut present = vec![false; values.len()];
    for (cell, off) in scope.cells.iter().zip(scope.offsets()) {
        for (s, &u) in cell.users.iter().enumerate() {
            for k in 0..n_k {
                values[off + s * n_k + k] = f(cell, u, k);
                present[off + s * n_k + k] = true;
            }
        }
    }
    standardize(&mut values, &present);
    values
}

/// Global observation at the baseband pool: log channel gains from every
/// RRS to every user slot of the scope, and a prior from the SINR each user
/// would see if the other occupied cells spread their power evenly.
pub fn observe_centralized(channels: &ChannelTensor, scope: &Scope, noise: f64) -> AllocObservation {
    let n_k = scope.subcarriers;
    let per_b = scope.slot_entries();
    let mut features = vec![0.0; scope.n_rrs * per_b];
    let mut present = vec![false; features.len()];
    for bp in 0..scope.n_rrs {
        for (cell, off) in scope.cells.iter().zip(scope.offsets()) {
            for (s, &u) in cell.users.iter().enumerate() {
                for k in 0..n_k {
                    let i = bp * per_b + off + s * n_k + k;
                    features[i] = (channels.gain(bp, u, k) / noise).ln();
                    present[i] = true;
                }
            }
        }
    }
    standardize(&mut features, &present);

    let occupied: Vec<bool> = {
        let mut occ = vec![false; scope.n_rrs];
        for c in &scope.cells {
            occ[c.rrs] = !c.users.is_empty();
        }
        occ
    };
    let p_equal: Vec<f64> = {
        let mut p = vec![0.0; scope.n_rrs];
        for c in &scope.cells {
            p[c.rrs] = c.p_max / n_k as f64;
        }
        p
    };
    let mut prior = per_slot_vector(scope, |cell, u, k| {
        let mut interference = 0.0;
        for bp in (0..scope.n_rrs).filter(|&bp| bp != cell.rrs && occupied[bp]) {
            interference += channels.gain(bp, u, k) * p_equal[bp];
        }
        (channels.gain(cell.rrs, u, k) / (noise + interference)).ln()
    });
    for p in &mut prior {
        *p *= PRIOR_GAIN;
    }
    AllocObservation {
        mode: Mode::Centralized,
        features,
        prior,
    }
}

/// Local observation of a single-cell scope: log of each served user's gain
/// over noise plus the worst-case interference bound. Doubles as the prior.
pub fn observe_distributed(
    channels: &ChannelTensor,
    topology: &Topology,
    user_counts: &[usize],
    scope: &Scope,
    noise: f64,
) -> AllocObservation {
    let features = per_slot_vector(scope, |cell, u, k| {
        let i = intercell_interference_distributed(channels, topology, user_counts, cell.rrs, u);
        (channels.gain(cell.rrs, u, k) / (noise + i)).ln()
    });
    AllocObservation {
        mode: Mode::Distributed,
        prior: features.iter().map(|x| x * PRIOR_GAIN).collect(),
        features,
    }
}

/// Decodes one SAC action over the whole network.
pub fn allocate_centralized<R: Rng + ?Sized>(
    agent: &SacAgent,
    obs: &AllocObservation,
    scope: &Scope,
    rng: &mut R,
    deterministic: bool,
) -> Result<Allocation> {
    if obs.mode != Mode::Centralized {
        return Err(Error::InvalidArgument("centralized allocator given a local observation".into()));
    }
    let raw = agent.select_action(&obs.state(), rng, deterministic)?;
    let mut alloc = scope.empty_allocation(Mode::Centralized);
    decode_action(&raw, scope, &mut alloc)?;
    Ok(alloc)
}

/// Each RRS decodes its own fragment from its own observation and RNG.
pub fn allocate_distributed(
    agents: &[&SacAgent],
    observations: &[AllocObservation],
    scopes: &[Scope],
    rngs: &mut [SimRng],
    deterministic: bool,
) -> Result<Allocation> {
    let n = agents.len();
    if observations.len() != n || scopes.len() != n || rngs.len() != n {
        return Err(Error::InvalidArgument(format!(
            "{n} agents but {} observations, {} scopes, {} RNGs",
            observations.len(),
            scopes.len(),
            rngs.len()
        )));
    }
    let Some(first) = scopes.first() else {
        return Err(Error::InvalidArgument("no distributed agents".into()));
    };
    let mut alloc = Allocation::zeros(Mode::Distributed, first.n_rrs, first.n_users, first.subcarriers);
    for (((agent, obs), scope), rng) in agents.iter().zip(observations).zip(scopes).zip(rngs) {
        let raw = agent.select_action(&obs.state(), rng, deterministic)?;
        decode_action(&raw, scope, &mut alloc)?;
    }
    Ok(alloc)
}

/// `log2(1 + SINR)` of every (RRS, subcarrier) pair under the actual
/// interference of `alloc`, indexed `b * K + k`.
pub fn pair_rates_centralized(channels: &ChannelTensor, alloc: &Allocation, noise: f64) -> Vec<f64> {
    let mut rates = vec![0.0; alloc.n_rrs * alloc.n_sub];
    for b in 0..alloc.n_rrs {
        for k in 0..alloc.n_sub {
            for u in 0..alloc.n_users {
                let p = alloc.tx(b, u, k);
                if p > 0.0 {
                    let i = intercell_interference_centralized(channels, alloc, b, u, k);
                    rates[b * alloc.n_sub + k] += (1.0 + channels.gain(b, u, k) * p / (noise + i)).log2();
                }
            }
        }
    }
    rates
}

/// As [`pair_rates_centralized`] with the worst-case interference bound.
pub fn pair_rates_distributed(
    channels: &ChannelTensor,
    alloc: &Allocation,
    topology: &Topology,
    users: &UserSet,
    noise: f64,
) -> Vec<f64> {
    let counts = users.counts();
    let mut rates = vec![0.0; alloc.n_rrs * alloc.n_sub];
    for b in 0..alloc.n_rrs {
        for u in users.served_by(b) {
            let i = intercell_interference_distributed(channels, topology, &counts, b, u);
            for k in 0..alloc.n_sub {
                let p = alloc.tx(b, u, k);
                if p > 0.0 {
                    rates[b * alloc.n_sub + k] += (1.0 + channels.gain(b, u, k) * p / (noise + i)).log2();
                }
            }
        }
    }
    rates
}

#[derive(Clone, Debug)]
enum Policy {
    Sac(Box<SacAgent>),
    Ddpg(Box<DdpgAgent>),
    Dqn(Box<DqnAgent>),
    EqualPower,
}

#[derive(Clone, Debug)]
enum RawAction {
    Continuous(Vec<f64>),
    Discrete(Vec<usize>),
}

/// A learning allocator bound to one scope layout: policy, replay memory,
/// private RNG and the transition awaiting its reward. Every slot is a
/// one-step episode.
#[derive(Clone, Debug)]
pub struct ScopeLearner {
    policy: Policy,
    continuous: ReplayBuffer<Transition>,
    discrete: ReplayBuffer<DiscreteTransition>,
    rng: SimRng,
    batch_size: usize,
    pending: Option<(Vec<f64>, RawAction)>,
    updates: u64,
}

impl ScopeLearner {
    /// Builds the learner for `scope`'s layout and observation mode.
    pub fn new(
        learner: Learner,
        scope: &Scope,
        mode: Mode,
        config: &ScenarioConfig,
        mut rng: SimRng,
    ) -> Result<Self> {
        let obs_dim = scope.feature_len(mode);
        let entries = scope.slot_entries();
        let policy = match learner {
            Learner::Sac => {
                let mut c = SacConfig::new(obs_dim, 2 * entries);
                c.prior_dim = entries;
                c.hidden = config.hidden_layers.clone();
                c.lr = config.learning_rate;
                c.discount = config.discount;
                c.target_update_rate = config.target_update_rate;
                c.init_temperature = config.init_temperature;
                c.batch_size = config.batch_size;
                Policy::Sac(Box::new(SacAgent::new(c, &mut rng)?))
            }
            Learner::Ddpg => {
                let mut c = DdpgConfig::new(obs_dim, 2 * entries);
                c.prior_dim = entries;
                c.hidden = config.hidden_layers.clone();
                c.actor_lr = config.learning_rate;
                c.critic_lr = config.learning_rate;
                c.discount = config.discount;
                c.target_update_rate = config.target_update_rate;
                c.noise_std = config.ddpg_noise;
                c.batch_size = config.batch_size;
                Policy::Ddpg(Box::new(DdpgAgent::new(c, &mut rng)?))
            }
            Learner::Dqn => {
                let actions = scope.cells.iter().map(|c| c.capacity).max().unwrap_or(1).max(1);
                let mut c = DqnConfig::new(obs_dim + entries, actions);
                c.branches = scope.pairs();
                c.hidden = config.hidden_layers.clone();
                c.lr = config.learning_rate;
                c.discount = config.discount;
                c.target_update_rate = config.target_update_rate;
                c.epsilon = config.dqn_epsilon;
                c.batch_size = config.batch_size;
                Policy::Dqn(Box::new(DqnAgent::new(c, &mut rng)?))
            }
        };
        let capacity = config.buffer_capacity.max(1);
        Ok(Self {
            policy,
            continuous: ReplayBuffer::new(capacity),
            discrete: ReplayBuffer::new(capacity),
            rng,
            batch_size: config.batch_size.max(1),
            pending: None,
            updates: 0,
        })
    }

    /// The analytic round-robin, equal-power allocator.
    pub fn equal_power(rng: SimRng) -> Self {
        Self {
            policy: Policy::EqualPower,
            continuous: ReplayBuffer::new(1),
            discrete: ReplayBuffer::new(1),
            rng,
            batch_size: 1,
            pending: None,
            updates: 0,
        }
    }

    pub fn sac(&self) -> Option<&SacAgent> {
        match &self.policy {
            Policy::Sac(a) => Some(a),
            _ => None,
        }
    }

    pub fn sac_mut(&mut self) -> Option<&mut SacAgent> {
        match &mut self.policy {
            Policy::Sac(a) => Some(a),
            _ => None,
        }
    }

    pub fn updates(&self) -> u64 {
        self.updates
    }

    pub fn buffered(&self) -> usize {
        self.continuous.len() + self.discrete.len()
    }

    /// Chooses and decodes an action for `scope` into `alloc`. With
    /// `explore` the policy samples and the step is kept for [`Self::learn`].
    pub fn act(
        &mut self,
        obs: &AllocObservation,
        scope: &Scope,
        explore: bool,
        alloc: &mut Allocation,
    ) -> Result<()> {
        self.pending = None;
        if scope.cells.iter().all(|c| c.users.is_empty()) {
            return Ok(());
        }
        let state = obs.state();
        let raw = match &self.policy {
            Policy::EqualPower => {
                equal_power_into(scope, alloc);
                return Ok(());
            }
            Policy::Sac(agent) => {
                RawAction::Continuous(agent.select_action(&state, &mut self.rng, !explore)?)
            }
            Policy::Ddpg(agent) => {
                RawAction::Continuous(agent.select_action(&state, &mut self.rng, explore)?)
            }
            Policy::Dqn(agent) => {
                let na = agent.config.actions;
                let mut mask = vec![false; scope.pairs() * na];
                for (c, cell) in scope.cells.iter().enumerate() {
                    let valid = cell.users.len().max(1);
                    for k in 0..scope.subcarriers {
                        let br = c * scope.subcarriers + k;
                        mask[br * na..br * na + valid].fill(true);
                    }
                }
                RawAction::Discrete(agent.select_actions(&state, Some(&mask), &mut self.rng, explore)?)
            }
        };
        match &raw {
            RawAction::Continuous(a) => decode_action(a, scope, alloc)?,
            RawAction::Discrete(choice) => {
                for (c, cell) in scope.cells.iter().enumerate() {
                    if cell.users.is_empty() {
                        continue;
                    }
                    let p = cell.p_max / scope.subcarriers as f64;
                    for k in 0..scope.subcarriers {
                        let s = choice[c * scope.subcarriers + k];
                        alloc.assign(cell.rrs, cell.users[s], k, p);
                    }
                }
            }
        }
        if explore {
            self.pending = Some((state, raw));
        }
        Ok(())
    }

    /// Rewards the last exploratory action with the per-pair rates of its
    /// scope (`pair_rates[b * K + k]`, whole network) and runs one update
    /// once a batch is available.
    pub fn learn(&mut self, scope: &Scope, pair_rates: &[f64]) -> Result<()> {
        let Some((state, raw)) = self.pending.take() else {
            return Ok(());
        };
        let n_k = scope.subcarriers;
        let rewards: Vec<f64> = scope
            .cells
            .iter()
            .flat_map(|c| pair_rates[c.rrs * n_k..(c.rrs + 1) * n_k].iter().copied())
            .collect();
        match raw {
            RawAction::Continuous(action) => {
                let reward = rewards.iter().sum::<f64>() / rewards.len().max(1) as f64;
                self.continuous.push(Transition {
                    state,
                    action,
                    reward,
                    next_state: Vec::new(),
                    done: true,
                });
                if self.continuous.len() >= self.batch_size {
                    let batch = self.continuous.sample(self.batch_size, &mut self.rng);
                    match &mut self.policy {
                        Policy::Sac(agent) => {
                            agent.update(&batch, &mut self.rng)?;
                        }
                        Policy::Ddpg(agent) => {
                            agent.update(&batch)?;
                        }
                        _ => unreachable!("continuous action from a discrete policy"),
                    }
                    self.updates += 1;
                }
            }
            RawAction::Discrete(actions) => {
                self.discrete.push(DiscreteTransition {
                    state,
                    actions,
                    rewards,
                    next_state: Vec::new(),
                    done: true,
                });
                if self.discrete.len() >= self.batch_size {
                    let batch = self.discrete.sample(self.batch_size, &mut self.rng);
                    if let Policy::Dqn(agent) = &mut self.policy {
                        agent.update(&batch)?;
                    }
                    self.updates += 1;
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netmodel::{Point, Rrs};

    fn topo(n_rrs: usize, k: usize) -> Topology {
        Topology {
            area_radius: 100.0,
            rrs: (0..n_rrs)
                .map(|b| Rrs {
                    position: Point::new(b as f64 * 50.0, 0.0),
                    cell_radius: 25.0,
                    p_max: 1.0,
                })
                .collect(),
            subcarriers: k,
            subcarrier_bandwidth: 1.0,
        }
    }

    fn users(serving: &[usize], n_rrs: usize) -> UserSet {
        UserSet {
            users: serving
                .iter()
                .enumerate()
                .map(|(i, &b)| crate::netmodel::User {
                    id: i as u64,
                    position: Point::new(0.0, 0.0),
                    serving: b,
                })
                .collect(),
            n_rrs,
            next_id: serving.len() as u64,
        }
    }

    #[test]
    fn equal_logits_pick_lowest_user() {
        let t = topo(1, 3);
        let us = users(&[0, 0], 1);
        let scope = Scope::centralized(&t, &us, &[2]).unwrap();
        let mut alloc = scope.empty_allocation(Mode::Centralized);
        decode_action(&[0.5; 12], &scope, &mut alloc).unwrap();
        for k in 0..3 {
            assert!(alloc.rho(0, 0, k));
            assert!(!alloc.rho(0, 1, k));
            assert!((alloc.power(0, 0, k) - 1.0 / 3.0).abs() < 1e-15);
        }
    }

    #[test]
    fn single_pair_gets_full_power() {
        let t = topo(1, 1);
        let us = users(&[0], 1);
        let scope = Scope::centralized(&t, &us, &[1]).unwrap();
        let mut alloc = scope.empty_allocation(Mode::Centralized);
        decode_action(&[-0.3, 0.9], &scope, &mut alloc).unwrap();
        assert_eq!(alloc.power(0, 0, 0), 1.0);
    }

    #[test]
    fn padded_slots_are_never_chosen() {
        let t = topo(1, 2);
        let us = users(&[0], 1);
        let scope = Scope::centralized(&t, &us, &[3]).unwrap();
        let mut raw = vec![-1.0; scope.action_dim()];
        raw[2 * 2] = 1.0; // slot 2, k = 0: padding
        let mut alloc = scope.empty_allocation(Mode::Centralized);
        decode_action(&raw, &scope, &mut alloc).unwrap();
        assert!(alloc.rho(0, 0, 0) && alloc.rho(0, 0, 1));
    }

    #[test]
    fn wrong_length_is_rejected() {
        let t = topo(1, 2);
        let us = users(&[0], 1);
        let scope = Scope::centralized(&t, &us, &[1]).unwrap();
        let mut alloc = scope.empty_allocation(Mode::Centralized);
        assert!(decode_action(&[0.0; 3], &scope, &mut alloc).is_err());
    }

    #[test]
    fn equal_power_round_robin() {
        let t = topo(1, 4);
        let us = users(&[0, 0], 1);
        let scope = Scope::centralized(&t, &us, &[2]).unwrap();
        let a = allocate_equal_power(&scope, Mode::Centralized);
        for k in 0..4 {
            assert!(a.rho(0, k % 2, k));
            assert_eq!(a.power(0, k % 2, k), 0.25);
        }
    }

    #[test]
    fn standardize_ignores_padding() {
        let mut v = [1.0, 3.0, 7.0];
        standardize(&mut v, &[true, true, false]);
        assert_eq!(v, [-1.0, 1.0, 0.0]);
    }
}
