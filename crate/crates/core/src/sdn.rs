//! The SDN controller: a D-slot memory of per-slot metrics, the state built
//! from it, the per-slot centralized/distributed decision and its TOC reward.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::learn::{ReplayBuffer, SacAgent, SacConfig, Transition};
use crate::phy::{toc_centralized, toc_distributed, Mode, TocWeights};
use crate::rng::SimRng;

/// Per-slot features stored for each remembered slot.
pub const FEATURES_PER_SLOT: usize = 6;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SlotRecord {
    pub slot: u64,
    /// Rates in bits/s.
    pub r_cnt: f64,
    pub r_dst: f64,
    /// Overheads in bits.
    pub tau_cnt: u64,
    pub tau_dst: Vec<u64>,
    pub gamma_cnt: u64,
    pub gamma_dst: Vec<u64>,
    pub toc_cnt: f64,
    pub toc_dst: f64,
    pub executed: Mode,
    pub user_counts: Vec<usize>,
}

impl SlotRecord {
    pub fn max_tau_dst(&self) -> u64 {
        self.tau_dst.iter().copied().max().unwrap_or(0)
    }

    pub fn max_gamma_dst(&self) -> u64 {
        self.gamma_dst.iter().copied().max().unwrap_or(0)
    }

    pub fn executed_rate(&self) -> f64 {
        match self.executed {
            Mode::Centralized => self.r_cnt,
            Mode::Distributed => self.r_dst,
        }
    }

    pub fn executed_toc(&self) -> f64 {
        match self.executed {
            Mode::Centralized => self.toc_cnt,
            Mode::Distributed => self.toc_dst,
        }
    }

    pub fn executed_tau(&self) -> u64 {
        match self.executed {
            Mode::Centralized => self.tau_cnt,
            Mode::Distributed => self.max_tau_dst(),
        }
    }

    pub fn executed_gamma(&self) -> u64 {
        match self.executed {
            Mode::Centralized => self.gamma_cnt,
            Mode::Distributed => self.max_gamma_dst(),
        }
    }

    fn features(&self) -> [f64; FEATURES_PER_SLOT] {
        [
            self.r_cnt,
            self.r_dst,
            self.tau_cnt as f64,
            self.max_tau_dst() as f64,
            self.gamma_cnt as f64,
            self.max_gamma_dst() as f64,
        ]
    }

    /// Recomputes both TOC values from the raw fields.
    pub fn recompute_toc(&self, w: &TocWeights) -> Result<(f64, f64)> {
        Ok((
            toc_centralized(self.r_cnt, self.tau_cnt, self.gamma_cnt, w),
            toc_distributed(self.r_dst, &self.tau_dst, &self.gamma_dst, w)?,
        ))
    }
}

/// FIFO of the last `capacity` slot records plus the current per-RRS user
/// counts.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SdnMemory {
    capacity: usize,
    records: VecDeque<SlotRecord>,
    pub user_counts: Vec<usize>,
}

impl SdnMemory {
    pub fn new(capacity: usize, n_rrs: usize) -> Self {
        Self {
            capacity,
            records: VecDeque::with_capacity(capacity),
            user_counts: vec![0; n_rrs],
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn n_rrs(&self) -> usize {
        self.user_counts.len()
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Oldest first.
    pub fn records(&self) -> impl DoubleEndedIterator<Item = &SlotRecord> {
        self.records.iter()
    }

    pub fn state_len(&self) -> usize {
        FEATURES_PER_SLOT * self.capacity + self.n_rrs()
    }
}

/// Pushes `record`, evicting the oldest beyond capacity, and refreshes the
/// traffic summary from the record's user counts.
pub fn record_slot(memory: &mut SdnMemory, record: SlotRecord) {
    if memory.capacity == 0 {
        return;
    }
    if memory.records.len() == memory.capacity {
        memory.records.pop_front();
    }
    if record.user_counts.len() == memory.user_counts.len() {
        memory.user_counts.clone_from(&record.user_counts);
    }
    memory.records.push_back(record);
}

/// Welford running mean and variance, optionally frozen.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RunningStat {
    count: u64,
    mean: f64,
    m2: f64,
    frozen: bool,
}

impl RunningStat {
    pub fn push(&mut self, x: f64) {
        if self.frozen || !x.is_finite() {
            return;
        }
        self.count += 1;
        let d = x - self.mean;
        self.mean += d / self.count as f64;
        self.m2 += d * (x - self.mean);
    }

    pub fn freeze(&mut self) {
        self.frozen = true;
    }

    pub fn is_frozen(&self) -> bool {
        self.frozen
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    pub fn std(&self) -> f64 {
        if self.count < 2 {
            0.0
        } else {
            (self.m2 / self.count as f64).sqrt()
        }
    }

    pub fn normalize(&self, x: f64) -> f64 {
        if self.count == 0 {
            return x;
        }
        let s = self.std();
        if s > 1e-12 {
            (x - self.mean) / s
        } else {
            x - self.mean
        }
    }
}

/// Feature scaling for the SDN state: one statistic per per-slot feature
/// and one shared by all user counts.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct StateNormalizer {
    pub features: [RunningStat; FEATURES_PER_SLOT],
    pub users: RunningStat,
}

impl StateNormalizer {
    pub fn observe(&mut self, record: &SlotRecord) {
        for (s, x) in self.features.iter_mut().zip(record.features()) {
            s.push(x);
        }
        for &c in &record.user_counts {
            self.users.push(c as f64);
        }
    }

    pub fn freeze(&mut self) {
        for s in &mut self.features {
            s.freeze();
        }
        self.users.freeze();
    }
}

/// Fixed-length state of length `6 * D + B`: newest slot first, missing
/// slots zero, followed by the per-RRS user counts.
pub fn build_sdn_state(memory: &SdnMemory, normalizer: &StateNormalizer) -> Vec<f64> {
    let mut state = vec![0.0; memory.state_len()];
    for (i, rec) in memory.records.iter().rev().enumerate() {
        for (j, (x, stat)) in rec.features().iter().zip(&normalizer.features).enumerate() {
            state[i * FEATURES_PER_SLOT + j] = stat.normalize(*x);
        }
    }
    let base = FEATURES_PER_SLOT * memory.capacity;
    if !memory.records.is_empty() {
        for (b, &c) in memory.user_counts.iter().enumerate() {
            state[base + b] = normalizer.users.normalize(c as f64);
        }
    }
    state
}

/// Exclusive one-hot mode choice.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModeDecision {
    pub x_cnt: u8,
    pub x_dst: u8,
}

impl ModeDecision {
    pub fn from_mode(mode: Mode) -> Self {
        match mode {
            Mode::Centralized => Self { x_cnt: 1, x_dst: 0 },
            Mode::Distributed => Self { x_cnt: 0, x_dst: 1 },
        }
    }

    /// Non-negative actions select centralized operation.
    pub fn from_action(a: f64) -> Self {
        Self::from_mode(if a >= 0.0 { Mode::Centralized } else { Mode::Distributed })
    }

    pub fn mode(self) -> Mode {
        if self.x_cnt == 1 {
            Mode::Centralized
        } else {
            Mode::Distributed
        }
    }

    pub fn is_exclusive(self) -> bool {
        self.x_cnt + self.x_dst == 1 && self.x_cnt <= 1 && self.x_dst <= 1
    }
}

/// Runs the SDN actor on `state` and thresholds its scalar action.
pub fn decide_mode(
    agent: &SacAgent,
    state: &[f64],
    rng: &mut SimRng,
    deterministic: bool,
) -> Result<(ModeDecision, f64)> {
    let a = agent.select_action(state, rng, deterministic)?[0];
    Ok((ModeDecision::from_action(a), a))
}

/// TOC of the executed mode.
pub fn sdn_reward(record: &SlotRecord) -> Result<f64> {
    let incomplete = |m: &str| Err(Error::InvalidArgument(format!("incomplete slot record: {m}")));
    if record.tau_dst.is_empty() || record.gamma_dst.is_empty() {
        return incomplete("missing per-RRS overheads");
    }
    if record.tau_dst.len() != record.gamma_dst.len() {
        return incomplete("per-RRS vectors differ in length");
    }
    let r = record.executed_toc();
    if !r.is_finite() {
        return incomplete("non-finite TOC");
    }
    Ok(r)
}

/// Hyperparameters of the SDN learner.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SdnSettings {
    pub memory_slots: usize,
    pub n_rrs: usize,
    pub hidden: Vec<usize>,
    pub lr: f64,
    pub discount: f64,
    pub target_update_rate: f64,
    pub init_temperature: f64,
    pub batch_size: usize,
    pub buffer_capacity: usize,
    /// Records observed before the normalizers freeze.
    pub warmup: usize,
}

impl SdnSettings {
    pub fn from_config(config: &crate::config::ScenarioConfig) -> Self {
        Self {
            memory_slots: config.memory_slots,
            n_rrs: config.n_rrs,
            hidden: config.hidden_layers.clone(),
            lr: config.learning_rate,
            discount: config.sdn_discount,
            target_update_rate: config.target_update_rate,
            init_temperature: config.init_temperature,
            batch_size: config.batch_size.max(1),
            buffer_capacity: config.buffer_capacity.max(1),
            warmup: config.batch_size.max(1),
        }
    }
}

/// SAC agent, D-slot memory, replay buffer and normalizers of the SDN
/// controller. The decision process is continuing: transitions never end.
#[derive(Clone, Debug)]
pub struct SdnController {
    pub agent: SacAgent,
    pub memory: SdnMemory,
    pub buffer: ReplayBuffer<Transition>,
    pub normalizer: StateNormalizer,
    pub reward_stat: RunningStat,
    rng: SimRng,
    settings: SdnSettings,
    pending: Option<(Vec<f64>, f64)>,
    observed: usize,
}

impl SdnController {
    pub fn new(settings: SdnSettings, mut rng: SimRng) -> Result<Self> {
        let memory = SdnMemory::new(settings.memory_slots, settings.n_rrs);
        let mut c = SacConfig::new(memory.state_len(), 1);
        c.hidden = settings.hidden.clone();
        c.lr = settings.lr;
        c.discount = settings.discount;
        c.target_update_rate = settings.target_update_rate;
        c.init_temperature = settings.init_temperature;
        c.batch_size = settings.batch_size;
        let agent = SacAgent::new(c, &mut rng)?;
        Ok(Self {
            agent,
            buffer: ReplayBuffer::new(settings.buffer_capacity),
            memory,
            normalizer: StateNormalizer::default(),
            reward_stat: RunningStat::default(),
            rng,
            settings,
            pending: None,
            observed: 0,
        })
    }

    pub fn state(&self) -> Vec<f64> {
        build_sdn_state(&self.memory, &self.normalizer)
    }

    /// Chooses the mode for the coming slot. The (state, action) pair is
    /// kept until [`Self::record`] closes the transition.
    pub fn decide(&mut self, deterministic: bool) -> Result<ModeDecision> {
        let state = self.state();
        let (decision, a) = decide_mode(&self.agent, &state, &mut self.rng, deterministic)?;
        self.pending = Some((state, a));
        Ok(decision)
    }

    /// Stores the slot's record. With `learn`, also appends the
    /// `(S, a, r, S')` transition and runs one SAC update once a batch is
    /// available. Returns the raw TOC reward.
    pub fn record(&mut self, record: SlotRecord, learn: bool) -> Result<f64> {
        let reward = sdn_reward(&record)?;
        if self.observed < self.settings.warmup {
            self.normalizer.observe(&record);
            self.reward_stat.push(reward);
            self.observed += 1;
            if self.observed == self.settings.warmup {
                self.normalizer.freeze();
                self.reward_stat.freeze();
            }
        }
        record_slot(&mut self.memory, record);
        let pending = self.pending.take();
        if learn {
            if let Some((state, a)) = pending {
                let next_state = self.state();
                self.buffer.push(Transition {
                    state,
                    action: vec![a],
                    reward: self.reward_stat.normalize(reward),
                    next_state,
                    done: false,
                });
                if self.buffer.len() >= self.settings.batch_size {
                    let batch = self.buffer.sample(self.settings.batch_size, &mut self.rng);
                    self.agent.update(&batch, &mut self.rng)?;
                }
            }
        }
        Ok(reward)
    }
}
