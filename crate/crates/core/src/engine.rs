//! The slot loop and parameter sweeps.
//!
//! A run consists of `train_episodes` training slots (stochastic policies,
//! learning on) followed by `slots` recorded evaluation slots (deterministic
//! policies, learning frozen). Every slot runs, in order: traffic step,
//! channel draw, mode decision, allocation in both modes, metric evaluation,
//! learning updates, record.

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::alloc::{
    observe_centralized, observe_distributed, pair_rates_centralized, pair_rates_distributed,
    Scope, ScopeLearner,
};
use crate::config::{Learner, ScenarioConfig, Scheme};
use crate::error::{Error, Result};
use crate::netmodel::{
    generate_topology, sample_channels, spawn_users, step_traffic, PathLossModel, Topology,
    TrafficModel, UserSet,
};
use crate::phy::{
    complexity_centralized, complexity_distributed, overhead_centralized, overhead_distributed,
    toc_centralized, toc_distributed, Allocation, ComplexityShape, Mode,
};
use crate::rng::{substream, Stream};
use crate::sdn::{ModeDecision, SdnController, SdnSettings, SlotRecord};

/// Relative slack when checking allocations against the power budget.
const POWER_TOLERANCE: f64 = 1e-9;

/// Means over the record stream of a run.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Aggregates {
    pub slots: usize,
    /// Executed-mode rate, bits/s.
    pub mean_rate: f64,
    pub mean_r_cnt: f64,
    pub mean_r_dst: f64,
    pub mean_tau_cnt: f64,
    pub mean_max_tau_dst: f64,
    pub mean_tau_executed: f64,
    pub mean_gamma_cnt: f64,
    pub mean_max_gamma_dst: f64,
    pub mean_gamma_executed: f64,
    /// Executed-mode TOC.
    pub mean_toc: f64,
    pub mean_toc_cnt: f64,
    pub mean_toc_dst: f64,
    /// Fraction of slots run centrally.
    pub cnt_fraction: f64,
}

impl Aggregates {
    pub fn from_records(records: &[SlotRecord]) -> Self {
        let n = records.len();
        if n == 0 {
            return Self::default();
        }
        let mean = |f: &dyn Fn(&SlotRecord) -> f64| records.iter().map(f).sum::<f64>() / n as f64;
        Self {
            slots: n,
            mean_rate: mean(&|r| r.executed_rate()),
            mean_r_cnt: mean(&|r| r.r_cnt),
            mean_r_dst: mean(&|r| r.r_dst),
            mean_tau_cnt: mean(&|r| r.tau_cnt as f64),
            mean_max_tau_dst: mean(&|r| r.max_tau_dst() as f64),
            mean_tau_executed: mean(&|r| r.executed_tau() as f64),
            mean_gamma_cnt: mean(&|r| r.gamma_cnt as f64),
            mean_max_gamma_dst: mean(&|r| r.max_gamma_dst() as f64),
            mean_gamma_executed: mean(&|r| r.executed_gamma() as f64),
            mean_toc: mean(&|r| r.executed_toc()),
            mean_toc_cnt: mean(&|r| r.toc_cnt),
            mean_toc_dst: mean(&|r| r.toc_dst),
            cnt_fraction: mean(&|r| f64::from(u8::from(r.executed == Mode::Centralized))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub scheme: Scheme,
    pub learner: Learner,
    pub user_count: usize,
    pub seed: u64,
    pub agent_seed: u64,
    pub records: Vec<SlotRecord>,
    pub aggregates: Aggregates,
    pub wall_clock_s: f64,
}

impl RunResult {
    /// Decisions as `(slot, x_cnt, x_dst)`.
    pub fn decisions(&self) -> impl Iterator<Item = (u64, ModeDecision)> + '_ {
        self.records
            .iter()
            .map(|r| (r.slot, ModeDecision::from_mode(r.executed)))
    }
}

/// Allocators for both modes.
struct Allocators {
    capacities: Vec<usize>,
    centralized: ScopeLearner,
    distributed: Vec<ScopeLearner>,
}

impl Allocators {
    fn new(config: &ScenarioConfig, topology: &Topology, users: &UserSet, seed: u64) -> Result<Self> {
        let capacities = if config.traffic_enabled() {
            vec![config.user_capacity(); config.n_rrs]
        } else {
            users.counts()
        };
        let cnt_rng = substream(seed, Stream::CentralizedAgent, &[config.agent_seed]);
        let dst_rng = |b: usize| substream(seed, Stream::DistributedAgent, &[config.agent_seed, b as u64]);
        let learned = config.scheme != Scheme::EqualPowerBaseline;

        let cnt_scope = Scope::centralized(topology, users, &capacities)?;
        let centralized = if learned && cnt_scope.slot_entries() > 0 {
            ScopeLearner::new(config.learner, &cnt_scope, Mode::Centralized, config, cnt_rng)?
        } else {
            ScopeLearner::equal_power(cnt_rng)
        };
        let distributed = (0..config.n_rrs)
            .map(|b| {
                let scope = Scope::distributed(topology, users, b, capacities[b])?;
                if learned && scope.slot_entries() > 0 {
                    ScopeLearner::new(config.learner, &scope, Mode::Distributed, config, dst_rng(b))
                } else {
                    Ok(ScopeLearner::equal_power(dst_rng(b)))
                }
            })
            .collect::<Result<_>>()?;
        Ok(Self {
            capacities,
            centralized,
            distributed,
        })
    }
}

fn check_allocation(alloc: &Allocation, p_max: &[f64]) -> Result<()> {
    alloc.check_feasible(p_max, POWER_TOLERANCE)
}

/// Simulates one scenario. `seed` overrides `config.seed`; agent streams
/// are keyed by `config.agent_seed` in addition.
pub fn run_episode(config: &ScenarioConfig, seed: u64) -> Result<RunResult> {
    config.validate()?;
    let started = Instant::now();
    let mut result = RunResult {
        scheme: config.scheme,
        learner: config.learner,
        user_count: config.n_users,
        seed,
        agent_seed: config.agent_seed,
        records: Vec::with_capacity(config.slots),
        aggregates: Aggregates::default(),
        wall_clock_s: 0.0,
    };
    if config.slots == 0 {
        return Ok(result);
    }

    let topology = generate_topology(config, seed)?;
    let pathloss = PathLossModel::from_config(config);
    let traffic = TrafficModel {
        arrival_rate: config.arrival_rate,
        departure_prob: config.departure_prob,
        max_users: Some(config.user_capacity()),
    };
    let noise = config.noise_power();
    let bandwidth = config.subcarrier_bandwidth_hz;
    let budget = config.bit_budget();
    let weights = config.toc_weights();
    let p_max = topology.p_max();
    let episodes = config.train_episodes as u64;
    let batch = config.batch_size as u64;
    let n_k = topology.subcarriers;

    let mut users = spawn_users(&topology, &pathloss, config.n_users, seed);
    let mut allocators = Allocators::new(config, &topology, &users, seed)?;
    let mut sdn = if config.scheme.uses_sdn() {
        let rng = substream(seed, Stream::SdnAgent, &[config.agent_seed]);
        Some(SdnController::new(SdnSettings::from_config(config), rng)?)
    } else {
        None
    };

    let total = config.train_episodes + config.slots;
    for t in 0..total {
        let slot = t as u64;
        let training = t < config.train_episodes;

        // traffic
        if t > 0 && config.traffic_enabled() {
            users = step_traffic(&topology, &pathloss, &users, &traffic, seed, slot)?;
        }
        let counts = users.counts();

        // channels
        let channels = sample_channels(&topology, &users, &pathloss, seed, slot);

        // decision
        let decision = match config.scheme {
            Scheme::FixedCentralized => ModeDecision::from_mode(Mode::Centralized),
            Scheme::FixedDistributed => ModeDecision::from_mode(Mode::Distributed),
            Scheme::Smart | Scheme::EqualPowerBaseline => sdn
                .as_mut()
                .expect("SDN schemes own a controller")
                .decide(!training)?,
        };
        if !decision.is_exclusive() {
            return Err(Error::Infeasible(format!("mode decision {decision:?} at slot {slot}")));
        }

        // allocation
        let cnt_scope = Scope::centralized(&topology, &users, &allocators.capacities)?;
        let mut cnt_alloc = cnt_scope.empty_allocation(Mode::Centralized);
        if cnt_scope.slot_entries() > 0 {
            let obs = observe_centralized(&channels, &cnt_scope, noise);
            allocators
                .centralized
                .act(&obs, &cnt_scope, training, &mut cnt_alloc)?;
        }
        let mut dst_alloc = cnt_scope.empty_allocation(Mode::Distributed);
        let mut dst_scopes = Vec::with_capacity(config.n_rrs);
        for (b, learner) in allocators.distributed.iter_mut().enumerate() {
            let scope = Scope::distributed(&topology, &users, b, allocators.capacities[b])?;
            if scope.slot_entries() > 0 {
                let obs = observe_distributed(&channels, &topology, &counts, &scope, noise);
                learner.act(&obs, &scope, training, &mut dst_alloc)?;
            }
            dst_scopes.push(scope);
        }
        check_allocation(&cnt_alloc, &p_max)?;
        check_allocation(&dst_alloc, &p_max)?;

        // metrics
        let cnt_pairs = pair_rates_centralized(&channels, &cnt_alloc, noise);
        let dst_pairs = pair_rates_distributed(&channels, &dst_alloc, &topology, &users, noise);
        let r_cnt = cnt_pairs.iter().sum::<f64>() * bandwidth;
        let r_dst = dst_pairs.iter().sum::<f64>() * bandwidth;
        let tau_dst: Vec<u64> = counts
            .iter()
            .map(|&n| overhead_distributed(&budget, n, n_k))
            .collect();
        let tau_cnt = overhead_centralized(&tau_dst);
        let gamma_dst: Vec<u64> = counts
            .iter()
            .map(|&n| {
                complexity_distributed(&ComplexityShape::distributed(
                    episodes,
                    batch,
                    &config.hidden_layers,
                    n,
                    n_k,
                ))
            })
            .collect();
        let gamma_cnt = complexity_centralized(&ComplexityShape::centralized(
            episodes,
            batch,
            &config.hidden_layers,
            users.len(),
            n_k,
            config.n_rrs,
        ));
        let record = SlotRecord {
            slot,
            r_cnt,
            r_dst,
            toc_cnt: toc_centralized(r_cnt, tau_cnt, gamma_cnt, &weights),
            toc_dst: toc_distributed(r_dst, &tau_dst, &gamma_dst, &weights)?,
            tau_cnt,
            tau_dst,
            gamma_cnt,
            gamma_dst,
            executed: decision.mode(),
            user_counts: counts,
        };
        if !(record.r_cnt.is_finite() && record.r_dst.is_finite()) {
            return Err(Error::NonFinite(format!("rates at slot {slot}")));
        }

        // learning
        if training {
            allocators.centralized.learn(&cnt_scope, &cnt_pairs)?;
            for (learner, scope) in allocators.distributed.iter_mut().zip(&dst_scopes) {
                learner.learn(scope, &dst_pairs)?;
            }
        }

        // record
        if let Some(ctrl) = sdn.as_mut() {
            ctrl.record(record.clone(), training)?;
        }
        if !training {
            result.records.push(record);
        }
    }
    result.aggregates = Aggregates::from_records(&result.records);
    result.wall_clock_s = started.elapsed().as_secs_f64();
    Ok(result)
}

/// One run of a sweep.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SweepCell {
    pub scheme: Scheme,
    pub learner: Learner,
    pub user_count: usize,
    pub seed: u64,
}

/// The cross product run by [`run_sweep_grid`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub user_counts: Vec<usize>,
    pub schemes: Vec<Scheme>,
    pub learners: Vec<Learner>,
    pub seeds: Vec<u64>,
    /// Worker threads; `None` uses every core.
    pub workers: Option<usize>,
}

impl SweepSpec {
    /// Cells in scheme, learner, user count, seed order.
    pub fn cells(&self) -> Vec<SweepCell> {
        let mut cells = Vec::new();
        for &scheme in &self.schemes {
            for &learner in &self.learners {
                for &user_count in &self.user_counts {
                    for &seed in &self.seeds {
                        cells.push(SweepCell {
                            scheme,
                            learner,
                            user_count,
                            seed,
                        });
                    }
                }
            }
        }
        cells
    }
}

/// Mean and standard error across seeds of one (scheme, learner, user
/// count) group.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub mean: f64,
    pub stderr: f64,
    pub n: usize,
}

impl Estimate {
    pub fn of(values: &[f64]) -> Self {
        let n = values.len();
        if n == 0 {
            return Self {
                mean: f64::NAN,
                stderr: f64::NAN,
                n,
            };
        }
        let mean = values.iter().sum::<f64>() / n as f64;
        let stderr = if n > 1 {
            let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
            (var / n as f64).sqrt()
        } else {
            0.0
        };
        Self { mean, stderr, n }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub cells: Vec<SweepCell>,
    /// One entry per cell; failures keep the error message.
    pub outcomes: Vec<std::result::Result<RunResult, String>>,
}

impl SweepResult {
    pub fn successes(&self) -> impl Iterator<Item = (&SweepCell, &RunResult)> {
        self.cells
            .iter()
            .zip(&self.outcomes)
            .filter_map(|(c, o)| o.as_ref().ok().map(|r| (c, r)))
    }

    pub fn failures(&self) -> impl Iterator<Item = (&SweepCell, &str)> {
        self.cells
            .iter()
            .zip(&self.outcomes)
            .filter_map(|(c, o)| o.as_ref().err().map(|e| (c, e.as_str())))
    }

    /// Across-seed estimate of `metric` for each (scheme, learner, user
    /// count), in sweep order.
    pub fn summarize(
        &self,
        metric: impl Fn(&Aggregates) -> f64,
    ) -> Vec<((Scheme, Learner, usize), Estimate)> {
        let mut groups: Vec<((Scheme, Learner, usize), Vec<f64>)> = Vec::new();
        for (cell, run) in self.successes() {
            let key = (cell.scheme, cell.learner, cell.user_count);
            let v = metric(&run.aggregates);
            match groups.iter_mut().find(|(k, _)| *k == key) {
                Some((_, vs)) => vs.push(v),
                None => groups.push((key, vec![v])),
            }
        }
        groups
            .into_iter()
            .map(|(k, vs)| (k, Estimate::of(&vs)))
            .collect()
    }
}

/// Runs every cell of `spec`, in parallel across cells. Results keep the
/// cell order; a failing cell is recorded and the rest continue.
pub fn run_sweep_grid(config: &ScenarioConfig, spec: &SweepSpec) -> Result<SweepResult> {
    if spec.user_counts.is_empty()
        || spec.schemes.is_empty()
        || spec.learners.is_empty()
        || spec.seeds.is_empty()
    {
        return Err(Error::InvalidArgument("sweep lists must be non-empty".into()));
    }
    let cells = spec.cells();
    let run_cell = |cell: &SweepCell| {
        let mut c = config.clone();
        c.scheme = cell.scheme;
        c.learner = cell.learner;
        c.n_users = cell.user_count;
        c.seed = cell.seed;
        run_episode(&c, cell.seed).map_err(|e| e.to_string())
    };
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = spec.workers {
        builder = builder.num_threads(n.max(1));
    }
    let pool = builder
        .build()
        .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))?;
    let outcomes = pool.install(|| cells.par_iter().map(run_cell).collect());
    Ok(SweepResult { cells, outcomes })
}

/// Sweep over user counts, schemes and seeds with the configured learner.
pub fn run_sweep(
    config: &ScenarioConfig,
    user_counts: &[usize],
    schemes: &[Scheme],
    seeds: &[u64],
) -> Result<SweepResult> {
    run_sweep_grid(
        config,
        &SweepSpec {
            user_counts: user_counts.to_vec(),
            schemes: schemes.to_vec(),
            learners: vec![config.learner],
            seeds: seeds.to_vec(),
            workers: None,
        },
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn estimate_uses_sample_variance() {
        let e = Estimate::of(&[1.0, 2.0, 3.0]);
        assert_eq!(e.mean, 2.0);
        assert!((e.stderr - (1.0f64 / 3.0).sqrt()).abs() < 1e-15);
        assert_eq!(Estimate::of(&[5.0]).stderr, 0.0);
    }

    #[test]
    fn cells_are_in_documented_order() {
        let spec = SweepSpec {
            user_counts: vec![2, 4],
            schemes: vec![Scheme::FixedCentralized],
            learners: vec![Learner::Sac],
            seeds: vec![1, 2],
            workers: Some(1),
        };
        let order: Vec<(usize, u64)> = spec.cells().iter().map(|c| (c.user_count, c.seed)).collect();
        assert_eq!(order, vec![(2, 1), (2, 2), (4, 1), (4, 2)]);
    }
}
