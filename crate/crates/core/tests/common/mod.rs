//! Independent oracles shared by the integration tests.
#![allow(dead_code)]

use rand::Rng;
use softran::learn::{
    DdpgAgent, DdpgConfig, DiscreteTransition, DqnAgent, DqnConfig, SacAgent, SacConfig,
    Transition,
};
use softran::netmodel::{generate_topology, sample_channels, spawn_users, PathLossModel};
use softran::phy::{
    complexity_centralized, complexity_distributed, overhead_centralized, overhead_distributed,
    rate_total_centralized, rate_total_distributed,
};
use softran::rng::{substream, Stream};
use softran::sdn::{SdnController, SdnSettings};
use softran::{Allocation, ComplexityShape, Mode, ScenarioConfig, SlotRecord};

/// Two states, two actions; action `a` moves to state `a`.
pub const TOY_REWARDS: [[f64; 2]; 2] = [[0.0, 1.0], [0.5, 0.2]];
pub const TOY_DISCOUNT: f64 = 0.5;

pub fn one_hot(s: usize) -> Vec<f64> {
    let mut v = vec![0.0; 2];
    v[s] = 1.0;
    v
}

/// Optimal action values of the toy MDP by value iteration.
pub fn toy_q_star() -> [[f64; 2]; 2] {
    let mut q = [[0.0f64; 2]; 2];
    for _ in 0..10_000 {
        let v = [q[0][0].max(q[0][1]), q[1][0].max(q[1][1])];
        let mut next = [[0.0; 2]; 2];
        for s in 0..2 {
            for a in 0..2 {
                next[s][a] = TOY_REWARDS[s][a] + TOY_DISCOUNT * v[a];
            }
        }
        let delta = (0..4).map(|i| (next[i / 2][i % 2] - q[i / 2][i % 2]).abs()).fold(0.0, f64::max);
        q = next;
        if delta < 1e-15 {
            break;
        }
    }
    q
}

pub fn toy_v_star() -> [f64; 2] {
    let q = toy_q_star();
    [q[0][0].max(q[0][1]), q[1][0].max(q[1][1])]
}

/// DQN trained off-policy on uniformly random toy transitions. Returns the
/// agent and the loss of every update.
pub fn train_dqn_toy(seed: u64, updates: usize) -> (DqnAgent, Vec<f64>) {
    let mut rng = substream(seed, Stream::Test, &[1]);
    let mut cfg = DqnConfig::new(2, 2);
    cfg.hidden = vec![32, 32];
    cfg.lr = 1e-3;
    cfg.discount = TOY_DISCOUNT;
    cfg.target_update_rate = 0.01;
    cfg.batch_size = 32;
    let mut agent = DqnAgent::new(cfg, &mut rng).unwrap();
    let data: Vec<DiscreteTransition> = (0..2000)
        .map(|_| {
            let s = rng.random_range(0..2);
            let a = rng.random_range(0..2);
            DiscreteTransition {
                state: one_hot(s),
                actions: vec![a],
                rewards: vec![TOY_REWARDS[s][a]],
                next_state: one_hot(a),
                done: false,
            }
        })
        .collect();
    let losses = (0..updates)
        .map(|_| {
            let batch: Vec<&DiscreteTransition> =
                (0..32).map(|_| &data[rng.random_range(0..data.len())]).collect();
            agent.update(&batch).unwrap()
        })
        .collect();
    (agent, losses)
}

/// Continuous version of the toy MDP: action `a` in [-1, 1] moves to state
/// 1 with probability `(1 + a) / 2` and pays the expected reward of that
/// mixture. Action values are linear in `a`, so the optimum sits at `a = -1`
/// or `a = 1` and matches the discrete one.
pub fn toy_next<R: Rng + ?Sized>(a: f64, rng: &mut R) -> usize {
    usize::from(rng.random::<f64>() < 0.5 * (1.0 + a))
}

pub fn toy_mixed_reward(s: usize, a: f64) -> f64 {
    let p = 0.5 * (1.0 + a);
    p * TOY_REWARDS[s][1] + (1.0 - p) * TOY_REWARDS[s][0]
}

/// Discrete action whose value `a` interpolates towards.
pub fn toy_endpoint(a: f64) -> usize {
    usize::from(a >= 0.0)
}

/// SAC at temperature zero trained off-policy on random toy transitions.
/// Returns the agent and the mean critic loss of every update.
pub fn train_sac_toy(seed: u64, updates: usize) -> (SacAgent, Vec<f64>) {
    let mut rng = substream(seed, Stream::Test, &[2]);
    let mut cfg = SacConfig::new(2, 1);
    cfg.hidden = vec![32, 32];
    cfg.lr = 5e-4;
    cfg.discount = TOY_DISCOUNT;
    cfg.target_update_rate = 0.05;
    cfg.init_temperature = 0.0;
    cfg.auto_temperature = false;
    cfg.batch_size = 256;
    let mut agent = SacAgent::new(cfg, &mut rng).unwrap();
    let data: Vec<Transition> = (0..10_000)
        .map(|_| {
            let s = rng.random_range(0..2);
            let a: f64 = rng.random_range(-1.0..=1.0);
            let next = toy_next(a, &mut rng);
            Transition {
                state: one_hot(s),
                action: vec![a],
                reward: toy_mixed_reward(s, a),
                next_state: one_hot(next),
                done: false,
            }
        })
        .collect();
    let losses = (0..updates)
        .map(|_| {
            let batch: Vec<&Transition> =
                (0..256).map(|_| &data[rng.random_range(0..data.len())]).collect();
            let l = agent.update(&batch, &mut rng).unwrap();
            0.5 * (l.critic1 + l.critic2)
        })
        .collect();
    (agent, losses)
}

pub const BANDIT_OPTIMUM: f64 = 0.5;

pub fn bandit_reward(a: f64) -> f64 {
    -(a - BANDIT_OPTIMUM).powi(2)
}

/// DDPG on the one-step bandit with reward `-(a - 0.5)^2`, learning from its
/// own exploratory actions.
pub fn train_ddpg_bandit(seed: u64, updates: usize) -> DdpgAgent {
    let mut rng = substream(seed, Stream::Test, &[3]);
    let mut cfg = DdpgConfig::new(1, 1);
    cfg.hidden = vec![32, 32];
    cfg.actor_lr = 1e-3;
    cfg.critic_lr = 1e-3;
    cfg.noise_std = 0.3;
    cfg.batch_size = 32;
    let mut agent = DdpgAgent::new(cfg, &mut rng).unwrap();
    let mut buffer = Vec::new();
    for i in 0..updates {
        let a = agent.select_action(&[1.0], &mut rng, true).unwrap()[0];
        buffer.push(Transition {
            state: vec![1.0],
            action: vec![a],
            reward: bandit_reward(a),
            next_state: Vec::new(),
            done: true,
        });
        if i >= 32 {
            let batch: Vec<&Transition> =
                (0..32).map(|_| &buffer[rng.random_range(0..buffer.len())]).collect();
            agent.update(&batch).unwrap();
        }
    }
    agent
}

/// Round-robin equal-power allocation built directly from the user set:
/// subcarrier `k` of RRS `b` goes to the `(k mod n)`-th user it serves.
pub fn round_robin(users: &softran::UserSet, n_rrs: usize, n_sub: usize, p_max: &[f64], mode: Mode) -> Allocation {
    let mut alloc = Allocation::zeros(mode, n_rrs, users.len(), n_sub);
    for b in 0..n_rrs {
        let served: Vec<usize> = (0..users.len()).filter(|&u| users.users[u].serving == b).collect();
        if served.is_empty() {
            continue;
        }
        for k in 0..n_sub {
            alloc.assign(b, served[k % served.len()], k, p_max[b] / n_sub as f64);
        }
    }
    alloc
}

/// Mean TOC ingredients of equal-power operation over the recorded slots
/// of a run, computed without the engine.
#[derive(Clone, Copy, Debug, Default)]
pub struct EqualPowerMeans {
    pub r_cnt: f64,
    pub r_dst: f64,
    pub tau_cnt: f64,
    pub max_tau_dst: f64,
    pub gamma_cnt: f64,
    pub max_gamma_dst: f64,
}

pub fn equal_power_means(config: &ScenarioConfig, seed: u64) -> EqualPowerMeans {
    let topology = generate_topology(config, seed).unwrap();
    let pathloss = PathLossModel::from_config(config);
    let users = spawn_users(&topology, &pathloss, config.n_users, seed);
    let p_max = topology.p_max();
    let (b, k) = (config.n_rrs, config.subcarriers);
    let noise = config.noise_power();
    let cnt = round_robin(&users, b, k, &p_max, Mode::Centralized);
    let dst = round_robin(&users, b, k, &p_max, Mode::Distributed);
    let first = config.train_episodes as u64;
    let mut m = EqualPowerMeans::default();
    let n = config.slots as f64;
    for slot in first..first + config.slots as u64 {
        let ch = sample_channels(&topology, &users, &pathloss, seed, slot);
        m.r_cnt += rate_total_centralized(&ch, &cnt, noise) * config.subcarrier_bandwidth_hz / n;
        m.r_dst += rate_total_distributed(&ch, &dst, &topology, &users, noise)
            * config.subcarrier_bandwidth_hz
            / n;
    }
    let counts = users.counts();
    let e = config.train_episodes as u64;
    let mb = config.batch_size as u64;
    let tau: Vec<u64> = counts
        .iter()
        .map(|&n| overhead_distributed(&config.bit_budget(), n, k))
        .collect();
    m.tau_cnt = overhead_centralized(&tau) as f64;
    m.max_tau_dst = *tau.iter().max().unwrap() as f64;
    m.gamma_cnt = complexity_centralized(&ComplexityShape::centralized(
        e,
        mb,
        &config.hidden_layers,
        users.len(),
        k,
        b,
    )) as f64;
    m.max_gamma_dst = counts
        .iter()
        .map(|&n| {
            complexity_distributed(&ComplexityShape::distributed(e, mb, &config.hidden_layers, n, k))
        })
        .max()
        .unwrap() as f64;
    m
}

/// First user count at which the seed-averaged equal-power distributed TOC
/// exceeds the centralized one, i.e. where
/// `r_cnt - r_dst < beta (tau_cnt - max tau_dst) + alpha (gamma_cnt - max gamma_dst)`.
pub fn analytic_crossover(config: &ScenarioConfig, user_counts: &[usize], seeds: &[u64]) -> Option<usize> {
    let w = config.toc_weights();
    user_counts.iter().copied().find(|&u| {
        let mut c = config.clone();
        c.n_users = u;
        let (mut gap, mut cost) = (0.0, 0.0);
        for &seed in seeds {
            let m = equal_power_means(&c, seed);
            gap += m.r_cnt - m.r_dst;
            cost += w.beta * (m.tau_cnt - m.max_tau_dst) + w.alpha * (m.gamma_cnt - m.max_gamma_dst);
        }
        gap < cost
    })
}

/// Slot record of the constructed stationary decision problem: the two
/// modes differ by `margin` in TOC every slot, with a small common jitter.
pub fn stationary_record(slot: u64, margin: f64, jitter: f64, executed: Mode) -> SlotRecord {
    let base = 100.0 + jitter;
    SlotRecord {
        slot,
        r_cnt: base + margin,
        r_dst: base,
        tau_cnt: 0,
        tau_dst: vec![0, 0],
        gamma_cnt: 0,
        gamma_dst: vec![0, 0],
        toc_cnt: base + margin,
        toc_dst: base,
        executed,
        user_counts: vec![3, 3],
    }
}

/// Trains the SDN controller on the stationary problem and returns the
/// share of centralized decisions over the deterministic evaluation slots.
pub fn sdn_stationary_share(margin: f64, train: usize, eval: usize, seed: u64) -> f64 {
    let cfg = ScenarioConfig::desk();
    let mut settings = SdnSettings::from_config(&cfg);
    settings.hidden = vec![32, 32];
    settings.lr = 1e-3;
    settings.batch_size = 32;
    settings.warmup = 32;
    let mut ctrl = SdnController::new(settings, substream(seed, Stream::SdnAgent, &[])).unwrap();
    let mut jitter_rng = substream(seed, Stream::Test, &[4]);
    let mut cnt = 0;
    for t in 0..train + eval {
        let training = t < train;
        let decision = ctrl.decide(!training).unwrap();
        assert_eq!(decision.x_cnt + decision.x_dst, 1);
        let jitter = jitter_rng.random_range(-1.0..1.0);
        let record = stationary_record(t as u64, margin, jitter, decision.mode());
        ctrl.record(record, training).unwrap();
        if !training && decision.mode() == Mode::Centralized {
            cnt += 1;
        }
    }
    cnt as f64 / eval as f64
}

/// Largest relative drop of a curve below its running maximum.
pub fn max_relative_drop(curve: &[f64]) -> f64 {
    let mut best = f64::NEG_INFINITY;
    let mut worst: f64 = 0.0;
    for &v in curve {
        if best > 0.0 {
            worst = worst.max((best - v) / best);
        }
        best = best.max(v);
    }
    worst
}
