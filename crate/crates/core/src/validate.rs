//! Fast invariant suite behind `softran validate`.

use std::fmt;
use std::time::Instant;

use rand::Rng;

use crate::alloc::{decode_action, Scope};
use crate::config::{ScenarioConfig, Scheme};
use crate::engine::run_episode;
use crate::error::Result;
use crate::learn::{Activation, Mlp};
use crate::netmodel::{generate_topology, spawn_users, PathLossModel};
use crate::phy::{
    overhead_centralized, overhead_distributed, toc_centralized, toc_distributed, BitBudget,
    Mode, TocWeights,
};
use crate::rng::{substream, Stream};

pub type TocCentralizedFn = fn(f64, u64, u64, &TocWeights) -> f64;
pub type TocDistributedFn = fn(f64, &[u64], &[u64], &TocWeights) -> Result<f64>;

/// The TOC functions checked by the round-trip check. Tests swap in broken
/// versions to make sure the check notices.
#[derive(Clone, Copy)]
pub struct ValidateHooks {
    pub toc_centralized: TocCentralizedFn,
    pub toc_distributed: TocDistributedFn,
}

impl Default for ValidateHooks {
    fn default() -> Self {
        Self {
            toc_centralized,
            toc_distributed,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CheckOutcome {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
    pub wall_clock_s: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ValidationReport {
    pub checks: Vec<CheckOutcome>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &CheckOutcome> {
        self.checks.iter().filter(|c| !c.passed)
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.checks {
            writeln!(
                f,
                "{} {:<22} {:>8.3}s  {}",
                if c.passed { "PASS" } else { "FAIL" },
                c.name,
                c.wall_clock_s,
                c.detail
            )?;
        }
        let failed = self.failures().count();
        write!(
            f,
            "{} checks, {} passed, {} failed",
            self.checks.len(),
            self.checks.len() - failed,
            failed
        )
    }
}

type CheckResult = std::result::Result<String, String>;

fn timed(name: &'static str, check: impl FnOnce() -> CheckResult) -> CheckOutcome {
    let t = Instant::now();
    let (passed, detail) = match check() {
        Ok(d) => (true, d),
        Err(d) => (false, d),
    };
    CheckOutcome {
        name,
        passed,
        detail,
        wall_clock_s: t.elapsed().as_secs_f64(),
    }
}

pub fn cmd_validate() -> ValidationReport {
    cmd_validate_with(&ValidateHooks::default())
}

pub fn cmd_validate_with(hooks: &ValidateHooks) -> ValidationReport {
    ValidationReport {
        checks: vec![
            timed("overhead-identity", check_overhead_identity),
            timed("gradient", check_gradients),
            timed("decode-feasibility", check_decode_feasibility),
            timed("determinism", check_determinism),
            timed("toc-round-trip", || check_toc_round_trip(hooks)),
        ],
    }
}

fn check_overhead_identity() -> CheckResult {
    let mut rng = substream(11, Stream::Test, &[]);
    for i in 0..1000 {
        let budget = BitBudget {
            power: rng.random_range(0..64),
            csi: rng.random_range(0..64),
            subcarriers: rng.random_range(0..64),
        };
        let n_rrs = rng.random_range(1..8);
        let per_rrs: Vec<u64> = (0..n_rrs)
            .map(|_| overhead_distributed(&budget, rng.random_range(0..40), rng.random_range(1..64)))
            .collect();
        let total = overhead_centralized(&per_rrs);
        if total != per_rrs.iter().sum::<u64>() {
            return Err(format!("configuration {i}: {total} != sum of {per_rrs:?}"));
        }
    }
    Ok("1000 configurations".into())
}

fn check_gradients() -> CheckResult {
    let mut rng = substream(12, Stream::Test, &[]);
    let mut worst: f64 = 0.0;
    for _ in 0..10 {
        let depth = rng.random_range(1..4);
        let mut sizes = vec![rng.random_range(1..6)];
        for _ in 0..depth {
            sizes.push(rng.random_range(1..8));
        }
        sizes.push(rng.random_range(1..4));
        let act = if rng.random_bool(0.5) {
            Activation::Tanh
        } else {
            Activation::Relu
        };
        let mut net = Mlp::random(&sizes, act, &mut rng).map_err(|e| e.to_string())?;
        let x: Vec<f64> = (0..sizes[0]).map(|_| rng.random_range(-1.0..1.0)).collect();
        let g_out: Vec<f64> = (0..*sizes.last().unwrap())
            .map(|_| rng.random_range(-1.0..1.0))
            .collect();
        worst = worst.max(gradient_error(&mut net, &x, &g_out).map_err(|e| e.to_string())?);
    }
    if worst <= 1e-4 {
        Ok(format!("10 networks, worst relative error {worst:.2e}"))
    } else {
        Err(format!("relative error {worst:.2e} exceeds 1e-4"))
    }
}

/// Norm-relative error between backprop and central differences of the
/// scalar `g_out . net(x)`.
pub fn gradient_error(net: &mut Mlp, x: &[f64], g_out: &[f64]) -> Result<f64> {
    let cache = net.forward_cached(x)?;
    let analytic = net.gradient(&cache, g_out)?;
    let h = 1e-6;
    let mut diff = 0.0;
    let mut scale = 0.0;
    for (i, &a) in analytic.iter().enumerate() {
        let orig = net.params()[i];
        net.params_mut()[i] = orig + h;
        let up: f64 = net.forward(x)?.iter().zip(g_out).map(|(y, g)| y * g).sum();
        net.params_mut()[i] = orig - h;
        let down: f64 = net.forward(x)?.iter().zip(g_out).map(|(y, g)| y * g).sum();
        net.params_mut()[i] = orig;
        let numeric = (up - down) / (2.0 * h);
        diff += (a - numeric).powi(2);
        scale += a.powi(2).max(numeric.powi(2));
    }
    Ok(if scale == 0.0 {
        diff.sqrt()
    } else {
        diff.sqrt() / scale.sqrt()
    })
}

fn check_decode_feasibility() -> CheckResult {
    let config = ScenarioConfig::desk();
    let pathloss = PathLossModel::from_config(&config);
    let mut rng = substream(13, Stream::Test, &[]);
    let mut draws = 0;
    for seed in 1..=5 {
        let topology = generate_topology(&config, seed).map_err(|e| e.to_string())?;
        let users = spawn_users(&topology, &pathloss, 3 * seed as usize, seed);
        let scope = Scope::centralized(&topology, &users, &users.counts()).map_err(|e| e.to_string())?;
        for _ in 0..100 {
            let raw: Vec<f64> = (0..scope.action_dim())
                .map(|_| rng.random_range(-1.0..=1.0))
                .collect();
            let mut alloc = scope.empty_allocation(Mode::Centralized);
            decode_action(&raw, &scope, &mut alloc).map_err(|e| e.to_string())?;
            alloc
                .check_feasible(&topology.p_max(), 1e-9)
                .map_err(|e| format!("seed {seed}: {e}"))?;
            draws += 1;
        }
    }
    Ok(format!("{draws} random actions"))
}

fn short_config() -> ScenarioConfig {
    let mut c = ScenarioConfig::desk();
    c.n_users = 6;
    c.train_episodes = 8;
    c.batch_size = 4;
    c.slots = 12;
    c
}

fn check_determinism() -> CheckResult {
    let c = short_config();
    let a = run_episode(&c, 3).map_err(|e| e.to_string())?;
    let b = run_episode(&c, 3).map_err(|e| e.to_string())?;
    if a.records == b.records {
        Ok(format!("{} slots identical", a.records.len()))
    } else {
        Err("record streams differ between identical runs".into())
    }
}

fn check_toc_round_trip(hooks: &ValidateHooks) -> CheckResult {
    let mut c = short_config();
    c.scheme = Scheme::EqualPowerBaseline;
    let w = c.toc_weights();
    let run = run_episode(&c, 4).map_err(|e| e.to_string())?;
    for r in &run.records {
        let cnt = (hooks.toc_centralized)(r.r_cnt, r.tau_cnt, r.gamma_cnt, &w);
        let dst = (hooks.toc_distributed)(r.r_dst, &r.tau_dst, &r.gamma_dst, &w)
            .map_err(|e| e.to_string())?;
        let expect_cnt = r.r_cnt - w.beta * r.tau_cnt as f64 - w.alpha * r.gamma_cnt as f64;
        let expect_dst = r.r_dst
            - w.beta * r.max_tau_dst() as f64
            - w.alpha * r.max_gamma_dst() as f64;
        if cnt != r.toc_cnt || dst != r.toc_dst || cnt != expect_cnt || dst != expect_dst {
            return Err(format!(
                "slot {}: centralized {cnt} vs {} (expected {expect_cnt}), distributed {dst} vs {} (expected {expect_dst})",
                r.slot, r.toc_cnt, r.toc_dst
            ));
        }
    }
    Ok(format!("{} slot records", run.records.len()))
}
