//! Closed-form network metrics: signalling overhead, achievable rates with
//! inter-cell interference, learning complexity and the
//! throughput-overhead-complexity (TOC) score.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::netmodel::{ChannelTensor, Topology, UserSet};

/// Resource-allocation operating mode.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Mode {
    Centralized,
    Distributed,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Centralized => "cnt",
            Mode::Distributed => "dst",
        }
    }
}

/// Feedback bits needed per (user, subcarrier) pair.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BitBudget {
    pub power: u64,
    pub csi: u64,
    pub subcarriers: u64,
}

impl BitBudget {
    pub fn per_pair(&self) -> u64 {
        self.power + self.csi + self.subcarriers
    }
}

/// Overhead of one RRS allocating locally, in bits.
pub fn overhead_distributed(budget: &BitBudget, n_users_b: usize, n_subcarriers_b: usize) -> u64 {
    budget.per_pair() * n_users_b as u64 * n_subcarriers_b as u64
}

/// Overhead of centralized allocation: every RRS ships its share to the pool.
pub fn overhead_centralized(per_rrs: &[u64]) -> u64 {
    per_rrs.iter().sum()
}

/// Power and subcarrier assignment of one slot, indexed `[b][u][k]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Allocation {
    pub mode: Mode,
    pub n_rrs: usize,
    pub n_users: usize,
    pub n_sub: usize,
    power: Vec<f64>,
    assigned: Vec<bool>,
}

impl Allocation {
    pub fn zeros(mode: Mode, n_rrs: usize, n_users: usize, n_sub: usize) -> Self {
        let n = n_rrs * n_users * n_sub;
        Self {
            mode,
            n_rrs,
            n_users,
            n_sub,
            power: vec![0.0; n],
            assigned: vec![false; n],
        }
    }

    #[inline]
    fn idx(&self, b: usize, u: usize, k: usize) -> usize {
        (b * self.n_users + u) * self.n_sub + k
    }

    #[inline]
    pub fn power(&self, b: usize, u: usize, k: usize) -> f64 {
        self.power[self.idx(b, u, k)]
    }

    #[inline]
    pub fn rho(&self, b: usize, u: usize, k: usize) -> bool {
        self.assigned[self.idx(b, u, k)]
    }

    /// Assigns subcarrier `k` of RRS `b` to user `u` with power `p`.
    pub fn assign(&mut self, b: usize, u: usize, k: usize, p: f64) {
        let i = self.idx(b, u, k);
        self.assigned[i] = true;
        self.power[i] = p;
    }

    /// Effective transmit power `p * rho`.
    #[inline]
    pub fn tx(&self, b: usize, u: usize, k: usize) -> f64 {
        let i = self.idx(b, u, k);
        if self.assigned[i] {
            self.power[i]
        } else {
            0.0
        }
    }

    pub fn total_power(&self, b: usize) -> f64 {
        let mut s = 0.0;
        for u in 0..self.n_users {
            for k in 0..self.n_sub {
                s += self.power(b, u, k);
            }
        }
        s
    }

    pub fn scale_power(&mut self, factor: f64) {
        for p in &mut self.power {
            *p *= factor;
        }
    }

    /// Checks non-negativity, `p > 0 => rho = 1`, at most one user per
    /// (RRS, subcarrier) and the per-RRS power budget (with relative slack
    /// `tol`).
    pub fn check_feasible(&self, p_max: &[f64], tol: f64) -> Result<()> {
        if p_max.len() != self.n_rrs {
            return Err(Error::Shape {
                context: "p_max per RRS",
                expected: self.n_rrs,
                actual: p_max.len(),
            });
        }
        for b in 0..self.n_rrs {
            for k in 0..self.n_sub {
                let mut holders = 0;
                for u in 0..self.n_users {
                    let p = self.power(b, u, k);
                    if !(p >= 0.0) || !p.is_finite() {
                        return Err(Error::Infeasible(format!("power {p} at ({b},{u},{k})")));
                    }
                    if p > 0.0 && !self.rho(b, u, k) {
                        return Err(Error::Infeasible(format!(
                            "power without assignment at ({b},{u},{k})"
                        )));
                    }
                    holders += self.rho(b, u, k) as usize;
                }
                if holders > 1 {
                    return Err(Error::Infeasible(format!(
                        "{holders} users share subcarrier {k} of RRS {b}"
                    )));
                }
            }
            let total = self.total_power(b);
            if total > p_max[b] * (1.0 + tol) {
                return Err(Error::Infeasible(format!(
                    "RRS {b} uses {total} W over budget {}",
                    p_max[b]
                )));
            }
        }
        Ok(())
    }
}

/// Inter-cell interference seen by user `u` on subcarrier `k` when served by
/// `b` under centralized allocation: every other RRS's transmissions to
/// users other than `u`, through `u`'s channel from that RRS.
pub fn intercell_interference_centralized(
    channels: &ChannelTensor,
    alloc: &Allocation,
    b: usize,
    u: usize,
    k: usize,
) -> f64 {
    let mut total = 0.0;
    for bp in (0..alloc.n_rrs).filter(|&bp| bp != b) {
        let h = channels.gain(bp, u, k);
        for up in (0..alloc.n_users).filter(|&up| up != u) {
            let p = alloc.tx(bp, up, k);
            if p > 0.0 {
                total += h * p;
            }
        }
    }
    total
}

#[inline]
fn spectral_efficiency(signal: f64, noise: f64, interference: f64) -> f64 {
    (1.0 + signal / (noise + interference)).log2()
}

/// Sum of `log2(1 + SINR)` over every (RRS, user, subcarrier), in
/// bits/s/Hz, with the actual interference of the allocation.
pub fn rate_total_centralized(channels: &ChannelTensor, alloc: &Allocation, noise: f64) -> f64 {
    rate_per_rrs_centralized(channels, alloc, noise).iter().sum()
}

/// Per-RRS contribution to [`rate_total_centralized`].
pub fn rate_per_rrs_centralized(
    channels: &ChannelTensor,
    alloc: &Allocation,
    noise: f64,
) -> Vec<f64> {
    let mut per = vec![0.0; alloc.n_rrs];
    for (b, slot) in per.iter_mut().enumerate() {
        for k in 0..alloc.n_sub {
            for u in 0..alloc.n_users {
                let p = alloc.tx(b, u, k);
                if p > 0.0 {
                    let i = intercell_interference_centralized(channels, alloc, b, u, k);
                    *slot += spectral_efficiency(channels.gain(b, u, k) * p, noise, i);
                }
            }
        }
    }
    per
}

/// Worst-case interference bound used by a distributed RRS: every other
/// RRS is assumed to split its full power equally over its users and
/// subcarriers, and only large-scale gains are known. RRSs with no users
/// contribute nothing. Independent of the subcarrier.
pub fn intercell_interference_distributed(
    channels: &ChannelTensor,
    topology: &Topology,
    user_counts: &[usize],
    b: usize,
    u: usize,
) -> f64 {
    let mut total = 0.0;
    for (bp, &n_bp) in user_counts.iter().enumerate() {
        if bp == b || n_bp == 0 {
            continue;
        }
        let k_bp = topology.subcarriers_of(bp);
        let p_equal = topology.rrs[bp].p_max / (n_bp as f64 * k_bp as f64);
        // users of b' other than u; u is served by b so all n_bp of them count
        total += channels.large(bp, u) * p_equal * n_bp as f64;
    }
    total
}

/// Per-RRS local rate under the worst-case interference bound.
pub fn rate_per_rrs_distributed(
    channels: &ChannelTensor,
    alloc: &Allocation,
    topology: &Topology,
    users: &UserSet,
    noise: f64,
) -> Vec<f64> {
    let counts = users.counts();
    let mut per = vec![0.0; alloc.n_rrs];
    for (b, slot) in per.iter_mut().enumerate() {
        for u in users.served_by(b) {
            let i = intercell_interference_distributed(channels, topology, &counts, b, u);
            for k in 0..topology.subcarriers_of(b) {
                let p = alloc.tx(b, u, k);
                if p > 0.0 {
                    *slot += spectral_efficiency(channels.gain(b, u, k) * p, noise, i);
                }
            }
        }
    }
    per
}

/// Sum rate of distributed allocation in bits/s/Hz.
pub fn rate_total_distributed(
    channels: &ChannelTensor,
    alloc: &Allocation,
    topology: &Topology,
    users: &UserSet,
    noise: f64,
) -> f64 {
    rate_per_rrs_distributed(channels, alloc, topology, users, noise)
        .iter()
        .sum()
}

/// Shape of a DRL network for the complexity model: `episodes * batch *`
/// (weight multiplies of one forward pass).
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ComplexityShape {
    pub episodes: u64,
    pub batch: u64,
    pub hidden: Vec<usize>,
    pub input: usize,
    pub output: usize,
}

impl ComplexityShape {
    /// Centralized learner: input `|U| |K| |B|`, output `|P| + |rho|`.
    pub fn centralized(
        episodes: u64,
        batch: u64,
        hidden: &[usize],
        n_users: usize,
        n_sub: usize,
        n_rrs: usize,
    ) -> Self {
        let input = n_users * n_sub * n_rrs;
        Self {
            episodes,
            batch,
            hidden: hidden.to_vec(),
            input,
            output: 2 * input,
        }
    }

    /// Learner of one RRS: input `|U_b| |K_b|`, output `|P_b| + |rho_b|`.
    pub fn distributed(
        episodes: u64,
        batch: u64,
        hidden: &[usize],
        n_users_b: usize,
        n_sub_b: usize,
    ) -> Self {
        let input = n_users_b * n_sub_b;
        Self {
            episodes,
            batch,
            hidden: hidden.to_vec(),
            input,
            output: 2 * input,
        }
    }

    fn per_sample(&self, input: usize) -> u64 {
        let Some((&first, _)) = self.hidden.split_first() else {
            return input as u64 * self.output as u64;
        };
        let last = *self.hidden.last().unwrap();
        let inner: u64 = self
            .hidden
            .windows(2)
            .map(|w| w[0] as u64 * w[1] as u64)
            .sum();
        input as u64 * first as u64 + inner + last as u64 * self.output as u64
    }
}

/// Operation count of the centralized learner.
pub fn complexity_centralized(shape: &ComplexityShape) -> u64 {
    shape.episodes * shape.batch * shape.per_sample(shape.input)
}

/// Operation count of one RRS's learner. An empty cell is counted with an
/// input size of one.
pub fn complexity_distributed(shape: &ComplexityShape) -> u64 {
    shape.episodes * shape.batch * shape.per_sample(shape.input.max(1))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TocWeights {
    /// Weight per unit of computational complexity.
    pub alpha: f64,
    /// Weight per bit of overhead.
    pub beta: f64,
}

pub fn toc_centralized(rate: f64, overhead: u64, complexity: u64, w: &TocWeights) -> f64 {
    rate - w.beta * overhead as f64 - w.alpha * complexity as f64
}

/// TOC of distributed operation: penalised by the worst RRS's overhead and
/// complexity.
pub fn toc_distributed(
    rate: f64,
    overhead_per_rrs: &[u64],
    complexity_per_rrs: &[u64],
    w: &TocWeights,
) -> Result<f64> {
    let (Some(&tau), Some(&gamma)) = (
        overhead_per_rrs.iter().max(),
        complexity_per_rrs.iter().max(),
    ) else {
        return Err(Error::InvalidArgument(
            "distributed TOC needs at least one RRS".into(),
        ));
    };
    Ok(rate - w.beta * tau as f64 - w.alpha * gamma as f64)
}
