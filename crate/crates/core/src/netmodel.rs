//! Radio environment: RRS topology, user population, association and
//! per-slot channel gains.
//!
//! All sampling is a pure function of `(seed, slot, ids)`. A user's position
//! depends only on its id, so growing a population by spawning more users
//! keeps the earlier users where they were, and a user's fading draw in a
//! slot depends only on its id, not on who else is in the network.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::{Distribution, Exp1, Poisson};
use serde::{Deserialize, Serialize};

use crate::config::{db_to_linear, ScenarioConfig};
use crate::error::{Error, Result};
use crate::rng::{substream, Stream};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance(self, other: Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }
}

/// A re-configurable radio system (base station).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Rrs {
    pub position: Point,
    pub cell_radius: f64,
    /// Maximum transmit power in watts.
    pub p_max: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Topology {
    pub area_radius: f64,
    pub rrs: Vec<Rrs>,
    pub subcarriers: usize,
    pub subcarrier_bandwidth: f64,
}

impl Topology {
    pub fn n_rrs(&self) -> usize {
        self.rrs.len()
    }

    pub fn p_max(&self) -> Vec<f64> {
        self.rrs.iter().map(|r| r.p_max).collect()
    }

    /// Subcarriers usable by RRS `b`. Every RRS reuses the full set.
    pub fn subcarriers_of(&self, _b: usize) -> usize {
        self.subcarriers
    }
}

/// Places the RRSs of a scenario.
///
/// A single RRS sits at the centre. Otherwise the RRSs are evenly spaced on
/// the circle whose radius is the cell radius (capped by the area radius),
/// rotated by a seed-dependent angle, so neighbouring cells overlap.
pub fn generate_topology(config: &ScenarioConfig, seed: u64) -> Result<Topology> {
    if !(config.area_radius_m > 0.0) || !(config.cell_radius_m > 0.0) {
        return Err(Error::InvalidConfig("radii must be positive".into()));
    }
    if config.subcarriers == 0 {
        return Err(Error::InvalidConfig("subcarriers must be at least 1".into()));
    }
    if config.n_rrs == 0 {
        return Err(Error::InvalidConfig("n_rrs must be at least 1".into()));
    }
    let p_max = config.p_max_watts();
    if !(p_max > 0.0) || !p_max.is_finite() {
        return Err(Error::InvalidConfig("p_max must be positive".into()));
    }
    let b = config.n_rrs;
    let rrs = if b == 1 {
        vec![Rrs {
            position: Point::new(0.0, 0.0),
            cell_radius: config.cell_radius_m,
            p_max,
        }]
    } else {
        let mut rng = substream(seed, Stream::Topology, &[]);
        let rotation = rng.random::<f64>() * 2.0 * PI / b as f64;
        let ring = config.cell_radius_m.min(config.area_radius_m);
        (0..b)
            .map(|i| {
                let theta = rotation + 2.0 * PI * i as f64 / b as f64;
                Rrs {
                    position: Point::new(ring * theta.cos(), ring * theta.sin()),
                    cell_radius: config.cell_radius_m,
                    p_max,
                }
            })
            .collect()
    };
    Ok(Topology {
        area_radius: config.area_radius_m,
        rrs,
        subcarriers: config.subcarriers,
        subcarrier_bandwidth: config.subcarrier_bandwidth_hz,
    })
}

/// Log-distance path gain `c * d^-exponent`, with distances below
/// `min_distance` clamped.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PathLossModel {
    pub exponent: f64,
    pub reference_gain: f64,
    pub min_distance: f64,
}

impl PathLossModel {
    /// Picks the reference gain so a user at `edge_distance` receiving
    /// `p_max` on one subcarrier sees `edge_snr_db` over `noise_power`.
    pub fn calibrated(
        exponent: f64,
        edge_snr_db: f64,
        edge_distance: f64,
        p_max: f64,
        noise_power: f64,
        min_distance: f64,
    ) -> Self {
        let reference_gain =
            db_to_linear(edge_snr_db) * noise_power / (p_max * edge_distance.powf(-exponent));
        Self {
            exponent,
            reference_gain,
            min_distance,
        }
    }

    pub fn from_config(config: &ScenarioConfig) -> Self {
        Self::calibrated(
            config.path_loss_exponent,
            config.edge_snr_db,
            config.cell_radius_m,
            config.p_max_watts(),
            config.noise_power(),
            config.min_distance_m,
        )
    }

    pub fn gain(&self, distance: f64) -> Result<f64> {
        path_gain(distance.max(self.min_distance), self)
    }
}

pub fn path_gain(distance: f64, model: &PathLossModel) -> Result<f64> {
    if !(distance > 0.0) || !distance.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "path_gain needs a positive distance, got {distance}"
        )));
    }
    Ok(model.reference_gain * distance.powf(-model.exponent))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct User {
    pub id: u64,
    pub position: Point,
    pub serving: usize,
}

/// The active users, ordered by id.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UserSet {
    pub users: Vec<User>,
    pub n_rrs: usize,
    pub next_id: u64,
}

impl UserSet {
    pub fn empty(n_rrs: usize) -> Self {
        Self {
            users: Vec::new(),
            n_rrs,
            next_id: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.users.len()
    }

    pub fn is_empty(&self) -> bool {
        self.users.is_empty()
    }

    /// Indices (into `users`) of the users served by RRS `b`.
    pub fn served_by(&self, b: usize) -> Vec<usize> {
        self.users
            .iter()
            .enumerate()
            .filter(|(_, u)| u.serving == b)
            .map(|(i, _)| i)
            .collect()
    }

    /// `|U_b|` for every RRS.
    pub fn counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.n_rrs];
        for u in &self.users {
            counts[u.serving] += 1;
        }
        counts
    }

    /// Serving RRS of each user index.
    pub fn serving(&self) -> Vec<usize> {
        self.users.iter().map(|u| u.serving).collect()
    }
}

fn place_user(topology: &Topology, seed: u64, id: u64) -> Point {
    let mut rng = substream(seed, Stream::UserPlacement, &[id]);
    let r = topology.area_radius * rng.random::<f64>().sqrt();
    let theta = 2.0 * PI * rng.random::<f64>();
    Point::new(r * theta.cos(), r * theta.sin())
}

/// Strongest large-scale gain wins; ties go to the lowest RRS index.
fn associate(topology: &Topology, pathloss: &PathLossModel, position: Point) -> usize {
    let mut best = 0;
    let mut best_gain = f64::NEG_INFINITY;
    for (b, rrs) in topology.rrs.iter().enumerate() {
        let g = pathloss
            .gain(position.distance(rrs.position))
            .expect("clamped distance is positive");
        if g > best_gain {
            best_gain = g;
            best = b;
        }
    }
    best
}

fn new_user(topology: &Topology, pathloss: &PathLossModel, seed: u64, id: u64) -> User {
    let position = place_user(topology, seed, id);
    User {
        id,
        position,
        serving: associate(topology, pathloss, position),
    }
}

/// Spawns users `0..n_users`, uniform over the coverage disc.
pub fn spawn_users(
    topology: &Topology,
    pathloss: &PathLossModel,
    n_users: usize,
    seed: u64,
) -> UserSet {
    let users = (0..n_users as u64)
        .map(|id| new_user(topology, pathloss, seed, id))
        .collect();
    UserSet {
        users,
        n_rrs: topology.n_rrs(),
        next_id: n_users as u64,
    }
}

/// Birth-death population dynamics.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrafficModel {
    /// Mean Poisson arrivals per slot.
    pub arrival_rate: f64,
    /// Per-user departure probability per slot.
    pub departure_prob: f64,
    /// Arrivals beyond this population are blocked.
    pub max_users: Option<usize>,
}

/// Advances the population by one slot: Bernoulli departures, then Poisson
/// arrivals. Only arriving users are associated; survivors keep their RRS.
pub fn step_traffic(
    topology: &Topology,
    pathloss: &PathLossModel,
    users: &UserSet,
    traffic: &TrafficModel,
    seed: u64,
    slot: u64,
) -> Result<UserSet> {
    if !(traffic.arrival_rate >= 0.0) || !traffic.arrival_rate.is_finite() {
        return Err(Error::InvalidArgument("arrival_rate must be >= 0".into()));
    }
    if !(0.0..=1.0).contains(&traffic.departure_prob) {
        return Err(Error::InvalidArgument("departure_prob must be in [0, 1]".into()));
    }
    let mut rng = substream(seed, Stream::Traffic, &[slot]);
    let mut next = UserSet {
        users: Vec::with_capacity(users.len()),
        n_rrs: users.n_rrs,
        next_id: users.next_id,
    };
    for u in &users.users {
        let departs = traffic.departure_prob > 0.0 && rng.random::<f64>() < traffic.departure_prob;
        if !departs {
            next.users.push(u.clone());
        }
    }
    let arrivals = if traffic.arrival_rate > 0.0 {
        let poisson = Poisson::new(traffic.arrival_rate)
            .map_err(|e| Error::InvalidArgument(e.to_string()))?;
        poisson.sample(&mut rng) as u64
    } else {
        0
    };
    for _ in 0..arrivals {
        if traffic.max_users.is_some_and(|cap| next.len() >= cap) {
            break;
        }
        let id = next.next_id;
        next.next_id += 1;
        next.users.push(new_user(topology, pathloss, seed, id));
    }
    Ok(next)
}

/// Channel power gains of one slot, `h[b][u][k] = h_large[b][u] * h_small[b][u][k]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChannelTensor {
    pub n_rrs: usize,
    pub n_users: usize,
    pub n_sub: usize,
    large: Vec<f64>,
    small: Vec<f64>,
}

impl ChannelTensor {
    /// Builds a tensor from explicit gains. `large` is `[b][u]`, `small` is
    /// `[b][u][k]`, both row-major.
    pub fn from_parts(
        n_rrs: usize,
        n_users: usize,
        n_sub: usize,
        large: Vec<f64>,
        small: Vec<f64>,
    ) -> Result<Self> {
        if large.len() != n_rrs * n_users {
            return Err(Error::Shape {
                context: "large-scale gains",
                expected: n_rrs * n_users,
                actual: large.len(),
            });
        }
        if small.len() != n_rrs * n_users * n_sub {
            return Err(Error::Shape {
                context: "small-scale gains",
                expected: n_rrs * n_users * n_sub,
                actual: small.len(),
            });
        }
        if large.iter().chain(&small).any(|g| !(*g > 0.0) || !g.is_finite()) {
            return Err(Error::InvalidArgument("channel gains must be positive and finite".into()));
        }
        Ok(Self {
            n_rrs,
            n_users,
            n_sub,
            large,
            small,
        })
    }

    #[inline]
    pub fn large(&self, b: usize, u: usize) -> f64 {
        self.large[b * self.n_users + u]
    }

    #[inline]
    pub fn small(&self, b: usize, u: usize, k: usize) -> f64 {
        self.small[(b * self.n_users + u) * self.n_sub + k]
    }

    #[inline]
    pub fn gain(&self, b: usize, u: usize, k: usize) -> f64 {
        self.large(b, u) * self.small(b, u, k)
    }

    pub fn small_gains(&self) -> &[f64] {
        &self.small
    }
}

/// Draws the channel tensor of `slot`. Small-scale gains are unit-mean
/// exponential (Rayleigh amplitude), drawn from a stream keyed by the user id.
pub fn sample_channels(
    topology: &Topology,
    users: &UserSet,
    pathloss: &PathLossModel,
    seed: u64,
    slot: u64,
) -> ChannelTensor {
    let n_rrs = topology.n_rrs();
    let n_users = users.len();
    let n_sub = topology.subcarriers;
    let mut large = vec![0.0; n_rrs * n_users];
    let mut small = vec![0.0; n_rrs * n_users * n_sub];
    for (u, user) in users.users.iter().enumerate() {
        let mut rng = substream(seed, Stream::Channels, &[slot, user.id]);
        for (b, rrs) in topology.rrs.iter().enumerate() {
            large[b * n_users + u] = pathloss
                .gain(user.position.distance(rrs.position))
                .expect("clamped distance is positive");
            let base = (b * n_users + u) * n_sub;
            for k in 0..n_sub {
                let x: f64 = Exp1.sample(&mut rng);
                small[base + k] = x.max(f64::MIN_POSITIVE);
            }
        }
    }
    ChannelTensor {
        n_rrs,
        n_users,
        n_sub,
        large,
        small,
    }
}
