//! Scenario configuration and its flat `key = value` file format.
//!
//! ```text
//! # comment
//! n_rrs = 2
//! subcarriers = 8
//! hidden_layers = 64,64
//! scheme = smart
//! ```
//!
//! Every key is optional; missing keys take the defaults of
//! [`ScenarioConfig::default`]. Unknown keys are errors. Any key may also be
//! overridden through an environment variable named `SOFTRAN_<KEY>` with the
//! key upper-cased (see [`ScenarioConfig::apply_env`]).

use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::phy::{BitBudget, TocWeights};

pub const ENV_PREFIX: &str = "SOFTRAN_";

/// Which mode-selection policy a run uses.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    /// SDN controller picks the mode each slot; allocations by the learner.
    Smart,
    FixedCentralized,
    FixedDistributed,
    /// SDN controller picks the mode; both modes allocate with equal power.
    EqualPowerBaseline,
}

impl Scheme {
    pub const ALL: [Scheme; 4] = [
        Scheme::Smart,
        Scheme::FixedCentralized,
        Scheme::FixedDistributed,
        Scheme::EqualPowerBaseline,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Scheme::Smart => "smart",
            Scheme::FixedCentralized => "fixed-centralized",
            Scheme::FixedDistributed => "fixed-distributed",
            Scheme::EqualPowerBaseline => "equal-power-baseline",
        }
    }

    pub fn uses_sdn(self) -> bool {
        matches!(self, Scheme::Smart | Scheme::EqualPowerBaseline)
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Scheme {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        Scheme::ALL
            .into_iter()
            .find(|v| v.as_str() == s)
            .ok_or_else(|| format!("unknown scheme `{s}`"))
    }
}

/// Learning algorithm behind the resource allocators.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Learner {
    Sac,
    Dqn,
    Ddpg,
}

impl Learner {
    pub const ALL: [Learner; 3] = [Learner::Sac, Learner::Dqn, Learner::Ddpg];

    pub fn as_str(self) -> &'static str {
        match self {
            Learner::Sac => "sac",
            Learner::Dqn => "dqn",
            Learner::Ddpg => "ddpg",
        }
    }
}

impl fmt::Display for Learner {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Learner {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        Learner::ALL
            .into_iter()
            .find(|v| v.as_str() == s)
            .ok_or_else(|| format!("unknown learner `{s}`"))
    }
}

/// Everything needed to run one scenario.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    // topology
    pub n_rrs: usize,
    pub area_radius_m: f64,
    pub cell_radius_m: f64,
    pub subcarriers: usize,
    pub p_max_dbm: f64,
    pub subcarrier_bandwidth_hz: f64,
    pub noise_dbm_per_hz: f64,
    pub path_loss_exponent: f64,
    /// SNR of a cell-edge user receiving the full RRS power on one
    /// subcarrier; fixes the path-loss reference gain.
    pub edge_snr_db: f64,
    pub min_distance_m: f64,

    // population
    pub n_users: usize,
    pub arrival_rate: f64,
    pub departure_prob: f64,
    pub max_users: usize,

    // overhead and TOC
    pub bits_power: u64,
    pub bits_csi: u64,
    pub bits_subcarriers: u64,
    pub toc_alpha: f64,
    pub toc_beta: f64,

    // learners
    pub hidden_layers: Vec<usize>,
    pub learning_rate: f64,
    pub discount: f64,
    pub target_update_rate: f64,
    pub batch_size: usize,
    pub buffer_capacity: usize,
    pub init_temperature: f64,
    pub dqn_epsilon: f64,
    pub ddpg_noise: f64,
    pub sdn_discount: f64,

    // run
    pub train_episodes: usize,
    pub slots: usize,
    pub memory_slots: usize,
    pub seed: u64,
    pub agent_seed: u64,
    pub scheme: Scheme,
    pub learner: Learner,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            n_rrs: 4,
            area_radius_m: 500.0,
            cell_radius_m: 100.0,
            subcarriers: 32,
            p_max_dbm: 40.0,
            subcarrier_bandwidth_hz: 15_000.0,
            noise_dbm_per_hz: -174.0,
            path_loss_exponent: 3.0,
            edge_snr_db: 20.0,
            min_distance_m: 1.0,

            n_users: 8,
            arrival_rate: 0.0,
            departure_prob: 0.0,
            max_users: 64,

            bits_power: 4,
            bits_csi: 16,
            bits_subcarriers: 4,
            toc_alpha: DEFAULT_TOC_ALPHA,
            toc_beta: DEFAULT_TOC_BETA,

            hidden_layers: vec![64, 64],
            learning_rate: 3e-4,
            discount: 0.99,
            target_update_rate: 0.005,
            batch_size: 64,
            buffer_capacity: 100_000,
            init_temperature: 0.2,
            dqn_epsilon: 0.1,
            ddpg_noise: 0.1,
            sdn_discount: 0.99,

            train_episodes: 200,
            slots: 2000,
            memory_slots: 10,
            seed: 1,
            agent_seed: 0,
            scheme: Scheme::Smart,
            learner: Learner::Sac,
        }
    }
}

/// Overhead weight in TOC units per bit. With the desk scenario
/// (2 RRSs, 8 subcarriers, 8 users, equal power) the overhead term is about
/// a tenth of the centralized rate.
pub const DEFAULT_TOC_BETA: f64 = 13.0;
/// Complexity weight in TOC units per multiply.
pub const DEFAULT_TOC_ALPHA: f64 = 2.0e-6;

pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

impl ScenarioConfig {
    /// The reduced scenario used by the figure presets and CI.
    pub fn desk() -> Self {
        Self {
            n_rrs: 2,
            subcarriers: 8,
            seed: 1,
            ..Self::default()
        }
    }

    pub fn p_max_watts(&self) -> f64 {
        dbm_to_watts(self.p_max_dbm)
    }

    /// Noise power per subcarrier in watts.
    pub fn noise_power(&self) -> f64 {
        dbm_to_watts(self.noise_dbm_per_hz) * self.subcarrier_bandwidth_hz
    }

    pub fn bit_budget(&self) -> BitBudget {
        BitBudget {
            power: self.bits_power,
            csi: self.bits_csi,
            subcarriers: self.bits_subcarriers,
        }
    }

    pub fn toc_weights(&self) -> TocWeights {
        TocWeights {
            alpha: self.toc_alpha,
            beta: self.toc_beta,
        }
    }

    pub fn traffic_enabled(&self) -> bool {
        self.arrival_rate > 0.0 || self.departure_prob > 0.0
    }

    /// Number of user slots the allocator networks are sized for.
    pub fn user_capacity(&self) -> usize {
        if self.traffic_enabled() {
            self.max_users.max(self.n_users)
        } else {
            self.n_users
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: &str| Err(Error::InvalidConfig(m.to_string()));
        if self.n_rrs == 0 {
            return fail("n_rrs must be at least 1");
        }
        if !(self.area_radius_m > 0.0) || !(self.cell_radius_m > 0.0) {
            return fail("radii must be positive");
        }
        if self.subcarriers == 0 {
            return fail("subcarriers must be at least 1");
        }
        if !self.p_max_dbm.is_finite() || !self.noise_dbm_per_hz.is_finite() {
            return fail("power levels must be finite");
        }
        if !(self.subcarrier_bandwidth_hz > 0.0) {
            return fail("subcarrier_bandwidth_hz must be positive");
        }
        if !(self.path_loss_exponent > 0.0) || !self.edge_snr_db.is_finite() {
            return fail("path loss parameters must be positive and finite");
        }
        if !(self.min_distance_m > 0.0) {
            return fail("min_distance_m must be positive");
        }
        if !(self.arrival_rate >= 0.0) || !self.arrival_rate.is_finite() {
            return fail("arrival_rate must be finite and non-negative");
        }
        if !(0.0..=1.0).contains(&self.departure_prob) {
            return fail("departure_prob must lie in [0, 1]");
        }
        if self.traffic_enabled() && self.max_users == 0 {
            return fail("max_users must be positive when traffic is enabled");
        }
        if !(self.toc_alpha >= 0.0) || !(self.toc_beta >= 0.0) {
            return fail("TOC weights must be non-negative");
        }
        if self.hidden_layers.is_empty() || self.hidden_layers.contains(&0) {
            return fail("hidden_layers needs at least one positive layer size");
        }
        if !(self.learning_rate >= 0.0) || !self.learning_rate.is_finite() {
            return fail("learning_rate must be finite and non-negative");
        }
        for (name, v) in [
            ("discount", self.discount),
            ("sdn_discount", self.sdn_discount),
            ("target_update_rate", self.target_update_rate),
            ("dqn_epsilon", self.dqn_epsilon),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::InvalidConfig(format!("{name} must lie in [0, 1]")));
            }
        }
        if !(self.init_temperature >= 0.0) || !(self.ddpg_noise >= 0.0) {
            return fail("init_temperature and ddpg_noise must be non-negative");
        }
        if self.batch_size == 0 || self.buffer_capacity < self.batch_size {
            return fail("need 0 < batch_size <= buffer_capacity");
        }
        if self.memory_slots == 0 {
            return fail("memory_slots must be at least 1");
        }
        Ok(())
    }

    /// Parses a config file; missing keys keep their defaults.
    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let text = fs::read_to_string(path.as_ref())?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self> {
        Self::parse_over(Self::default(), text)
    }

    /// Applies the assignments in `text` on top of `base` and validates.
    pub fn parse_over(mut base: Self, text: &str) -> Result<Self> {
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(Error::ConfigParse {
                    line: line_no,
                    key: line.to_string(),
                    message: "expected `key = value`".into(),
                });
            };
            base.set(key.trim(), value.trim(), line_no)?;
        }
        base.validate()?;
        Ok(base)
    }

    /// Applies `SOFTRAN_<KEY>` overrides from the given environment.
    pub fn apply_env<I>(&mut self, vars: I) -> Result<()>
    where
        I: IntoIterator<Item = (String, String)>,
    {
        for (name, value) in vars {
            let Some(key) = name.strip_prefix(ENV_PREFIX) else {
                continue;
            };
            let key = key.to_ascii_lowercase();
            if KEYS.contains(&key.as_str()) {
                self.set(&key, value.trim(), 0)?;
            }
        }
        self.validate()
    }

    /// Sets one key from its textual value. `line` is only used in errors.
    pub fn set(&mut self, key: &str, value: &str, line: usize) -> Result<()> {
        fn num<T: FromStr>(key: &str, value: &str, line: usize) -> Result<T>
        where
            T::Err: fmt::Display,
        {
            value.parse::<T>().map_err(|e| Error::ConfigParse {
                line,
                key: key.to_string(),
                message: format!("cannot parse `{value}`: {e}"),
            })
        }
        let enum_err = |message: String| Error::ConfigParse {
            line,
            key: key.to_string(),
            message,
        };
        match key {
            "n_rrs" => self.n_rrs = num(key, value, line)?,
            "area_radius_m" => self.area_radius_m = num(key, value, line)?,
            "cell_radius_m" => self.cell_radius_m = num(key, value, line)?,
            "subcarriers" => self.subcarriers = num(key, value, line)?,
            "p_max_dbm" => self.p_max_dbm = num(key, value, line)?,
            "subcarrier_bandwidth_hz" => self.subcarrier_bandwidth_hz = num(key, value, line)?,
            "noise_dbm_per_hz" => self.noise_dbm_per_hz = num(key, value, line)?,
            "path_loss_exponent" => self.path_loss_exponent = num(key, value, line)?,
            "edge_snr_db" => self.edge_snr_db = num(key, value, line)?,
            "min_distance_m" => self.min_distance_m = num(key, value, line)?,
            "n_users" => self.n_users = num(key, value, line)?,
            "arrival_rate" => self.arrival_rate = num(key, value, line)?,
            "departure_prob" => self.departure_prob = num(key, value, line)?,
            "max_users" => self.max_users = num(key, value, line)?,
            "bits_power" => self.bits_power = num(key, value, line)?,
            "bits_csi" => self.bits_csi = num(key, value, line)?,
            "bits_subcarriers" => self.bits_subcarriers = num(key, value, line)?,
            "toc_alpha" => self.toc_alpha = num(key, value, line)?,
            "toc_beta" => self.toc_beta = num(key, value, line)?,
            "hidden_layers" => {
                self.hidden_layers = value
                    .split(',')
                    .map(|s| num::<usize>(key, s.trim(), line))
                    .collect::<Result<_>>()?
            }
            "learning_rate" => self.learning_rate = num(key, value, line)?,
            "discount" => self.discount = num(key, value, line)?,
            "target_update_rate" => self.target_update_rate = num(key, value, line)?,
            "batch_size" => self.batch_size = num(key, value, line)?,
            "buffer_capacity" => self.buffer_capacity = num(key, value, line)?,
            "init_temperature" => self.init_temperature = num(key, value, line)?,
            "dqn_epsilon" => self.dqn_epsilon = num(key, value, line)?,
            "ddpg_noise" => self.ddpg_noise = num(key, value, line)?,
            "sdn_discount" => self.sdn_discount = num(key, value, line)?,
            "train_episodes" => self.train_episodes = num(key, value, line)?,
            "slots" => self.slots = num(key, value, line)?,
            "memory_slots" => self.memory_slots = num(key, value, line)?,
            "seed" => self.seed = num(key, value, line)?,
            "agent_seed" => self.agent_seed = num(key, value, line)?,
            "scheme" => self.scheme = value.parse().map_err(enum_err)?,
            "learner" => self.learner = value.parse().map_err(enum_err)?,
            _ => {
                return Err(Error::UnknownKey {
                    line,
                    key: key.to_string(),
                })
            }
        }
        Ok(())
    }

    /// Writes every key in canonical order; `parse` of the output gives
    /// back an identical config.
    pub fn to_kv_string(&self) -> String {
        let hidden = self
            .hidden_layers
            .iter()
            .map(|l| l.to_string())
            .collect::<Vec<_>>()
            .join(",");
        let values: Vec<(&str, String)> = vec![
            ("n_rrs", self.n_rrs.to_string()),
            ("area_radius_m", self.area_radius_m.to_string()),
            ("cell_radius_m", self.cell_radius_m.to_string()),
            ("subcarriers", self.subcarriers.to_string()),
            ("p_max_dbm", self.p_max_dbm.to_string()),
            ("subcarrier_bandwidth_hz", self.subcarrier_bandwidth_hz.to_string()),
            ("noise_dbm_per_hz", self.noise_dbm_per_hz.to_string()),
            ("path_loss_exponent", self.path_loss_exponent.to_string()),
            ("edge_snr_db", self.edge_snr_db.to_string()),
            ("min_distance_m", self.min_distance_m.to_string()),
            ("n_users", self.n_users.to_string()),
            ("arrival_rate", self.arrival_rate.to_string()),
            ("departure_prob", self.departure_prob.to_string()),
            ("max_users", self.max_users.to_string()),
            ("bits_power", self.bits_power.to_string()),
            ("bits_csi", self.bits_csi.to_string()),
            ("bits_subcarriers", self.bits_subcarriers.to_string()),
            ("toc_alpha", self.toc_alpha.to_string()),
            ("toc_beta", self.toc_beta.to_string()),
            ("hidden_layers", hidden),
            ("learning_rate", self.learning_rate.to_string()),
            ("discount", self.discount.to_string()),
            ("target_update_rate", self.target_update_rate.to_string()),
            ("batch_size", self.batch_size.to_string()),
            ("buffer_capacity", self.buffer_capacity.to_string()),
            ("init_temperature", self.init_temperature.to_string()),
            ("dqn_epsilon", self.dqn_epsilon.to_string()),
            ("ddpg_noise", self.ddpg_noise.to_string()),
            ("sdn_discount", self.sdn_discount.to_string()),
            ("train_episodes", self.train_episodes.to_string()),
            ("slots", self.slots.to_string()),
            ("memory_slots", self.memory_slots.to_string()),
            ("seed", self.seed.to_string()),
            ("agent_seed", self.agent_seed.to_string()),
            ("scheme", self.scheme.to_string()),
            ("learner", self.learner.to_string()),
        ];
        let mut out = String::new();
        for (k, v) in &values {
            out.push_str(k);
            out.push_str(" = ");
            out.push_str(v);
            out.push('\n');
        }
        out
    }
}

/// All recognised keys, in canonical order.
pub const KEYS: [&str; 36] = [
    "n_rrs",
    "area_radius_m",
    "cell_radius_m",
    "subcarriers",
    "p_max_dbm",
    "subcarrier_bandwidth_hz",
    "noise_dbm_per_hz",
    "path_loss_exponent",
    "edge_snr_db",
    "min_distance_m",
    "n_users",
    "arrival_rate",
    "departure_prob",
    "max_users",
    "bits_power",
    "bits_csi",
    "bits_subcarriers",
    "toc_alpha",
    "toc_beta",
    "hidden_layers",
    "learning_rate",
    "discount",
    "target_update_rate",
    "batch_size",
    "buffer_capacity",
    "init_temperature",
    "dqn_epsilon",
    "ddpg_noise",
    "sdn_discount",
    "train_episodes",
    "slots",
    "memory_slots",
    "seed",
    "agent_seed",
    "scheme",
    "learner",
];
