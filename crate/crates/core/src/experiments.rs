//! Figure presets and result export.
//!
//! Three CSV layouts are produced:
//!
//! * the result table, one row per (scheme, learner, user count, seed);
//! * a long-format plot file, one row per (figure, series, learner, user
//!   count, metric) with the across-seed mean and standard error;
//! * the per-run decision trace of the SDN controller.

use std::fmt;
use std::fs::{self, File};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::config::{Learner, ScenarioConfig, Scheme};
use crate::engine::{run_sweep_grid, Aggregates, RunResult, SweepResult, SweepSpec};
use crate::error::{Error, Result};
use crate::sdn::{sdn_reward, ModeDecision};

pub const RESULT_HEADER: [&str; 10] = [
    "scheme",
    "learner",
    "user_count",
    "seed",
    "mean_rate",
    "mean_tau_cnt",
    "mean_max_tau_dst",
    "mean_gamma_cnt",
    "mean_max_gamma_dst",
    "mean_toc",
];

pub const PLOT_HEADER: [&str; 7] = [
    "figure",
    "series",
    "learner",
    "user_count",
    "metric",
    "mean",
    "stderr",
];

pub const TRACE_HEADER: [&str; 5] = ["slot", "x_cnt", "toc_cnt", "toc_dst", "reward"];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Preset {
    Overhead,
    Rate,
    Toc,
}

impl Preset {
    pub const ALL: [Preset; 3] = [Preset::Overhead, Preset::Rate, Preset::Toc];

    pub fn as_str(self) -> &'static str {
        match self {
            Preset::Overhead => "overhead",
            Preset::Rate => "rate",
            Preset::Toc => "toc",
        }
    }

    /// Scenario the preset starts from, before any user config is applied.
    pub fn base_config(paper_scale: bool) -> ScenarioConfig {
        if paper_scale {
            ScenarioConfig::default()
        } else {
            ScenarioConfig::desk()
        }
    }

    /// Schemes, learners, user counts and seeds swept by this preset.
    pub fn plan(self, paper_scale: bool) -> SweepSpec {
        let user_counts = if paper_scale {
            (20..=200).step_by(20).collect()
        } else {
            (2..=24).step_by(2).collect()
        };
        let (schemes, learners) = match self {
            Preset::Overhead => (vec![Scheme::Smart], vec![Learner::Sac]),
            Preset::Rate => (
                vec![Scheme::FixedCentralized, Scheme::FixedDistributed, Scheme::Smart],
                vec![Learner::Sac, Learner::Dqn, Learner::Ddpg],
            ),
            Preset::Toc => (
                vec![Scheme::FixedCentralized, Scheme::FixedDistributed, Scheme::Smart],
                vec![Learner::Sac, Learner::Ddpg],
            ),
        };
        SweepSpec {
            user_counts,
            schemes,
            learners,
            seeds: (1..=5).collect(),
            workers: None,
        }
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Preset {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        Preset::ALL
            .into_iter()
            .find(|p| p.as_str() == s)
            .ok_or_else(|| format!("unknown preset `{s}` (expected overhead, rate or toc)"))
    }
}

/// Command-line adjustments to a preset's plan. `None` keeps the preset value.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct FigureOverrides {
    pub seeds: Option<usize>,
    pub slots: Option<usize>,
    pub schemes: Option<Vec<Scheme>>,
    pub learners: Option<Vec<Learner>>,
    pub user_counts: Option<Vec<usize>>,
    pub workers: Option<usize>,
    pub paper_scale: bool,
}

impl FigureOverrides {
    pub fn apply(&self, mut spec: SweepSpec, config: &mut ScenarioConfig) -> SweepSpec {
        if let Some(n) = self.seeds {
            spec.seeds = (1..=n as u64).collect();
        }
        if let Some(n) = self.slots {
            config.slots = n;
        }
        if let Some(s) = &self.schemes {
            spec.schemes = s.clone();
        }
        if let Some(l) = &self.learners {
            spec.learners = l.clone();
        }
        if let Some(u) = &self.user_counts {
            spec.user_counts = u.clone();
        }
        if self.workers.is_some() {
            spec.workers = self.workers;
        }
        spec
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub scheme: Scheme,
    pub learner: Learner,
    pub user_count: usize,
    pub seed: u64,
    pub mean_rate: f64,
    pub mean_tau_cnt: f64,
    pub mean_max_tau_dst: f64,
    pub mean_gamma_cnt: f64,
    pub mean_max_gamma_dst: f64,
    pub mean_toc: f64,
}

impl ResultRow {
    pub fn from_run(run: &RunResult) -> Self {
        let a = &run.aggregates;
        Self {
            scheme: run.scheme,
            learner: run.learner,
            user_count: run.user_count,
            seed: run.seed,
            mean_rate: a.mean_rate,
            mean_tau_cnt: a.mean_tau_cnt,
            mean_max_tau_dst: a.mean_max_tau_dst,
            mean_gamma_cnt: a.mean_gamma_cnt,
            mean_max_gamma_dst: a.mean_max_gamma_dst,
            mean_toc: a.mean_toc,
        }
    }

    fn is_finite(&self) -> bool {
        [
            self.mean_rate,
            self.mean_tau_cnt,
            self.mean_max_tau_dst,
            self.mean_gamma_cnt,
            self.mean_max_gamma_dst,
            self.mean_toc,
        ]
        .iter()
        .all(|v| v.is_finite())
    }
}

/// Successful runs of a sweep as result rows, in cell order.
pub fn result_rows(sweep: &SweepResult) -> Vec<ResultRow> {
    sweep.successes().map(|(_, run)| ResultRow::from_run(run)).collect()
}

pub fn write_result_table<W: Write>(rows: &[ResultRow], out: W) -> Result<()> {
    if let Some(bad) = rows.iter().find(|r| !r.is_finite()) {
        return Err(Error::NonFinite(format!(
            "result row {} {} users={} seed={}",
            bad.scheme, bad.learner, bad.user_count, bad.seed
        )));
    }
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    w.write_record(RESULT_HEADER)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_result_table<R: std::io::Read>(input: R) -> Result<Vec<ResultRow>> {
    let mut r = csv::Reader::from_reader(input);
    let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    if header != RESULT_HEADER {
        return Err(Error::InvalidArgument(format!(
            "unexpected result header {header:?}"
        )));
    }
    r.deserialize().map(|row| row.map_err(Error::from)).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlotRow {
    pub figure: String,
    pub series: String,
    pub learner: Learner,
    pub user_count: usize,
    pub metric: String,
    pub mean: f64,
    pub stderr: f64,
}

fn series_name(scheme: Scheme) -> &'static str {
    match scheme {
        Scheme::FixedCentralized => "centralized",
        Scheme::FixedDistributed => "distributed",
        Scheme::Smart => "smart",
        Scheme::EqualPowerBaseline => "equal-power",
    }
}

/// Across-seed summaries for the preset's figure.
pub fn plot_rows(preset: Preset, sweep: &SweepResult) -> Vec<PlotRow> {
    type Metric = fn(&Aggregates) -> f64;
    let mut rows = Vec::new();
    let mut push = |series: &str, metric: &str, f: Metric, only: Option<Scheme>| {
        for ((scheme, learner, users), est) in sweep.summarize(f) {
            if only.is_some_and(|s| s != scheme) {
                continue;
            }
            rows.push(PlotRow {
                figure: preset.as_str().to_string(),
                series: if series.is_empty() {
                    series_name(scheme).to_string()
                } else {
                    series.to_string()
                },
                learner,
                user_count: users,
                metric: metric.to_string(),
                mean: est.mean,
                stderr: est.stderr,
            });
        }
    };
    match preset {
        Preset::Overhead => {
            // The analytic curves do not depend on the scheme; take them
            // from the first one swept.
            let first = sweep.cells.first().map(|c| c.scheme);
            push("centralized", "overhead", |a| a.mean_tau_cnt, first);
            push("distributed", "overhead", |a| a.mean_max_tau_dst, first);
            push("", "overhead", |a| a.mean_tau_executed, None);
            push("centralized", "complexity", |a| a.mean_gamma_cnt, first);
            push("distributed", "complexity", |a| a.mean_max_gamma_dst, first);
            push("", "complexity", |a| a.mean_gamma_executed, None);
        }
        Preset::Rate => push("", "rate", |a| a.mean_rate, None),
        Preset::Toc => push("", "toc", |a| a.mean_toc, None),
    }
    rows
}

pub fn write_plot_rows<W: Write>(rows: &[PlotRow], out: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    w.write_record(PLOT_HEADER)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub slot: u64,
    pub x_cnt: u8,
    pub toc_cnt: f64,
    pub toc_dst: f64,
    pub reward: f64,
}

pub fn trace_rows(run: &RunResult) -> Result<Vec<TraceRow>> {
    run.records
        .iter()
        .map(|r| {
            Ok(TraceRow {
                slot: r.slot,
                x_cnt: ModeDecision::from_mode(r.executed).x_cnt,
                toc_cnt: r.toc_cnt,
                toc_dst: r.toc_dst,
                reward: sdn_reward(r)?,
            })
        })
        .collect()
}

pub fn write_decision_trace<W: Write>(run: &RunResult, out: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    w.write_record(TRACE_HEADER)?;
    for r in trace_rows(run)? {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_run_json(run: &RunResult, path: impl AsRef<Path>) -> Result<()> {
    let file = File::create(path)?;
    serde_json::to_writer_pretty(std::io::BufWriter::new(file), run)?;
    Ok(())
}

/// Files written by [`cmd_figure`] together with the sweep behind them.
#[derive(Debug)]
pub struct FigureOutput {
    pub table: PathBuf,
    pub plot: PathBuf,
    pub sweep: SweepResult,
}

/// Runs a preset's sweep on top of `config` and writes
/// `<preset>_results.csv` and `<preset>_plot.csv` into `out_dir`.
pub fn cmd_figure(
    preset: Preset,
    config: &ScenarioConfig,
    overrides: &FigureOverrides,
    out_dir: impl AsRef<Path>,
) -> Result<FigureOutput> {
    let mut config = config.clone();
    let spec = overrides.apply(preset.plan(overrides.paper_scale), &mut config);
    config.validate()?;
    let sweep = run_sweep_grid(&config, &spec)?;

    let out_dir = out_dir.as_ref();
    fs::create_dir_all(out_dir)?;
    let table = out_dir.join(format!("{preset}_results.csv"));
    let plot = out_dir.join(format!("{preset}_plot.csv"));
    write_result_table(&result_rows(&sweep), File::create(&table)?)?;
    write_plot_rows(&plot_rows(preset, &sweep), File::create(&plot)?)?;
    Ok(FigureOutput { table, plot, sweep })
}
