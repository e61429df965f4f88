use std::collections::BTreeSet;
use std::fs;

use softran::experiments::{
    cmd_figure, read_result_table, write_decision_trace, write_run_json, FigureOverrides, Preset,
    PLOT_HEADER, RESULT_HEADER, TRACE_HEADER,
};
use softran::{run_episode, Learner, RunResult, ScenarioConfig};

fn tiny() -> ScenarioConfig {
    let mut c = ScenarioConfig::desk();
    c.train_episodes = 10;
    c.batch_size = 4;
    c
}

fn overrides() -> FigureOverrides {
    FigureOverrides {
        seeds: Some(2),
        slots: Some(10),
        user_counts: Some(vec![2, 6]),
        workers: Some(2),
        ..Default::default()
    }
}

#[test]
fn overhead_preset_is_deterministic_and_has_all_series() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let out_a = cmd_figure(Preset::Overhead, &tiny(), &overrides(), a.path()).unwrap();
    let out_b = cmd_figure(Preset::Overhead, &tiny(), &overrides(), b.path()).unwrap();
    assert_eq!(fs::read(&out_a.table).unwrap(), fs::read(&out_b.table).unwrap());
    assert_eq!(fs::read(&out_a.plot).unwrap(), fs::read(&out_b.plot).unwrap());

    let table = fs::read_to_string(&out_a.table).unwrap();
    assert_eq!(table.lines().next().unwrap(), RESULT_HEADER.join(","));
    let rows = read_result_table(table.as_bytes()).unwrap();
    assert_eq!(rows.len(), 4);

    let plot = fs::read_to_string(&out_a.plot).unwrap();
    assert_eq!(plot.lines().next().unwrap(), PLOT_HEADER.join(","));
    let series: BTreeSet<(String, String)> = plot
        .lines()
        .skip(1)
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            (f[1].to_string(), f[4].to_string())
        })
        .collect();
    for s in ["centralized", "distributed", "smart"] {
        for m in ["overhead", "complexity"] {
            assert!(series.contains(&(s.to_string(), m.to_string())), "missing {s}/{m}");
        }
    }
}

#[test]
fn toc_preset_has_per_learner_curves() {
    let dir = tempfile::tempdir().unwrap();
    let mut o = overrides();
    o.seeds = Some(1);
    o.user_counts = Some(vec![4]);
    let out = cmd_figure(Preset::Toc, &tiny(), &o, dir.path()).unwrap();
    let plot = fs::read_to_string(&out.plot).unwrap();
    let learners: BTreeSet<&str> = plot.lines().skip(1).map(|l| l.split(',').nth(2).unwrap()).collect();
    assert_eq!(learners, BTreeSet::from(["ddpg", "sac"]));
    let series: BTreeSet<&str> = plot.lines().skip(1).map(|l| l.split(',').nth(1).unwrap()).collect();
    assert_eq!(series, BTreeSet::from(["centralized", "distributed", "smart"]));
    assert!(out.sweep.successes().all(|(c, _)| matches!(c.learner, Learner::Sac | Learner::Ddpg)));
}

#[test]
fn decision_trace_and_json_export() {
    let mut c = tiny();
    c.slots = 15;
    c.n_users = 4;
    let run = run_episode(&c, 1).unwrap();
    let mut buf = Vec::new();
    write_decision_trace(&run, &mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), TRACE_HEADER.join(","));
    assert_eq!(lines.count(), 15);

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("run.json");
    write_run_json(&run, &path).unwrap();
    let back: RunResult = serde_json::from_str(&fs::read_to_string(&path).unwrap()).unwrap();
    assert_eq!(back, run);
}
