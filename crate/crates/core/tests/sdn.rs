mod common;

use common::*;
use rand::Rng;
use softran::phy::{toc_centralized, toc_distributed};
use softran::rng::{substream, Stream};
use softran::sdn::{sdn_reward, SdnController, SdnSettings};
use softran::{Mode, ScenarioConfig, SlotRecord, TocWeights};

#[test]
fn positive_margin_is_learned_as_centralized() {
    let share = sdn_stationary_share(10.0, 400, 100, 1);
    assert!(share >= 0.9, "centralized share {share}");
}

#[test]
fn negative_margin_is_learned_as_distributed() {
    let share = sdn_stationary_share(-10.0, 400, 100, 1);
    assert!(share <= 0.1, "centralized share {share}");
}

#[test]
fn one_transition_per_learning_push() {
    let cfg = ScenarioConfig::desk();
    let mut settings = SdnSettings::from_config(&cfg);
    settings.batch_size = 8;
    settings.warmup = 8;
    let mut ctrl = SdnController::new(settings, substream(3, Stream::SdnAgent, &[])).unwrap();
    for t in 0..100u64 {
        let before = ctrl.buffer.len();
        let d = ctrl.decide(false).unwrap();
        ctrl.record(stationary_record(t, 1.0, 0.0, d.mode()), true).unwrap();
        assert_eq!(ctrl.buffer.len(), before + 1);
    }
    // Frozen pushes leave the buffer alone.
    let d = ctrl.decide(true).unwrap();
    ctrl.record(stationary_record(100, 1.0, 0.0, d.mode()), false).unwrap();
    assert_eq!(ctrl.buffer.len(), 100);
}

#[test]
fn reward_matches_recomputation() {
    let mut rng = substream(9, Stream::Test, &[]);
    for _ in 0..1000 {
        let n_rrs = rng.random_range(1..6);
        let w = TocWeights {
            alpha: rng.random_range(0.0..1e-3),
            beta: rng.random_range(0.0..50.0),
        };
        let tau_dst: Vec<u64> = (0..n_rrs).map(|_| rng.random_range(0..5000)).collect();
        let gamma_dst: Vec<u64> = (0..n_rrs).map(|_| rng.random_range(0..10_000_000)).collect();
        let tau_cnt = tau_dst.iter().sum();
        let gamma_cnt = rng.random_range(0..100_000_000);
        let (r_cnt, r_dst) = (rng.random_range(0.0..1e6), rng.random_range(0.0..1e6));
        let executed = if rng.random_bool(0.5) { Mode::Centralized } else { Mode::Distributed };
        let record = SlotRecord {
            slot: 0,
            r_cnt,
            r_dst,
            toc_cnt: toc_centralized(r_cnt, tau_cnt, gamma_cnt, &w),
            toc_dst: toc_distributed(r_dst, &tau_dst, &gamma_dst, &w).unwrap(),
            tau_cnt,
            tau_dst,
            gamma_cnt,
            gamma_dst,
            executed,
            user_counts: vec![1; n_rrs],
        };
        let expected = match executed {
            Mode::Centralized => toc_centralized(r_cnt, record.tau_cnt, gamma_cnt, &w),
            Mode::Distributed => toc_distributed(r_dst, &record.tau_dst, &record.gamma_dst, &w).unwrap(),
        };
        assert_eq!(sdn_reward(&record).unwrap() - expected, 0.0);
    }
}

#[test]
fn reward_passes_hand_example_through() {
    let w = TocWeights { alpha: 1e-6, beta: 0.01 };
    let toc = toc_centralized(100.0, 1536, 115_200, &w);
    let record = SlotRecord {
        slot: 0,
        r_cnt: 100.0,
        r_dst: 0.0,
        tau_cnt: 1536,
        tau_dst: vec![384; 4],
        gamma_cnt: 115_200,
        gamma_dst: vec![0; 4],
        toc_cnt: toc,
        toc_dst: 0.0,
        executed: Mode::Centralized,
        user_counts: vec![2; 4],
    };
    assert!((sdn_reward(&record).unwrap() - 84.5248).abs() <= 1e-12 * 84.5248);
}
