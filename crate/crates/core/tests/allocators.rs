use proptest::prelude::*;
use softran::alloc::{
    decode_action, observe_centralized, observe_distributed, pair_rates_centralized,
    pair_rates_distributed, Scope, ScopeLearner,
};
use softran::netmodel::{generate_topology, Point, User};
use softran::phy::{rate_total_centralized, rate_total_distributed};
use softran::rng::{substream, Stream};
use softran::{ChannelTensor, ComplexityShape, Learner, Mode, ScenarioConfig, Topology, UserSet};

fn topology(n_rrs: usize, subcarriers: usize) -> (ScenarioConfig, Topology) {
    let mut c = ScenarioConfig::desk();
    c.n_rrs = n_rrs;
    c.subcarriers = subcarriers;
    let t = generate_topology(&c, 1).unwrap();
    (c, t)
}

fn users_with_serving(serving: &[usize], n_rrs: usize) -> UserSet {
    UserSet {
        users: serving
            .iter()
            .enumerate()
            .map(|(i, &b)| User {
                id: i as u64,
                position: Point::new(0.0, 0.0),
                serving: b,
            })
            .collect(),
        n_rrs,
        next_id: serving.len() as u64,
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn decoded_actions_are_feasible(
        counts in prop::collection::vec(0usize..5, 1..4),
        k in 1usize..6,
        seed in any::<u64>(),
    ) {
        let (_, topo) = topology(counts.len(), k);
        let serving: Vec<usize> = counts.iter().enumerate().flat_map(|(b, &n)| vec![b; n]).collect();
        let users = users_with_serving(&serving, counts.len());
        let scope = Scope::centralized(&topo, &users, &counts).unwrap();
        let mut rng = substream(seed, Stream::Test, &[]);
        let raw: Vec<f64> = (0..scope.action_dim()).map(|_| rand::Rng::random_range(&mut rng, -1.0..=1.0)).collect();
        let mut alloc = scope.empty_allocation(Mode::Centralized);
        decode_action(&raw, &scope, &mut alloc).unwrap();
        for (b, &n) in counts.iter().enumerate() {
            let p_max = topo.rrs[b].p_max;
            if n == 0 {
                prop_assert_eq!(alloc.total_power(b), 0.0);
                continue;
            }
            prop_assert!((alloc.total_power(b) - p_max).abs() <= 1e-9 * p_max);
            for kk in 0..k {
                let assigned: Vec<usize> = (0..users.len()).filter(|&u| alloc.rho(b, u, kk)).collect();
                prop_assert_eq!(assigned.len(), 1);
                prop_assert_eq!(serving[assigned[0]], b);
            }
        }
    }
}

/// One RRS, one subcarrier, two users with gains 1 and 100: serving the
/// second user is strictly rate-optimal.
fn two_user_channels(n_rrs: usize) -> ChannelTensor {
    let n_users = 2 * n_rrs;
    let mut large = vec![1e-3; n_rrs * n_users];
    for b in 0..n_rrs {
        large[b * n_users + 2 * b] = 1.0;
        large[b * n_users + 2 * b + 1] = 100.0;
    }
    ChannelTensor::from_parts(n_rrs, n_users, 1, large, vec![1.0; n_rrs * n_users]).unwrap()
}

fn exhaustive_best(channels: &ChannelTensor, b: usize, noise: f64) -> usize {
    let (u0, u1) = (2 * b, 2 * b + 1);
    let rate = |u: usize| (1.0 + channels.gain(b, u, 0) / noise).log2();
    if rate(u1) > rate(u0) {
        u1
    } else {
        u0
    }
}

#[test]
fn centralized_agent_learns_strong_user() {
    let (mut config, topo) = topology(1, 1);
    config.batch_size = 16;
    let users = users_with_serving(&[0, 0], 1);
    let ch = two_user_channels(1);
    let noise = 1.0;
    assert_eq!(exhaustive_best(&ch, 0, noise), 1);
    let scope = Scope::centralized(&topo, &users, &users.counts()).unwrap();
    let rng = substream(1, Stream::CentralizedAgent, &[0]);
    let mut learner = ScopeLearner::new(Learner::Sac, &scope, Mode::Centralized, &config, rng).unwrap();
    for _ in 0..200 {
        let obs = observe_centralized(&ch, &scope, noise);
        let mut alloc = scope.empty_allocation(Mode::Centralized);
        learner.act(&obs, &scope, true, &mut alloc).unwrap();
        learner.learn(&scope, &pair_rates_centralized(&ch, &alloc, noise)).unwrap();
    }
    assert!(learner.updates() > 0);
    let mut strong = 0;
    for _ in 0..100 {
        let obs = observe_centralized(&ch, &scope, noise);
        let mut alloc = scope.empty_allocation(Mode::Centralized);
        learner.act(&obs, &scope, false, &mut alloc).unwrap();
        strong += usize::from(alloc.rho(0, 1, 0));
    }
    assert!(strong >= 90, "strong user chosen {strong}/100");
}

#[test]
fn each_local_agent_learns_its_strong_user() {
    let (mut config, topo) = topology(2, 1);
    config.batch_size = 16;
    let users = users_with_serving(&[0, 0, 1, 1], 2);
    let ch = two_user_channels(2);
    let noise = 1.0;
    let counts = users.counts();
    let scopes: Vec<Scope> = (0..2).map(|b| Scope::distributed(&topo, &users, b, 2).unwrap()).collect();
    let mut learners: Vec<ScopeLearner> = (0..2)
        .map(|b| {
            let rng = substream(1, Stream::DistributedAgent, &[0, b as u64]);
            ScopeLearner::new(Learner::Sac, &scopes[b], Mode::Distributed, &config, rng).unwrap()
        })
        .collect();
    let mut strong = [0; 2];
    for t in 0..300 {
        let explore = t < 200;
        let mut alloc = scopes[0].empty_allocation(Mode::Distributed);
        for (learner, scope) in learners.iter_mut().zip(&scopes) {
            let obs = observe_distributed(&ch, &topo, &counts, scope, noise);
            learner.act(&obs, scope, explore, &mut alloc).unwrap();
        }
        let rates = pair_rates_distributed(&ch, &alloc, &topo, &users, noise);
        if explore {
            for (learner, scope) in learners.iter_mut().zip(&scopes) {
                learner.learn(scope, &rates).unwrap();
            }
        } else {
            for (b, s) in strong.iter_mut().enumerate() {
                assert_eq!(exhaustive_best(&ch, b, noise), 2 * b + 1);
                *s += usize::from(alloc.rho(b, 2 * b + 1, 0));
            }
        }
    }
    assert!(strong.iter().all(|&s| s >= 90), "{strong:?}");
}

#[test]
fn local_agents_only_touch_their_own_cell() {
    let (config, topo) = topology(2, 3);
    let users = users_with_serving(&[0, 1, 0, 1, 1], 2);
    let scope = Scope::distributed(&topo, &users, 1, 3).unwrap();
    let rng = substream(2, Stream::DistributedAgent, &[0, 1]);
    let mut learner = ScopeLearner::new(Learner::Sac, &scope, Mode::Distributed, &config, rng).unwrap();
    let large: Vec<f64> = (0..10).map(|i| 1.0 + i as f64).collect();
    let ch = ChannelTensor::from_parts(2, 5, 3, large, vec![1.0; 30]).unwrap();
    let obs = observe_distributed(&ch, &topo, &users.counts(), &scope, 1.0);
    let mut alloc = scope.empty_allocation(Mode::Distributed);
    learner.act(&obs, &scope, true, &mut alloc).unwrap();
    assert_eq!(alloc.total_power(0), 0.0);
    assert!((alloc.total_power(1) - topo.rrs[1].p_max).abs() <= 1e-9 * topo.rrs[1].p_max);
}

#[test]
fn single_rrs_modes_coincide() {
    let (_, topo) = topology(1, 4);
    let users = users_with_serving(&[0, 0, 0], 1);
    let small: Vec<f64> = (0..12).map(|i| 0.5 + 0.1 * i as f64).collect();
    let ch = ChannelTensor::from_parts(1, 3, 4, vec![2.0, 3.0, 5.0], small).unwrap();
    let noise = 0.7;
    let cnt_scope = Scope::centralized(&topo, &users, &users.counts()).unwrap();
    let dst_scope = Scope::distributed(&topo, &users, 0, 3).unwrap();
    let oc = observe_centralized(&ch, &cnt_scope, noise);
    let od = observe_distributed(&ch, &topo, &users.counts(), &dst_scope, noise);
    assert_eq!(oc.features, od.features);
    assert_eq!(oc.prior, od.prior);

    let raw: Vec<f64> = (0..cnt_scope.action_dim()).map(|i| ((i * 7) % 5) as f64 / 5.0 - 0.4).collect();
    let mut a = cnt_scope.empty_allocation(Mode::Centralized);
    let mut b = dst_scope.empty_allocation(Mode::Distributed);
    decode_action(&raw, &cnt_scope, &mut a).unwrap();
    decode_action(&raw, &dst_scope, &mut b).unwrap();
    let rc = rate_total_centralized(&ch, &a, noise);
    let rd = rate_total_distributed(&ch, &b, &topo, &users, noise);
    assert!((rc - rd).abs() <= 1e-12 * rc);
}

#[test]
fn observation_sizes_match_complexity_inputs() {
    let (_, topo) = topology(2, 8);
    let users = users_with_serving(&[0, 1, 1, 0, 1], 2);
    let counts = users.counts();
    let large: Vec<f64> = (0..10).map(|i| 1.0 + i as f64).collect();
    let ch = ChannelTensor::from_parts(2, 5, 8, large, vec![1.0; 80]).unwrap();
    let cnt = Scope::centralized(&topo, &users, &counts).unwrap();
    let shape = ComplexityShape::centralized(1, 1, &[64, 64], users.len(), 8, 2);
    assert_eq!(observe_centralized(&ch, &cnt, 1.0).features.len(), shape.input);
    for b in 0..2 {
        let scope = Scope::distributed(&topo, &users, b, counts[b]).unwrap();
        let shape = ComplexityShape::distributed(1, 1, &[64, 64], counts[b], 8);
        let obs = observe_distributed(&ch, &topo, &counts, &scope, 1.0);
        assert_eq!(obs.features.len(), shape.input);
    }
}
