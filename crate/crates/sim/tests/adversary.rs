use std::collections::BTreeSet;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rrr_analysis::{any_of, binomial_tail, pr_ae, pr_bfs};
use rrr_core::crypto::{hash_parts, Digest};
use rrr_core::fixtures::{keypairs, small_params};
use rrr_core::params::ProtocolParams;
use rrr_core::selection::{sample_slots, select_endorsers};
use rrr_core::vrf_evaluate;
use rrr_sim::adversary::{
    bias_monte_carlo, grind_seed, simulate_bias_baseline, BiasConfig, GrindError, GrindSpec, BIAS_CSV_HEADER,
};
use rrr_sim::{AdversaryConfig, NetConfig, Placement, SimConfig, SimReport, Simulation, Strategy};

fn cfg(params: ProtocolParams, nodes: u32, rounds: u64, seed: u64, adversary: AdversaryConfig) -> SimConfig {
    SimConfig {
        params,
        net: NetConfig {
            nodes,
            seed,
            ..Default::default()
        },
        adversary,
        rounds,
        retain_depth: 16,
        ..Default::default()
    }
}

fn run(c: SimConfig) -> SimReport {
    let rep = Simulation::new(c).unwrap().run().unwrap();
    rep.check_consistency().unwrap();
    rep
}

fn withhold() -> Strategy {
    Strategy::WithholdConfirm { targets: vec![] }
}

#[test]
fn withholding_below_the_slack_changes_nothing() {
    let rep = run(cfg(ProtocolParams::default(), 100, 150, 3, AdversaryConfig::new(0.1, withhold())));
    assert_eq!(rep.skips, 0);
    assert_eq!(rep.blocks, 150);
}

#[test]
fn withholding_skips_only_honest_heads() {
    let mut p = small_params();
    p.n_endorsers = 20;
    p.quorum = 14;
    let rep = run(cfg(p, 30, 300, 5, AdversaryConfig::new(0.3, withhold())));
    assert!(rep.skips > 0);
    for o in rep.outcomes.iter().filter(|o| o.skipped) {
        assert!(!o.head_adversarial, "adversarial head skipped in round {}", o.round);
    }
    assert_eq!(rep.finality_violations, 0);
}

#[test]
fn hidden_intent_lacks_quorum_at_default_parameters() {
    let mut c = cfg(
        ProtocolParams::default(),
        100,
        250,
        8,
        AdversaryConfig::new(0.33, Strategy::DoubleIntentFork { release_delay_ms: 1000 }),
    );
    c.net.beta = 0.05;
    let rep = run(c);
    assert_eq!(rep.max_fork_depth, 0);
    assert_eq!(rep.fork_rounds, 0);
    assert!(rep.adversary_events.iter().any(|e| e.detail.contains("lacks quorum")));
    assert!(!rep.adversary_events.iter().any(|e| e.detail.contains("reached quorum")));
}

#[test]
fn hidden_block_with_quorum_forks_one_deep() {
    let mut p = small_params();
    p.n_endorsers = 10;
    p.quorum = 6;
    let adv = AdversaryConfig::new(0.45, Strategy::DoubleIntentFork { release_delay_ms: 1000 });
    let found = (1..=20).map(|seed| run(cfg(p.clone(), 20, 60, seed, adv.clone()))).find(|r| r.max_fork_depth > 0);
    let rep = found.expect("some seed yields a quorum-capable hidden branch");
    assert_eq!(rep.max_fork_depth, 1);
    assert!(rep.fork_rounds > 0);
    assert!(rep.max_reorg_depth <= 1);
    assert_eq!(rep.finality_violations, 0);
}

#[test]
fn each_equivocator_yields_one_evidence_pair() {
    let p = ProtocolParams::default();
    let c = cfg(p.clone(), 30, 1, 2, AdversaryConfig::new(0.3, Strategy::Equivocate { max_intents: 2 }));
    let sim = Simulation::new(c).unwrap();
    let genesis = sim.ledger().genesis().clone();
    let committee = select_endorsers(&genesis.state, &p, 1).unwrap();
    let adv = sim.adversary_set().clone();
    let k = (0..sim.node_count())
        .filter(|id| adv.contains(*id) && committee.weight_of(&sim.node(*id).public()) > 0)
        .count() as u64;
    assert!(k > 0);
    let rep = sim.run().unwrap();
    assert_eq!(rep.equivocation_evidence, k);
}

#[test]
fn honest_rounds_yield_no_evidence() {
    let rep = run(cfg(ProtocolParams::default(), 30, 20, 2, AdversaryConfig::default()));
    assert_eq!(rep.equivocation_evidence, 0);
}

#[test]
fn equivocation_fork_rate_matches_sampling_bound() {
    let p = ProtocolParams {
        n_endorsers: 20,
        quorum: 12,
        ..ProtocolParams::default()
    };
    let rounds = 3000;
    let mut c = cfg(p, 60, rounds, 31, AdversaryConfig::new(0.33, Strategy::Equivocate { max_intents: 2 }));
    c.net.beta = 0.05;
    let rep = run(c);
    let alpha = 20.0 / 60.0;
    let expect = pr_bfs(20, 12, alpha, 0.05).unwrap().prob();
    let sigma = (expect * (1.0 - expect) / rounds as f64).sqrt();
    let got = rep.fork_rate();
    assert!(
        (got - expect).abs() <= 3.0 * sigma,
        "fork rate {got} vs {expect} ± {}",
        3.0 * sigma
    );
    assert!(rep.max_fork_depth <= 1);
    assert_eq!(rep.finality_violations, 0);
}

#[test]
fn grind_with_branching_one_is_honest() {
    let p = small_params();
    let honest = AdversaryConfig {
        placement: Placement::Oldest,
        ..AdversaryConfig::new(0.3, Strategy::None)
    };
    let grind = AdversaryConfig {
        strategy: Strategy::Grind {
            branching: 1,
            depth: 4,
            leaf_budget: 1 << 10,
            burst: 0,
        },
        ..honest.clone()
    };
    let a = run(cfg(p.clone(), 20, 80, 4, honest));
    let b = run(cfg(p, 20, 80, 4, grind));
    assert_eq!(a.outcomes, b.outcomes);
}

#[test]
fn grind_tree_picks_the_best_leaf() {
    let keys = keypairs(77, 4);
    let start = Digest([5; 32]);
    let score = |s: &Digest| s.prefix_u64() >> 40;
    let spec = GrindSpec {
        branching: 2,
        depth: 3,
        leaf_budget: 8,
    };
    let out = grind_seed(&keys, &start, &spec, score).unwrap();
    assert_eq!(out.leaves, 8);
    // Brute-force oracle over every path of unused keys, oldest two first.
    let mut best = (0u64, Vec::new());
    let mut stack = vec![(start, Vec::<usize>::new())];
    while let Some((seed, path)) = stack.pop() {
        if path.len() == 3 {
            let s = score(&seed);
            if s > best.0 || (s == best.0 && path < best.1) {
                best = (s, path);
            }
            continue;
        }
        let options: Vec<usize> = (0..4).filter(|i| !path.contains(i)).take(2).collect();
        for i in options {
            let mut next = path.clone();
            next.push(i);
            stack.push((vrf_evaluate(&keys[i], &seed).seed, next));
        }
    }
    assert_eq!((out.score, out.path), best);

    let one = grind_seed(&keys, &start, &GrindSpec { branching: 1, ..spec }, score).unwrap();
    assert_eq!(one.path, vec![0, 1, 2]);
    assert_eq!(one.leaves, 1);
}

#[test]
fn grind_budget_is_enforced() {
    let keys = keypairs(3, 12);
    let spec = GrindSpec {
        branching: 2,
        depth: 10,
        leaf_budget: 1000,
    };
    let err = grind_seed(&keys, &Digest::ZERO, &spec, |_| 0).unwrap_err();
    assert_eq!(
        err,
        GrindError::BudgetExceeded {
            leaves: 1024,
            budget: 1000
        }
    );
    assert_eq!(grind_seed(&[], &Digest::ZERO, &spec, |_| 0).unwrap_err(), GrindError::NoKeys);
}

#[test]
fn grind_uplift_matches_independent_leaves() {
    // Population of 300 with the first 100 adversarial; success when at
    // least 45 of 100 slots are adversarial.
    let (pop, n_e, need) = (300usize, 100u32, 45u64);
    let hits = |s: &Digest| {
        sample_slots(s, 99, pop, n_e).into_iter().filter(|i| *i < 100).count() as u64
    };
    let spec = GrindSpec {
        branching: 2,
        depth: 5,
        leaf_budget: 32,
    };
    let trials = 300;
    let mut wins = 0;
    for t in 0..trials as u64 {
        let keys = keypairs(1000 + t, 6);
        let start = hash_parts(&[b"grind-trial", &t.to_be_bytes()]);
        let out = grind_seed(&keys, &start, &spec, hits).unwrap();
        if out.score >= need {
            wins += 1;
        }
    }
    let p = binomial_tail(100, need as u32, 1.0 / 3.0).unwrap();
    let (exact, union) = any_of(p, 32.0);
    let (exact, union) = (exact.prob(), union.prob());
    let got = wins as f64 / trials as f64;
    let sigma = (exact * (1.0 - exact) / trials as f64).sqrt();
    assert!((got - exact).abs() <= 3.0 * sigma, "{got} vs {exact} ± {}", 3.0 * sigma);
    assert!(got <= union + 3.0 * sigma);
    assert!(exact > 10.0 * p.prob());
}

#[test]
fn grinding_does_not_raise_reward_share() {
    let adv = AdversaryConfig {
        placement: Placement::Oldest,
        ..AdversaryConfig::new(
            0.3,
            Strategy::Grind {
                branching: 2,
                depth: 3,
                leaf_budget: 64,
                burst: 0,
            },
        )
    };
    let rounds = 1500;
    let rep = run(cfg(small_params(), 30, rounds, 6, adv));
    assert!(rep.adversary_events.iter().any(|e| e.kind == "grind"));
    let sigma = (0.3f64 * 0.7 / rep.blocks as f64).sqrt();
    let share = rep.adversary_block_share();
    assert!((share - 0.3).abs() <= 3.0 * sigma, "share {share} ± {}", 3.0 * sigma);
}

#[test]
fn enroll_burst_creates_adjacent_adversarial_candidates() {
    let adv = AdversaryConfig::new(0.2, Strategy::EnrollBurst { k: 4 });
    let rep = run(cfg(small_params(), 20, 60, 3, adv));
    let joined: Vec<_> = rep.enrollments.iter().filter(|e| e.adversarial).collect();
    assert_eq!(joined.len(), 4);
    let rounds: BTreeSet<_> = joined.iter().map(|e| e.included_round.expect("included")).collect();
    assert_eq!(rounds.len(), 1, "the burst lands in one block");
    for id in 20..24 {
        assert!(rep.adversary_nodes.contains(&id));
        assert!(rep.block_counts.get(&id).copied().unwrap_or(0) > 0, "joiner {id} never led");
    }
    // The joiners follow each other in the queue.
    let leaders: Vec<_> = rep.outcomes.iter().filter_map(|o| o.leader).collect();
    let first = leaders.iter().position(|l| *l == 20).unwrap();
    assert_eq!(&leaders[first..first + 4], &[20, 21, 22, 23]);
}

#[test]
fn censored_enrollment_is_only_delayed() {
    let mut p = small_params();
    p.n_endorsers = 10;
    p.quorum = 5;
    let victim = 20;
    for seed in 1..=5 {
        let mut c = cfg(
            p.clone(),
            20,
            80,
            seed,
            AdversaryConfig::new(0.4, Strategy::Censor { targets: vec![victim] }),
        );
        c.honest_joiners = vec![5];
        let rep = run(c);
        let e = rep.enrollments.iter().find(|e| e.node == victim).unwrap();
        let included = e.included_round.expect("victim eventually enrolled");
        let streak = rep.outcomes[(e.submitted_round - 1) as usize..]
            .iter()
            .take_while(|o| o.skipped || o.leader.is_some_and(|l| rep.adversary_nodes.contains(&l)))
            .count() as u64;
        assert!(
            included - e.submitted_round <= streak,
            "seed {seed}: delay {} exceeds streak {streak}",
            included - e.submitted_round
        );
    }
}

#[test]
fn censored_endorser_stays_active() {
    let p = small_params();
    let probe = Simulation::new(cfg(p.clone(), 20, 1, 9, AdversaryConfig::new(0.3, Strategy::None))).unwrap();
    let victim = (0..20).find(|i| !probe.adversary_set().contains(*i)).unwrap();
    let rep = run(cfg(
        p.clone(),
        20,
        300,
        9,
        AdversaryConfig::new(0.3, Strategy::Censor { targets: vec![victim] }),
    ));
    assert!(!rep.adversary_nodes.contains(&victim));
    let late: Vec<_> = rep.outcomes[260..].iter().filter_map(|o| o.leader).collect();
    assert!(late.contains(&victim), "victim stopped leading");
    let bound = pr_ae(p.n_endorsers as f64, 20.0, p.activity_threshold as f64, 0.3).unwrap();
    assert!(bound.prob() < 1e-9);
}

/// Maximal runs of `true` in `xs`.
fn runs(xs: &[bool]) -> Vec<usize> {
    let mut out = Vec::new();
    let mut cur = 0;
    for x in xs {
        if *x {
            cur += 1;
        } else if cur > 0 {
            out.push(cur);
            cur = 0;
        }
    }
    if cur > 0 {
        out.push(cur);
    }
    out
}

#[test]
fn adversarial_leader_streaks_follow_queue_order() {
    let (n, k) = (40u32, 12usize);
    let mut counts = Vec::new();
    for seed in 1..=30 {
        let rep = run(cfg(
            small_params(),
            n,
            n as u64,
            seed,
            AdversaryConfig::new(0.3, Strategy::Censor { targets: vec![] }),
        ));
        assert_eq!(rep.adversary_nodes.len(), k);
        let queue: Vec<bool> = (0..n).map(|i| rep.adversary_nodes.contains(&i)).collect();
        let led: Vec<bool> = rep
            .outcomes
            .iter()
            .map(|o| rep.adversary_nodes.contains(&o.leader.unwrap()))
            .collect();
        assert_eq!(runs(&led), runs(&queue));
        counts.push(runs(&led).len() as f64);
    }
    // Runs of k marked items in a random arrangement of n: k(n-k+1)/n.
    let expect = (k * (n as usize - k + 1)) as f64 / n as f64;
    let m = counts.iter().sum::<f64>() / counts.len() as f64;
    let var = counts.iter().map(|c| (c - m).powi(2)).sum::<f64>() / (counts.len() - 1) as f64;
    let se = (var / counts.len() as f64).sqrt();
    assert!((m - expect).abs() <= 3.0 * se, "{m} vs {expect} ± {}", 3.0 * se);
}

#[test]
fn adversary_set_is_fixed_at_setup() {
    let adv = AdversaryConfig::new(0.25, Strategy::Equivocate { max_intents: 2 });
    let sim = Simulation::new(cfg(small_params(), 20, 30, 2, adv.clone())).unwrap();
    let before: Vec<_> = sim.adversary_set().iter().collect();
    let rep = sim.run().unwrap();
    assert_eq!(before, rep.adversary_nodes);
    assert_eq!(before.len(), 5);
    let oldest = AdversaryConfig {
        placement: Placement::Oldest,
        ..adv
    };
    let sim = Simulation::new(cfg(small_params(), 20, 1, 2, oldest)).unwrap();
    assert_eq!(sim.adversary_set().iter().collect::<Vec<_>>(), vec![0, 1, 2, 3, 4]);
}

#[test]
fn bias_baseline_without_adversary_stays_zero() {
    let t = simulate_bias_baseline(&BiasConfig::new(0.0, 1000, 3000), &mut ChaCha8Rng::seed_from_u64(1));
    assert_eq!(t.points.len(), 2000);
    assert!(t.points.iter().all(|p| p.adv_stake_share == 0.0 && p.adv_block_share == 0.0));
    assert_eq!(t.points.last().unwrap().total_stake, 3000.0);
}

#[test]
fn bias_control_run_is_fair() {
    let cfg = BiasConfig {
        exploit: false,
        ..BiasConfig::new(0.33, 1000, 10_000)
    };
    let t = simulate_bias_baseline(&cfg, &mut ChaCha8Rng::seed_from_u64(4));
    for chunk in t.adversary_block.chunks(1000) {
        let rate = chunk.iter().sum::<f64>() / chunk.len() as f64;
        let sigma = (0.33f64 * 0.67 / chunk.len() as f64).sqrt();
        assert!((rate - 0.33).abs() <= 3.0 * sigma, "rate {rate}");
    }
}

#[test]
fn bias_exploit_grows_adversary_share() {
    let t = bias_monte_carlo(&BiasConfig::new(0.33, 1000, 10_000), 20, 11);
    let shares: Vec<f64> = t.points.iter().step_by(1000).map(|p| p.adv_stake_share).collect();
    assert!(shares.windows(2).all(|w| w[1] > w[0]), "{shares:?}");
    assert!(t.initial_rate(250) > 0.33);
    let csv = t.to_csv();
    assert!(csv.starts_with(BIAS_CSV_HEADER));
    assert_eq!(csv.lines().count(), 9001);
}
