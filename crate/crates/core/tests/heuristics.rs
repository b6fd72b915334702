mod common;

use std::sync::Arc;

use common::{dcopf_oracle, perturbed, rel_close};
use otswitch_core::cases;
use otswitch_core::dcots::*;
use otswitch_core::heuristics::*;
use otswitch_core::network::Network;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn bundled() -> Vec<Arc<Network>> {
    vec![Arc::new(cases::case3()), Arc::new(cases::case6())]
}

fn exact_set(net: &Arc<Network>, seeds: std::ops::Range<u64>, k: Option<usize>) -> TrainingSet {
    let mut set = TrainingSet::new(net.fingerprint(), k);
    for s in seeds {
        let inst = perturbed(net, s).with_cardinality(k);
        let (topo, sol) = brute_force_dcots(&inst).unwrap();
        set.entries.push(TrainingEntry {
            q: ParameterVector::of(&inst).0,
            open_lines: topo.open_lines().iter().copied().collect(),
            objective: sol.total_objective,
            gap: 0.0,
            seconds: 0.0,
        });
    }
    set
}

// Independent restatement of the greedy rule, scored by the dense oracle.
fn greedy_oracle(inst: &DcotsInstance) -> (Topology, usize) {
    let budget = inst.cardinality().unwrap_or(usize::MAX);
    let mut remaining: Vec<usize> = inst.network().lines().iter().filter(|l| l.switchable).map(|l| l.id).collect();
    let mut open = Vec::new();
    let mut best = dcopf_oracle(inst, &Topology::all_closed());
    let mut solves = 1;
    while open.len() < budget && !remaining.is_empty() {
        let mut pick: Option<(usize, f64)> = None;
        for (i, &l) in remaining.iter().enumerate() {
            let mut t = open.clone();
            t.push(l);
            let z = dcopf_oracle(inst, &Topology::from_open(t));
            solves += 1;
            if pick.is_none_or(|(_, zb)| z < zb - 1e-9 * zb.abs().max(1.0)) {
                pick = Some((i, z));
            }
        }
        match pick {
            Some((i, z)) if z < best - 1e-9 * best.abs().max(1.0) => {
                open.push(remaining.remove(i));
                best = z;
            }
            _ => break,
        }
    }
    (Topology::from_open(open), solves)
}

#[test]
fn greedy_dominates_all_closed_and_respects_lp_budget() {
    for net in bundled() {
        let lines = net.lines().len();
        for k in [Some(0), Some(1), Some(2), Some(3), None] {
            for seed in 0..4 {
                let inst = perturbed(&net, seed).with_cardinality(k);
                let res = greedy_local_search(&inst).unwrap();
                let closed = evaluate_topology(&inst, &Topology::all_closed()).unwrap();
                assert!(res.dispatch.total_objective <= closed.total_objective);
                assert!(res.lp_solves <= k.unwrap_or(lines) * lines + 1);
                assert!(res.topology.num_open() <= k.unwrap_or(lines));
                assert_eq!(res.provenance, Provenance::Greedy);
            }
        }
    }
}

#[test]
fn greedy_matches_independent_restatement() {
    for net in bundled() {
        for k in [Some(1), Some(2), None] {
            for seed in 10..13 {
                let inst = perturbed(&net, seed).with_cardinality(k);
                let res = greedy_local_search(&inst).unwrap();
                let (topo, solves) = greedy_oracle(&inst);
                assert_eq!(res.topology, topo, "{} k={k:?} seed={seed}", net.name());
                assert_eq!(res.lp_solves, solves);
                assert!(rel_close(res.dispatch.total_objective, dcopf_oracle(&inst, &topo), 1e-6));
            }
        }
    }
}

#[test]
fn greedy_reaches_triangle_optimum() {
    let inst = DcotsInstance::nominal(Arc::new(cases::case3())).unwrap().with_cardinality(Some(1));
    let res = greedy_local_search(&inst).unwrap();
    assert_eq!(res.topology, Topology::from_open([1]));
    assert!((res.dispatch.total_objective - 11000.0).abs() < 1e-6);
    assert_eq!(res.lp_solves, 4);
}

#[test]
fn knn_with_k1_on_training_instance_returns_its_topology() {
    let net = Arc::new(cases::case6());
    let set = exact_set(&net, 0..12, Some(3));
    for (i, e) in set.entries.iter().enumerate() {
        let inst = perturbed(&net, i as u64).with_cardinality(Some(3));
        let res = knn_heuristic(&inst, &set, &KnnConfig { k: 1, norm: Norm::Euclidean }).unwrap();
        assert_eq!(res.topology, e.topology());
        assert!(rel_close(res.dispatch.total_objective, e.objective, 1e-6));
        assert_eq!(res.candidate_count, 1);
    }
}

#[test]
fn knn_picks_best_candidate_by_oracle() {
    let net = Arc::new(cases::case6());
    let set = exact_set(&net, 0..25, None);
    for seed in 100..106 {
        let inst = perturbed(&net, seed);
        let cfg = KnnConfig { k: 5, norm: Norm::Euclidean };
        let res = knn_heuristic(&inst, &set, &cfg).unwrap();
        let neighbors = knn_select(&set, &ParameterVector::of(&inst), &cfg).unwrap();
        let best = neighbors
            .iter()
            .map(|n| dcopf_oracle(&inst, &set.entries[n.index].topology()))
            .fold(f64::INFINITY, f64::min);
        assert!(rel_close(res.dispatch.total_objective, best, 1e-6));
        let (_, opt) = brute_force_dcots(&inst).unwrap();
        assert!(res.dispatch.total_objective >= opt.total_objective - 1e-6);
    }
}

#[test]
fn knn_skips_entries_over_budget() {
    let net = Arc::new(cases::case6());
    let set = exact_set(&net, 0..8, None);
    let inst = perturbed(&net, 0).with_cardinality(Some(0));
    let res = knn_heuristic(&inst, &set, &KnnConfig::default());
    match res {
        Ok(r) => assert_eq!(r.topology.num_open(), 0),
        Err(e) => assert!(matches!(e, HeuristicError::NoEligibleEntries(0))),
    }
    let inst = perturbed(&net, 0).with_cardinality(Some(1));
    if let Ok(r) = knn_heuristic(&inst, &set, &KnnConfig::default()) {
        assert!(r.topology.num_open() <= 1);
    }
}

#[test]
fn knn_errors() {
    let net = Arc::new(cases::case3());
    let inst = DcotsInstance::nominal(net.clone()).unwrap();
    let empty = TrainingSet::new(net.fingerprint(), None);
    let err = knn_heuristic(&inst, &empty, &KnnConfig::default()).unwrap_err();
    assert_eq!(err.to_string(), "empty training set");
    let other = TrainingSet::new("deadbeef", None);
    assert!(matches!(
        knn_heuristic(&inst, &other, &KnnConfig::default()),
        Err(HeuristicError::FingerprintMismatch { .. })
    ));
    let set = exact_set(&net, 0..3, None);
    assert!(matches!(knn_heuristic(&inst, &set, &KnnConfig { k: 0, norm: Norm::Euclidean }), Err(HeuristicError::ZeroK)));
}

fn random_set(seed: u64, n: usize, dim: usize) -> TrainingSet {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut set = TrainingSet::new("fp", None);
    for _ in 0..n {
        set.entries.push(TrainingEntry {
            q: (0..dim).map(|_| rng.random_range(0.5..2.0)).collect(),
            open_lines: vec![],
            objective: 1.0,
            gap: 0.0,
            seconds: 0.0,
        });
    }
    set
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn knn_select_is_scale_invariant(
        seed in any::<u64>(),
        which in 0usize..30,
        scale in 1e-3f64..1e3,
        k in 1usize..12,
        p in prop_oneof![Just(Norm::Euclidean), Just(Norm::Infinity), Just(Norm::P(1.0)), Just(Norm::P(3.0))],
    ) {
        let set = random_set(seed, 30, 6);
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
        let q = ParameterVector((0..6).map(|_| rng.random_range(0.5..2.0)).collect());
        let cfg = KnnConfig { k, norm: p };
        let base: std::collections::BTreeSet<usize> =
            knn_select(&set, &q, &cfg).unwrap().iter().map(|n| n.index).collect();
        let mut scaled = set.clone();
        scaled.entries[which].q.iter_mut().for_each(|x| *x *= scale);
        let after: std::collections::BTreeSet<usize> =
            knn_select(&scaled, &q, &cfg).unwrap().iter().map(|n| n.index).collect();
        prop_assert_eq!(base, after);
        let qs = ParameterVector(q.0.iter().map(|x| x * scale).collect());
        let again: std::collections::BTreeSet<usize> =
            knn_select(&set, &qs, &cfg).unwrap().iter().map(|n| n.index).collect();
        prop_assert_eq!(&knn_select(&set, &q, &cfg).unwrap().iter().map(|n| n.index).collect::<std::collections::BTreeSet<_>>(), &again);
    }
}

#[test]
fn knn_over_copies_of_the_instance_is_within_training_gap() {
    use otswitch_core::instances::{train, TrainOptions};
    let net = Arc::new(cases::case6());
    let inst = perturbed(&net, 3);
    let opts = TrainOptions { rel_gap: 0.01, time_limit: None, cardinality: None, workers: 2, record_time: false };
    let set = train(&vec![inst.clone(); 5], &opts).unwrap();
    let res = knn_heuristic(&inst, &set, &KnnConfig::default()).unwrap();
    let (_, opt) = brute_force_dcots(&inst).unwrap();
    assert!(res.dispatch.total_objective <= opt.total_objective * 1.01 + 1e-6);
}
