mod common;

use std::sync::Arc;

use common::{balance_residual, dcopf_oracle, perturbed, random_topology, rel_close};
use otswitch_core::cases;
use otswitch_core::dcots::*;
use otswitch_core::network::parse_case;
use otswitch_lp::{solve_lp, LpStatus};
use proptest::prelude::*;

fn triangle(k: Option<usize>) -> DcotsInstance {
    DcotsInstance::nominal(Arc::new(cases::case3())).unwrap().with_cardinality(k)
}

fn six(k: Option<usize>) -> DcotsInstance {
    DcotsInstance::nominal(Arc::new(cases::case6())).unwrap().with_cardinality(k)
}

#[test]
fn triangle_mip_has_expected_row_counts() {
    let model = build_dcots_mip(&triangle(Some(1))).unwrap();
    assert_eq!(model.mip.integer_vars.len(), 3);
    let count = |f: fn(&RowKind) -> bool| model.row_kinds.iter().filter(|k| f(k)).count();
    assert_eq!(count(|k| k.is_big_m()), 12);
    assert_eq!(count(|k| matches!(k, RowKind::Balance(_))), 3);
    assert_eq!(count(|k| matches!(k, RowKind::Cardinality)), 1);
    assert_eq!(count(|k| matches!(k, RowKind::FlowUpper(_) | RowKind::FlowLower(_))), 6);
    assert_eq!(model.row_kinds.len(), model.mip.lp.num_constraints());

    let free = build_dcots_mip(&triangle(None)).unwrap();
    assert!(!free.row_kinds.contains(&RowKind::Cardinality));
}

// Hand-derived dispatches for the triangle (equal reactances, demand 2 p.u.
// at bus 2): all closed, the flow on 1-2 is (P1 + 2) / 3 ≤ 0.8 so P1 = 0.4;
// with 1-3 open the cheap unit is capped by 1-2 at 0.8; with 1-2 open it
// reaches bus 2 through 1-3 up to 1.0.
#[test]
fn triangle_objectives_match_hand_computation() {
    let inst = triangle(None);
    let cases = [(vec![], 16400.0), (vec![2], 12800.0), (vec![1], 11000.0), (vec![1, 2], 20000.0)];
    for (open, expect) in cases {
        let sol = evaluate_topology(&inst, &Topology::from_open(open.clone())).unwrap();
        assert!(sol.feasible, "{open:?}");
        assert!((sol.total_objective - expect).abs() < 1e-6, "{open:?}: {}", sol.total_objective);
    }
    // Line 2-3 open strands bus 2 behind the 0.8 p.u. line 1-2.
    let sol = evaluate_topology(&inst, &Topology::from_open([3])).unwrap();
    assert!(!sol.feasible);
    assert!((sol.load_shed[1] - 1.2).abs() < 1e-9);
}

#[test]
fn every_triangle_topology_agrees_with_dense_oracle() {
    let inst = triangle(None);
    for mask in 0..8usize {
        let topo = Topology::from_open((1..=3).filter(|l| mask & (1 << (l - 1)) != 0));
        let ours = evaluate_topology(&inst, &topo).unwrap().total_objective;
        let oracle = dcopf_oracle(&inst, &topo);
        assert!(rel_close(ours, oracle, 1e-6), "{topo:?}: {ours} vs {oracle}");
    }
}

#[test]
fn six_bus_evaluations_agree_with_dense_oracle() {
    let net = Arc::new(cases::case6());
    for seed in 0..40 {
        let inst = perturbed(&net, seed);
        let topo = random_topology(&net, 4, seed);
        let ours = evaluate_topology(&inst, &topo).unwrap().total_objective;
        let oracle = dcopf_oracle(&inst, &topo);
        assert!(rel_close(ours, oracle, 1e-6), "seed {seed}: {ours} vs {oracle}");
    }
}

#[test]
fn exact_solver_matches_enumeration_on_bundled_cases() {
    for k in [Some(0), Some(1), Some(2), Some(3), None] {
        for inst in [triangle(k), six(k)] {
            let (bf_topo, bf) = brute_force_dcots(&inst).unwrap();
            let sol = solve_dcots(&inst, 0.0, None, None).unwrap();
            assert!(rel_close(sol.dispatch.total_objective, bf.total_objective, 1e-6), "K={k:?}");
            assert_eq!(sol.topology, bf_topo, "K={k:?}");
            assert!(rel_close(sol.mip.objective_value, sol.dispatch.total_objective, 1e-6));
        }
    }
}

#[test]
fn triangle_optimum_opens_line_one() {
    let (topo, sol) = brute_force_dcots(&triangle(Some(1))).unwrap();
    assert_eq!(topo, Topology::from_open([1]));
    assert!((sol.total_objective - 11000.0).abs() < 1e-6);
    let (topo0, sol0) = brute_force_dcots(&triangle(Some(0))).unwrap();
    assert_eq!(topo0, Topology::all_closed());
    assert_eq!(sol0, evaluate_topology(&triangle(Some(0)), &Topology::all_closed()).unwrap().with_time(sol0.solve_seconds));
}

trait WithTime {
    fn with_time(self, t: f64) -> Self;
}
impl WithTime for DispatchSolution {
    fn with_time(mut self, t: f64) -> Self {
        self.solve_seconds = t;
        self
    }
}

#[test]
fn optimum_is_monotone_in_cardinality() {
    let net = Arc::new(cases::case6());
    for seed in 0..5 {
        let base = perturbed(&net, 100 + seed);
        let mut prev = f64::INFINITY;
        for k in 0..=4 {
            let (_, sol) = brute_force_dcots(&base.clone().with_cardinality(Some(k))).unwrap();
            assert!(sol.total_objective <= prev + 1e-9);
            prev = sol.total_objective;
        }
    }
}

#[test]
fn uncongested_case_keeps_all_lines_closed() {
    let text = cases::CASE3.replace("80\t80\t80", "800\t800\t800").replace("100\t100\t100", "800\t800\t800");
    let inst = DcotsInstance::nominal(Arc::new(parse_case(&text).unwrap())).unwrap();
    let sol = solve_dcots(&inst, 0.0, None, None).unwrap();
    assert_eq!(sol.topology, Topology::all_closed());
    assert!((sol.dispatch.generation_cost - 2000.0).abs() < 1e-6);
    let stats = congestion_stats(&inst, None).unwrap();
    assert_eq!(stats.tight_line_fraction, 0.0);
    assert!(stats.all_closed_gap.abs() < 1e-12);
}

#[test]
fn triangle_congestion() {
    let stats = congestion_stats(&triangle(Some(1)), None).unwrap();
    assert!((stats.tight_line_fraction - 1.0 / 3.0).abs() < 1e-12);
    assert!((stats.all_closed_gap - (16400.0 / 11000.0 - 1.0)).abs() < 1e-9);
}

#[test]
fn shedding_all_closed_case_has_gap_above_one() {
    // Raising demand to 3.5 p.u. forces shedding when every line is closed.
    let text = cases::CASE3.replace("2\t1\t200", "2\t1\t350");
    let inst = DcotsInstance::nominal(Arc::new(parse_case(&text).unwrap())).unwrap();
    let closed = evaluate_topology(&inst, &Topology::all_closed()).unwrap();
    assert!(!closed.feasible);
    let stats = congestion_stats(&inst, None).unwrap();
    assert!(stats.all_closed_gap > 1.0, "{stats:?}");
}

#[test]
fn all_open_sheds_everything_without_local_generation() {
    let inst = six(None);
    let sol = evaluate_topology(&inst, &Topology::from_open(1..=11)).unwrap();
    let demand: f64 = inst.demand().iter().sum();
    assert!((sol.load_shed.iter().sum::<f64>() - demand).abs() < 1e-9);
    assert!(rel_close(sol.penalty_cost, 1e6 * demand, 1e-12));
}

#[test]
fn gap_limited_solve_respects_gap() {
    let net = Arc::new(cases::case6());
    for seed in 0..5 {
        let inst = perturbed(&net, seed).with_cardinality(Some(3));
        let sol = solve_dcots(&inst, 0.01, None, None).unwrap();
        assert!(sol.mip.gap <= 0.01 + 1e-12);
        let (_, bf) = brute_force_dcots(&inst).unwrap();
        assert!(sol.dispatch.total_objective <= bf.total_objective * 1.01 + 1e-6);
    }
}

#[test]
fn warm_start_topology_must_respect_cardinality() {
    let err = solve_dcots(&six(Some(1)), 0.0, None, Some(&Topology::from_open([1, 2]))).unwrap_err();
    assert!(matches!(err, DcotsError::CardinalityExceeded { .. }));
}

#[test]
fn enumeration_guard() {
    // 22 buses on a path: 21 switchable lines.
    let mut text = String::from("mpc.baseMVA = 100;\nmpc.bus = [1 3 0;\n");
    for b in 2..=22 {
        text += &format!("{b} 1 1;\n");
    }
    text += "];\nmpc.gen = [1 0 0 0 0 1 100 1 100 0];\nmpc.gencost = [2 0 0 2 1 0];\nmpc.branch = [\n";
    for b in 1..22 {
        text += &format!("{b} {} 0 0.1 0 100 0 0 0 0 1;\n", b + 1);
    }
    text += "];\n";
    let inst = DcotsInstance::nominal(Arc::new(parse_case(&text).unwrap())).unwrap();
    assert!(matches!(brute_force_dcots(&inst), Err(DcotsError::GuardViolation(_))));
    assert!(brute_force_dcots(&inst.clone().with_cardinality(Some(2))).is_ok());
    // 21 + C(21,2) + ... + C(21,10) exceeds the limit.
    assert!(matches!(brute_force_dcots(&inst.with_cardinality(Some(10))), Err(DcotsError::GuardViolation(_))));
}

fn check_dispatch_invariants(inst: &DcotsInstance, topo: &Topology) -> Result<(), TestCaseError> {
    let sol = evaluate_topology(inst, topo).unwrap();
    prop_assert!(balance_residual(inst, &sol) <= 1e-7);
    let net = inst.network();
    for (l, line) in net.lines().iter().enumerate() {
        if topo.is_open(line.id) {
            prop_assert!(sol.flow[l].abs() <= 1e-9);
        } else {
            let o = net.bus_position(line.from_bus).unwrap();
            let d = net.bus_position(line.to_bus).unwrap();
            let ohm = line.susceptance_pu * (sol.angle[o] - sol.angle[d]);
            prop_assert!((sol.flow[l] - ohm).abs() <= 1e-6);
            prop_assert!(sol.flow[l].abs() <= line.flow_limit_pu + 1e-7);
        }
    }
    prop_assert!(sol.load_shed.iter().chain(&sol.over_generation).all(|&s| s >= 0.0));
    prop_assert!(rel_close(sol.total_objective, sol.generation_cost + sol.penalty_cost, 1e-8));

    // The MIP with y fixed is the same LP up to the big-M rows.
    let model = build_dcots_mip(inst).unwrap();
    let lp = model.fix_topology(inst, topo).unwrap();
    let fixed = solve_lp(&lp, None).unwrap();
    prop_assert_eq!(fixed.status, LpStatus::Optimal);
    prop_assert!(rel_close(fixed.objective_value, sol.total_objective, 1e-7));
    let x = &fixed.primal;
    for (l, line) in net.lines().iter().enumerate() {
        let o = model.layout.theta(net.bus_position(line.from_bus).unwrap());
        let d = model.layout.theta(net.bus_position(line.to_bus).unwrap());
        let f = x[model.layout.f(l)];
        if topo.is_open(line.id) {
            prop_assert!(f.abs() <= 1e-9);
        } else {
            prop_assert!((f - line.susceptance_pu * (x[o] - x[d])).abs() <= 1e-6);
        }
    }
    // The dispatch itself is a feasible MIP point.
    prop_assert!(model.mip.lp.max_violation(&model.point_from(&sol)) <= 1e-6);
    Ok(())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn dispatch_invariants_hold(seed in 0u64..100_000, which in 0usize..2) {
        let net = Arc::new(if which == 0 { cases::case3() } else { cases::case6() });
        let inst = perturbed(&net, seed);
        let topo = random_topology(&net, net.lines().len(), seed ^ 0x5eed);
        check_dispatch_invariants(&inst, &topo)?;
    }
}
