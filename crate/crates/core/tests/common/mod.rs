#![allow(dead_code)]

use std::f64::consts::PI;
use std::sync::Arc;

use otswitch_core::dcots::{DcotsInstance, DispatchSolution, Topology};
use otswitch_core::network::Network;
use otswitch_lp::{LinearProgram, Relation};
use otswitch_oracles::dense_tableau;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// DCOPF with explicit flow variables, solved by the dense tableau oracle.
pub fn dcopf_oracle(inst: &DcotsInstance, topo: &Topology) -> f64 {
    let net = inst.network();
    let m = inst.infeasibility_cost();
    let mut lp = LinearProgram::new();
    let p: Vec<usize> = net
        .generators()
        .iter()
        .zip(inst.gen_cost())
        .map(|(g, &c)| lp.add_var(c, g.p_min_pu, g.p_max_pu))
        .collect();
    let refb = net.reference_bus().unwrap();
    let theta: Vec<usize> =
        (0..net.buses().len()).map(|b| if b == refb { lp.add_var(0.0, 0.0, 0.0) } else { lp.add_var(0.0, -PI, PI) }).collect();
    let mut inflow = vec![Vec::new(); net.buses().len()];
    for line in net.lines() {
        if topo.is_open(line.id) {
            continue;
        }
        let o = net.bus_position(line.from_bus).unwrap();
        let d = net.bus_position(line.to_bus).unwrap();
        let f = lp.add_var(0.0, -line.flow_limit_pu, line.flow_limit_pu);
        let b = line.susceptance_pu;
        lp.add_constraint(vec![(f, 1.0), (theta[o], -b), (theta[d], b)], Relation::Eq, 0.0);
        lp.add_constraint(vec![(theta[o], 1.0), (theta[d], -1.0)], Relation::Le, PI / 6.0);
        lp.add_constraint(vec![(theta[o], 1.0), (theta[d], -1.0)], Relation::Ge, -PI / 6.0);
        inflow[d].push((f, 1.0));
        inflow[o].push((f, -1.0));
    }
    for (b, terms) in inflow.into_iter().enumerate() {
        let mut row = terms;
        for &g in net.generators_at(b) {
            row.push((p[g], 1.0));
        }
        let u = lp.add_var(m, 0.0, f64::INFINITY);
        let v = lp.add_var(m, 0.0, f64::INFINITY);
        row.push((u, 1.0));
        row.push((v, -1.0));
        lp.add_constraint(row, Relation::Eq, inst.demand()[b]);
    }
    dense_tableau(&lp).objective().expect("slacks keep the DCOPF feasible")
}

/// Largest nodal balance residual of a dispatch.
pub fn balance_residual(inst: &DcotsInstance, sol: &DispatchSolution) -> f64 {
    let net = inst.network();
    let mut worst: f64 = 0.0;
    for b in 0..net.buses().len() {
        let mut r = -inst.demand()[b] + sol.load_shed[b] - sol.over_generation[b];
        r += net.generators_at(b).iter().map(|&g| sol.dispatch[g]).sum::<f64>();
        r += net.lines_to(b).iter().map(|&l| sol.flow[l]).sum::<f64>();
        r -= net.lines_from(b).iter().map(|&l| sol.flow[l]).sum::<f64>();
        worst = worst.max(r.abs());
    }
    worst
}

/// Demands and costs perturbed by ±10% / ±5%.
pub fn perturbed(net: &Arc<Network>, seed: u64) -> DcotsInstance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = net.nominal_demand().iter().map(|x| x * rng.random_range(0.9..1.1)).collect();
    let c = net.nominal_cost().iter().map(|x| x * rng.random_range(0.95..1.05)).collect();
    DcotsInstance::new(net.clone(), d, c).unwrap()
}

/// Random topology with at most `k` open lines.
pub fn random_topology(net: &Network, k: usize, seed: u64) -> Topology {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.random_range(0..=k.min(net.lines().len()));
    let mut ids: Vec<usize> = net.lines().iter().map(|l| l.id).collect();
    for i in 0..n {
        let j = rng.random_range(i..ids.len());
        ids.swap(i, j);
    }
    Topology::from_open(ids[..n].iter().copied())
}

pub fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1.0)
}
