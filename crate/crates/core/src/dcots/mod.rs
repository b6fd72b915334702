//! The switching problem: instances, topologies and fixed-topology dispatch.

mod exact;
mod model;

use std::collections::BTreeSet;
use std::f64::consts::PI;
use std::sync::Arc;
use std::time::Instant;

use otswitch_lp::{solve_lp, LinearProgram, LpError, LpStatus, Relation};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::network::{validate, Network};

pub use exact::{
    brute_force_dcots, congestion_stats, enumerate_topologies, optimal_topologies, solve_dcots, tie_tolerance,
    CongestionStats, DcotsSolution, ENUMERATION_LIMIT,
};
pub use model::{build_dcots_mip, DcotsMip, RowKind, VarLayout};

/// Default penalty per per-unit of shed load or over-generation.
pub const DEFAULT_INFEASIBILITY_COST: f64 = 1e6;
/// Half-width of the allowed angle difference across a closed line.
pub const ANGLE_WINDOW: f64 = PI / 6.0;
/// Slack total (p.u.) below which a dispatch counts as feasible.
pub const FEASIBILITY_TOL: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum DcotsError {
    #[error("invalid network: {0}")]
    InvalidNetwork(String),
    #[error("{what} has length {got}, expected {expected}")]
    LengthMismatch { what: &'static str, got: usize, expected: usize },
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("unknown line id {0}")]
    UnknownLine(usize),
    #[error("line {0} is not switchable")]
    NotSwitchable(usize),
    #[error("topology opens {open} lines but the cardinality limit is {limit}")]
    CardinalityExceeded { open: usize, limit: usize },
    #[error("enumeration would visit {0} topologies (limit {ENUMERATION_LIMIT})")]
    GuardViolation(u128),
    #[error("relative gap is undefined for best-known objective {0}")]
    UndefinedGap(f64),
    #[error("LP ended with status {0:?}")]
    UnexpectedLpStatus(LpStatus),
    #[error("solver stopped without any solution")]
    NoSolution,
    #[error(transparent)]
    Lp(#[from] LpError),
}

/// A network together with the data that varies between instances.
#[derive(Debug, Clone)]
pub struct DcotsInstance {
    network: Arc<Network>,
    demand: Vec<f64>,
    gen_cost: Vec<f64>,
    cardinality: Option<usize>,
    infeasibility_cost: f64,
}

impl DcotsInstance {
    pub fn new(network: Arc<Network>, demand: Vec<f64>, gen_cost: Vec<f64>) -> Result<Self, DcotsError> {
        let diags = validate(&network);
        if !diags.is_empty() {
            let msgs: Vec<String> = diags.iter().map(|d| d.to_string()).collect();
            return Err(DcotsError::InvalidNetwork(msgs.join("; ")));
        }
        if demand.len() != network.buses().len() {
            return Err(DcotsError::LengthMismatch { what: "demand", got: demand.len(), expected: network.buses().len() });
        }
        if gen_cost.len() != network.generators().len() {
            return Err(DcotsError::LengthMismatch {
                what: "gen_cost",
                got: gen_cost.len(),
                expected: network.generators().len(),
            });
        }
        if demand.iter().any(|d| !d.is_finite()) {
            return Err(DcotsError::NonFinite("demand"));
        }
        if gen_cost.iter().any(|c| !c.is_finite()) {
            return Err(DcotsError::NonFinite("gen_cost"));
        }
        Ok(Self { network, demand, gen_cost, cardinality: None, infeasibility_cost: DEFAULT_INFEASIBILITY_COST })
    }

    /// The network's own demands and costs.
    pub fn nominal(network: Arc<Network>) -> Result<Self, DcotsError> {
        let demand = network.nominal_demand();
        let cost = network.nominal_cost();
        Self::new(network, demand, cost)
    }

    pub fn with_cardinality(mut self, k: Option<usize>) -> Self {
        self.cardinality = k;
        self
    }

    pub fn with_infeasibility_cost(mut self, m: f64) -> Self {
        self.infeasibility_cost = m;
        self
    }

    pub fn network(&self) -> &Arc<Network> {
        &self.network
    }

    pub fn demand(&self) -> &[f64] {
        &self.demand
    }

    pub fn gen_cost(&self) -> &[f64] {
        &self.gen_cost
    }

    pub fn cardinality(&self) -> Option<usize> {
        self.cardinality
    }

    pub fn infeasibility_cost(&self) -> f64 {
        self.infeasibility_cost
    }

    /// Number of lines that may be opened: the cardinality limit capped by
    /// the number of switchable lines.
    pub fn open_budget(&self) -> usize {
        let n = self.network.switchable_lines().count();
        self.cardinality.map_or(n, |k| k.min(n))
    }

    /// Soft problems with the instance data.
    pub fn warnings(&self) -> Vec<String> {
        let max_cost = self.gen_cost.iter().copied().fold(0.0, f64::max);
        if self.infeasibility_cost <= max_cost {
            vec![format!(
                "infeasibility cost {} does not exceed the largest generation cost {max_cost}",
                self.infeasibility_cost
            )]
        } else {
            Vec::new()
        }
    }
}

/// Lines switched open (`y = 0`); every other line is closed.
#[derive(Debug, Clone, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Topology {
    open_lines: BTreeSet<usize>,
}

impl Topology {
    pub fn all_closed() -> Self {
        Self::default()
    }

    pub fn from_open(lines: impl IntoIterator<Item = usize>) -> Self {
        Self { open_lines: lines.into_iter().collect() }
    }

    pub fn open_lines(&self) -> &BTreeSet<usize> {
        &self.open_lines
    }

    pub fn is_open(&self, line_id: usize) -> bool {
        self.open_lines.contains(&line_id)
    }

    pub fn num_open(&self) -> usize {
        self.open_lines.len()
    }

    /// Checks line ids, switchability and the instance's cardinality limit.
    pub fn check(&self, inst: &DcotsInstance) -> Result<(), DcotsError> {
        let net = inst.network();
        for &id in &self.open_lines {
            let pos = net.line_position(id).ok_or(DcotsError::UnknownLine(id))?;
            if !net.lines()[pos].switchable {
                return Err(DcotsError::NotSwitchable(id));
            }
        }
        if let Some(k) = inst.cardinality() {
            if self.open_lines.len() > k {
                return Err(DcotsError::CardinalityExceeded { open: self.open_lines.len(), limit: k });
            }
        }
        Ok(())
    }
}

/// Optimal dispatch for one fixed topology. Vectors are per-unit and follow
/// network order.
#[derive(Debug, Clone, PartialEq)]
pub struct DispatchSolution {
    pub topology: Topology,
    pub dispatch: Vec<f64>,
    pub flow: Vec<f64>,
    pub angle: Vec<f64>,
    pub load_shed: Vec<f64>,
    pub over_generation: Vec<f64>,
    pub generation_cost: f64,
    pub penalty_cost: f64,
    pub total_objective: f64,
    pub feasible: bool,
    pub solve_seconds: f64,
}

/// JSON form of a [`DispatchSolution`], with slack totals in MW.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DispatchReport {
    pub open_lines: Vec<usize>,
    pub generation_cost: f64,
    pub penalty_cost: f64,
    pub total_objective: f64,
    pub load_shed_mw: f64,
    pub over_generation_mw: f64,
    pub solve_seconds: f64,
}

impl DispatchSolution {
    pub fn load_shed_mw(&self, base_mva: f64) -> f64 {
        self.load_shed.iter().sum::<f64>() * base_mva
    }

    pub fn over_generation_mw(&self, base_mva: f64) -> f64 {
        self.over_generation.iter().sum::<f64>() * base_mva
    }

    pub fn report(&self, base_mva: f64) -> DispatchReport {
        DispatchReport {
            open_lines: self.topology.open_lines().iter().copied().collect(),
            generation_cost: self.generation_cost,
            penalty_cost: self.penalty_cost,
            total_objective: self.total_objective,
            load_shed_mw: self.load_shed_mw(base_mva),
            over_generation_mw: self.over_generation_mw(base_mva),
            solve_seconds: self.solve_seconds,
        }
    }
}

/// Solves the DCOPF with `topo` fixed.
///
/// This deliberately does not reuse the MIP rows: closed lines get an angle
/// difference variable `δ` with `f = B δ`, and open lines are dropped, so the
/// result is an independent check on the big-M formulation.
pub fn evaluate_topology(inst: &DcotsInstance, topo: &Topology) -> Result<DispatchSolution, DcotsError> {
    topo.check(inst)?;
    let start = Instant::now();
    let net = inst.network();
    let m = inst.infeasibility_cost();
    let nb = net.buses().len();
    let mut lp = LinearProgram::new();
    let p: Vec<usize> = net
        .generators()
        .iter()
        .zip(inst.gen_cost())
        .map(|(g, &c)| lp.add_var(c, g.p_min_pu, g.p_max_pu))
        .collect();
    let reference = net.reference_bus();
    let theta: Vec<usize> = (0..nb)
        .map(|b| if Some(b) == reference { lp.add_var(0.0, 0.0, 0.0) } else { lp.add_var(0.0, -PI, PI) })
        .collect();
    let u: Vec<usize> = (0..nb).map(|_| lp.add_var(m, 0.0, f64::INFINITY)).collect();
    let v: Vec<usize> = (0..nb).map(|_| lp.add_var(m, 0.0, f64::INFINITY)).collect();
    let mut delta = vec![None; net.lines().len()];
    let mut ends = Vec::with_capacity(net.lines().len());
    for (i, line) in net.lines().iter().enumerate() {
        let o = net.bus_position(line.from_bus).expect("validated");
        let d = net.bus_position(line.to_bus).expect("validated");
        ends.push((o, d));
        if topo.is_open(line.id) {
            continue;
        }
        let w = ANGLE_WINDOW.min(line.flow_limit_pu / line.susceptance_pu);
        let dv = lp.add_var(0.0, -w, w);
        lp.add_constraint(vec![(dv, 1.0), (theta[o], -1.0), (theta[d], 1.0)], Relation::Eq, 0.0);
        delta[i] = Some(dv);
    }
    for b in 0..nb {
        let mut row: Vec<(usize, f64)> = net.generators_at(b).iter().map(|&g| (p[g], 1.0)).collect();
        for &l in net.lines_to(b) {
            if let Some(dv) = delta[l] {
                row.push((dv, net.lines()[l].susceptance_pu));
            }
        }
        for &l in net.lines_from(b) {
            if let Some(dv) = delta[l] {
                row.push((dv, -net.lines()[l].susceptance_pu));
            }
        }
        row.push((u[b], 1.0));
        row.push((v[b], -1.0));
        lp.add_constraint(row, Relation::Eq, inst.demand()[b]);
    }
    let sol = solve_lp(&lp, None)?;
    if sol.status != LpStatus::Optimal {
        return Err(DcotsError::UnexpectedLpStatus(sol.status));
    }
    let x = &sol.primal;
    let dispatch: Vec<f64> = p.iter().map(|&j| x[j]).collect();
    let flow: Vec<f64> = net
        .lines()
        .iter()
        .zip(&delta)
        .map(|(l, dv)| dv.map_or(0.0, |j| l.susceptance_pu * x[j]))
        .collect();
    let angle: Vec<f64> = theta.iter().map(|&j| x[j]).collect();
    let load_shed: Vec<f64> = u.iter().map(|&j| x[j].max(0.0)).collect();
    let over_generation: Vec<f64> = v.iter().map(|&j| x[j].max(0.0)).collect();
    Ok(assemble(inst, topo.clone(), dispatch, flow, angle, load_shed, over_generation, start))
}

#[allow(clippy::too_many_arguments)]
fn assemble(
    inst: &DcotsInstance,
    topology: Topology,
    dispatch: Vec<f64>,
    flow: Vec<f64>,
    angle: Vec<f64>,
    load_shed: Vec<f64>,
    over_generation: Vec<f64>,
    start: Instant,
) -> DispatchSolution {
    let generation_cost: f64 = dispatch.iter().zip(inst.gen_cost()).map(|(p, c)| p * c).sum();
    let slack: f64 = load_shed.iter().chain(&over_generation).sum();
    let penalty_cost = inst.infeasibility_cost() * slack;
    let feasible = load_shed.iter().chain(&over_generation).all(|&s| s <= FEASIBILITY_TOL);
    DispatchSolution {
        topology,
        dispatch,
        flow,
        angle,
        load_shed,
        over_generation,
        generation_cost,
        penalty_cost,
        total_objective: generation_cost + penalty_cost,
        feasible,
        solve_seconds: start.elapsed().as_secs_f64(),
    }
}

/// `(z − z_best) / z_best`.
pub fn relative_gap(z: f64, z_best: f64) -> Result<f64, DcotsError> {
    if !(z_best > 0.0) {
        return Err(DcotsError::UndefinedGap(z_best));
    }
    Ok((z - z_best) / z_best)
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::network::{Bus, BusKind, Generator, Line};

    /// Two buses, cheap generator at bus 1, demand `d` at bus 2, line limit `lim`.
    pub fn two_bus(d: f64, lim: f64) -> DcotsInstance {
        let net = Network::new(
            "two",
            100.0,
            vec![
                Bus { id: 1, kind: BusKind::Reference, demand_pu: 0.0 },
                Bus { id: 2, kind: BusKind::Pq, demand_pu: d },
            ],
            vec![
                Generator { id: 1, bus: 1, p_min_pu: 0.0, p_max_pu: 5.0, cost_per_pu: 1000.0 },
                Generator { id: 2, bus: 2, p_min_pu: 0.0, p_max_pu: 5.0, cost_per_pu: 5000.0 },
            ],
            vec![Line { id: 1, from_bus: 1, to_bus: 2, susceptance_pu: 10.0, flow_limit_pu: lim, switchable: true }],
        );
        DcotsInstance::nominal(Arc::new(net)).unwrap()
    }

    #[test]
    fn uncongested_two_bus_dispatches_merit_order() {
        let inst = two_bus(1.0, 2.0);
        let sol = evaluate_topology(&inst, &Topology::all_closed()).unwrap();
        assert!(sol.feasible);
        assert!((sol.generation_cost - 1000.0).abs() < 1e-7);
        assert!((sol.flow[0] - 1.0).abs() < 1e-9);
        assert!((sol.angle[1] + 0.1).abs() < 1e-9);
    }

    #[test]
    fn congested_two_bus_uses_local_unit() {
        let inst = two_bus(1.0, 0.4);
        let sol = evaluate_topology(&inst, &Topology::all_closed()).unwrap();
        assert!((sol.generation_cost - (400.0 + 0.6 * 5000.0)).abs() < 1e-6);
    }

    #[test]
    fn stranded_demand_is_shed() {
        let net = Arc::new(
            crate::network::parse_case(
                "mpc.baseMVA = 100;\nmpc.bus = [1 3 0; 2 1 30; 3 1 20];\nmpc.gen = [1 0 0 0 0 1 100 1 300 0];\n\
                 mpc.branch = [1 2 0 0.1 0 100 0 0 0 0 1; 2 3 0 0.1 0 100 0 0 0 0 1];\nmpc.gencost = [2 0 0 2 10 0];\n",
            )
            .unwrap(),
        );
        let inst = DcotsInstance::nominal(net).unwrap();
        let sol = evaluate_topology(&inst, &Topology::from_open([1, 2])).unwrap();
        assert!(!sol.feasible);
        assert!((sol.load_shed[1] - 0.3).abs() < 1e-9 && (sol.load_shed[2] - 0.2).abs() < 1e-9);
        assert!((sol.penalty_cost - 0.5e6).abs() < 1e-3);
        assert_eq!(sol.flow, vec![0.0, 0.0]);
        let report = sol.report(100.0);
        assert!((report.load_shed_mw - 50.0).abs() < 1e-7);
        assert_eq!(report.open_lines, vec![1, 2]);
    }

    #[test]
    fn report_uses_the_documented_field_names() {
        let inst = two_bus(1.0, 2.0);
        let sol = evaluate_topology(&inst, &Topology::all_closed()).unwrap();
        let json = serde_json::to_value(sol.report(100.0)).unwrap();
        let mut keys: Vec<&str> = json.as_object().unwrap().keys().map(|k| k.as_str()).collect();
        keys.sort();
        assert_eq!(
            keys,
            vec![
                "generation_cost",
                "load_shed_mw",
                "open_lines",
                "over_generation_mw",
                "penalty_cost",
                "solve_seconds",
                "total_objective"
            ]
        );
    }

    #[test]
    fn topology_checks() {
        let inst = two_bus(1.0, 2.0).with_cardinality(Some(0));
        assert!(matches!(
            Topology::from_open([1]).check(&inst),
            Err(DcotsError::CardinalityExceeded { open: 1, limit: 0 })
        ));
        assert!(matches!(Topology::from_open([5]).check(&inst), Err(DcotsError::UnknownLine(5))));
        assert!(Topology::from_open([1]) > Topology::all_closed());
        assert!(Topology::from_open([1, 2]) < Topology::from_open([3]));
    }

    #[test]
    fn relative_gap_formula() {
        assert_eq!(relative_gap(100.0, 100.0).unwrap(), 0.0);
        assert!((relative_gap(101.0, 100.0).unwrap() - 0.01).abs() < 1e-15);
        assert!(matches!(relative_gap(1.0, 0.0), Err(DcotsError::UndefinedGap(_))));
        assert!(matches!(relative_gap(1.0, -3.0), Err(DcotsError::UndefinedGap(_))));
    }
}
