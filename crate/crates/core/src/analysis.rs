//! Studies over a training set: topology census, cross-evaluation, cardinal
//! distances, leave-one-out validation, bus classes, class-aggregated KNN,
//! the empirical stability probe and load-shed accounting.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::Write;
use std::sync::Arc;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::dcots::{
    brute_force_dcots, evaluate_topology, optimal_topologies, relative_gap, solve_dcots, DcotsError, DcotsInstance,
    DispatchSolution, Topology,
};
use crate::heuristics::{
    best_candidate, knn_heuristic, rank_points, HeuristicError, HeuristicResult, KnnConfig, Norm, Provenance,
    TrainingSet,
};
use crate::network::Network;

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error("training set has no entries")]
    EmptyTrainingSet,
    #[error("parameter vector of length {got} does not fit a network with {expected} generators and buses")]
    VectorLength { expected: usize, got: usize },
    #[error("classing does not partition the network's buses: {0}")]
    BadClassing(String),
    #[error("radius schedule must be non-negative and finite")]
    BadSchedule,
    #[error(transparent)]
    Heuristic(#[from] HeuristicError),
    #[error(transparent)]
    Dcots(#[from] DcotsError),
}

fn join_ids(ids: impl IntoIterator<Item = usize>) -> String {
    ids.into_iter().map(|i| i.to_string()).collect::<Vec<_>>().join(" ")
}

/// Rebuilds the instance described by a parameter vector (costs, then demands).
pub fn instance_from_q(net: &Arc<Network>, q: &[f64], cardinality: Option<usize>) -> Result<DcotsInstance, AnalysisError> {
    let ng = net.generators().len();
    let expected = ng + net.buses().len();
    if q.len() != expected {
        return Err(AnalysisError::VectorLength { expected, got: q.len() });
    }
    Ok(DcotsInstance::new(net.clone(), q[ng..].to_vec(), q[..ng].to_vec())?.with_cardinality(cardinality))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Census {
    pub entries: usize,
    pub unique_count: usize,
    /// Distinct open sets in order of first appearance, with multiplicity.
    pub unique: Vec<(Vec<usize>, usize)>,
    /// Number of unique solutions opening each line.
    pub line_open_frequency: BTreeMap<usize, usize>,
    /// Number of unique solutions opening both lines of a pair.
    pub pair_cooccurrence: BTreeMap<(usize, usize), usize>,
}

impl Census {
    /// Share of unique solutions that open `line`.
    pub fn fraction(&self, line: usize) -> f64 {
        if self.unique_count == 0 {
            return 0.0;
        }
        *self.line_open_frequency.get(&line).unwrap_or(&0) as f64 / self.unique_count as f64
    }

    /// `line,unique_solutions_open,fraction`, one row per line ever opened.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("line,unique_solutions_open,fraction\n");
        for (&line, &count) in &self.line_open_frequency {
            let _ = writeln!(s, "{line},{count},{}", self.fraction(line));
        }
        s
    }

    /// `line_a,line_b,unique_solutions_open`.
    pub fn pairs_csv(&self) -> String {
        let mut s = String::from("line_a,line_b,unique_solutions_open\n");
        for (&(a, b), &count) in &self.pair_cooccurrence {
            let _ = writeln!(s, "{a},{b},{count}");
        }
        s
    }
}

pub fn topology_census(train: &TrainingSet) -> Census {
    let mut order: Vec<Vec<usize>> = Vec::new();
    let mut mult: HashMap<Vec<usize>, usize> = HashMap::new();
    for e in &train.entries {
        let key: Vec<usize> = e.topology().open_lines().iter().copied().collect();
        let count = mult.entry(key.clone()).or_insert(0);
        if *count == 0 {
            order.push(key);
        }
        *count += 1;
    }
    let mut line_open_frequency = BTreeMap::new();
    let mut pair_cooccurrence = BTreeMap::new();
    for set in &order {
        for (i, &a) in set.iter().enumerate() {
            *line_open_frequency.entry(a).or_insert(0) += 1;
            for &b in &set[i + 1..] {
                *pair_cooccurrence.entry((a, b)).or_insert(0) += 1;
            }
        }
    }
    let unique: Vec<(Vec<usize>, usize)> = order.iter().map(|k| (k.clone(), mult[k])).collect();
    Census { entries: train.entries.len(), unique_count: unique.len(), unique, line_open_frequency, pair_cooccurrence }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Cell {
    pub objective: Option<f64>,
    pub feasible: bool,
    pub gap: Option<f64>,
    pub error: Option<String>,
}

/// Objective of every unique training topology on every test instance.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GapMatrix {
    /// Rows: unique training topologies in order of first appearance.
    pub topologies: Vec<Topology>,
    /// `cells[row][test]`.
    pub cells: Vec<Vec<Cell>>,
    /// Best-known objective per test instance.
    pub best_known: Vec<f64>,
}

impl GapMatrix {
    pub fn row_of(&self, topo: &Topology) -> Option<usize> {
        self.topologies.iter().position(|t| t == topo)
    }

    /// Smallest gap in a test column.
    pub fn column_min_gap(&self, test: usize) -> Option<f64> {
        self.cells.iter().filter_map(|r| r[test].gap).min_by(f64::total_cmp)
    }

    /// `row,test,open_lines,objective,gap,feasible`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("row,test,open_lines,objective,gap,feasible\n");
        for (r, (topo, row)) in self.topologies.iter().zip(&self.cells).enumerate() {
            for (t, c) in row.iter().enumerate() {
                let obj = c.objective.map_or(String::new(), |v| v.to_string());
                let gap = c.gap.map_or(String::new(), |v| v.to_string());
                let _ = writeln!(s, "{r},{t},{},{obj},{gap},{}", join_ids(topo.open_lines().iter().copied()), c.feasible);
            }
        }
        s
    }
}

/// Evaluates each unique training topology on each test. `exact`, when
/// given, supplies further best-known objectives per test (e.g. from an
/// exact solve or heuristic runs).
pub fn cross_evaluate(
    train: &TrainingSet,
    tests: &[DcotsInstance],
    exact: Option<&[f64]>,
) -> Result<GapMatrix, AnalysisError> {
    let census = topology_census(train);
    let topologies: Vec<Topology> = census.unique.iter().map(|(s, _)| Topology::from_open(s.iter().copied())).collect();
    let pairs: Vec<(usize, usize)> =
        (0..topologies.len()).flat_map(|r| (0..tests.len()).map(move |t| (r, t))).collect();
    let evaluated: Vec<Result<DispatchSolution, DcotsError>> =
        pairs.par_iter().map(|&(r, t)| evaluate_topology(&tests[t], &topologies[r])).collect();
    let mut cells: Vec<Vec<Cell>> = vec![Vec::with_capacity(tests.len()); topologies.len()];
    for ((r, _), res) in pairs.iter().zip(evaluated) {
        cells[*r].push(match res {
            Ok(d) => Cell { objective: Some(d.total_objective), feasible: d.feasible, gap: None, error: None },
            Err(e) => Cell { objective: None, feasible: false, gap: None, error: Some(e.to_string()) },
        });
    }
    let mut best_known = Vec::with_capacity(tests.len());
    for t in 0..tests.len() {
        let col = cells.iter().filter_map(|r| r[t].objective);
        let extra = exact.and_then(|e| e.get(t).copied());
        let best = col.chain(extra).fold(f64::INFINITY, f64::min);
        best_known.push(best);
        for row in cells.iter_mut() {
            if let Some(obj) = row[t].objective {
                row[t].gap = relative_gap(obj, best).ok();
            }
        }
    }
    Ok(GapMatrix { topologies, cells, best_known })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CardinalRecord {
    pub test: usize,
    /// Rank (1 = nearest) of the nearest entry whose topology is best on the test.
    pub rank_of_best: Option<usize>,
    /// Smallest rank whose topology is within `epsilon` of the best known.
    pub rank_of_first_within_epsilon: Option<usize>,
}

pub fn cardinal_distances(
    train: &TrainingSet,
    tests: &[DcotsInstance],
    matrix: &GapMatrix,
    epsilon: f64,
) -> Result<Vec<CardinalRecord>, AnalysisError> {
    let row_of: Vec<Option<usize>> = train.entries.iter().map(|e| matrix.row_of(&e.topology())).collect();
    tests
        .iter()
        .enumerate()
        .map(|(t, inst)| {
            let q: Vec<f64> = inst.gen_cost().iter().chain(inst.demand()).copied().collect();
            let ranked = rank_points(train.entries.iter().enumerate().map(|(i, e)| (i, e.q.as_slice())), &q, Norm::Euclidean)?;
            let gap_of = |i: usize| row_of[i].and_then(|r| matrix.cells[r][t].gap);
            let objective_of = |i: usize| row_of[i].and_then(|r| matrix.cells[r][t].objective);
            let column_best = (0..train.entries.len()).filter_map(objective_of).fold(f64::INFINITY, f64::min);
            let tol = crate::dcots::tie_tolerance(column_best);
            let rank_of_best =
                ranked.iter().position(|n| objective_of(n.index).is_some_and(|v| v <= column_best + tol)).map(|p| p + 1);
            let rank_of_first_within_epsilon =
                ranked.iter().position(|n| gap_of(n.index).is_some_and(|g| g <= epsilon)).map(|p| p + 1);
            Ok(CardinalRecord { test: t, rank_of_best, rank_of_first_within_epsilon })
        })
        .collect()
}

pub fn cardinal_csv(records: &[CardinalRecord]) -> String {
    let mut s = String::from("test,rank_of_best,rank_of_first_within_epsilon\n");
    for r in records {
        let f = |v: Option<usize>| v.map_or("none".to_string(), |x| x.to_string());
        let _ = writeln!(s, "{},{},{}", r.test, f(r.rank_of_best), f(r.rank_of_first_within_epsilon));
    }
    s
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LoocvSummary {
    pub k: usize,
    pub norm: String,
    pub mean: f64,
    pub min: f64,
    pub max: f64,
    pub gaps: Vec<f64>,
}

/// Leave-one-out: each entry is solved by KNN over the other entries. The
/// best known per instance is the lower of its training objective and the
/// KNN result.
pub fn loocv(
    net: &Arc<Network>,
    set: &TrainingSet,
    cfg: &KnnConfig,
    cardinality: Option<usize>,
) -> Result<LoocvSummary, AnalysisError> {
    if set.entries.len() < 2 {
        return Err(AnalysisError::EmptyTrainingSet);
    }
    let gaps: Vec<f64> = (0..set.entries.len())
        .map(|i| {
            let entry = &set.entries[i];
            let inst = instance_from_q(net, &entry.q, cardinality)?;
            let mut rest = set.clone();
            rest.entries.remove(i);
            let res = knn_heuristic(&inst, &rest, cfg)?;
            let best = entry.objective.min(res.dispatch.total_objective);
            Ok(relative_gap(res.dispatch.total_objective, best)?)
        })
        .collect::<Result<_, AnalysisError>>()?;
    let mean = gaps.iter().sum::<f64>() / gaps.len() as f64;
    let min = gaps.iter().copied().fold(f64::INFINITY, f64::min);
    let max = gaps.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(LoocvSummary { k: cfg.k, norm: cfg.norm.to_string(), mean, min, max, gaps })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BusClass {
    pub buses: Vec<u32>,
    pub open_lines: Vec<usize>,
}

/// Buses grouped by the switching solution obtained when each one's demand
/// is raised.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BusClassing {
    pub delta_pu: f64,
    pub classes: Vec<BusClass>,
    /// Class index pairs whose open sets differ by exactly one line.
    pub near_classes: Vec<(usize, usize)>,
    /// Buses whose solve failed, with the error.
    pub failures: Vec<(u32, String)>,
}

impl BusClassing {
    pub fn class_of(&self, bus: u32) -> Option<usize> {
        self.classes.iter().position(|c| c.buses.contains(&bus))
    }

    /// Class made of every bus on its own (the identity aggregation).
    pub fn singletons(net: &Network) -> Self {
        Self {
            delta_pu: 0.0,
            classes: net.buses().iter().map(|b| BusClass { buses: vec![b.id], open_lines: Vec::new() }).collect(),
            near_classes: Vec::new(),
            failures: Vec::new(),
        }
    }
}

/// Classes from the exact solver at `rel_gap`.
pub fn bus_classes(
    net: &Arc<Network>,
    delta_pu: f64,
    cardinality: Option<usize>,
    rel_gap: f64,
) -> Result<BusClassing, AnalysisError> {
    bus_classes_with(net, delta_pu, cardinality, |inst| Ok(solve_dcots(inst, rel_gap, None, None)?.topology))
}

/// Classes from an arbitrary solver (used to compare against enumeration).
pub fn bus_classes_with(
    net: &Arc<Network>,
    delta_pu: f64,
    cardinality: Option<usize>,
    solve: impl Fn(&DcotsInstance) -> Result<Topology, DcotsError> + Sync,
) -> Result<BusClassing, AnalysisError> {
    let base = DcotsInstance::nominal(net.clone())?.with_cardinality(cardinality);
    let results: Vec<Result<Topology, DcotsError>> = (0..net.buses().len())
        .into_par_iter()
        .map(|b| {
            let mut demand = base.demand().to_vec();
            demand[b] += delta_pu;
            let inst = DcotsInstance::new(net.clone(), demand, base.gen_cost().to_vec())?.with_cardinality(cardinality);
            solve(&inst)
        })
        .collect();
    let mut classes: Vec<BusClass> = Vec::new();
    let mut failures = Vec::new();
    for (bus, res) in net.buses().iter().zip(results) {
        match res {
            Ok(topo) => {
                let open: Vec<usize> = topo.open_lines().iter().copied().collect();
                match classes.iter_mut().find(|c| c.open_lines == open) {
                    Some(c) => c.buses.push(bus.id),
                    None => classes.push(BusClass { buses: vec![bus.id], open_lines: open }),
                }
            }
            Err(e) => failures.push((bus.id, e.to_string())),
        }
    }
    let mut near_classes = Vec::new();
    for i in 0..classes.len() {
        for j in i + 1..classes.len() {
            let a: BTreeSet<usize> = classes[i].open_lines.iter().copied().collect();
            let b: BTreeSet<usize> = classes[j].open_lines.iter().copied().collect();
            if a.symmetric_difference(&b).count() == 1 {
                near_classes.push((i, j));
            }
        }
    }
    Ok(BusClassing { delta_pu, classes, near_classes, failures })
}

/// Per-class demand sums of a demand vector in network bus order.
pub fn aggregate_demand(net: &Network, classing: &BusClassing, demand: &[f64]) -> Result<Vec<f64>, AnalysisError> {
    let mut class_of = vec![None; net.buses().len()];
    for (c, class) in classing.classes.iter().enumerate() {
        for &id in &class.buses {
            let pos = net.bus_position(id).ok_or_else(|| AnalysisError::BadClassing(format!("unknown bus {id}")))?;
            if class_of[pos].replace(c).is_some() {
                return Err(AnalysisError::BadClassing(format!("bus {id} in two classes")));
            }
        }
    }
    let mut sums = vec![0.0; classing.classes.len()];
    for (pos, c) in class_of.iter().enumerate() {
        let c = c.ok_or_else(|| AnalysisError::BadClassing(format!("bus {} unassigned", net.buses()[pos].id)))?;
        sums[c] += demand[pos];
    }
    Ok(sums)
}

/// KNN on per-class demand totals; generation costs are left out of the
/// distance.
pub fn aggregated_knn(
    inst: &DcotsInstance,
    train: &TrainingSet,
    classing: &BusClassing,
    cfg: &KnnConfig,
) -> Result<HeuristicResult, AnalysisError> {
    let start = Instant::now();
    let net = inst.network();
    let got = net.fingerprint();
    if got != train.network_fingerprint {
        return Err(HeuristicError::FingerprintMismatch { expected: train.network_fingerprint.clone(), got }.into());
    }
    if cfg.k == 0 {
        return Err(HeuristicError::ZeroK.into());
    }
    if train.entries.is_empty() {
        return Err(HeuristicError::EmptyTrainingSet.into());
    }
    let ng = net.generators().len();
    let query = aggregate_demand(net, classing, inst.demand())?;
    let mut points = Vec::new();
    for (i, e) in train.entries.iter().enumerate() {
        if e.q.len() != ng + net.buses().len() {
            return Err(AnalysisError::VectorLength { expected: ng + net.buses().len(), got: e.q.len() });
        }
        if e.topology().check(inst).is_ok() {
            points.push((i, aggregate_demand(net, classing, &e.q[ng..])?));
        }
    }
    let mut neighbors = rank_points(points.iter().map(|(i, v)| (*i, v.as_slice())), &query, cfg.norm)?;
    if neighbors.is_empty() {
        return Err(HeuristicError::NoEligibleEntries(inst.open_budget()).into());
    }
    neighbors.truncate(cfg.k);
    let topologies: Vec<Topology> = neighbors.iter().map(|n| train.entries[n.index].topology()).collect();
    let (pos, dispatch, lp_solves) = best_candidate(inst, &topologies)?;
    Ok(HeuristicResult {
        topology: topologies[pos].clone(),
        dispatch,
        candidate_count: neighbors.len(),
        wall_time: start.elapsed().as_secs_f64(),
        provenance: Provenance::Knn,
        lp_solves,
        source_entry: Some(neighbors[pos].index),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RadiusOutcome {
    pub radius: f64,
    pub probes: usize,
    pub unchanged: usize,
}

/// Empirical neighbourhood in which the optimal topology persists. This
/// samples directions; it does not certify a ball.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StabilityReport {
    /// Largest scheduled radius such that it and every smaller scheduled
    /// radius kept the optimum in all probes; 0 if the optimum is not unique.
    pub radius: f64,
    pub unique_optimum: bool,
    pub optimal_open_lines: Vec<usize>,
    pub directions: usize,
    pub seed: u64,
    pub outcomes: Vec<RadiusOutcome>,
}

/// Direction with simplex weights and random signs over the buses.
fn probe_direction(rng: &mut ChaCha20Rng, n: usize) -> Vec<f64> {
    let w: Vec<f64> = (0..n).map(|_| -(1.0 - rng.random::<f64>()).ln()).collect();
    let total: f64 = w.iter().sum();
    w.into_iter().map(|x| if rng.random_bool(0.5) { x / total } else { -x / total }).collect()
}

fn exact_topology(inst: &DcotsInstance) -> Result<Topology, DcotsError> {
    Ok(brute_force_dcots(inst)?.0)
}

/// Re-solves the instance (by enumeration) with demands moved by `r · d` for
/// `directions` seeded directions `d` and each radius `r` of the schedule.
pub fn stability_probe(
    inst: &DcotsInstance,
    directions: usize,
    radius_schedule: &[f64],
    seed: u64,
) -> Result<StabilityReport, AnalysisError> {
    if radius_schedule.iter().any(|r| !(r.is_finite() && *r >= 0.0)) {
        return Err(AnalysisError::BadSchedule);
    }
    let (_, ties) = optimal_topologies(inst)?;
    let optimum = ties[0].clone();
    let optimal_open_lines: Vec<usize> = optimum.open_lines().iter().copied().collect();
    let mut report = StabilityReport {
        radius: 0.0,
        unique_optimum: ties.len() == 1,
        optimal_open_lines,
        directions,
        seed,
        outcomes: Vec::new(),
    };
    if !report.unique_optimum {
        return Ok(report);
    }
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let nb = inst.network().buses().len();
    let dirs: Vec<Vec<f64>> = (0..directions).map(|_| probe_direction(&mut rng, nb)).collect();
    let mut radii = radius_schedule.to_vec();
    radii.sort_by(f64::total_cmp);
    let mut intact = true;
    for r in radii {
        let unchanged: Vec<bool> = dirs
            .par_iter()
            .map(|d| {
                let demand: Vec<f64> = inst.demand().iter().zip(d).map(|(x, dx)| x + r * dx).collect();
                let moved = DcotsInstance::new(inst.network().clone(), demand, inst.gen_cost().to_vec())?
                    .with_cardinality(inst.cardinality())
                    .with_infeasibility_cost(inst.infeasibility_cost());
                Ok(exact_topology(&moved)? == optimum)
            })
            .collect::<Result<_, DcotsError>>()?;
        let count = unchanged.iter().filter(|&&u| u).count();
        intact &= count == directions;
        if intact {
            report.radius = r;
        }
        report.outcomes.push(RadiusOutcome { radius: r, probes: directions, unchanged: count });
    }
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FeasibilityReport {
    pub solutions: usize,
    pub infeasible: usize,
    pub max_shed_mw: f64,
    pub mean_shed_mw: f64,
    pub overgen_events: usize,
    pub shed_mw: Vec<f64>,
    pub over_generation_mw: Vec<f64>,
}

impl FeasibilityReport {
    /// `index,load_shed_mw,over_generation_mw`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("index,load_shed_mw,over_generation_mw\n");
        for (i, (u, v)) in self.shed_mw.iter().zip(&self.over_generation_mw).enumerate() {
            let _ = writeln!(s, "{i},{u},{v}");
        }
        s
    }
}

/// Load shed and over-generation of a batch of dispatches, in MW.
pub fn feasibility_report(results: &[DispatchSolution], base_mva: f64) -> FeasibilityReport {
    let shed_mw: Vec<f64> = results.iter().map(|r| r.load_shed_mw(base_mva)).collect();
    let over_generation_mw: Vec<f64> = results.iter().map(|r| r.over_generation_mw(base_mva)).collect();
    let max_shed_mw = shed_mw.iter().copied().fold(0.0, f64::max);
    let mean_shed_mw = if shed_mw.is_empty() { 0.0 } else { shed_mw.iter().sum::<f64>() / shed_mw.len() as f64 };
    FeasibilityReport {
        solutions: results.len(),
        infeasible: results.iter().filter(|r| !r.feasible).count(),
        max_shed_mw,
        mean_shed_mw,
        overgen_events: results.iter().filter(|r| r.over_generation.iter().any(|&v| v > crate::dcots::FEASIBILITY_TOL)).count(),
        shed_mw,
        over_generation_mw,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::heuristics::TrainingEntry;

    fn entry(open: &[usize]) -> TrainingEntry {
        TrainingEntry { q: vec![1.0], open_lines: open.to_vec(), objective: 1.0, gap: 0.0, seconds: 0.0 }
    }

    #[test]
    fn census_counts_unique_solutions() {
        let mut t = TrainingSet::new("fp", None);
        t.entries = vec![entry(&[]), entry(&[3]), entry(&[3])];
        let c = topology_census(&t);
        assert_eq!(c.unique_count, 2);
        assert_eq!(c.line_open_frequency[&3], 1);
        assert_eq!(c.fraction(3), 0.5);
        assert_eq!(c.unique, vec![(vec![], 1), (vec![3], 2)]);

        t.entries = vec![entry(&[]), entry(&[])];
        let c = topology_census(&t);
        assert_eq!(c.unique_count, 1);
        assert!(c.line_open_frequency.is_empty());
    }

    #[test]
    fn pair_cooccurrence() {
        let mut t = TrainingSet::new("fp", None);
        t.entries = vec![entry(&[1, 2, 5]), entry(&[2, 5]), entry(&[1, 2, 5])];
        let c = topology_census(&t);
        assert_eq!(c.pair_cooccurrence[&(2, 5)], 2);
        assert_eq!(c.pair_cooccurrence[&(1, 2)], 1);
        assert_eq!(c.to_csv(), "line,unique_solutions_open,fraction\n1,1,0.5\n2,2,1\n5,2,1\n");
    }

    #[test]
    fn feasibility_unit_conversion() {
        let mk = |u: Vec<f64>, v: Vec<f64>| DispatchSolution {
            topology: Topology::all_closed(),
            dispatch: vec![],
            flow: vec![],
            angle: vec![],
            feasible: u.iter().chain(&v).all(|&x| x <= 1e-6),
            load_shed: u,
            over_generation: v,
            generation_cost: 0.0,
            penalty_cost: 0.0,
            total_objective: 0.0,
            solve_seconds: 0.0,
        };
        let r = feasibility_report(&[mk(vec![0.0, 0.0], vec![0.0, 0.0])], 100.0);
        assert_eq!((r.max_shed_mw, r.mean_shed_mw, r.overgen_events), (0.0, 0.0, 0));
        let r = feasibility_report(&[mk(vec![0.3, 0.08], vec![0.0, 0.0]), mk(vec![0.0, 0.0], vec![0.0, 0.1])], 100.0);
        assert!((r.max_shed_mw - 38.0).abs() < 1e-9);
        assert!((r.mean_shed_mw - 19.0).abs() < 1e-9);
        assert_eq!(r.overgen_events, 1);
        assert_eq!(r.infeasible, 2);
    }
}
