//! Exact solution: branch-and-bound on the MIP and exhaustive enumeration.

use std::time::Duration;

use log::warn;
use otswitch_lp::{solve_mip, LpError, MipOptions, MipResult, MipStatus};
use rayon::prelude::*;
use serde::Serialize;

use super::{build_dcots_mip, evaluate_topology, relative_gap, DcotsError, DcotsInstance, DcotsMip, DispatchSolution, Topology};

/// Largest number of topologies [`brute_force_dcots`] will evaluate.
pub const ENUMERATION_LIMIT: u128 = 1_000_000;

/// Objectives within this distance of the optimum count as ties.
pub fn tie_tolerance(z: f64) -> f64 {
    1e-8 * z.abs().max(1.0)
}

#[derive(Debug, Clone)]
pub struct DcotsSolution {
    pub topology: Topology,
    pub dispatch: DispatchSolution,
    pub mip: MipResult,
}

/// Solves the switching MIP to `rel_gap`, warm-started from `warm`
/// (all lines closed when absent).
///
/// With `rel_gap == 0` and a proven optimum the returned topology is the
/// lexicographically smallest optimal open set, matching
/// [`brute_force_dcots`].
pub fn solve_dcots(
    inst: &DcotsInstance,
    rel_gap: f64,
    time_limit: Option<Duration>,
    warm: Option<&Topology>,
) -> Result<DcotsSolution, DcotsError> {
    let model = build_dcots_mip(inst)?;
    let warm_topo = warm.cloned().unwrap_or_default();
    let warm_sol = evaluate_topology(inst, &warm_topo)?;
    let warm_x = model.point_from(&warm_sol);
    let opts = MipOptions { rel_gap, time_limit, ..Default::default() };
    let mut result = match solve_mip(&model.mip, &opts, Some(&warm_x)) {
        Err(LpError::InvalidWarmStart(why)) => {
            warn!("warm start rejected ({why}); solving cold");
            solve_mip(&model.mip, &opts, None)?
        }
        other => other?,
    };
    let x = result.incumbent.as_ref().ok_or(DcotsError::NoSolution)?;
    let mut topology = model.topology_of(x);
    let mut dispatch = evaluate_topology(inst, &topology)?;
    if rel_gap == 0.0 && result.status == MipStatus::Optimal {
        let z = dispatch.total_objective.min(result.objective_value);
        let canonical = lexicographic_optimum(inst, &model, z, &topology)?;
        if canonical != topology {
            topology = canonical;
            dispatch = evaluate_topology(inst, &topology)?;
        }
    }
    // Report the objective of the topology actually returned.
    result.objective_value = dispatch.total_objective;
    result.incumbent = Some(model.point_from(&dispatch));
    Ok(DcotsSolution { topology, dispatch, mip: result })
}

/// Smallest open set (sorted-sequence order) whose objective is within
/// [`tie_tolerance`] of `z`. `witness` must be such a set.
fn lexicographic_optimum(
    inst: &DcotsInstance,
    model: &DcotsMip,
    z: f64,
    witness: &Topology,
) -> Result<Topology, DcotsError> {
    let threshold = z + tie_tolerance(z);
    let mut ids: Vec<usize> = inst.network().switchable_lines().map(|l| l.id).collect();
    ids.sort_unstable();
    let mut prefix: Vec<usize> = Vec::new();
    let mut witness: Vec<usize> = witness.open_lines().iter().copied().collect();
    loop {
        let candidate = Topology::from_open(prefix.iter().copied());
        if prefix.len() == witness.len() || evaluate_topology(inst, &candidate)?.total_objective <= threshold {
            return Ok(candidate);
        }
        // The witness extends the prefix; look for a smaller next element.
        let next_known = witness[prefix.len()];
        let start = prefix.last().map_or(0, |&last| ids.partition_point(|&i| i <= last));
        let mut chosen = next_known;
        for &c in ids[start..].iter().take_while(|&&c| c < next_known) {
            if let Some(found) = completion_exists(inst, model, &prefix, c, threshold)? {
                chosen = c;
                witness = found;
                break;
            }
        }
        prefix.push(chosen);
    }
}

/// Searches for a set within `threshold` that starts with `prefix` followed
/// by `next`; lines between the prefix and `next` are held closed.
fn completion_exists(
    inst: &DcotsInstance,
    model: &DcotsMip,
    prefix: &[usize],
    next: usize,
    threshold: f64,
) -> Result<Option<Vec<usize>>, DcotsError> {
    let mut mip = model.mip.clone();
    for (l, line) in inst.network().lines().iter().enumerate() {
        let j = model.layout.y(l);
        if prefix.contains(&line.id) || line.id == next {
            mip.lp.upper[j] = 0.0;
        } else if line.id < next {
            mip.lp.lower[j] = 1.0;
        }
    }
    let opts = MipOptions { cutoff: Some(threshold), first_feasible: true, ..Default::default() };
    let res = solve_mip(&mip, &opts, None)?;
    Ok(res.incumbent.map(|x| model.topology_of(&x).open_lines().iter().copied().collect()))
}

fn binomial_sum(n: usize, k: usize) -> u128 {
    let mut total: u128 = 0;
    let mut c: u128 = 1;
    for j in 0..=k.min(n) {
        total = total.saturating_add(c);
        c = c.saturating_mul((n - j) as u128) / (j as u128 + 1);
    }
    total
}

/// Every subset of `ids` with at most `k` elements, in sorted-sequence order.
fn subsets_in_order(ids: &[usize], k: usize) -> Vec<Vec<usize>> {
    fn rec(ids: &[usize], k: usize, from: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        out.push(cur.clone());
        if cur.len() == k {
            return;
        }
        for i in from..ids.len() {
            cur.push(ids[i]);
            rec(ids, k, i + 1, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(ids, k, 0, &mut Vec::new(), &mut out);
    out
}

/// Objective of every topology within the cardinality budget, in
/// sorted-sequence order of the open sets.
///
/// Without a cardinality limit this is only allowed for at most 20
/// switchable lines.
pub fn enumerate_topologies(inst: &DcotsInstance) -> Result<Vec<(Topology, f64)>, DcotsError> {
    let mut ids: Vec<usize> = inst.network().switchable_lines().map(|l| l.id).collect();
    ids.sort_unstable();
    let n = ids.len();
    let k = match inst.cardinality() {
        Some(k) => k.min(n),
        None if n <= 20 => n,
        None => return Err(DcotsError::GuardViolation(1u128 << n.min(127))),
    };
    let count = binomial_sum(n, k);
    if count > ENUMERATION_LIMIT {
        return Err(DcotsError::GuardViolation(count));
    }
    subsets_in_order(&ids, k)
        .into_par_iter()
        .map(|s| {
            let topo = Topology::from_open(s);
            evaluate_topology(inst, &topo).map(|d| (topo, d.total_objective))
        })
        .collect()
}

/// Optimal objective and every topology tied with it.
pub fn optimal_topologies(inst: &DcotsInstance) -> Result<(f64, Vec<Topology>), DcotsError> {
    let all = enumerate_topologies(inst)?;
    let best = all.iter().map(|(_, v)| *v).fold(f64::INFINITY, f64::min);
    let threshold = best + tie_tolerance(best);
    Ok((best, all.into_iter().filter(|(_, v)| *v <= threshold).map(|(t, _)| t).collect()))
}

/// Exact optimum by evaluating every topology within the cardinality budget.
/// Ties go to the lexicographically smallest open set.
pub fn brute_force_dcots(inst: &DcotsInstance) -> Result<(Topology, DispatchSolution), DcotsError> {
    let (_, ties) = optimal_topologies(inst)?;
    let topo = ties.into_iter().next().expect("the empty set is always enumerated");
    let dispatch = evaluate_topology(inst, &topo)?;
    Ok((topo, dispatch))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CongestionStats {
    /// Share of lines at their flow limit in the all-closed dispatch.
    pub tight_line_fraction: f64,
    pub all_closed_objective: f64,
    pub best_known: f64,
    pub all_closed_gap: f64,
}

/// All-closed congestion figures; `best_known` defaults to an exact solve.
pub fn congestion_stats(inst: &DcotsInstance, best_known: Option<f64>) -> Result<CongestionStats, DcotsError> {
    let closed = evaluate_topology(inst, &Topology::all_closed())?;
    let lines = inst.network().lines();
    let tight = lines.iter().zip(&closed.flow).filter(|(l, f)| f.abs() >= l.flow_limit_pu - 1e-6).count();
    let tight_line_fraction = if lines.is_empty() { 0.0 } else { tight as f64 / lines.len() as f64 };
    let best_known = match best_known {
        Some(b) => b,
        None => solve_dcots(inst, 0.0, None, None)?.dispatch.total_objective,
    };
    Ok(CongestionStats {
        tight_line_fraction,
        all_closed_objective: closed.total_objective,
        best_known,
        all_closed_gap: relative_gap(closed.total_objective, best_known)?,
    })
}
