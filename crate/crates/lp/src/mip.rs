//! Best-bound branch-and-bound over binary variables.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::time::{Duration, Instant};

use crate::model::MipProblem;
use crate::simplex::{solve_lp_with, Basis, LpStatus, SimplexOptions};
use crate::LpError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MipStatus {
    Optimal,
    /// Stopped with an incumbent inside the requested relative gap.
    GapLimit,
    TimeLimit,
    Infeasible,
}

#[derive(Debug, Clone)]
pub struct MipOptions {
    pub rel_gap: f64,
    pub time_limit: Option<Duration>,
    pub integrality_tol: f64,
    /// Ignore solutions and prune nodes whose objective exceeds this value.
    pub cutoff: Option<f64>,
    /// Stop at the first integer-feasible solution (within `cutoff`).
    pub first_feasible: bool,
    pub record_trace: bool,
    pub simplex: SimplexOptions,
}

impl Default for MipOptions {
    fn default() -> Self {
        Self {
            rel_gap: 0.0,
            time_limit: None,
            integrality_tol: 1e-6,
            cutoff: None,
            first_feasible: false,
            record_trace: false,
            simplex: SimplexOptions::default(),
        }
    }
}

/// `(best_bound, incumbent objective)` observed when a node is processed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TracePoint {
    pub best_bound: f64,
    pub incumbent: f64,
}

#[derive(Debug, Clone)]
pub struct MipResult {
    pub status: MipStatus,
    pub incumbent: Option<Vec<f64>>,
    pub objective_value: f64,
    pub best_bound: f64,
    pub gap: f64,
    pub nodes: usize,
    pub lp_iterations: usize,
    pub wall_time: f64,
    pub trace: Vec<TracePoint>,
}

/// Relative gap `(z − bound) / |z|`, absolute when `z` is (near) zero.
pub(crate) fn relative_gap(objective: f64, bound: f64) -> f64 {
    if !objective.is_finite() {
        return f64::INFINITY;
    }
    let diff = (objective - bound).max(0.0);
    if objective.abs() < 1e-12 {
        diff
    } else {
        diff / objective.abs()
    }
}

struct Node {
    id: usize,
    /// Lower bound inherited from the parent relaxation.
    key: f64,
    /// Per integer variable: -1 free, 0 or 1 fixed.
    fixing: Vec<i8>,
    basis: Option<Basis>,
}

impl PartialEq for Node {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Node {}
impl PartialOrd for Node {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Node {
    // Reversed: BinaryHeap is a max-heap and we want the smallest bound, then oldest id.
    fn cmp(&self, other: &Self) -> Ordering {
        other.key.total_cmp(&self.key).then_with(|| other.id.cmp(&self.id))
    }
}

/// Solves `mip` to the requested relative gap.
///
/// `warm_start`, when given, must be integer-feasible; it seeds the incumbent.
pub fn solve_mip(mip: &MipProblem, opts: &MipOptions, warm_start: Option<&[f64]>) -> Result<MipResult, LpError> {
    mip.validate()?;
    let start = Instant::now();
    let lp = &mip.lp;
    let int_vars = &mip.integer_vars;
    let itol = opts.integrality_tol;

    let mut incumbent: Option<Vec<f64>> = None;
    let mut inc_obj = f64::INFINITY;
    if let Some(ws) = warm_start {
        check_warm_start(mip, ws, itol)?;
        let obj = lp.objective_value(ws);
        if opts.cutoff.is_none_or(|c| obj <= c) {
            inc_obj = obj;
            incumbent = Some(ws.to_vec());
        }
    }
    let cutoff = opts.cutoff.unwrap_or(f64::INFINITY);
    let prune_tol = |inc: f64| 1e-9 * inc.abs().max(1.0);

    let mut heap = BinaryHeap::new();
    heap.push(Node { id: 0, key: f64::NEG_INFINITY, fixing: vec![-1; int_vars.len()], basis: None });
    let mut next_id = 1;
    let mut nodes = 0;
    let mut lp_iterations = 0;
    let mut trace = Vec::new();
    let mut node_lp = lp.clone();
    let mut status = None;
    let mut best_bound = f64::NEG_INFINITY;

    while let Some(top) = heap.peek() {
        let bound = top.key;
        best_bound = bound;
        if incumbent.is_some() {
            let gap = relative_gap(inc_obj, bound);
            if bound >= inc_obj - prune_tol(inc_obj) {
                break;
            }
            if gap <= opts.rel_gap {
                status = Some(MipStatus::GapLimit);
                break;
            }
            if opts.first_feasible {
                status = Some(MipStatus::GapLimit);
                break;
            }
        }
        if bound > cutoff {
            break;
        }
        if opts.time_limit.is_some_and(|t| start.elapsed() >= t) {
            status = Some(MipStatus::TimeLimit);
            break;
        }
        let node = heap.pop().expect("peeked");
        nodes += 1;

        for (k, &j) in int_vars.iter().enumerate() {
            let (lo, hi) = match node.fixing[k] {
                0 => (0.0, 0.0),
                1 => (1.0, 1.0),
                _ => (lp.lower[j], lp.upper[j]),
            };
            node_lp.lower[j] = lo;
            node_lp.upper[j] = hi;
        }
        let sol = solve_lp_with(&node_lp, node.basis.as_ref(), &opts.simplex)?;
        lp_iterations += sol.iterations;
        if opts.record_trace {
            trace.push(TracePoint { best_bound: bound.max(best_bound_floor(&trace)), incumbent: inc_obj });
        }
        match sol.status {
            LpStatus::Infeasible => continue,
            LpStatus::Unbounded => {
                // A relaxation that is unbounded below cannot be pruned; treat as a model error.
                return Err(LpError::NumericalFailure { iterations: lp_iterations });
            }
            LpStatus::Optimal => {}
        }
        let node_bound = sol.objective_value.max(node.key);
        if node_bound >= inc_obj - prune_tol(inc_obj) || node_bound > cutoff {
            continue;
        }

        let branch = most_fractional(&sol.primal, int_vars, itol);
        match branch {
            None => {
                let mut x = sol.primal;
                for &j in int_vars {
                    x[j] = x[j].round();
                }
                // Rounding integer vars may perturb the objective by ~itol; keep the LP value.
                inc_obj = node_bound;
                incumbent = Some(x);
            }
            Some(k) => {
                let value = sol.primal[int_vars[k]];
                // Explore the nearer side first among equal keys.
                let order: [i8; 2] = if value >= 0.5 { [1, 0] } else { [0, 1] };
                for side in order {
                    let mut fixing = node.fixing.clone();
                    fixing[k] = side;
                    heap.push(Node { id: next_id, key: node_bound, fixing, basis: Some(sol.basis.clone()) });
                    next_id += 1;
                }
            }
        }
    }

    let wall_time = start.elapsed().as_secs_f64();
    let (status, best_bound) = match (status, incumbent.is_some()) {
        (Some(MipStatus::TimeLimit), _) => (MipStatus::TimeLimit, best_bound.min(inc_obj)),
        (Some(s), true) => {
            let gap = relative_gap(inc_obj, best_bound);
            (if gap <= 1e-9 { MipStatus::Optimal } else { s }, best_bound.min(inc_obj))
        }
        (_, true) => (MipStatus::Optimal, inc_obj),
        (_, false) => (MipStatus::Infeasible, f64::INFINITY),
    };
    let gap = relative_gap(inc_obj, best_bound);
    Ok(MipResult {
        status,
        incumbent,
        objective_value: inc_obj,
        best_bound,
        gap,
        nodes,
        lp_iterations,
        wall_time,
        trace,
    })
}

fn best_bound_floor(trace: &[TracePoint]) -> f64 {
    trace.last().map_or(f64::NEG_INFINITY, |t| t.best_bound)
}

fn most_fractional(x: &[f64], int_vars: &[usize], tol: f64) -> Option<usize> {
    let mut best = None;
    let mut best_frac = tol;
    for (k, &j) in int_vars.iter().enumerate() {
        let v = x[j];
        let frac = (v - v.floor()).min(v.ceil() - v);
        if frac > best_frac {
            best_frac = frac;
            best = Some(k);
        }
    }
    best
}

fn check_warm_start(mip: &MipProblem, x: &[f64], itol: f64) -> Result<(), LpError> {
    let lp = &mip.lp;
    if x.len() != lp.num_vars() {
        return Err(LpError::InvalidWarmStart(format!(
            "length {} does not match {} variables",
            x.len(),
            lp.num_vars()
        )));
    }
    for &j in &mip.integer_vars {
        if (x[j] - x[j].round()).abs() > itol {
            return Err(LpError::InvalidWarmStart(format!("{} = {} is fractional", lp.var_name(j), x[j])));
        }
    }
    let viol = lp.max_violation(x);
    if viol > 1e-6 {
        return Err(LpError::InvalidWarmStart(format!("violates constraints by {viol:e}")));
    }
    Ok(())
}
