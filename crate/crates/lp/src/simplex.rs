//! Two-phase bounded-variable revised simplex.
//!
//! Every row `aᵢᵀx ⋈ bᵢ` gets a logical variable `sᵢ = aᵢᵀx` whose bounds
//! encode the relation, so the working system is `[A | −I] (x, s) = 0` with
//! all information carried by variable bounds. Phase 1 minimizes the sum of
//! bound violations of basic variables; phase 2 the real objective. The phase
//! is re-decided every iteration, so a warm basis that is primal infeasible
//! simply starts in phase 1.

use std::time::Instant;

use crate::factor::DenseInverse;
use crate::model::{LinearProgram, Relation};
use crate::LpError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum VarStatus {
    Basic,
    AtLower,
    AtUpper,
    /// Nonbasic free variable resting at zero.
    Free,
}

/// Status of every structural variable followed by every row's logical.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Basis {
    pub status: Vec<VarStatus>,
}

impl Basis {
    pub fn basic_vars(&self) -> impl Iterator<Item = usize> + '_ {
        self.status
            .iter()
            .enumerate()
            .filter(|(_, s)| **s == VarStatus::Basic)
            .map(|(j, _)| j)
    }

    fn fits(&self, n: usize, m: usize) -> bool {
        self.status.len() == n + m && self.basic_vars().count() == m
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Debug, Clone)]
pub struct LpSolution {
    pub status: LpStatus,
    /// Values of the structural variables.
    pub primal: Vec<f64>,
    pub objective_value: f64,
    pub basis: Basis,
    /// Row duals; `∂ objective / ∂ rhs` at the optimum.
    pub duals: Vec<f64>,
    /// `c_j − yᵀA_j` for every structural variable.
    pub reduced_costs: Vec<f64>,
    pub iterations: usize,
    pub wall_time: f64,
}

impl LpSolution {
    pub fn is_optimal(&self) -> bool {
        self.status == LpStatus::Optimal
    }
}

#[derive(Debug, Clone)]
pub struct SimplexOptions {
    /// Reported feasibility guarantee on every row and bound.
    pub feasibility_tol: f64,
    /// Working primal tolerance used during pivoting.
    pub primal_tol: f64,
    pub dual_tol: f64,
    pub pivot_tol: f64,
    /// Consecutive degenerate pivots before switching to Bland's rule.
    pub bland_after: usize,
    /// Defaults to `50 · (rows + cols)`.
    pub max_iterations: Option<usize>,
    pub refactor_interval: usize,
}

impl Default for SimplexOptions {
    fn default() -> Self {
        Self {
            feasibility_tol: 1e-7,
            primal_tol: 1e-9,
            dual_tol: 1e-9,
            pivot_tol: 1e-9,
            bland_after: 1000,
            max_iterations: None,
            refactor_interval: 64,
        }
    }
}

pub fn solve_lp(lp: &LinearProgram, warm_basis: Option<&Basis>) -> Result<LpSolution, LpError> {
    solve_lp_with(lp, warm_basis, &SimplexOptions::default())
}

pub fn solve_lp_with(
    lp: &LinearProgram,
    warm_basis: Option<&Basis>,
    opts: &SimplexOptions,
) -> Result<LpSolution, LpError> {
    lp.validate()?;
    let start = Instant::now();
    let mut s = Simplex::new(lp, opts);
    match warm_basis {
        Some(b) if b.fits(s.n, s.m) => s.load_basis(b),
        _ => s.cold_start(),
    }
    let status = s.run()?;
    Ok(s.into_solution(status, start.elapsed().as_secs_f64()))
}

struct Simplex<'a> {
    lp: &'a LinearProgram,
    opts: &'a SimplexOptions,
    n: usize,
    m: usize,
    cols: Vec<Vec<(usize, f64)>>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    cost: Vec<f64>,
    x: Vec<f64>,
    status: Vec<VarStatus>,
    head: Vec<usize>,
    inv: DenseInverse,
    iterations: usize,
    since_refactor: usize,
    degenerate_run: usize,
    bland: bool,
    ptol: f64,
    dual_tol: f64,
    // scratch
    alpha: Vec<f64>,
    pi: Vec<f64>,
    cb: Vec<f64>,
}

enum Step {
    Flip,
    Pivot { pos: usize, to_upper: bool },
}

impl<'a> Simplex<'a> {
    fn new(lp: &'a LinearProgram, opts: &'a SimplexOptions) -> Self {
        let n = lp.num_vars();
        let m = lp.num_constraints();
        let mut cols = vec![Vec::new(); n];
        let mut lower = lp.lower.clone();
        let mut upper = lp.upper.clone();
        for (i, row) in lp.constraints.iter().enumerate() {
            for &(j, a) in &row.coeffs {
                cols[j].push((i, a));
            }
            let (lo, hi) = match row.relation {
                Relation::Le => (f64::NEG_INFINITY, row.rhs),
                Relation::Ge => (row.rhs, f64::INFINITY),
                Relation::Eq => (row.rhs, row.rhs),
            };
            lower.push(lo);
            upper.push(hi);
        }
        let mut cost = lp.objective.clone();
        cost.resize(n + m, 0.0);
        let cmax = lp.objective.iter().fold(0.0f64, |a, c| a.max(c.abs()));
        Self {
            lp,
            opts,
            n,
            m,
            cols,
            lower,
            upper,
            cost,
            x: vec![0.0; n + m],
            status: vec![VarStatus::AtLower; n + m],
            head: Vec::with_capacity(m),
            inv: DenseInverse::identity_scaled(m, -1.0),
            iterations: 0,
            since_refactor: 0,
            degenerate_run: 0,
            bland: false,
            ptol: opts.primal_tol,
            dual_tol: opts.dual_tol.max(1e-13 * cmax),
            alpha: vec![0.0; m],
            pi: vec![0.0; m],
            cb: vec![0.0; m],
        }
    }

    fn column(&self, j: usize) -> std::borrow::Cow<'_, [(usize, f64)]> {
        if j < self.n {
            std::borrow::Cow::Borrowed(&self.cols[j])
        } else {
            std::borrow::Cow::Owned(vec![(j - self.n, -1.0)])
        }
    }

    /// Puts `j` at a finite bound (preferring `want`) or at zero if free.
    fn place_nonbasic(&mut self, j: usize, want: VarStatus) {
        let (lo, hi) = (self.lower[j], self.upper[j]);
        let st = match want {
            VarStatus::AtUpper if hi.is_finite() => VarStatus::AtUpper,
            _ if lo.is_finite() => VarStatus::AtLower,
            _ if hi.is_finite() => VarStatus::AtUpper,
            _ => VarStatus::Free,
        };
        self.status[j] = st;
        self.x[j] = match st {
            VarStatus::AtLower => lo,
            VarStatus::AtUpper => hi,
            _ => 0.0,
        };
    }

    fn cold_start(&mut self) {
        for j in 0..self.n {
            self.place_nonbasic(j, VarStatus::AtLower);
        }
        self.head = (self.n..self.n + self.m).collect();
        for j in self.n..self.n + self.m {
            self.status[j] = VarStatus::Basic;
        }
        self.inv = DenseInverse::identity_scaled(self.m, -1.0);
        self.since_refactor = 0;
        self.recompute_basics();
    }

    fn load_basis(&mut self, basis: &Basis) {
        self.head.clear();
        for (j, &st) in basis.status.iter().enumerate() {
            if st == VarStatus::Basic {
                self.status[j] = VarStatus::Basic;
                self.head.push(j);
            } else {
                self.place_nonbasic(j, st);
            }
        }
        if !self.refactor() {
            self.cold_start();
            return;
        }
        self.recompute_basics();
    }

    /// Rebuilds the inverse, swapping dependent columns for logicals.
    /// Returns false when the basis could not be repaired.
    fn refactor(&mut self) -> bool {
        for _ in 0..self.m + 1 {
            let columns: Vec<Vec<(usize, f64)>> =
                self.head.iter().map(|&j| self.column(j).into_owned()).collect();
            match DenseInverse::factor(self.m, &columns) {
                Ok(inv) => {
                    self.inv = inv;
                    self.since_refactor = 0;
                    return true;
                }
                Err(sing) => {
                    for (&pos, &row) in sing.positions.iter().zip(&sing.free_rows) {
                        let logical = self.n + row;
                        if self.status[logical] == VarStatus::Basic {
                            return false;
                        }
                        let out = self.head[pos];
                        let want = if self.x[out] >= self.upper[out] { VarStatus::AtUpper } else { VarStatus::AtLower };
                        self.place_nonbasic(out, want);
                        self.head[pos] = logical;
                        self.status[logical] = VarStatus::Basic;
                    }
                }
            }
        }
        false
    }

    fn recompute_basics(&mut self) {
        let m = self.m;
        let mut rhs = vec![0.0; m];
        for j in 0..self.n + self.m {
            if self.status[j] == VarStatus::Basic || self.x[j] == 0.0 {
                continue;
            }
            let xj = self.x[j];
            if j < self.n {
                for &(i, a) in &self.cols[j] {
                    rhs[i] -= a * xj;
                }
            } else {
                rhs[j - self.n] += xj;
            }
        }
        for k in 0..m {
            let v: f64 = self.inv.row(k).iter().zip(&rhs).map(|(a, b)| a * b).sum();
            self.x[self.head[k]] = v;
        }
    }

    fn infeasibility(&self, j: usize) -> f64 {
        (self.lower[j] - self.x[j]).max(self.x[j] - self.upper[j]).max(0.0)
    }

    fn max_basic_infeasibility(&self) -> f64 {
        self.head.iter().map(|&j| self.infeasibility(j)).fold(0.0, f64::max)
    }

    fn iteration_cap(&self) -> usize {
        self.opts.max_iterations.unwrap_or(50 * (self.n + 2 * self.m).max(1))
    }

    fn run(&mut self) -> Result<LpStatus, LpError> {
        let mut verify_rounds = 0;
        loop {
            let status = self.iterate()?;
            if status != LpStatus::Optimal {
                return Ok(status);
            }
            // Fresh factorization before declaring victory; drift may have
            // pushed a basic variable out of its bounds.
            if self.since_refactor > 0 {
                self.refactor();
                self.recompute_basics();
            }
            if self.max_basic_infeasibility() <= self.opts.feasibility_tol || verify_rounds >= 3 {
                return Ok(if self.max_basic_infeasibility() <= self.opts.feasibility_tol {
                    LpStatus::Optimal
                } else {
                    LpStatus::Infeasible
                });
            }
            verify_rounds += 1;
        }
    }

    fn iterate(&mut self) -> Result<LpStatus, LpError> {
        let cap = self.iteration_cap();
        loop {
            if self.iterations >= cap {
                return Err(LpError::NumericalFailure { iterations: self.iterations });
            }
            if self.since_refactor >= self.opts.refactor_interval {
                if !self.refactor() {
                    return Err(LpError::NumericalFailure { iterations: self.iterations });
                }
                self.recompute_basics();
            }

            let phase1 = self.head.iter().any(|&j| self.infeasibility(j) > self.ptol);
            for k in 0..self.m {
                let j = self.head[k];
                self.cb[k] = if phase1 {
                    if self.x[j] < self.lower[j] - self.ptol {
                        -1.0
                    } else if self.x[j] > self.upper[j] + self.ptol {
                        1.0
                    } else {
                        0.0
                    }
                } else {
                    self.cost[j]
                };
            }
            self.inv.left_times(&self.cb, &mut self.pi);

            let Some((q, dir)) = self.price(phase1) else {
                if !phase1 {
                    return Ok(LpStatus::Optimal);
                }
                if self.max_basic_infeasibility() <= self.opts.feasibility_tol {
                    // Phase 1 stalled inside the reporting tolerance: accept.
                    self.ptol = self.opts.feasibility_tol;
                    continue;
                }
                return Ok(LpStatus::Infeasible);
            };

            let col = self.column(q).into_owned();
            let mut alpha = std::mem::take(&mut self.alpha);
            self.inv.times_sparse(&col, &mut alpha);
            let step = self.ratio_test(q, dir, &alpha, phase1);
            let result = match step {
                None => {
                    self.alpha = alpha;
                    if phase1 {
                        return Err(LpError::NumericalFailure { iterations: self.iterations });
                    }
                    return Ok(LpStatus::Unbounded);
                }
                Some((t, step)) => {
                    self.apply(q, dir, t, &alpha, step);
                    t
                }
            };
            self.alpha = alpha;
            self.iterations += 1;
            if result <= 1e-12 {
                self.degenerate_run += 1;
                if self.degenerate_run > self.opts.bland_after {
                    self.bland = true;
                }
            } else {
                self.degenerate_run = 0;
                self.bland = false;
            }
        }
    }

    /// Chooses the entering variable and its direction (+1 increase, −1 decrease).
    fn price(&self, phase1: bool) -> Option<(usize, f64)> {
        let tol = if phase1 { self.opts.dual_tol } else { self.dual_tol };
        let mut best: Option<(usize, f64)> = None;
        let mut best_score = 0.0;
        for j in 0..self.n + self.m {
            let st = self.status[j];
            if st == VarStatus::Basic || self.lower[j] == self.upper[j] {
                continue;
            }
            let d = self.reduced_cost(j, phase1);
            let dir = match st {
                VarStatus::AtLower if d < -tol => 1.0,
                VarStatus::AtUpper if d > tol => -1.0,
                VarStatus::Free if d.abs() > tol => -d.signum(),
                _ => continue,
            };
            if self.bland {
                return Some((j, dir));
            }
            let score = d.abs();
            if score > best_score {
                best_score = score;
                best = Some((j, dir));
            }
        }
        best
    }

    fn reduced_cost(&self, j: usize, phase1: bool) -> f64 {
        let c = if phase1 { 0.0 } else { self.cost[j] };
        if j < self.n {
            c - self.cols[j].iter().map(|&(i, a)| self.pi[i] * a).sum::<f64>()
        } else {
            c + self.pi[j - self.n]
        }
    }

    /// Harris two-pass ratio test. Returns the step length and what blocks it.
    fn ratio_test(&self, q: usize, dir: f64, alpha: &[f64], phase1: bool) -> Option<(f64, Step)> {
        let ptol = self.ptol;
        let own_range = self.upper[q] - self.lower[q];
        // (position, exact ratio, relaxed ratio, |alpha|, to_upper)
        let mut cands: Vec<(usize, f64, f64, f64, bool)> = Vec::new();
        for k in 0..self.m {
            let a = alpha[k];
            if a.abs() < self.opts.pivot_tol {
                continue;
            }
            let j = self.head[k];
            let rate = -dir * a;
            let (xv, lo, hi) = (self.x[j], self.lower[j], self.upper[j]);
            if rate < 0.0 {
                if phase1 && xv > hi + ptol {
                    cands.push((k, (xv - hi) / -rate, (xv - hi + ptol) / -rate, a.abs(), true));
                } else if xv < lo - ptol || lo == f64::NEG_INFINITY {
                    continue;
                } else {
                    cands.push((k, ((xv - lo) / -rate).max(0.0), (xv - lo + ptol) / -rate, a.abs(), false));
                }
            } else if phase1 && xv < lo - ptol {
                cands.push((k, (lo - xv) / rate, (lo - xv + ptol) / rate, a.abs(), false));
            } else if xv > hi + ptol || hi == f64::INFINITY {
                continue;
            } else {
                cands.push((k, ((hi - xv) / rate).max(0.0), (hi - xv + ptol) / rate, a.abs(), true));
            }
        }
        if cands.is_empty() {
            return own_range.is_finite().then_some((own_range, Step::Flip));
        }
        let chosen = if self.bland {
            let tmin = cands.iter().map(|c| c.1).fold(f64::INFINITY, f64::min);
            cands
                .iter()
                .filter(|c| c.1 <= tmin + 1e-12)
                .min_by_key(|c| self.head[c.0])
                .copied()
        } else {
            let relaxed = cands.iter().map(|c| c.2).fold(f64::INFINITY, f64::min);
            cands
                .iter()
                .filter(|c| c.1 <= relaxed)
                .max_by(|a, b| a.3.total_cmp(&b.3).then(b.0.cmp(&a.0)))
                .copied()
        };
        let (pos, t, _, _, to_upper) = chosen?;
        if own_range.is_finite() && own_range <= t {
            return Some((own_range, Step::Flip));
        }
        Some((t, Step::Pivot { pos, to_upper }))
    }

    fn apply(&mut self, q: usize, dir: f64, t: f64, alpha: &[f64], step: Step) {
        if t != 0.0 {
            self.x[q] += dir * t;
            for k in 0..self.m {
                if alpha[k] != 0.0 {
                    let j = self.head[k];
                    self.x[j] -= dir * t * alpha[k];
                }
            }
        }
        match step {
            Step::Flip => {
                let target = if dir > 0.0 { VarStatus::AtUpper } else { VarStatus::AtLower };
                self.place_nonbasic(q, target);
            }
            Step::Pivot { pos, to_upper } => {
                let out = self.head[pos];
                if to_upper {
                    self.x[out] = self.upper[out];
                    self.status[out] = VarStatus::AtUpper;
                } else {
                    self.x[out] = self.lower[out];
                    self.status[out] = VarStatus::AtLower;
                }
                self.head[pos] = q;
                self.status[q] = VarStatus::Basic;
                self.inv.pivot(pos, alpha);
                self.since_refactor += 1;
            }
        }
    }

    fn into_solution(mut self, status: LpStatus, wall_time: f64) -> LpSolution {
        let n = self.n;
        let primal = self.x[..n].to_vec();
        let (objective_value, duals, reduced_costs) = match status {
            LpStatus::Optimal => {
                for k in 0..self.m {
                    self.cb[k] = self.cost[self.head[k]];
                }
                self.inv.left_times(&self.cb, &mut self.pi);
                let rc = (0..n).map(|j| self.reduced_cost(j, false)).collect();
                (self.lp.objective_value(&primal), self.pi.clone(), rc)
            }
            LpStatus::Infeasible => (f64::INFINITY, vec![0.0; self.m], vec![0.0; n]),
            LpStatus::Unbounded => (f64::NEG_INFINITY, vec![0.0; self.m], vec![0.0; n]),
        };
        LpSolution {
            status,
            primal,
            objective_value,
            basis: Basis { status: self.status },
            duals,
            reduced_costs,
            iterations: self.iterations,
            wall_time,
        }
    }
}
