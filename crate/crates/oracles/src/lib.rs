//! Reference solvers for tests. Nothing here shares code with the production
//! simplex path except the problem representation: vertex enumeration and
//! a dense textbook tableau are written from scratch, and binary enumeration
//! only uses the LP solver on fully-fixed subproblems.

use otswitch_lp::{solve_lp, LinearProgram, LpStatus, MipProblem, Relation};

/// Every row and finite bound as `g·x ≤ h`.
fn halfspaces(lp: &LinearProgram) -> Vec<(Vec<f64>, f64)> {
    let n = lp.num_vars();
    let mut out = Vec::new();
    for row in &lp.constraints {
        let mut g = vec![0.0; n];
        for &(j, a) in &row.coeffs {
            g[j] += a;
        }
        match row.relation {
            Relation::Le => out.push((g, row.rhs)),
            Relation::Ge => out.push((g.iter().map(|v| -v).collect(), -row.rhs)),
            Relation::Eq => {
                out.push((g.iter().map(|v| -v).collect(), -row.rhs));
                out.push((g, row.rhs));
            }
        }
    }
    for j in 0..n {
        if lp.upper[j].is_finite() {
            let mut g = vec![0.0; n];
            g[j] = 1.0;
            out.push((g, lp.upper[j]));
        }
        if lp.lower[j].is_finite() {
            let mut g = vec![0.0; n];
            g[j] = -1.0;
            out.push((g, -lp.lower[j]));
        }
    }
    out
}

/// Solves a square system by Gaussian elimination; `None` if singular.
fn solve_square(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for k in 0..n {
        let p = (k..n).max_by(|&i, &j| a[i][k].abs().total_cmp(&a[j][k].abs()))?;
        if a[p][k].abs() < 1e-10 {
            return None;
        }
        a.swap(k, p);
        b.swap(k, p);
        for i in k + 1..n {
            let f = a[i][k] / a[k][k];
            if f != 0.0 {
                for j in k..n {
                    a[i][j] -= f * a[k][j];
                }
                b[i] -= f * b[k];
            }
        }
    }
    let mut x = vec![0.0; n];
    for k in (0..n).rev() {
        let s: f64 = (k + 1..n).map(|j| a[k][j] * x[j]).sum();
        x[k] = (b[k] - s) / a[k][k];
    }
    Some(x)
}

fn for_each_combination(n: usize, k: usize, mut f: impl FnMut(&[usize])) {
    if k > n {
        return;
    }
    let mut idx: Vec<usize> = (0..k).collect();
    loop {
        f(&idx);
        let mut i = k;
        loop {
            if i == 0 {
                return;
            }
            i -= 1;
            if idx[i] != i + n - k {
                break;
            }
            if i == 0 {
                return;
            }
        }
        idx[i] += 1;
        for j in i + 1..k {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

/// Minimum of `cᵀx` over all basic feasible solutions of a bounded LP.
///
/// Returns `None` when no vertex is feasible. Exponential; meant for ≲ 20
/// half-spaces in ≲ 6 dimensions.
pub fn vertex_enumeration_min(lp: &LinearProgram) -> Option<(f64, Vec<f64>)> {
    let n = lp.num_vars();
    let hs = halfspaces(lp);
    let mut best: Option<(f64, Vec<f64>)> = None;
    for_each_combination(hs.len(), n, |pick| {
        let a: Vec<Vec<f64>> = pick.iter().map(|&i| hs[i].0.clone()).collect();
        let b: Vec<f64> = pick.iter().map(|&i| hs[i].1).collect();
        let Some(x) = solve_square(a, b) else { return };
        let feasible = hs.iter().all(|(g, h)| {
            let lhs: f64 = g.iter().zip(&x).map(|(u, v)| u * v).sum();
            lhs <= h + 1e-9 * (1.0 + h.abs())
        });
        if feasible {
            let obj = lp.objective_value(&x);
            if best.as_ref().is_none_or(|(o, _)| obj < *o) {
                best = Some((obj, x));
            }
        }
    });
    best
}

#[derive(Debug, Clone, PartialEq)]
pub enum DenseOutcome {
    Optimal { objective: f64, x: Vec<f64> },
    Infeasible,
    Unbounded,
}

impl DenseOutcome {
    pub fn objective(&self) -> Option<f64> {
        match self {
            DenseOutcome::Optimal { objective, .. } => Some(*objective),
            _ => None,
        }
    }
}

enum Sub {
    Shift { col: usize, offset: f64 },
    Mirror { col: usize, offset: f64 },
    Split { pos: usize, neg: usize },
}

/// Textbook two-phase tableau simplex with Bland's rule, on a dense copy of
/// the problem in standard form. Slow but simple enough to trust.
pub fn dense_tableau(lp: &LinearProgram) -> DenseOutcome {
    let n = lp.num_vars();
    // Substitute every variable by nonnegative columns.
    let mut subs = Vec::with_capacity(n);
    let mut ncols = 0;
    let mut extra_rows: Vec<(Vec<(usize, f64)>, f64)> = Vec::new();
    for j in 0..n {
        let (lo, hi) = (lp.lower[j], lp.upper[j]);
        if lo.is_finite() {
            subs.push(Sub::Shift { col: ncols, offset: lo });
            if hi.is_finite() {
                extra_rows.push((vec![(ncols, 1.0)], hi - lo));
            }
            ncols += 1;
        } else if hi.is_finite() {
            subs.push(Sub::Mirror { col: ncols, offset: hi });
            ncols += 1;
        } else {
            subs.push(Sub::Split { pos: ncols, neg: ncols + 1 });
            ncols += 2;
        }
    }
    let expand = |coeffs: &[(usize, f64)]| -> (Vec<f64>, f64) {
        let mut row = vec![0.0; ncols];
        let mut shift = 0.0;
        for &(j, a) in coeffs {
            match subs[j] {
                Sub::Shift { col, offset } => {
                    row[col] += a;
                    shift += a * offset;
                }
                Sub::Mirror { col, offset } => {
                    row[col] -= a;
                    shift += a * offset;
                }
                Sub::Split { pos, neg } => {
                    row[pos] += a;
                    row[neg] -= a;
                }
            }
        }
        (row, shift)
    };
    let mut rows: Vec<(Vec<f64>, Relation, f64)> = Vec::new();
    for c in &lp.constraints {
        let (row, shift) = expand(&c.coeffs);
        rows.push((row, c.relation, c.rhs - shift));
    }
    for (coeffs, rhs) in extra_rows {
        let mut row = vec![0.0; ncols];
        for (j, a) in coeffs {
            row[j] = a;
        }
        rows.push((row, Relation::Le, rhs));
    }
    let obj_terms: Vec<(usize, f64)> = lp.objective.iter().copied().enumerate().collect();
    let (cost, _) = expand(&obj_terms);

    // Normalize to b ≥ 0 and lay out slack / artificial columns.
    let m = rows.len();
    for r in rows.iter_mut() {
        if r.2 < 0.0 {
            r.0.iter_mut().for_each(|v| *v = -*v);
            r.2 = -r.2;
            r.1 = match r.1 {
                Relation::Le => Relation::Ge,
                Relation::Ge => Relation::Le,
                Relation::Eq => Relation::Eq,
            };
        }
    }
    let nslack = rows.iter().filter(|r| r.1 != Relation::Eq).count();
    let nart = rows.iter().filter(|r| r.1 != Relation::Le).count();
    let width = ncols + nslack + nart + 1;
    let rhs_col = width - 1;
    let art_start = ncols + nslack;
    let mut t = vec![vec![0.0; width]; m];
    let mut basis = vec![0; m];
    let (mut s, mut a) = (ncols, art_start);
    for (i, (row, rel, b)) in rows.iter().enumerate() {
        t[i][..ncols].copy_from_slice(row);
        t[i][rhs_col] = *b;
        match rel {
            Relation::Le => {
                t[i][s] = 1.0;
                basis[i] = s;
                s += 1;
            }
            Relation::Ge => {
                t[i][s] = -1.0;
                s += 1;
                t[i][a] = 1.0;
                basis[i] = a;
                a += 1;
            }
            Relation::Eq => {
                t[i][a] = 1.0;
                basis[i] = a;
                a += 1;
            }
        }
    }

    let pivot = |t: &mut Vec<Vec<f64>>, obj: &mut Vec<f64>, r: usize, c: usize| {
        let p = t[r][c];
        t[r].iter_mut().for_each(|v| *v /= p);
        let prow = t[r].clone();
        for (i, row) in t.iter_mut().enumerate() {
            if i != r && row[c] != 0.0 {
                let f = row[c];
                row.iter_mut().zip(&prow).for_each(|(v, pv)| *v -= f * pv);
            }
        }
        let f = obj[c];
        if f != 0.0 {
            obj.iter_mut().zip(&prow).for_each(|(v, pv)| *v -= f * pv);
        }
    };
    // Objective row holds reduced costs; last entry is −z.
    let run = |t: &mut Vec<Vec<f64>>, obj: &mut Vec<f64>, basis: &mut Vec<usize>, allowed: usize| -> bool {
        loop {
            let Some(c) = (0..allowed).find(|&j| obj[j] < -1e-10) else {
                return true;
            };
            let mut best: Option<(usize, f64)> = None;
            for i in 0..t.len() {
                if t[i][c] > 1e-10 {
                    let ratio = t[i][rhs_col] / t[i][c];
                    let better = match best {
                        None => true,
                        Some((bi, br)) => ratio < br - 1e-12 || (ratio <= br + 1e-12 && basis[i] < basis[bi]),
                    };
                    if better {
                        best = Some((i, ratio));
                    }
                }
            }
            let Some((r, _)) = best else {
                return false;
            };
            pivot(t, obj, r, c);
            basis[r] = c;
        }
    };

    // Phase 1.
    let mut obj = vec![0.0; width];
    for j in art_start..rhs_col {
        obj[j] = 1.0;
    }
    for i in 0..m {
        if basis[i] >= art_start {
            for j in 0..width {
                obj[j] -= t[i][j];
            }
        }
    }
    run(&mut t, &mut obj, &mut basis, art_start);
    if -obj[rhs_col] > 1e-7 {
        return DenseOutcome::Infeasible;
    }
    // Drive remaining artificials out of the basis where possible.
    for i in 0..m {
        if basis[i] >= art_start {
            if let Some(c) = (0..art_start).find(|&j| t[i][j].abs() > 1e-9) {
                pivot(&mut t, &mut obj, i, c);
                basis[i] = c;
            }
        }
    }

    // Phase 2.
    let mut obj = vec![0.0; width];
    obj[..ncols].copy_from_slice(&cost);
    for i in 0..m {
        let f = obj[basis[i]];
        if f != 0.0 {
            for j in 0..width {
                obj[j] -= f * t[i][j];
            }
        }
    }
    if !run(&mut t, &mut obj, &mut basis, art_start) {
        return DenseOutcome::Unbounded;
    }
    let mut y = vec![0.0; width];
    for i in 0..m {
        y[basis[i]] = t[i][rhs_col];
    }
    let x: Vec<f64> = subs
        .iter()
        .map(|s| match *s {
            Sub::Shift { col, offset } => offset + y[col],
            Sub::Mirror { col, offset } => offset - y[col],
            Sub::Split { pos, neg } => y[pos] - y[neg],
        })
        .collect();
    debug_assert!(lp.max_violation(&x) < 1e-6, "dense oracle returned an infeasible point");
    DenseOutcome::Optimal { objective: lp.objective_value(&x), x }
}

/// Minimum over every assignment of the binary variables, each fixing solved
/// as a plain LP. Returns `(objective, x)` of the best feasible fixing, ties
/// broken by the first assignment in counting order.
pub fn enumerate_binaries(mip: &MipProblem) -> Option<(f64, Vec<f64>)> {
    let k = mip.integer_vars.len();
    assert!(k <= 20, "enumeration oracle limited to 20 binaries");
    let mut best: Option<(f64, Vec<f64>)> = None;
    for mask in 0u32..(1 << k) {
        let mut lp = mip.lp.clone();
        let mut ok = true;
        for (b, &j) in mip.integer_vars.iter().enumerate() {
            let v = f64::from((mask >> b) & 1);
            if v < lp.lower[j] || v > lp.upper[j] {
                ok = false;
                break;
            }
            lp.lower[j] = v;
            lp.upper[j] = v;
        }
        if !ok {
            continue;
        }
        let sol = solve_lp(&lp, None).expect("oracle LP solve");
        if sol.status == LpStatus::Optimal && best.as_ref().is_none_or(|(o, _)| sol.objective_value < *o - 1e-12) {
            best = Some((sol.objective_value, sol.primal));
        }
    }
    best
}


pub mod random {
    //! Seeded generators of small test problems.

    use otswitch_lp::{LinearProgram, MipProblem, Relation};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Dense LP with `n` boxed variables and `m` mixed `≤`/`≥` rows that is
    /// feasible by construction (a random interior point satisfies every row).
    pub fn feasible_lp(seed: u64, n: usize, m: usize) -> LinearProgram {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut lp = LinearProgram::new();
        let x0: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..2.0)).collect();
        for _ in 0..n {
            let lo = rng.random_range(-3.0..0.0);
            let hi = rng.random_range(2.0..5.0);
            lp.add_var(rng.random_range(-2.0..2.0), lo, hi);
        }
        for _ in 0..m {
            let coeffs: Vec<(usize, f64)> = (0..n).map(|j| (j, rng.random_range(-1.0..1.0))).collect();
            let act: f64 = coeffs.iter().map(|&(j, a)| a * x0[j]).sum();
            let slack = rng.random_range(0.0..1.0);
            if rng.random_bool(0.5) {
                lp.add_constraint(coeffs, Relation::Le, act + slack);
            } else {
                lp.add_constraint(coeffs, Relation::Ge, act - slack);
            }
        }
        lp
    }

    /// Binary program with `k` binaries and a few continuous variables, with a
    /// covering row so that not every assignment is feasible.
    pub fn small_mip(seed: u64, k: usize) -> MipProblem {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut lp = LinearProgram::new();
        let ys: Vec<usize> = (0..k).map(|_| lp.add_var(rng.random_range(-3.0..3.0), 0.0, 1.0)).collect();
        let xs: Vec<usize> = (0..3).map(|_| lp.add_var(rng.random_range(0.5..2.0), 0.0, 4.0)).collect();
        for _ in 0..4 {
            let mut coeffs: Vec<(usize, f64)> = ys.iter().map(|&y| (y, rng.random_range(-2.0..2.0))).collect();
            coeffs.extend(xs.iter().map(|&x| (x, rng.random_range(0.2..1.5))));
            lp.add_constraint(coeffs, Relation::Ge, rng.random_range(0.5..3.0));
        }
        let big: Vec<(usize, f64)> = ys.iter().map(|&y| (y, rng.random_range(0.5..2.0))).collect();
        lp.add_constraint(big, Relation::Le, k as f64 * 0.6);
        MipProblem::new(lp, ys)
    }
}
