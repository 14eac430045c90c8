//! Bounded-variable primal revised simplex.
//!
//! Every row gets a slack so that `A x + s = b`; slack bounds encode the row
//! sense. Phase 1 minimises the sum of bound violations of basic variables
//! with costs recomputed each iteration, so feasibility and optimality share
//! one loop. Pricing is Dantzig's rule with a Harris two-pass ratio test;
//! long degenerate streaks switch to Bland's rule.
//!
//! Once feasible, small violations of basic variables (drift from entries
//! too small to pivot on) widen that bound instead of sending the method
//! back to phase 1, and a variable leaving from just outside its bound keeps
//! its value with the bound moved to it. The original bounds return at the
//! optimum and the method continues from the final basis.

use super::lu::SparseLu;
use super::{Basis, LinearProgram, LpSolution, LpSolver, LpStatus, Sense, VarStatus};

const PIVOT_TOL: f64 = 1e-9;
const DEGENERATE_STREAK: usize = 100;
/// Largest bound violation, relative to `1 + |bound|`, absorbed by a shift.
const SHIFT_LIMIT: f64 = 1e-4;
/// Restore-and-continue rounds allowed before shifting is switched off.
const SHIFT_ROUNDS: usize = 8;

#[derive(Debug, Clone)]
pub struct SimplexOptions {
    /// Iteration cap; `None` picks one from the problem size.
    pub max_iter: Option<usize>,
    pub feas_tol: f64,
    pub opt_tol: f64,
    pub refactor_every: usize,
    /// Use Bland's rule from the first iteration.
    pub bland: bool,
    pub scale: bool,
}

impl Default for SimplexOptions {
    fn default() -> Self {
        SimplexOptions {
            max_iter: None,
            feas_tol: 1e-7,
            opt_tol: 1e-7,
            refactor_every: 64,
            bland: false,
            scale: true,
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct SimplexSolver {
    pub options: SimplexOptions,
}

impl SimplexSolver {
    pub fn new(options: SimplexOptions) -> Self {
        SimplexSolver { options }
    }
}

impl LpSolver for SimplexSolver {
    fn solve(&self, lp: &LinearProgram, warm: Option<&Basis>) -> LpSolution {
        let first = solve_once(lp, warm, &self.options);
        let suspicious = first.status == LpStatus::Optimal && lp.max_violation(&first.x) > 1e-6;
        if !suspicious || self.options.bland {
            return first;
        }
        log::debug!(
            "simplex: residual {:.2e}, re-solving with Bland's rule",
            lp.max_violation(&first.x)
        );
        let opts = SimplexOptions {
            bland: true,
            ..self.options.clone()
        };
        let second = solve_once(lp, None, &opts);
        if second.status == LpStatus::Optimal && lp.max_violation(&second.x) <= lp.max_violation(&first.x) {
            second
        } else {
            first
        }
    }
}

/// The program with slacks appended and scaling applied.
struct Standard {
    m: usize,
    n: usize,
    cols: Vec<Vec<(usize, f64)>>,
    lo: Vec<f64>,
    hi: Vec<f64>,
    cost: Vec<f64>,
    b: Vec<f64>,
    col_scale: Vec<f64>,
    row_scale: Vec<f64>,
}

fn pow2(v: f64) -> f64 {
    if !v.is_finite() || v <= 0.0 {
        1.0
    } else {
        2f64.powi(v.log2().round() as i32)
    }
}

impl Standard {
    fn new(lp: &LinearProgram, scale: bool) -> Self {
        let m = lp.n_rows();
        let n = lp.n_cols();
        let mut rs = vec![1.0; m];
        let mut cs = vec![1.0; n];
        if scale {
            for _ in 0..4 {
                for (i, row) in lp.rows.iter().enumerate() {
                    let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
                    for &(j, a) in &row.coeffs {
                        let v = (a * cs[j]).abs();
                        if v > 0.0 {
                            lo = lo.min(v);
                            hi = hi.max(v);
                        }
                    }
                    if hi > 0.0 {
                        rs[i] = 1.0 / (lo * hi).sqrt();
                    }
                }
                let mut lo = vec![f64::INFINITY; n];
                let mut hi = vec![0.0f64; n];
                for (i, row) in lp.rows.iter().enumerate() {
                    for &(j, a) in &row.coeffs {
                        let v = (a * rs[i]).abs();
                        if v > 0.0 {
                            lo[j] = lo[j].min(v);
                            hi[j] = hi[j].max(v);
                        }
                    }
                }
                for j in 0..n {
                    if hi[j] > 0.0 {
                        cs[j] = 1.0 / (lo[j] * hi[j]).sqrt();
                    }
                }
            }
            rs.iter_mut().for_each(|v| *v = pow2(*v));
            cs.iter_mut().for_each(|v| *v = pow2(*v));
        }

        let mut cols: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n + m];
        for (i, row) in lp.rows.iter().enumerate() {
            for &(j, a) in &row.coeffs {
                if a != 0.0 {
                    cols[j].push((i, a * rs[i] * cs[j]));
                }
            }
        }
        for col in cols.iter_mut().take(n) {
            col.sort_by_key(|&(i, _)| i);
            col.dedup_by(|a, b| {
                if a.0 == b.0 {
                    b.1 += a.1;
                    true
                } else {
                    false
                }
            });
            col.retain(|&(_, v)| v != 0.0);
        }
        let mut lo: Vec<f64> = (0..n).map(|j| lp.lower[j] / cs[j]).collect();
        let mut hi: Vec<f64> = (0..n).map(|j| lp.upper[j] / cs[j]).collect();
        let mut cost: Vec<f64> = (0..n).map(|j| lp.objective[j] * cs[j]).collect();
        let mut b = Vec::with_capacity(m);
        for (i, row) in lp.rows.iter().enumerate() {
            cols[n + i].push((i, 1.0));
            let (l, u) = match row.sense {
                Sense::Le => (0.0, f64::INFINITY),
                Sense::Ge => (f64::NEG_INFINITY, 0.0),
                Sense::Eq => (0.0, 0.0),
            };
            lo.push(l);
            hi.push(u);
            cost.push(0.0);
            b.push(row.rhs * rs[i]);
        }
        Standard {
            m,
            n,
            cols,
            lo,
            hi,
            cost,
            b,
            col_scale: cs,
            row_scale: rs,
        }
    }
}

fn nonbasic_status(lo: f64, hi: f64, value: f64) -> VarStatus {
    match (lo.is_finite(), hi.is_finite()) {
        (true, true) => {
            if (value - lo).abs() <= (value - hi).abs() {
                VarStatus::AtLower
            } else {
                VarStatus::AtUpper
            }
        }
        (true, false) => VarStatus::AtLower,
        (false, true) => VarStatus::AtUpper,
        (false, false) => VarStatus::Zero,
    }
}

struct Run<'a> {
    std: &'a Standard,
    opts: &'a SimplexOptions,
    /// Working bounds; equal to the program's except where shifted.
    lo: Vec<f64>,
    hi: Vec<f64>,
    shifted: bool,
    feasible_once: bool,
    shift_rounds: usize,
    status: Vec<VarStatus>,
    head: Vec<usize>,
    x: Vec<f64>,
    lu: SparseLu,
    bland: bool,
}

enum Step {
    Continue,
    /// Refactored to confirm a stopping condition; no pivot was made.
    Refactored,
    Done(LpStatus),
}

impl<'a> Run<'a> {
    fn new(std: &'a Standard, warm: Option<&Basis>, opts: &'a SimplexOptions) -> Self {
        let nt = std.n + std.m;
        let usable = warm
            .filter(|b| b.status.len() == nt && b.status.iter().filter(|&&s| s == VarStatus::Basic).count() == std.m);
        let mut status: Vec<VarStatus> = match usable {
            Some(b) => b.status.clone(),
            None => (0..nt)
                .map(|j| {
                    if j >= std.n {
                        VarStatus::Basic
                    } else {
                        nonbasic_status(std.lo[j], std.hi[j], 0.0)
                    }
                })
                .collect(),
        };
        // Make nonbasic statuses consistent with the bounds.
        for j in 0..nt {
            let s = status[j];
            let ok = match s {
                VarStatus::Basic => true,
                VarStatus::AtLower => std.lo[j].is_finite(),
                VarStatus::AtUpper => std.hi[j].is_finite(),
                VarStatus::Zero => !std.lo[j].is_finite() && !std.hi[j].is_finite(),
            };
            if !ok {
                status[j] = nonbasic_status(std.lo[j], std.hi[j], 0.0);
            }
        }
        let head: Vec<usize> = (0..nt).filter(|&j| status[j] == VarStatus::Basic).collect();
        let lu = SparseLu::factor(0, &[]).expect("empty factor");
        let mut run = Run {
            std,
            opts,
            lo: std.lo.clone(),
            hi: std.hi.clone(),
            shifted: false,
            feasible_once: false,
            shift_rounds: 0,
            x: vec![0.0; nt],
            status,
            head,
            lu,
            bland: opts.bland,
        };
        for j in 0..nt {
            run.x[j] = run.value_at(j, run.status[j]);
        }
        run.refactor();
        run
    }

    fn nonbasic_status(&self, j: usize, value: f64) -> VarStatus {
        nonbasic_status(self.lo[j], self.hi[j], value)
    }

    fn value_at(&self, j: usize, s: VarStatus) -> f64 {
        match s {
            VarStatus::AtLower => self.lo[j],
            VarStatus::AtUpper => self.hi[j],
            VarStatus::Zero | VarStatus::Basic => 0.0,
        }
    }

    /// Widen bounds to cover small violations of basic variables.
    fn shift_bounds(&mut self) {
        let tol = self.opts.feas_tol;
        for &k in &self.head {
            let x = self.x[k];
            if x < self.lo[k] - tol && self.lo[k] - x <= SHIFT_LIMIT * (1.0 + self.lo[k].abs()) {
                self.lo[k] = x;
                self.shifted = true;
            } else if x > self.hi[k] + tol && x - self.hi[k] <= SHIFT_LIMIT * (1.0 + self.hi[k].abs()) {
                self.hi[k] = x;
                self.shifted = true;
            }
        }
    }

    /// A variable leaving from just outside its bound moves the bound to it
    /// rather than snapping onto the bound, which on a small pivot would
    /// push the other basics far out.
    fn shift_leaving(&mut self, k: usize, value: f64) {
        let tol = self.opts.feas_tol;
        let limit = |b: f64| SHIFT_LIMIT * (1.0 + b.abs());
        if value < self.lo[k] && self.lo[k] - value <= tol.max(limit(self.lo[k])) {
            self.lo[k] = value;
        } else if value > self.hi[k] && value - self.hi[k] <= tol.max(limit(self.hi[k])) {
            self.hi[k] = value;
        } else {
            return;
        }
        self.shifted = true;
        self.x[k] = value;
    }

    /// Put the original bounds back and move nonbasic variables onto them.
    fn unshift(&mut self) {
        self.lo.copy_from_slice(&self.std.lo);
        self.hi.copy_from_slice(&self.std.hi);
        self.shifted = false;
        self.shift_rounds += 1;
        for j in 0..self.x.len() {
            if self.status[j] != VarStatus::Basic {
                self.x[j] = self.value_at(j, self.status[j]);
            }
        }
    }

    fn refactor(&mut self) {
        let std = self.std;
        loop {
            let cols: Vec<Vec<(usize, f64)>> = self.head.iter().map(|&j| std.cols[j].clone()).collect();
            match SparseLu::factor(std.m, &cols) {
                Ok(lu) => {
                    self.lu = lu;
                    return;
                }
                Err(sing) => {
                    for (&p, &r) in sing.positions.iter().zip(&sing.rows) {
                        let j = self.head[p];
                        let s = self.nonbasic_status(j, self.x[j]);
                        self.status[j] = s;
                        self.x[j] = self.value_at(j, s);
                        let slack = std.n + r;
                        self.head[p] = slack;
                        self.status[slack] = VarStatus::Basic;
                    }
                }
            }
        }
    }

    fn compute_basics(&mut self) {
        let std = self.std;
        let mut rhs = std.b.clone();
        for j in 0..std.n + std.m {
            if self.status[j] != VarStatus::Basic && self.x[j] != 0.0 {
                for &(i, a) in &std.cols[j] {
                    rhs[i] -= a * self.x[j];
                }
            }
        }
        let xb = self.lu.ftran(&rhs);
        for (p, &j) in self.head.iter().enumerate() {
            self.x[j] = xb[p];
        }
    }

    fn basic_costs(&self) -> (Vec<f64>, bool) {
        let tol = self.opts.feas_tol;
        let std = self.std;
        let mut phase1 = false;
        let mut c = vec![0.0; std.m];
        for (p, &j) in self.head.iter().enumerate() {
            if self.x[j] < self.lo[j] - tol {
                c[p] = -1.0;
                phase1 = true;
            } else if self.x[j] > self.hi[j] + tol {
                c[p] = 1.0;
                phase1 = true;
            }
        }
        if !phase1 {
            for (p, &j) in self.head.iter().enumerate() {
                c[p] = std.cost[j];
            }
        }
        (c, phase1)
    }

    fn reduced_cost(&self, j: usize, y: &[f64], phase1: bool) -> f64 {
        let c = if phase1 { 0.0 } else { self.std.cost[j] };
        c - self.std.cols[j].iter().map(|&(i, a)| a * y[i]).sum::<f64>()
    }

    fn price(&self, y: &[f64], phase1: bool) -> Option<(usize, f64)> {
        let std = self.std;
        let tol = self.opts.opt_tol;
        let mut best: Option<(usize, f64)> = None;
        for j in 0..std.n + std.m {
            let s = self.status[j];
            if s == VarStatus::Basic || self.lo[j] == self.hi[j] {
                continue;
            }
            let d = self.reduced_cost(j, y, phase1);
            let eligible = match s {
                VarStatus::AtLower => d < -tol,
                VarStatus::AtUpper => d > tol,
                VarStatus::Zero => d.abs() > tol,
                VarStatus::Basic => false,
            };
            if !eligible {
                continue;
            }
            if self.bland {
                return Some((j, d));
            }
            if best.is_none_or(|(_, bd)| d.abs() > bd.abs()) {
                best = Some((j, d));
            }
        }
        best
    }

    /// Ratio test. Returns `None` for an unbounded ray, `Some(None)` for a
    /// bound flip of the entering column, and `Some(Some((p, θ, at_upper)))`
    /// for a pivot on position `p`.
    fn ratio(&self, j: usize, dir: f64, alpha: &[f64]) -> Option<Option<(usize, f64, bool)>> {
        let tol = self.opts.feas_tol;
        let flip = self.hi[j] - self.lo[j];
        // (position, exact ratio, relaxed ratio, hits upper)
        let mut cands: Vec<(usize, f64, f64, bool)> = Vec::new();
        for (p, &a) in alpha.iter().enumerate() {
            if a.abs() < PIVOT_TOL {
                continue;
            }
            let k = self.head[p];
            let rate = -dir * a;
            let xk = self.x[k];
            let (lo, hi) = (self.lo[k], self.hi[k]);
            let (bound, upper) = if rate < 0.0 {
                if xk < lo - tol {
                    continue;
                } else if xk > hi + tol {
                    (hi, true)
                } else {
                    (lo, false)
                }
            } else if xk > hi + tol {
                continue;
            } else if xk < lo - tol {
                (lo, false)
            } else {
                (hi, true)
            };
            if !bound.is_finite() {
                continue;
            }
            let exact = ((xk - bound) / -rate).max(0.0);
            let relaxed = (xk - bound + if rate < 0.0 { tol } else { -tol }) / -rate;
            cands.push((p, exact, relaxed.max(0.0), upper));
        }
        if cands.is_empty() {
            return if flip.is_finite() { Some(None) } else { None };
        }
        let chosen = if self.bland {
            let min = cands.iter().map(|c| c.1).fold(f64::INFINITY, f64::min);
            cands
                .iter()
                .filter(|c| c.1 <= min)
                .min_by_key(|c| self.head[c.0])
                .copied()
                .expect("nonempty")
        } else {
            let theta_max = cands.iter().map(|c| c.2).fold(f64::INFINITY, f64::min);
            cands
                .iter()
                .filter(|c| c.1 <= theta_max)
                .max_by(|a, b| alpha[a.0].abs().total_cmp(&alpha[b.0].abs()).then(b.0.cmp(&a.0)))
                .copied()
                .expect("minimum ratio candidate passes its own test")
        };
        if flip.is_finite() && flip <= chosen.1 {
            return Some(None);
        }
        Some(Some((chosen.0, chosen.1, chosen.3)))
    }

    fn iterate(&mut self, degenerate: &mut usize) -> Step {
        let std = self.std;
        if self.lu.updates() >= self.opts.refactor_every {
            self.refactor();
        }
        self.compute_basics();
        if self.feasible_once && self.shift_rounds < SHIFT_ROUNDS {
            self.shift_bounds();
        }
        let (cb, phase1) = self.basic_costs();
        self.feasible_once |= !phase1;
        let y = self.lu.btran(&cb);
        let Some((j, d)) = self.price(&y, phase1) else {
            if self.lu.updates() > 0 {
                // Confirm on a fresh factorisation before stopping.
                self.refactor();
                return Step::Refactored;
            }
            if self.shifted {
                self.unshift();
                return Step::Refactored;
            }
            return Step::Done(if phase1 {
                LpStatus::Infeasible
            } else {
                LpStatus::Optimal
            });
        };
        let dir = if d < 0.0 { 1.0 } else { -1.0 };
        let mut col = vec![0.0; std.m];
        for &(i, a) in &std.cols[j] {
            col[i] = a;
        }
        let alpha = self.lu.ftran(&col);
        match self.ratio(j, dir, &alpha) {
            None => {
                if phase1 {
                    // A phase-1 ray means the factorisation has drifted.
                    self.refactor();
                    return Step::Refactored;
                }
                Step::Done(LpStatus::Unbounded)
            }
            Some(None) => {
                let s = if self.status[j] == VarStatus::AtUpper {
                    VarStatus::AtLower
                } else {
                    VarStatus::AtUpper
                };
                self.status[j] = s;
                self.x[j] = self.value_at(j, s);
                *degenerate = 0;
                Step::Continue
            }
            Some(Some((p, theta, upper))) => {
                let k = self.head[p];
                let s = if upper && self.lo[k] != self.hi[k] {
                    VarStatus::AtUpper
                } else {
                    VarStatus::AtLower
                };
                let post = self.x[k] - dir * theta * alpha[p];
                self.status[k] = s;
                self.x[k] = self.value_at(k, s);
                if self.shift_rounds < SHIFT_ROUNDS {
                    self.shift_leaving(k, post);
                }
                self.x[j] += dir * theta;
                self.status[j] = VarStatus::Basic;
                self.head[p] = j;
                self.lu.update(p, &alpha);
                if theta * d.abs() < 1e-12 {
                    *degenerate += 1;
                    if *degenerate > DEGENERATE_STREAK {
                        self.bland = true;
                    }
                } else {
                    *degenerate = 0;
                    self.bland = self.opts.bland;
                }
                Step::Continue
            }
        }
    }
}

fn solve_once(lp: &LinearProgram, warm: Option<&Basis>, opts: &SimplexOptions) -> LpSolution {
    let std = Standard::new(lp, opts.scale);
    let (m, n) = (std.m, std.n);
    let max_iter = opts.max_iter.unwrap_or(20_000 + 50 * (m + n));
    let mut run = Run::new(&std, warm, opts);
    let mut iterations = 0;
    let mut degenerate = 0;
    let mut stalls = 0;
    let status = loop {
        if iterations >= max_iter {
            break LpStatus::IterationLimit;
        }
        match run.iterate(&mut degenerate) {
            Step::Done(s) => break s,
            Step::Continue => iterations += 1,
            Step::Refactored => {
                stalls += 1;
                if stalls > 1000 {
                    break LpStatus::IterationLimit;
                }
            }
        }
    };
    run.compute_basics();
    let mut duals = vec![0.0; m];
    if status == LpStatus::Optimal {
        let cb: Vec<f64> = run.head.iter().map(|&j| std.cost[j]).collect();
        let y = run.lu.btran(&cb);
        for i in 0..m {
            duals[i] = y[i] * std.row_scale[i];
        }
    }
    let x: Vec<f64> = (0..n).map(|j| run.x[j] * std.col_scale[j]).collect();
    let objective = lp.objective_value(&x);
    LpSolution {
        status,
        x,
        objective,
        duals,
        iterations,
        basis: Some(Basis { status: run.status }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lp::LpStatus;

    fn solve(lp: &LinearProgram) -> LpSolution {
        SimplexSolver::default().solve(lp, None)
    }

    #[test]
    fn single_bounded_variable() {
        let mut lp = LinearProgram::new();
        let x = lp.add_col("x", 0.0, 10.0, -1.0);
        lp.add_row("cap", vec![(x, 1.0)], Sense::Le, 1.0);
        let sol = solve(&lp);
        assert_eq!(sol.status, LpStatus::Optimal);
        assert!((sol.x[0] - 1.0).abs() < 1e-12);
        assert!((sol.objective + 1.0).abs() < 1e-12);
        assert!((sol.duals[0] + 1.0).abs() < 1e-12);
    }

    #[test]
    fn contradictory_rows_are_infeasible() {
        let mut lp = LinearProgram::new();
        let x = lp.add_col("x", f64::NEG_INFINITY, f64::INFINITY, 0.0);
        lp.add_row("a", vec![(x, 1.0)], Sense::Le, 1.0);
        lp.add_row("b", vec![(x, 1.0)], Sense::Ge, 2.0);
        assert_eq!(solve(&lp).status, LpStatus::Infeasible);
    }

    #[test]
    fn detects_unbounded_ray() {
        let mut lp = LinearProgram::new();
        let x = lp.add_col("x", 0.0, f64::INFINITY, -1.0);
        let y = lp.add_col("y", 0.0, f64::INFINITY, 0.0);
        lp.add_row("a", vec![(x, 1.0), (y, -1.0)], Sense::Le, 1.0);
        assert_eq!(solve(&lp).status, LpStatus::Unbounded);
    }

    #[test]
    fn free_variables_and_equalities() {
        // x = 3 - y turns the objective into 3 + y, so y sits at its lower bound.
        let mut lp = LinearProgram::new();
        let x = lp.add_col("x", f64::NEG_INFINITY, f64::INFINITY, 1.0);
        let y = lp.add_col("y", -5.0, 5.0, 2.0);
        lp.add_row("sum", vec![(x, 1.0), (y, 1.0)], Sense::Eq, 3.0);
        lp.add_row("diff", vec![(x, 1.0), (y, -1.0)], Sense::Ge, -1.0);
        let sol = solve(&lp);
        assert_eq!(sol.status, LpStatus::Optimal);
        assert!((sol.x[0] - 8.0).abs() < 1e-9 && (sol.x[1] + 5.0).abs() < 1e-9);
        assert!((sol.objective + 2.0).abs() < 1e-9);
        assert!((sol.dual_objective(&lp) - sol.objective).abs() < 1e-9);
    }

    #[test]
    fn warm_start_reproduces_cold_optimum() {
        let mut lp = LinearProgram::new();
        let a = lp.add_col("a", 0.0, 4.0, -1.0);
        let b = lp.add_col("b", 0.0, 4.0, -1.0);
        lp.add_row("r1", vec![(a, 1.0), (b, 2.0)], Sense::Le, 6.0);
        lp.add_row("r2", vec![(a, 3.0), (b, 1.0)], Sense::Le, 9.0);
        let first = solve(&lp);
        lp.objective = vec![1.0, -2.0];
        let cold = solve(&lp);
        let warm = SimplexSolver::default().solve(&lp, first.basis.as_ref());
        assert_eq!(warm.status, LpStatus::Optimal);
        assert!((warm.objective - cold.objective).abs() < 1e-7);
    }
}
