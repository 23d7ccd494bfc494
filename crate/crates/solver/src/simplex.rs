//! Bounded-variable primal revised simplex.
//!
//! Every row `a·x (sense) b` gets a slack `s` with `a·x + s = b`, bounded
//! `[0, inf)` for `<=`, `(-inf, 0]` for `>=` and `[0, 0]` for `=`. The slack
//! basis is therefore always a valid starting point. Infeasible starts are
//! handled by a composite phase 1 that minimizes the sum of bound violations
//! of the basic variables, so warm starts from a parent basis with tightened
//! bounds need no special treatment.

use crate::error::LpError;
use crate::lp::{LinearProgram, Sense};
use crate::{FEASIBILITY_TOL, OPTIMALITY_TOL, PIVOT_TOL};

const PHASE1_TOL: f64 = 1e-9;
const REFACTOR_EVERY: usize = 100;
const SINGULAR_TOL: f64 = 1e-11;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum VarStatus {
    Basic,
    AtLower,
    AtUpper,
}

/// Status of every structural column followed by every row slack.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Basis {
    pub status: Vec<VarStatus>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub status: LpStatus,
    pub objective_value: f64,
    /// Structural variable values.
    pub primal: Vec<f64>,
    /// Row duals; empty unless optimal.
    pub duals: Vec<f64>,
    /// Structural reduced costs; empty unless optimal.
    pub reduced_costs: Vec<f64>,
    pub basis: Option<Basis>,
    pub iterations: usize,
}

impl LpSolution {
    /// Objective of the dual built from row duals and reduced costs at the
    /// bounds the primal sits on.
    pub fn dual_objective(&self, lp: &LinearProgram) -> f64 {
        let rows: f64 = lp.rows().iter().zip(&self.duals).map(|(r, y)| r.rhs * y).sum();
        let bounds: f64 = self
            .reduced_costs
            .iter()
            .enumerate()
            .map(|(j, &d)| {
                if d > 0.0 {
                    d * lp.lower()[j]
                } else if d < 0.0 {
                    d * lp.upper()[j]
                } else {
                    0.0
                }
            })
            .sum();
        rows + bounds
    }
}

pub fn solve_lp(lp: &LinearProgram) -> Result<LpSolution, LpError> {
    solve_lp_warm(lp, None)
}

/// Solves `lp`, starting from `warm` when it is a usable basis for this
/// model shape. An unusable hint silently falls back to the slack basis.
pub fn solve_lp_warm(lp: &LinearProgram, warm: Option<&Basis>) -> Result<LpSolution, LpError> {
    lp.validate()?;
    let mut simplex = Simplex::new(lp);
    let warmed = match warm {
        Some(b) => simplex.load_basis(b),
        None => false,
    };
    if !warmed {
        simplex.cold_start();
    }
    simplex.run(lp)
}

struct Simplex {
    m: usize,
    n: usize,
    col_start: Vec<usize>,
    col_row: Vec<usize>,
    col_val: Vec<f64>,
    cost: Vec<f64>,
    lb: Vec<f64>,
    ub: Vec<f64>,
    b: Vec<f64>,
    head: Vec<usize>,
    status: Vec<VarStatus>,
    x: Vec<f64>,
    binv: Vec<f64>,
    bland: bool,
    degenerate: usize,
    since_refactor: usize,
    iterations: usize,
}

enum Step {
    Optimal,
    Infeasible,
    Unbounded,
    Continue,
}

impl Simplex {
    fn new(lp: &LinearProgram) -> Self {
        let m = lp.num_rows();
        let n = lp.num_vars();
        let mut cols: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
        for (i, row) in lp.rows().iter().enumerate() {
            for &(j, a) in &row.coeffs {
                match cols[j].last_mut() {
                    Some((r, v)) if *r == i => *v += a,
                    _ => cols[j].push((i, a)),
                }
            }
        }
        let mut col_start = Vec::with_capacity(n + 1);
        let mut col_row = Vec::new();
        let mut col_val = Vec::new();
        for col in &cols {
            col_start.push(col_row.len());
            for &(i, a) in col {
                if a != 0.0 {
                    col_row.push(i);
                    col_val.push(a);
                }
            }
        }
        col_start.push(col_row.len());

        let mut cost = lp.objective().to_vec();
        cost.resize(n + m, 0.0);
        let mut lb = lp.lower().to_vec();
        let mut ub = lp.upper().to_vec();
        for row in lp.rows() {
            let (l, u) = match row.sense {
                Sense::Le => (0.0, f64::INFINITY),
                Sense::Ge => (f64::NEG_INFINITY, 0.0),
                Sense::Eq => (0.0, 0.0),
            };
            lb.push(l);
            ub.push(u);
        }
        let b = lp.rows().iter().map(|r| r.rhs).collect();

        Self {
            m,
            n,
            col_start,
            col_row,
            col_val,
            cost,
            lb,
            ub,
            b,
            head: Vec::with_capacity(m),
            status: vec![VarStatus::AtLower; n + m],
            x: vec![0.0; n + m],
            binv: vec![0.0; m * m],
            bland: false,
            degenerate: 0,
            since_refactor: 0,
            iterations: 0,
        }
    }

    fn total(&self) -> usize {
        self.n + self.m
    }

    fn for_col(&self, j: usize, mut f: impl FnMut(usize, f64)) {
        if j < self.n {
            for p in self.col_start[j]..self.col_start[j + 1] {
                f(self.col_row[p], self.col_val[p]);
            }
        } else {
            f(j - self.n, 1.0);
        }
    }

    fn nonbasic_value(&self, j: usize) -> f64 {
        match self.status[j] {
            VarStatus::AtUpper => self.ub[j],
            _ => self.lb[j],
        }
    }

    fn cold_start(&mut self) {
        self.head.clear();
        for j in 0..self.n {
            self.status[j] = VarStatus::AtLower;
        }
        for i in 0..self.m {
            self.status[self.n + i] = VarStatus::Basic;
            self.head.push(self.n + i);
        }
        // Slack basis is the identity.
        self.binv.iter_mut().for_each(|v| *v = 0.0);
        for i in 0..self.m {
            self.binv[i * self.m + i] = 1.0;
        }
        self.recompute_primal();
    }

    fn load_basis(&mut self, basis: &Basis) -> bool {
        if basis.status.len() != self.total() {
            return false;
        }
        let basic = basis.status.iter().filter(|s| **s == VarStatus::Basic).count();
        if basic != self.m {
            return false;
        }
        self.head.clear();
        for (j, &s) in basis.status.iter().enumerate() {
            let s = match s {
                VarStatus::Basic => {
                    self.head.push(j);
                    VarStatus::Basic
                }
                VarStatus::AtUpper if self.ub[j].is_finite() => VarStatus::AtUpper,
                VarStatus::AtLower if self.lb[j].is_finite() => VarStatus::AtLower,
                _ if self.lb[j].is_finite() => VarStatus::AtLower,
                _ if self.ub[j].is_finite() => VarStatus::AtUpper,
                _ => return false,
            };
            self.status[j] = s;
        }
        if self.refactor().is_err() {
            return false;
        }
        self.recompute_primal();
        true
    }

    /// Rebuilds the explicit basis inverse by Gauss-Jordan elimination with
    /// partial pivoting.
    fn refactor(&mut self) -> Result<(), LpError> {
        let m = self.m;
        let mut a = vec![0.0; m * m];
        for (c, &j) in self.head.iter().enumerate() {
            self.for_col(j, |r, v| a[r * m + c] = v);
        }
        let mut inv = vec![0.0; m * m];
        for i in 0..m {
            inv[i * m + i] = 1.0;
        }
        for col in 0..m {
            let mut piv = col;
            let mut best = a[col * m + col].abs();
            for r in col + 1..m {
                let v = a[r * m + col].abs();
                if v > best {
                    best = v;
                    piv = r;
                }
            }
            if best < SINGULAR_TOL {
                return Err(LpError::NumericalFailure(format!(
                    "singular basis at column {col} (pivot {best:e})"
                )));
            }
            if piv != col {
                for k in 0..m {
                    a.swap(piv * m + k, col * m + k);
                    inv.swap(piv * m + k, col * m + k);
                }
            }
            let p = a[col * m + col];
            for k in 0..m {
                a[col * m + k] /= p;
                inv[col * m + k] /= p;
            }
            for r in 0..m {
                if r == col {
                    continue;
                }
                let f = a[r * m + col];
                if f != 0.0 {
                    for k in 0..m {
                        a[r * m + k] -= f * a[col * m + k];
                        inv[r * m + k] -= f * inv[col * m + k];
                    }
                }
            }
        }
        self.binv = inv;
        self.since_refactor = 0;
        Ok(())
    }

    fn recompute_primal(&mut self) {
        let m = self.m;
        let mut rhs = self.b.clone();
        for j in 0..self.total() {
            if self.status[j] == VarStatus::Basic {
                continue;
            }
            let v = self.nonbasic_value(j);
            self.x[j] = v;
            if v != 0.0 {
                let mut upd = Vec::new();
                self.for_col(j, |r, a| upd.push((r, a)));
                for (r, a) in upd {
                    rhs[r] -= a * v;
                }
            }
        }
        for i in 0..m {
            let row = &self.binv[i * m..(i + 1) * m];
            let v: f64 = row.iter().zip(&rhs).map(|(a, b)| a * b).sum();
            self.x[self.head[i]] = v;
        }
    }

    fn infeasibility(&self, j: usize) -> f64 {
        let v = self.x[j];
        if v < self.lb[j] - PHASE1_TOL {
            self.lb[j] - v
        } else if v > self.ub[j] + PHASE1_TOL {
            v - self.ub[j]
        } else {
            0.0
        }
    }

    fn run(&mut self, lp: &LinearProgram) -> Result<LpSolution, LpError> {
        let limit = 20_000usize.max(50 * (self.m + self.total()));
        let degenerate_limit = 10 * (self.m + self.total());
        loop {
            if self.iterations >= limit {
                return Err(LpError::NumericalFailure(format!(
                    "iteration limit {limit} reached"
                )));
            }
            if self.since_refactor >= REFACTOR_EVERY {
                self.refactor()?;
                self.recompute_primal();
            }
            if !self.bland && self.degenerate > degenerate_limit {
                log::debug!("switching to Bland's rule after {} degenerate pivots", self.degenerate);
                self.bland = true;
            }
            match self.iterate()? {
                Step::Continue => {}
                Step::Optimal => {
                    // Clean up drift before reporting.
                    self.refactor()?;
                    self.recompute_primal();
                    if (0..self.total()).any(|j| self.infeasibility(j) > PHASE1_TOL) {
                        continue;
                    }
                    return Ok(self.finish(lp, LpStatus::Optimal));
                }
                Step::Infeasible => {
                    self.refactor()?;
                    self.recompute_primal();
                    let infeasible = (0..self.m).any(|i| self.infeasibility(self.head[i]) > 0.0);
                    if infeasible && self.pricing(true).is_none() {
                        return Ok(self.finish(lp, LpStatus::Infeasible));
                    }
                }
                Step::Unbounded => return Ok(self.finish(lp, LpStatus::Unbounded)),
            }
        }
    }

    /// Costs of basic variables for the current phase.
    fn basic_costs(&self, phase1: bool) -> Vec<f64> {
        self.head
            .iter()
            .map(|&j| {
                if phase1 {
                    let v = self.x[j];
                    if v < self.lb[j] - PHASE1_TOL {
                        -1.0
                    } else if v > self.ub[j] + PHASE1_TOL {
                        1.0
                    } else {
                        0.0
                    }
                } else {
                    self.cost[j]
                }
            })
            .collect()
    }

    fn duals(&self, cb: &[f64]) -> Vec<f64> {
        let m = self.m;
        let mut pi = vec![0.0; m];
        for (i, &c) in cb.iter().enumerate() {
            if c != 0.0 {
                let row = &self.binv[i * m..(i + 1) * m];
                for k in 0..m {
                    pi[k] += c * row[k];
                }
            }
        }
        pi
    }

    fn reduced_cost(&self, j: usize, pi: &[f64], phase1: bool) -> f64 {
        let mut d = if phase1 { 0.0 } else { self.cost[j] };
        self.for_col(j, |r, a| d -= pi[r] * a);
        d
    }

    /// Picks an entering column and direction, or `None` at optimality.
    fn pricing(&self, phase1: bool) -> Option<(usize, f64)> {
        let cb = self.basic_costs(phase1);
        let pi = self.duals(&cb);
        let mut best: Option<(usize, f64, f64)> = None;
        for j in 0..self.total() {
            let dir = match self.status[j] {
                VarStatus::Basic => continue,
                VarStatus::AtLower => {
                    if self.ub[j] <= self.lb[j] {
                        continue;
                    }
                    1.0
                }
                VarStatus::AtUpper => {
                    if self.ub[j] <= self.lb[j] {
                        continue;
                    }
                    -1.0
                }
            };
            let d = self.reduced_cost(j, &pi, phase1);
            if d * dir < -OPTIMALITY_TOL {
                let score = d.abs();
                if self.bland {
                    return Some((j, dir));
                }
                if best.map_or(true, |(_, _, s)| score > s) {
                    best = Some((j, dir, score));
                }
            }
        }
        best.map(|(j, dir, _)| (j, dir))
    }

    fn iterate(&mut self) -> Result<Step, LpError> {
        let phase1 = (0..self.m).any(|i| self.infeasibility(self.head[i]) > 0.0);
        let Some((q, dir)) = self.pricing(phase1) else {
            return Ok(if phase1 { Step::Infeasible } else { Step::Optimal });
        };
        self.iterations += 1;

        let m = self.m;
        let mut alpha = vec![0.0; m];
        {
            let binv = &self.binv;
            let mut col = Vec::new();
            self.for_col(q, |r, a| col.push((r, a)));
            for (i, out) in alpha.iter_mut().enumerate() {
                let row = &binv[i * m..(i + 1) * m];
                *out = col.iter().map(|&(r, a)| row[r] * a).sum();
            }
        }

        // Ratio test. `rate` is d x_B[i] / dt for a unit step of the entering
        // variable in direction `dir`.
        let mut t_min = f64::INFINITY;
        let mut leave: Option<(usize, f64)> = None;
        let mut leave_pivot = 0.0;
        for i in 0..m {
            let a = alpha[i];
            if a.abs() < PIVOT_TOL {
                continue;
            }
            let rate = -dir * a;
            let j = self.head[i];
            let v = self.x[j];
            let (limit, target) = if rate < 0.0 {
                if v > self.ub[j] + PHASE1_TOL {
                    ((v - self.ub[j]) / -rate, self.ub[j])
                } else if v >= self.lb[j] - PHASE1_TOL && self.lb[j].is_finite() {
                    ((v - self.lb[j]).max(0.0) / -rate, self.lb[j])
                } else {
                    continue;
                }
            } else if v < self.lb[j] - PHASE1_TOL {
                ((self.lb[j] - v) / rate, self.lb[j])
            } else if v <= self.ub[j] + PHASE1_TOL && self.ub[j].is_finite() {
                ((self.ub[j] - v).max(0.0) / rate, self.ub[j])
            } else {
                continue;
            };
            let better = match leave {
                None => true,
                Some(_) if limit < t_min - 1e-12 => true,
                Some((r, _)) if limit <= t_min + 1e-12 => {
                    if self.bland {
                        j < self.head[r]
                    } else {
                        a.abs() > leave_pivot
                    }
                }
                _ => false,
            };
            if better {
                t_min = t_min.min(limit);
                leave = Some((i, target));
                leave_pivot = a.abs();
            }
        }

        let span = self.ub[q] - self.lb[q];
        if span.is_finite() && span <= t_min {
            // Entering variable hits its own opposite bound first.
            for i in 0..m {
                let j = self.head[i];
                self.x[j] -= dir * span * alpha[i];
            }
            self.status[q] = if dir > 0.0 { VarStatus::AtUpper } else { VarStatus::AtLower };
            self.x[q] = self.nonbasic_value(q);
            return Ok(Step::Continue);
        }

        let Some((r, target)) = leave else {
            if phase1 {
                return Err(LpError::NumericalFailure(
                    "unbounded ray while minimizing infeasibility".into(),
                ));
            }
            return Ok(Step::Unbounded);
        };

        let t = t_min.max(0.0);
        if t <= 1e-12 {
            self.degenerate += 1;
        }
        for i in 0..m {
            let j = self.head[i];
            self.x[j] -= dir * t * alpha[i];
        }
        self.x[q] += dir * t;

        let leaving = self.head[r];
        self.status[leaving] = if target == self.ub[leaving] && target != self.lb[leaving] {
            VarStatus::AtUpper
        } else {
            VarStatus::AtLower
        };
        self.x[leaving] = target;
        self.status[q] = VarStatus::Basic;
        self.head[r] = q;

        let piv = alpha[r];
        let (before, rest) = self.binv.split_at_mut(r * m);
        let (pivot_row, after) = rest.split_at_mut(m);
        pivot_row.iter_mut().for_each(|v| *v /= piv);
        for (i, row) in before.chunks_mut(m).chain(after.chunks_mut(m)).enumerate() {
            let i = if i < r { i } else { i + 1 };
            let f = alpha[i];
            if f != 0.0 {
                for (v, p) in row.iter_mut().zip(pivot_row.iter()) {
                    *v -= f * p;
                }
            }
        }
        self.since_refactor += 1;
        Ok(Step::Continue)
    }

    fn finish(&mut self, lp: &LinearProgram, status: LpStatus) -> LpSolution {
        let mut primal = self.x[..self.n].to_vec();
        for (j, v) in primal.iter_mut().enumerate() {
            // Snap values sitting on a bound within noise.
            if (*v - self.lb[j]).abs() < 1e-11 {
                *v = self.lb[j];
            } else if (*v - self.ub[j]).abs() < 1e-11 {
                *v = self.ub[j];
            }
        }
        let (duals, reduced_costs, objective_value) = match status {
            LpStatus::Optimal => {
                let cb = self.basic_costs(false);
                let pi = self.duals(&cb);
                let rc = (0..self.n)
                    .map(|j| {
                        if self.status[j] == VarStatus::Basic {
                            0.0
                        } else {
                            self.reduced_cost(j, &pi, false)
                        }
                    })
                    .collect();
                let obj = lp.objective_value(&primal);
                (pi, rc, obj)
            }
            LpStatus::Infeasible => (Vec::new(), Vec::new(), f64::INFINITY),
            LpStatus::Unbounded => (Vec::new(), Vec::new(), f64::NEG_INFINITY),
        };
        if status == LpStatus::Optimal {
            let viol = lp.max_violation(&primal);
            if viol > FEASIBILITY_TOL {
                log::warn!("optimal LP point violates constraints by {viol:e}");
            }
        }
        LpSolution {
            status,
            objective_value,
            primal,
            duals,
            reduced_costs,
            basis: Some(Basis { status: self.status.clone() }),
            iterations: self.iterations,
        }
    }
}
