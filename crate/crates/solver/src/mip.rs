//! Best-bound branch-and-bound over [`solve_lp_warm`].

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::fmt::Write as _;
use std::rc::Rc;
use std::time::{Duration, Instant};

use crate::error::MipError;
use crate::lp::LinearProgram;
use crate::simplex::{solve_lp_warm, Basis, LpStatus};
use crate::{FEASIBILITY_TOL, INTEGRALITY_TOL};

#[derive(Debug, Clone, PartialEq)]
pub struct MixedIntegerProgram {
    pub lp: LinearProgram,
    integer: Vec<bool>,
    binary: Vec<bool>,
}

impl MixedIntegerProgram {
    pub fn new(lp: LinearProgram) -> Self {
        let n = lp.num_vars();
        Self { lp, integer: vec![false; n], binary: vec![false; n] }
    }

    pub fn set_integer(&mut self, var: usize) {
        self.sync_len();
        self.integer[var] = true;
    }

    /// Marks `var` binary and clamps its bounds to `[0, 1]`.
    pub fn set_binary(&mut self, var: usize) {
        self.sync_len();
        self.integer[var] = true;
        self.binary[var] = true;
        let lo = self.lp.lower()[var].max(0.0);
        let hi = self.lp.upper()[var].min(1.0);
        self.lp.set_bounds(var, lo, hi);
    }

    fn sync_len(&mut self) {
        let n = self.lp.num_vars();
        self.integer.resize(n, false);
        self.binary.resize(n, false);
    }

    pub fn is_integer(&self, var: usize) -> bool {
        self.integer.get(var).copied().unwrap_or(false)
    }

    pub fn is_binary(&self, var: usize) -> bool {
        self.binary.get(var).copied().unwrap_or(false)
    }

    pub fn integer_vars(&self) -> impl Iterator<Item = usize> + '_ {
        self.integer.iter().enumerate().filter(|(_, b)| **b).map(|(j, _)| j)
    }

    pub fn num_integer_vars(&self) -> usize {
        self.integer.iter().filter(|b| **b).count()
    }

    pub fn validate(&self) -> Result<(), MipError> {
        self.lp.validate()?;
        if self.integer.len() > self.lp.num_vars() {
            return Err(MipError::BadIntegerVar(self.lp.num_vars()));
        }
        for (j, &b) in self.binary.iter().enumerate() {
            if b && (self.lp.lower()[j] < 0.0 || self.lp.upper()[j] > 1.0) {
                return Err(MipError::BadBinaryVar(j));
            }
        }
        Ok(())
    }

    /// Whether `x` satisfies rows, bounds and integrality.
    pub fn is_feasible(&self, x: &[f64]) -> bool {
        self.lp.max_violation(x) <= FEASIBILITY_TOL
            && self.integer_vars().all(|j| (x[j] - x[j].round()).abs() <= INTEGRALITY_TOL)
    }

    /// Common step of all attainable objective values, when the objective
    /// only charges integer variables with integral coefficients.
    fn objective_granularity(&self) -> Option<f64> {
        let mut g: u64 = 0;
        for (j, &c) in self.lp.objective().iter().enumerate() {
            if c == 0.0 {
                continue;
            }
            if !self.is_integer(j) || (c - c.round()).abs() > 1e-9 || c.abs() > 1e12 {
                return None;
            }
            g = gcd(g, c.round().abs() as u64);
        }
        (g > 0).then_some(g as f64)
    }
}

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

#[derive(Debug, Clone)]
pub struct MipOptions {
    pub time_limit: Option<Duration>,
    /// Upper limit on solved nodes. Node limits keep results reproducible;
    /// wall-clock limits do not.
    pub node_limit: Option<usize>,
    pub integrality_tol: f64,
    pub abs_gap: f64,
    pub rel_gap: f64,
    /// Round the node relaxation's integer variables up, fix them and
    /// re-solve for the continuous part to find incumbents early.
    pub rounding_heuristic: bool,
    pub initial_incumbent: Option<Vec<f64>>,
}

impl Default for MipOptions {
    fn default() -> Self {
        Self {
            time_limit: None,
            node_limit: None,
            integrality_tol: INTEGRALITY_TOL,
            abs_gap: 1e-6,
            rel_gap: 1e-9,
            rounding_heuristic: true,
            initial_incumbent: None,
        }
    }
}

impl MipOptions {
    pub fn with_time_limit(limit: Duration) -> Self {
        Self { time_limit: Some(limit), ..Self::default() }
    }

    pub fn with_node_limit(limit: usize) -> Self {
        Self { node_limit: Some(limit), ..Self::default() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MipStatus {
    Optimal,
    FeasibleTimeLimit,
    Infeasible,
    NoIncumbent,
}

/// One incumbent or bound improvement.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MipLogEntry {
    pub seconds: f64,
    pub nodes: usize,
    pub incumbent: f64,
    pub bound: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MipResult {
    pub status: MipStatus,
    pub incumbent: Option<Vec<f64>>,
    /// Incumbent objective; `+inf` without one.
    pub objective: f64,
    pub best_bound: f64,
    pub nodes_explored: usize,
    pub wall_time: Duration,
    pub log: Vec<MipLogEntry>,
}

impl MipResult {
    /// Value to measure gaps against: the proven optimum, or the best bound
    /// when the search stopped early.
    pub fn reference_value(&self) -> f64 {
        match self.status {
            MipStatus::Optimal => self.objective,
            _ => self.best_bound,
        }
    }

    /// The improvement log as CSV (`seconds,nodes,incumbent,bound`).
    pub fn log_csv(&self) -> String {
        let mut out = String::from("seconds,nodes,incumbent,bound\n");
        for e in &self.log {
            let _ = writeln!(out, "{:.6},{},{},{}", e.seconds, e.nodes, e.incumbent, e.bound);
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GapReport {
    /// `(z_hat - z_ref) / |z_ref|`, or the absolute difference when the
    /// reference is zero.
    pub gap: f64,
    pub zero_reference: bool,
}

pub fn integrality_gap_report(res: &MipResult, reference_optimum: f64) -> GapReport {
    let z_hat = res.objective;
    if reference_optimum.abs() < 1e-12 {
        GapReport { gap: (z_hat - reference_optimum).abs(), zero_reference: true }
    } else {
        GapReport {
            gap: (z_hat - reference_optimum) / reference_optimum.abs(),
            zero_reference: false,
        }
    }
}

struct Node {
    bound: f64,
    depth: usize,
    seq: usize,
    lower: Vec<(usize, f64)>,
    upper: Vec<(usize, f64)>,
    basis: Option<Rc<Basis>>,
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
    // BinaryHeap pops the greatest: lowest bound, then deepest, then oldest.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .bound
            .total_cmp(&self.bound)
            .then(self.depth.cmp(&other.depth))
            .then(other.seq.cmp(&self.seq))
    }
}

struct Search<'a> {
    mip: &'a MixedIntegerProgram,
    opts: &'a MipOptions,
    granularity: Option<f64>,
    started: Instant,
    incumbent: Option<Vec<f64>>,
    incumbent_obj: f64,
    best_bound: f64,
    nodes: usize,
    log: Vec<MipLogEntry>,
}

impl Search<'_> {
    fn round_bound(&self, bound: f64) -> f64 {
        match self.granularity {
            Some(g) if bound.is_finite() => (bound / g - 1e-6).ceil() * g,
            _ => bound,
        }
    }

    fn prunable(&self, bound: f64) -> bool {
        if self.incumbent.is_none() {
            return false;
        }
        let tol = self.opts.abs_gap.max(self.opts.rel_gap * self.incumbent_obj.abs());
        bound >= self.incumbent_obj - tol
    }

    fn offer(&mut self, x: Vec<f64>) {
        let mut x = x;
        for j in self.mip.integer_vars() {
            x[j] = x[j].round();
        }
        let obj = self.mip.lp.objective_value(&x);
        if obj < self.incumbent_obj - 1e-12 && self.mip.is_feasible(&x) {
            self.incumbent_obj = obj;
            self.incumbent = Some(x);
            self.record();
        }
    }

    fn record(&mut self) {
        self.log.push(MipLogEntry {
            seconds: self.started.elapsed().as_secs_f64(),
            nodes: self.nodes,
            incumbent: self.incumbent_obj,
            bound: self.best_bound,
        });
    }

    fn raise_bound(&mut self, b: f64) {
        let b = b.min(self.incumbent_obj);
        if b > self.best_bound {
            self.best_bound = b;
            self.record();
        }
    }

    fn out_of_budget(&self) -> bool {
        self.opts.node_limit.is_some_and(|n| self.nodes >= n)
            || self.opts.time_limit.is_some_and(|t| self.started.elapsed() >= t)
    }

    fn most_fractional(&self, x: &[f64]) -> Option<usize> {
        let mut best: Option<(usize, f64)> = None;
        for j in self.mip.integer_vars() {
            let f = x[j] - x[j].floor();
            let dist = f.min(1.0 - f);
            if dist <= self.opts.integrality_tol {
                continue;
            }
            if best.map_or(true, |(_, d)| dist > d + 1e-12) {
                best = Some((j, dist));
            }
        }
        best.map(|(j, _)| j)
    }

    /// Rounds integer variables of `x` up, fixes them and solves for the
    /// continuous remainder.
    fn round_up_and_fix(&mut self, node_lp: &LinearProgram, x: &[f64], basis: Option<&Basis>) {
        let mut lp = node_lp.clone();
        for j in self.mip.integer_vars() {
            let v = (x[j] - self.opts.integrality_tol).ceil().max(lp.lower()[j]);
            if v > lp.upper()[j] {
                return;
            }
            lp.set_bounds(j, v, v);
        }
        if let Ok(sol) = solve_lp_warm(&lp, basis) {
            if sol.status == LpStatus::Optimal {
                self.offer(sol.primal);
            }
        }
    }
}

/// Solves `mip` to optimality or until a limit in `opts` is reached.
///
/// Limits are checked between nodes, so the node in flight always completes.
pub fn solve_mip(mip: &MixedIntegerProgram, opts: &MipOptions) -> Result<MipResult, MipError> {
    mip.validate()?;
    let started = Instant::now();
    let mut search = Search {
        mip,
        opts,
        granularity: mip.objective_granularity(),
        started,
        incumbent: None,
        incumbent_obj: f64::INFINITY,
        best_bound: f64::NEG_INFINITY,
        nodes: 0,
        log: Vec::new(),
    };

    if let Some(x0) = &opts.initial_incumbent {
        if x0.len() != mip.lp.num_vars() {
            return Err(MipError::BadIncumbent(format!(
                "length {} but model has {} variables",
                x0.len(),
                mip.lp.num_vars()
            )));
        }
        if !mip.is_feasible(x0) {
            return Err(MipError::BadIncumbent(format!(
                "violates the model by {:e}",
                mip.lp.max_violation(x0)
            )));
        }
        search.offer(x0.clone());
    }

    let mut heap = BinaryHeap::new();
    let mut seq = 0usize;
    heap.push(Node {
        bound: f64::NEG_INFINITY,
        depth: 0,
        seq,
        lower: Vec::new(),
        upper: Vec::new(),
        basis: None,
    });
    let mut exhausted = true;
    let mut unbounded_root = false;

    while let Some(node) = heap.pop() {
        if search.prunable(node.bound) {
            continue;
        }
        if search.out_of_budget() {
            heap.push(node);
            exhausted = false;
            break;
        }
        search.nodes += 1;

        let mut lp = mip.lp.clone();
        for &(j, v) in &node.lower {
            let u = lp.upper()[j];
            lp.set_bounds(j, v, u);
        }
        for &(j, v) in &node.upper {
            let l = lp.lower()[j];
            lp.set_bounds(j, l, v);
        }
        if node.lower.iter().chain(&node.upper).any(|&(j, _)| lp.lower()[j] > lp.upper()[j]) {
            continue;
        }
        let sol = solve_lp_warm(&lp, node.basis.as_deref())?;
        match sol.status {
            LpStatus::Infeasible => continue,
            LpStatus::Unbounded => {
                if node.depth == 0 {
                    unbounded_root = true;
                    break;
                }
                continue;
            }
            LpStatus::Optimal => {}
        }
        let bound = search.round_bound(sol.objective_value).max(node.bound);
        if node.depth == 0 {
            search.raise_bound(bound);
        }
        if search.prunable(bound) {
            continue;
        }
        let Some(branch_var) = search.most_fractional(&sol.primal) else {
            search.offer(sol.primal);
            continue;
        };
        if opts.rounding_heuristic {
            search.round_up_and_fix(&lp, &sol.primal, sol.basis.as_ref());
            if search.prunable(bound) {
                continue;
            }
        }

        let v = sol.primal[branch_var];
        let basis = sol.basis.map(Rc::new);
        let mut down = Node {
            bound,
            depth: node.depth + 1,
            seq: 0,
            lower: node.lower.clone(),
            upper: node.upper.clone(),
            basis: basis.clone(),
        };
        down.upper.push((branch_var, v.floor()));
        let mut up = Node {
            bound,
            depth: node.depth + 1,
            seq: 0,
            lower: node.lower,
            upper: node.upper,
            basis,
        };
        up.lower.push((branch_var, v.ceil()));
        seq += 1;
        down.seq = seq;
        heap.push(down);
        seq += 1;
        up.seq = seq;
        heap.push(up);

        if let Some(top) = heap.peek() {
            search.raise_bound(top.bound);
        }
    }

    if unbounded_root {
        return Err(MipError::Unbounded);
    }
    let status = match (exhausted, search.incumbent.is_some()) {
        (true, true) => MipStatus::Optimal,
        (true, false) => MipStatus::Infeasible,
        (false, true) => MipStatus::FeasibleTimeLimit,
        (false, false) => MipStatus::NoIncumbent,
    };
    let best_bound = match status {
        MipStatus::Optimal => search.incumbent_obj,
        MipStatus::Infeasible => f64::INFINITY,
        _ => {
            let open = heap
                .iter()
                .filter(|n| !search.prunable(n.bound))
                .map(|n| n.bound)
                .fold(f64::INFINITY, f64::min);
            open.min(search.incumbent_obj).max(search.best_bound)
        }
    };
    if best_bound > search.best_bound && best_bound.is_finite() {
        search.best_bound = best_bound;
        search.record();
    }
    Ok(MipResult {
        status,
        objective: search.incumbent_obj,
        incumbent: search.incumbent,
        best_bound,
        nodes_explored: search.nodes,
        wall_time: started.elapsed(),
        log: search.log,
    })
}
