//! Greedy rounding by repeated LP solves: lift the lower bound of the
//! trailer count closest to its ceiling, re-solve, repeat until integral.

use std::fmt::Write as _;

use dlpp_solver::{solve_lp, LpStatus, INTEGRALITY_TOL};

use crate::error::{Error, Result};
use crate::flows::plan_for_counts;
use crate::formulations::build_model1;
use crate::network::Instance;
use crate::plan::LoadPlan;

#[derive(Debug, Clone, PartialEq)]
pub struct GreedyStep {
    pub iteration: usize,
    pub lp_objective: f64,
    /// Grid index lifted after this solve, with its new lower bound.
    pub lifted: Option<(usize, f64)>,
}

#[derive(Debug, Clone)]
pub struct GreedyResult {
    pub plan: LoadPlan,
    /// LP solves performed, including the final integral one.
    pub iterations: usize,
    pub trace: Vec<GreedyStep>,
}

impl GreedyResult {
    pub fn trace_csv(&self, inst: &Instance) -> String {
        let mut out = String::from("iteration,lp_objective,sort_pair,trailer_type,new_lower_bound\n");
        for s in &self.trace {
            let _ = match s.lifted {
                Some((i, lb)) => {
                    let (sp, v) = inst.grid_pair(i);
                    writeln!(
                        out,
                        "{},{},{},{},{}",
                        s.iteration,
                        s.lp_objective,
                        inst.sort_pair(sp).name,
                        inst.trailer(v).name,
                        lb
                    )
                }
                None => writeln!(out, "{},{},,,", s.iteration, s.lp_objective),
            };
        }
        out
    }
}

/// Termination bound: the sum of the trailer upper bounds, plus the final
/// solve.
pub fn iteration_bound(inst: &Instance) -> usize {
    inst.slots().into_iter().map(|(s, v)| inst.trailer_upper_bound(s, v) as usize).sum::<usize>() + 1
}

/// Distance to the next integer; values within 1e-9 of an integer count as
/// integral.
fn ceil_gap(y: f64) -> f64 {
    let r = y.round();
    if (y - r).abs() <= 1e-9 {
        0.0
    } else {
        y.ceil() - y
    }
}

pub fn greedy_solve(inst: &Instance, max_iters: usize) -> Result<GreedyResult> {
    let (mip, map) = build_model1(inst)?;
    let mut lp = mip.lp;
    let mut trace = Vec::new();
    for iteration in 1..=max_iters {
        let sol = solve_lp(&lp)?;
        if sol.status != LpStatus::Optimal {
            return Err(Error::Infeasible { stage: "greedy LP" });
        }
        let mut pick: Option<(usize, usize, f64)> = None;
        for (i, col) in map.y.iter().enumerate() {
            let Some(j) = *col else { continue };
            let g = ceil_gap(sol.primal[j]);
            if g > INTEGRALITY_TOL && pick.is_none_or(|(_, _, best)| g < best) {
                pick = Some((i, j, g));
            }
        }
        match pick {
            None => {
                trace.push(GreedyStep { iteration, lp_objective: sol.objective_value, lifted: None });
                let plan = match plan_for_counts(inst, map.counts(&sol.primal))? {
                    Some(p) => p,
                    // A count just above an integer was rounded down; take
                    // the ceiling instead.
                    None => {
                        let up: Vec<f64> = sol.primal.iter().map(|v| (v - 1e-9).ceil()).collect();
                        plan_for_counts(inst, map.counts(&up))?
                            .ok_or(Error::Infeasible { stage: "greedy flow routing" })?
                    }
                };
                return Ok(GreedyResult { plan, iterations: iteration, trace });
            }
            Some((i, j, _)) => {
                let lb = sol.primal[j].ceil();
                lp.tighten_lower_bound(j, lb)?;
                trace.push(GreedyStep { iteration, lp_objective: sol.objective_value, lifted: Some((i, lb)) });
            }
        }
    }
    Err(Error::IterationLimit(max_iters))
}
