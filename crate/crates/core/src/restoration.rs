//! Repairing predicted trailer counts into a feasible plan.
//!
//! A prediction fixes the capacity on every sort pair. If the volume fits,
//! flows are routed and nothing else changes. Otherwise a violation LP
//! measures the shortfall `z_s` per sort pair, each short pair is offered
//! one block of extra capacity sized with its cheapest trailer type, and a
//! small binary program picks the cheapest set of blocks that makes the
//! volume fit.

use serde::Serialize;

use dlpp_solver::{solve_lp, solve_mip, LinearProgram, LpStatus, MipOptions, MipStatus, MixedIntegerProgram, Sense};

use crate::error::{Error, Result};
use crate::flows::{plan_for_counts, route_pair_flows};
use crate::network::{Instance, SortPairId, TrailerTypeId};
use crate::plan::{capacity_by_pair, LoadPlan};

/// Shortfalls at or below this are treated as zero.
pub const VIOLATION_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct PredictedPlan {
    pub y_hat: Vec<u32>,
    /// Installed capacity per sort pair.
    pub lambda: Vec<f64>,
}

impl PredictedPlan {
    pub fn new(inst: &Instance, y_hat: Vec<u32>) -> Result<Self> {
        if y_hat.len() != inst.grid_len() {
            return Err(Error::DimensionMismatch { expected: inst.grid_len(), got: y_hat.len() });
        }
        let mask = inst.compatibility_mask();
        let mut y_hat = y_hat;
        // Predictions on incompatible cells carry no capacity.
        for (n, &ok) in y_hat.iter_mut().zip(&mask) {
            if !ok {
                *n = 0;
            }
        }
        let lambda = capacity_by_pair(inst, &y_hat);
        Ok(Self { y_hat, lambda })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum FlowOutcome {
    Feasible(LoadPlan),
    Shortfall,
}

/// Routes the volume on the predicted capacity, if it fits.
pub fn allocate_flows(inst: &Instance, pred: &PredictedPlan) -> Result<FlowOutcome> {
    Ok(match plan_for_counts(inst, pred.y_hat.clone())? {
        Some(plan) => FlowOutcome::Feasible(plan),
        None => FlowOutcome::Shortfall,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Violation {
    pub sort_pair: SortPairId,
    pub z: f64,
    pub chosen_type: TrailerTypeId,
    /// Trailers of `chosen_type` that cover `z`.
    pub trailers: u32,
    /// Extra capacity offered, `trailers · Q`.
    pub xi: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ViolationProfile {
    /// Shortfall per sort pair.
    pub z: Vec<f64>,
    /// The short pairs, in sort-pair order.
    pub violated: Vec<Violation>,
}

/// Cheapest way to cover `z` on `s`: minimum `c_v · ceil(z / Q_v)`, then the
/// largest capacity, then the lowest type id.
pub fn cheapest_cover(inst: &Instance, s: SortPairId, z: f64) -> (TrailerTypeId, u32) {
    let mut best: Option<(f64, f64, TrailerTypeId, u32)> = None;
    let mut types = inst.sort_pair(s).allowed_trailers.clone();
    types.sort();
    for v in types {
        let t = inst.trailer(v);
        let n = (z / t.capacity - 1e-9).ceil().max(1.0);
        let cost = n * t.cost;
        let better = match best {
            None => true,
            Some((bc, bq, _, _)) => cost < bc - 1e-9 || ((cost - bc).abs() <= 1e-9 && t.capacity > bq),
        };
        if better {
            best = Some((cost, t.capacity, v, n as u32));
        }
    }
    let (_, _, v, n) = best.expect("sort pairs allow at least one trailer type");
    (v, n)
}

/// Builds the profile for given shortfalls `z`.
pub fn violation_profile_from_z(inst: &Instance, z: Vec<f64>) -> ViolationProfile {
    let violated = z
        .iter()
        .enumerate()
        .filter(|&(_, &zs)| zs > VIOLATION_TOL)
        .map(|(s, &zs)| {
            let s = SortPairId(s);
            let (v, n) = cheapest_cover(inst, s, zs);
            Violation { sort_pair: s, z: zs, chosen_type: v, trailers: n, xi: n as f64 * inst.trailer(v).capacity }
        })
        .collect();
    ViolationProfile { z, violated }
}

/// Minimum total shortfall over all routings of the volume.
pub fn violation_lp(inst: &Instance, pred: &PredictedPlan) -> Result<ViolationProfile> {
    let ns = inst.num_sort_pairs();
    let mut lp = LinearProgram::new(0);
    let z_cols: Vec<usize> = (0..ns).map(|_| lp.add_var(0.0, f64::INFINITY, 1.0)).collect();
    let mut by_pair: Vec<Vec<(usize, f64)>> = z_cols.iter().map(|&j| vec![(j, -1.0)]).collect();
    for k in inst.commodity_ids() {
        let c = inst.commodity(k);
        let mut row = Vec::new();
        for s in c.compatible() {
            let j = lp.add_var(0.0, f64::INFINITY, 0.0);
            row.push((j, 1.0));
            by_pair[s.0].push((j, 1.0));
        }
        lp.add_row(row, Sense::Eq, c.volume);
    }
    for (s, row) in by_pair.into_iter().enumerate() {
        lp.add_row(row, Sense::Le, pred.lambda[s]);
    }
    let sol = solve_lp(&lp)?;
    if sol.status != LpStatus::Optimal {
        return Err(Error::RestorationInfeasible(format!("violation LP returned {:?}", sol.status)));
    }
    let z = z_cols.iter().map(|&j| sol.primal[j].max(0.0)).collect();
    Ok(violation_profile_from_z(inst, z))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AddedTrailers {
    pub sort_pair: SortPairId,
    pub trailer_type: TrailerTypeId,
    pub count: u32,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct RestorationReport {
    pub violated: Vec<Violation>,
    pub added: Vec<AddedTrailers>,
    /// Cost of the restored plan minus the cost of the prediction.
    pub cost_delta: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Restored {
    pub plan: LoadPlan,
    pub report: RestorationReport,
}

/// Feasible plan from a prediction: unchanged if its capacity suffices,
/// otherwise with the fewest extra capacity blocks.
pub fn restore(inst: &Instance, pred: &PredictedPlan) -> Result<Restored> {
    if let FlowOutcome::Feasible(plan) = allocate_flows(inst, pred)? {
        return Ok(Restored { plan, report: RestorationReport::default() });
    }
    let profile = violation_lp(inst, pred)?;
    restore_with_profile(inst, pred, &profile)
}

/// The capacity-selection step for a given violation profile.
pub fn restore_with_profile(inst: &Instance, pred: &PredictedPlan, profile: &ViolationProfile) -> Result<Restored> {
    if profile.violated.is_empty() {
        return match allocate_flows(inst, pred)? {
            FlowOutcome::Feasible(plan) => Ok(Restored { plan, report: RestorationReport::default() }),
            FlowOutcome::Shortfall => Err(Error::RestorationInfeasible("shortfall without violated pairs".into())),
        };
    }
    let mut lp = LinearProgram::new(0);
    let u: Vec<usize> = profile.violated.iter().map(|v| lp.add_var(0.0, 1.0, v.xi)).collect();
    let mut by_pair: Vec<Vec<(usize, f64)>> = vec![Vec::new(); inst.num_sort_pairs()];
    for (viol, &j) in profile.violated.iter().zip(&u) {
        by_pair[viol.sort_pair.0].push((j, -viol.xi));
    }
    for k in inst.commodity_ids() {
        let c = inst.commodity(k);
        let mut row = Vec::new();
        for s in c.compatible() {
            let j = lp.add_var(0.0, f64::INFINITY, 0.0);
            row.push((j, 1.0));
            by_pair[s.0].push((j, 1.0));
        }
        lp.add_row(row, Sense::Eq, c.volume);
    }
    for (s, row) in by_pair.into_iter().enumerate() {
        lp.add_row(row, Sense::Le, pred.lambda[s]);
    }
    let mut mip = MixedIntegerProgram::new(lp);
    for &j in &u {
        mip.set_binary(j);
    }
    let res = solve_mip(&mip, &MipOptions::default())?;
    if res.status != MipStatus::Optimal {
        return Err(Error::RestorationInfeasible(format!("capacity selection returned {:?}", res.status)));
    }
    let values = res.incumbent.as_ref().expect("optimal implies an incumbent");

    let mut y = pred.y_hat.clone();
    let mut added = Vec::new();
    for (viol, &j) in profile.violated.iter().zip(&u) {
        if values[j] > 0.5 {
            y[inst.grid_index(viol.sort_pair, viol.chosen_type)] += viol.trailers;
            added.push(AddedTrailers { sort_pair: viol.sort_pair, trailer_type: viol.chosen_type, count: viol.trailers });
        }
    }
    let lambda = capacity_by_pair(inst, &y);
    let flows = route_pair_flows(inst, &lambda)?
        .ok_or_else(|| Error::RestorationInfeasible("selected capacity does not hold the volume".into()))?;
    let plan = LoadPlan::from_pair_flows(inst, y, &flows);
    plan.check(inst)?;
    let before: f64 = pred
        .y_hat
        .iter()
        .enumerate()
        .map(|(i, &n)| inst.trailer(inst.grid_pair(i).1).cost * n as f64)
        .sum();
    Ok(Restored {
        report: RestorationReport { violated: profile.violated.clone(), added, cost_delta: plan.cost(inst) - before },
        plan,
    })
}
