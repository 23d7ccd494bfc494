//! Routing commodity volume onto fixed sort-pair capacity.

use dlpp_solver::{solve_lp, LinearProgram, LpStatus, Sense};

use crate::error::Result;
use crate::network::{diversion_cost, CommodityId, Instance, SortPairId};
use crate::plan::{capacity_by_pair, LoadPlan};

/// Routes every commodity within the per-pair capacities `lambda`, spending
/// as little diversion cost as possible. `None` when the capacity cannot
/// hold the volume.
pub fn route_pair_flows(inst: &Instance, lambda: &[f64]) -> Result<Option<Vec<(CommodityId, SortPairId, f64)>>> {
    let mut lp = LinearProgram::new(0);
    let mut cols = Vec::new();
    let mut by_pair: Vec<Vec<(usize, f64)>> = vec![Vec::new(); inst.num_sort_pairs()];
    for k in inst.commodity_ids() {
        let c = inst.commodity(k);
        let mut row = Vec::new();
        for s in c.compatible() {
            let j = lp.add_var(0.0, f64::INFINITY, diversion_cost(inst, k, s)?);
            cols.push((k, s, j));
            row.push((j, 1.0));
            by_pair[s.0].push((j, 1.0));
        }
        lp.add_row(row, Sense::Eq, c.volume);
    }
    for (s, row) in by_pair.into_iter().enumerate() {
        if !row.is_empty() {
            lp.add_row(row, Sense::Le, lambda[s]);
        }
    }
    let sol = solve_lp(&lp)?;
    if sol.status != LpStatus::Optimal {
        return Ok(None);
    }
    Ok(Some(
        cols.into_iter()
            .map(|(k, s, j)| (k, s, sol.primal[j].max(0.0)))
            .filter(|&(_, _, q)| q > 1e-12)
            .collect(),
    ))
}

/// A complete plan for fixed trailer counts `y`, or `None` if `y` lacks
/// capacity.
pub fn plan_for_counts(inst: &Instance, y: Vec<u32>) -> Result<Option<LoadPlan>> {
    let lambda = capacity_by_pair(inst, &y);
    Ok(route_pair_flows(inst, &lambda)?.map(|flows| LoadPlan::from_pair_flows(inst, y, &flows)))
}
