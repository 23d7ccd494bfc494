//! The cost-minimizing load planning model, the reference-consistent model
//! and the two-stage goal-directed pipeline that chains them.
//!
//! Column layout is shared by both models: trailer counts `y` first (one per
//! compatible `(s, v)` in grid order), then flows `x` (commodity-major), then
//! the distance variables `w` of the second model.

use std::time::Duration;

use dlpp_solver::{solve_mip, MipOptions, MipResult, MipStatus, MixedIntegerProgram, LinearProgram, Sense};

use crate::error::{Error, Result};
use crate::flows::plan_for_counts;
use crate::network::{diversion_cost, epsilon_weight, CommodityId, Instance, SortPairId, TrailerTypeId};
use crate::plan::LoadPlan;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct XVar {
    pub commodity: CommodityId,
    pub sort_pair: SortPairId,
    pub trailer_type: TrailerTypeId,
    pub column: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VariableIndexMap {
    /// Column of `y[s, v]` by grid index; `None` on incompatible cells.
    pub y: Vec<Option<usize>>,
    pub x: Vec<XVar>,
    /// Column of `w[s, v]` by grid index (second model only).
    pub w: Option<Vec<Option<usize>>>,
}

impl VariableIndexMap {
    pub fn y_col(&self, inst: &Instance, s: SortPairId, v: TrailerTypeId) -> Option<usize> {
        self.y[inst.grid_index(s, v)]
    }

    pub fn x_col(&self, k: CommodityId, s: SortPairId, v: TrailerTypeId) -> Option<usize> {
        self.x
            .iter()
            .find(|e| e.commodity == k && e.sort_pair == s && e.trailer_type == v)
            .map(|e| e.column)
    }

    pub fn num_y(&self) -> usize {
        self.y.iter().flatten().count()
    }

    /// Trailer counts read from a solution vector, rounded to integers.
    pub fn counts(&self, values: &[f64]) -> Vec<u32> {
        self.y
            .iter()
            .map(|c| c.map_or(0, |j| values[j].round().max(0.0) as u32))
            .collect()
    }

    /// Solution vector for `plan` over the columns shared by both models.
    fn columns_for(&self, num_cols: usize, plan: &LoadPlan) -> Vec<f64> {
        let mut out = vec![0.0; num_cols];
        for (i, c) in self.y.iter().enumerate() {
            if let Some(j) = c {
                out[*j] = plan.y[i] as f64;
            }
        }
        for f in &plan.x {
            if let Some(j) = self.x_col(f.commodity, f.sort_pair, f.trailer_type) {
                out[j] += f.volume;
            }
        }
        out
    }
}

/// Per-stage solver limits. Node limits make runs reproducible; time
/// limits bound latency but depend on machine speed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StageLimits {
    pub time_limit: Option<Duration>,
    pub node_limit: Option<usize>,
}

impl Default for StageLimits {
    fn default() -> Self {
        Self { time_limit: Some(Duration::from_secs(30)), node_limit: None }
    }
}

impl StageLimits {
    pub fn time(limit: Duration) -> Self {
        Self { time_limit: Some(limit), node_limit: None }
    }

    pub fn nodes(limit: usize) -> Self {
        Self { time_limit: None, node_limit: Some(limit) }
    }

    pub fn unlimited() -> Self {
        Self { time_limit: None, node_limit: None }
    }

    fn options(&self) -> MipOptions {
        MipOptions { time_limit: self.time_limit, node_limit: self.node_limit, ..MipOptions::default() }
    }
}

fn base_model(inst: &Instance) -> Result<(LinearProgram, VariableIndexMap)> {
    let mut lp = LinearProgram::new(0);
    let mut y = vec![None; inst.grid_len()];
    for (s, v) in inst.slots() {
        let j = lp.add_var(0.0, inst.trailer_upper_bound(s, v) as f64, inst.trailer(v).cost);
        lp.set_name(j, format!("y[{},{}]", inst.sort_pair(s).name, inst.trailer(v).name));
        y[inst.grid_index(s, v)] = Some(j);
    }
    let mut x = Vec::new();
    let mut cap_rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); inst.grid_len()];
    for k in inst.commodity_ids() {
        let c = inst.commodity(k);
        let mut row = Vec::new();
        for s in c.compatible() {
            let mut allowed = inst.sort_pair(s).allowed_trailers.clone();
            allowed.sort();
            for v in allowed {
                let j = lp.add_var(0.0, f64::INFINITY, 0.0);
                lp.set_name(j, format!("x[{},{},{}]", c.name, inst.sort_pair(s).name, inst.trailer(v).name));
                x.push(XVar { commodity: k, sort_pair: s, trailer_type: v, column: j });
                row.push((j, 1.0));
                cap_rows[inst.grid_index(s, v)].push((j, 1.0));
            }
        }
        if row.is_empty() {
            return Err(Error::DegenerateInstance(format!(
                "commodity {} has no compatible (sort pair, trailer type)",
                c.name
            )));
        }
        lp.add_row(row, Sense::Eq, c.volume);
    }
    for (i, mut row) in cap_rows.into_iter().enumerate() {
        if let Some(j) = y[i] {
            let (_, v) = inst.grid_pair(i);
            row.push((j, -inst.trailer(v).capacity));
            lp.add_row(row, Sense::Le, 0.0);
        }
    }
    Ok((lp, VariableIndexMap { y, x, w: None }))
}

fn integer_y(lp: LinearProgram, map: &VariableIndexMap) -> MixedIntegerProgram {
    let mut mip = MixedIntegerProgram::new(lp);
    for &j in map.y.iter().flatten() {
        mip.set_integer(j);
    }
    mip
}

/// Minimum trailer cost subject to flow conservation and capacity.
pub fn build_model1(inst: &Instance) -> Result<(MixedIntegerProgram, VariableIndexMap)> {
    let (lp, map) = base_model(inst)?;
    Ok((integer_y(lp, &map), map))
}

/// Minimum distance to the reference plan plus weighted diversion cost,
/// subject to spending at most `z_star` on trailers.
pub fn build_model2(inst: &Instance, z_star: f64) -> Result<(MixedIntegerProgram, VariableIndexMap)> {
    build_model2_weighted(inst, z_star, epsilon_weight(inst))
}

/// [`build_model2`] with an explicit diversion weight.
pub fn build_model2_weighted(
    inst: &Instance,
    z_star: f64,
    epsilon: f64,
) -> Result<(MixedIntegerProgram, VariableIndexMap)> {
    let gamma = inst.reference_grid().ok_or(Error::MissingReference)?;
    if !z_star.is_finite() {
        return Err(Error::DegenerateInstance(format!("trailer budget {z_star} is not finite")));
    }
    let (mut lp, mut map) = base_model(inst)?;
    for j in 0..lp.num_vars() {
        lp.set_objective(j, 0.0);
    }
    for e in &map.x {
        lp.set_objective(e.column, epsilon * diversion_cost(inst, e.commodity, e.sort_pair)?);
    }
    let mut w = vec![None; inst.grid_len()];
    let mut budget = Vec::new();
    for (i, col) in map.y.iter().enumerate() {
        let Some(yj) = *col else { continue };
        let (s, v) = inst.grid_pair(i);
        let g = gamma[i] as f64;
        let wj = lp.add_var(0.0, f64::INFINITY, 1.0);
        lp.set_name(wj, format!("w[{},{}]", inst.sort_pair(s).name, inst.trailer(v).name));
        lp.add_row(vec![(wj, 1.0), (yj, -1.0)], Sense::Ge, -g);
        lp.add_row(vec![(wj, 1.0), (yj, 1.0)], Sense::Ge, g);
        budget.push((yj, inst.trailer(v).cost));
        w[i] = Some(wj);
    }
    // Costs are sums of integer multiples; the slack only absorbs rounding.
    lp.add_row(budget, Sense::Le, z_star + 1e-7 * (1.0 + z_star.abs()));
    map.w = Some(w);
    Ok((integer_y(lp, &map), map))
}

/// Turns a solver incumbent into a plan. Flows are re-routed on the rounded
/// counts so the plan is exactly feasible; the solver's own flows are the
/// fallback.
fn extract_plan(inst: &Instance, map: &VariableIndexMap, values: &[f64]) -> Result<LoadPlan> {
    let y = map.counts(values);
    if let Some(plan) = plan_for_counts(inst, y.clone())? {
        return Ok(plan);
    }
    let mut flows = Vec::new();
    for e in &map.x {
        flows.push((e.commodity, e.sort_pair, values[e.column].max(0.0)));
    }
    let plan = LoadPlan::from_pair_flows(inst, y, &flows);
    plan.check(inst)?;
    Ok(plan)
}

#[derive(Debug, Clone)]
pub struct Model1Result {
    pub mip: MipResult,
    pub plan: LoadPlan,
}

pub fn solve_model1(inst: &Instance, limits: &StageLimits) -> Result<Model1Result> {
    let (mip, map) = build_model1(inst)?;
    let res = solve_mip(&mip, &limits.options())?;
    match res.status {
        MipStatus::Infeasible => return Err(Error::Infeasible { stage: "model 1" }),
        MipStatus::NoIncumbent => return Err(Error::NoIncumbent { stage: "model 1" }),
        MipStatus::Optimal | MipStatus::FeasibleTimeLimit => {}
    }
    let values = res.incumbent.as_ref().expect("status implies an incumbent");
    let plan = extract_plan(inst, &map, values)?;
    Ok(Model1Result { mip: res, plan })
}

#[derive(Debug, Clone)]
pub struct GdoResult {
    pub stage1: MipResult,
    /// Cost-minimal plan found by the first stage.
    pub stage1_plan: LoadPlan,
    pub stage2: MipResult,
    pub plan: LoadPlan,
    /// Trailer budget handed to the second stage.
    pub z_star: f64,
    /// Whether the first stage proved `z_star` optimal.
    pub z_star_proven: bool,
    pub epsilon: f64,
    pub hamming_distance: f64,
    pub diversion_total: f64,
    /// Moves accepted by [`polish_toward_reference`] after the second stage.
    pub polish_moves: usize,
}

/// Solves the first model, then the second with the first stage's best
/// plan cost as the budget. Both stages get the same limits.
pub fn solve_gdo(inst: &Instance, limits: &StageLimits) -> Result<GdoResult> {
    let gamma = inst.reference_grid().ok_or(Error::MissingReference)?;
    let stage1 = solve_model1(inst, limits)?;
    let z_star = stage1.plan.cost(inst);
    let epsilon = epsilon_weight(inst);
    let (mip2, map2) = build_model2_weighted(inst, z_star, epsilon)?;

    let mut warm = map2.columns_for(mip2.lp.num_vars(), &stage1.plan);
    for (i, col) in map2.w.as_ref().expect("second model has w").iter().enumerate() {
        if let Some(j) = col {
            warm[*j] = (stage1.plan.y[i] as f64 - gamma[i] as f64).abs();
        }
    }
    let mut opts = limits.options();
    opts.initial_incumbent = Some(warm);
    let stage2 = solve_mip(&mip2, &opts)?;
    let values = match (&stage2.status, &stage2.incumbent) {
        (MipStatus::Infeasible, _) => return Err(Error::Infeasible { stage: "model 2" }),
        (_, Some(v)) => v,
        (_, None) => return Err(Error::NoIncumbent { stage: "model 2" }),
    };
    let mut plan = extract_plan(inst, &map2, values)?;
    let mut polish_moves = 0;
    if stage2.status != MipStatus::Optimal {
        (plan, polish_moves) = polish_toward_reference(inst, &gamma, z_star, epsilon, plan)?;
    }
    debug_assert!(plan.cost(inst) <= z_star + 1e-6);
    Ok(GdoResult {
        z_star_proven: stage1.mip.status == MipStatus::Optimal,
        hamming_distance: plan.hamming_distance(&gamma),
        diversion_total: plan.diversion_total(inst),
        stage1: stage1.mip,
        stage1_plan: stage1.plan,
        stage2,
        plan,
        z_star,
        epsilon,
        polish_moves,
    })
}

fn model2_objective(inst: &Instance, gamma: &[u32], epsilon: f64, plan: &LoadPlan) -> f64 {
    plan.hamming_distance(gamma) + epsilon * plan.diversion_total(inst)
}

/// Local search on an unproven second-stage plan: moves one, two or three
/// trailer counts by one, at least as many of them toward `gamma` as away,
/// and keeps the first move that stays within the budget, still routes all
/// volume, and lowers the second model's objective. Repeats until no move
/// helps. Returns the plan and the number of accepted moves.
pub fn polish_toward_reference(
    inst: &Instance,
    gamma: &[u32],
    z_star: f64,
    epsilon: f64,
    plan: LoadPlan,
) -> Result<(LoadPlan, usize)> {
    let cells: Vec<usize> = inst.slots().into_iter().map(|(s, v)| inst.grid_index(s, v)).collect();
    let cost_of = |i: usize| inst.trailer(inst.grid_pair(i).1).cost;
    let budget = z_star + 1e-7 * (1.0 + z_star.abs());
    let total_volume = inst.total_volume();
    let (mut plan, mut best) = (plan.clone(), model2_objective(inst, gamma, epsilon, &plan));
    let mut accepted = 0;
    'search: loop {
        let y = plan.y.clone();
        let toward: Vec<(usize, i64)> = cells
            .iter()
            .filter(|&&i| y[i] != gamma[i])
            .map(|&i| (i, if y[i] < gamma[i] { 1 } else { -1 }))
            .collect();
        let away: Vec<(usize, i64)> = cells
            .iter()
            .flat_map(|&i| {
                let up = (y[i] >= gamma[i]).then_some((i, 1));
                let down = (y[i] <= gamma[i] && y[i] > 0).then_some((i, -1));
                up.into_iter().chain(down)
            })
            .collect();

        let mut moves: Vec<Vec<(usize, i64)>> = toward.iter().map(|&m| vec![m]).collect();
        for (a, &m) in toward.iter().enumerate() {
            for &n in &toward[a + 1..] {
                moves.push(vec![m, n]);
            }
        }
        for (a, &m) in toward.iter().enumerate() {
            for &n in &toward[a + 1..] {
                for &o in &away {
                    if o.0 != m.0 && o.0 != n.0 {
                        moves.push(vec![m, n, o]);
                    }
                }
            }
        }
        for mv in moves {
            let cost = plan.cost(inst) + mv.iter().map(|&(i, d)| d as f64 * cost_of(i)).sum::<f64>();
            if cost > budget {
                continue;
            }
            let mut next = y.clone();
            for &(i, d) in &mv {
                next[i] = (next[i] as i64 + d) as u32;
            }
            if crate::plan::capacity_by_pair(inst, &next).iter().sum::<f64>() < total_volume - 1e-9 {
                continue;
            }
            if let Some(candidate) = plan_for_counts(inst, next)? {
                let obj = model2_objective(inst, gamma, epsilon, &candidate);
                if obj < best - 1e-9 {
                    (plan, best) = (candidate, obj);
                    accepted += 1;
                    continue 'search;
                }
            }
        }
        return Ok((plan, accepted));
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::network::{ReferencePlan, ServiceClass};
    use dlpp_solver::solve_lp;

    #[test]
    fn t1_model1_shape() {
        let inst = fixtures::t1();
        let (mip, map) = build_model1(&inst).unwrap();
        assert_eq!(mip.num_integer_vars(), 2);
        assert_eq!(map.x.len(), 4);
        assert_eq!(mip.lp.num_vars(), 6);
        assert_eq!(mip.lp.num_rows(), 5);
    }

    #[test]
    fn minimal_model1_shape() {
        let inst = fixtures::InstanceBuilder::new()
            .trailer("t", 10.0, 10.0)
            .sort_pair("s", &["t"])
            .commodity("k", 5.0, ServiceClass::OneDay, "s", &[])
            .build()
            .unwrap();
        let (mip, map) = build_model1(&inst).unwrap();
        assert_eq!(mip.num_integer_vars(), 1);
        assert_eq!(map.x.len(), 1);
        assert_eq!(mip.lp.num_rows(), 2);
    }

    #[test]
    fn model_statistics_follow_counting_formula() {
        let inst = fixtures::three_pair_two_alternates();
        let (mip, map) = build_model1(&inst).unwrap();
        let nv = inst.num_trailer_types();
        let expected_x: usize = inst.commodities.iter().map(|c| c.compatible().count() * nv).sum();
        assert_eq!(mip.num_integer_vars(), inst.num_sort_pairs() * nv);
        assert_eq!(map.x.len(), expected_x);
    }

    #[test]
    fn t1_relaxation_is_total_volume() {
        let (mip, _) = build_model1(&fixtures::t1()).unwrap();
        let sol = solve_lp(&mip.lp).unwrap();
        assert!((sol.objective_value - 130.0).abs() < 1e-6);
    }

    #[test]
    fn t1_model1_optimum() {
        let inst = fixtures::t1();
        let res = solve_model1(&inst, &StageLimits::unlimited()).unwrap();
        assert_eq!(res.mip.status, MipStatus::Optimal);
        assert!((res.mip.objective - 150.0).abs() < 1e-6);
        assert_eq!(res.plan.y, vec![2, 1]);
        res.plan.check(&inst).unwrap();
    }

    #[test]
    fn t1_gdo() {
        let inst = fixtures::t1_with_reference();
        let res = solve_gdo(&inst, &StageLimits::unlimited()).unwrap();
        assert_eq!(res.z_star, 150.0);
        assert!(res.z_star_proven);
        assert_eq!(res.plan.y, vec![2, 1]);
        assert_eq!(res.hamming_distance, 1.0);
        assert!(res.plan.cost(&inst) <= res.z_star);
    }

    #[test]
    fn reachable_reference_gives_zero_distance() {
        let mut inst = fixtures::t1();
        inst.reference_plan = Some(ReferencePlan {
            gamma: [((SortPairId(0), TrailerTypeId(0)), 2), ((SortPairId(1), TrailerTypeId(0)), 1)]
                .into_iter()
                .collect(),
        });
        let res = solve_gdo(&inst, &StageLimits::unlimited()).unwrap();
        assert_eq!(res.hamming_distance, 0.0);
        let w = res.stage2.incumbent.as_ref().unwrap();
        let (_, map) = build_model2(&inst, res.z_star).unwrap();
        for j in map.w.unwrap().into_iter().flatten() {
            assert!(w[j].abs() < 1e-9);
        }
    }

    #[test]
    fn missing_reference() {
        assert!(matches!(build_model2(&fixtures::t1(), 150.0), Err(Error::MissingReference)));
        assert!(matches!(
            solve_gdo(&fixtures::t1(), &StageLimits::unlimited()),
            Err(Error::MissingReference)
        ));
    }

    /// Two symmetric alternates with spare room: with a diversion weight the
    /// commodity stays on its primary.
    #[test]
    fn diversion_weight_breaks_flow_ties() {
        let inst = fixtures::InstanceBuilder::new()
            .trailer("t", 50.0, 50.0)
            .sort_pair("p", &["t"])
            .sort_pair("a", &["t"])
            .sort_pair("b", &["t"])
            .commodity("k", 10.0, ServiceClass::OneDay, "p", &[("a", 5.0), ("b", 5.0)])
            .commodity("ka", 20.0, ServiceClass::OneDay, "a", &[])
            .commodity("kb", 20.0, ServiceClass::OneDay, "b", &[])
            .commodity("kp", 20.0, ServiceClass::OneDay, "p", &[])
            .reference(&[("p", "t", 1), ("a", "t", 1), ("b", "t", 1)])
            .build()
            .unwrap();
        let (mip, map) = build_model2(&inst, 150.0).unwrap();
        let res = solve_mip(&mip, &MipOptions::default()).unwrap();
        let x = res.incumbent.unwrap();
        let primary = map.x_col(CommodityId(0), SortPairId(0), TrailerTypeId(0)).unwrap();
        assert!((x[primary] - 10.0).abs() < 1e-6);

        // Without the weight, the model is indifferent between the routes.
        let (mip0, map0) = build_model2_weighted(&inst, 150.0, 0.0).unwrap();
        let res0 = solve_mip(&mip0, &MipOptions::default()).unwrap();
        assert_eq!(res0.objective, 0.0);
        let mut moved = res0.incumbent.unwrap();
        let a = map0.x_col(CommodityId(0), SortPairId(1), TrailerTypeId(0)).unwrap();
        let p = map0.x_col(CommodityId(0), SortPairId(0), TrailerTypeId(0)).unwrap();
        let shift = moved[p];
        moved[p] -= shift;
        moved[a] += shift;
        assert!(mip0.is_feasible(&moved));
        assert_eq!(mip0.lp.objective_value(&moved), 0.0);
    }

    #[test]
    fn budget_follows_stage_one_incumbent() {
        let inst = fixtures::t1_with_reference();
        let (mip, map) = build_model2(&inst, 200.0).unwrap();
        let res = solve_mip(&mip, &MipOptions::default()).unwrap();
        // γ = (2, 2) costs exactly 200, so it becomes reachable.
        assert_eq!(map.counts(res.incumbent.as_ref().unwrap()), vec![2, 2]);
        assert!(res.objective < 1e-3);
    }

    #[test]
    fn single_feasible_plan() {
        let inst = fixtures::InstanceBuilder::new()
            .trailer("t", 10.0, 10.0)
            .sort_pair("s", &["t"])
            .commodity("k", 25.0, ServiceClass::OneDay, "s", &[])
            .reference(&[("s", "t", 1)])
            .build()
            .unwrap();
        let res = solve_gdo(&inst, &StageLimits::unlimited()).unwrap();
        assert_eq!(res.plan.y, vec![3]);
        assert_eq!(res.hamming_distance, 2.0);
    }
}
