//! Reference solvers that do not go through the LP/MIP machinery: closed
//! forms for the easy special cases, a min-knapsack DP, an exhaustive set
//! cover, and a brute-force enumerator for tiny instances. Feasibility of a
//! candidate capacity vector is decided by max-flow, not by LP.

use std::collections::VecDeque;

use crate::error::{Error, Result};
use crate::network::{CommodityId, Instance, SortPairId, TrailerType};
use crate::plan::LoadPlan;

/// Enumeration budget for [`brute_force_dlpp`].
pub const ENUMERATION_BUDGET: u128 = 1_000_000;

fn single_trailer_type(inst: &Instance) -> Result<()> {
    if inst.sort_pairs.iter().any(|s| s.allowed_trailers.len() != 1)
        || inst.sort_pairs.windows(2).any(|w| w[0].allowed_trailers != w[1].allowed_trailers)
    {
        return Err(Error::PreconditionViolated("every sort pair must allow the same single trailer type".into()));
    }
    Ok(())
}

fn ceil_div(volume: f64, capacity: f64) -> u32 {
    (volume / capacity - 1e-9).ceil().max(0.0) as u32
}

/// One trailer type and a single compatible sort pair per commodity:
/// `y_s = ceil(Σ q / Q)`.
pub fn case1_solve(inst: &Instance) -> Result<LoadPlan> {
    single_trailer_type(inst)?;
    if inst.commodities.iter().any(|c| !c.alternates.is_empty()) {
        return Err(Error::PreconditionViolated("commodities must have a single compatible sort pair".into()));
    }
    let mut load = vec![0.0; inst.num_sort_pairs()];
    let mut flows = Vec::new();
    for k in inst.commodity_ids() {
        let c = inst.commodity(k);
        load[c.primary.0] += c.volume;
        flows.push((k, c.primary, c.volume));
    }
    let mut y = vec![0; inst.grid_len()];
    for s in inst.sort_pair_ids() {
        let v = inst.sort_pair(s).allowed_trailers[0];
        y[inst.grid_index(s, v)] = ceil_div(load[s.0], inst.trailer(v).capacity);
    }
    Ok(LoadPlan::from_pair_flows(inst, y, &flows))
}

/// One trailer type and every commodity compatible with every sort pair:
/// everything rides on the lowest-id sort pair.
pub fn case2_solve(inst: &Instance) -> Result<LoadPlan> {
    single_trailer_type(inst)?;
    let ns = inst.num_sort_pairs();
    if inst.commodities.iter().any(|c| c.compatible().count() != ns) {
        return Err(Error::PreconditionViolated("commodities must be compatible with every sort pair".into()));
    }
    let mut y = vec![0; inst.grid_len()];
    if ns == 0 {
        return Ok(LoadPlan::from_pair_flows(inst, y, &[]));
    }
    let s = SortPairId(0);
    let v = inst.sort_pair(s).allowed_trailers[0];
    y[inst.grid_index(s, v)] = ceil_div(inst.total_volume(), inst.trailer(v).capacity);
    let flows: Vec<_> = inst.commodity_ids().map(|k| (k, s, inst.commodity(k).volume)).collect();
    Ok(LoadPlan::from_pair_flows(inst, y, &flows))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Knapsack {
    /// Count per input trailer type.
    pub counts: Vec<u32>,
    pub cost: f64,
}

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Cheapest trailer mix with total capacity at least `volume`.
///
/// Integral capacities are solved exactly on a grid of their gcd; otherwise
/// capacities are scaled by 1000 and rounded down, which can only make the
/// answer more conservative by less than 0.001 per trailer.
pub fn min_knapsack(volume: f64, types: &[TrailerType]) -> Knapsack {
    assert!(!types.is_empty(), "min_knapsack needs at least one trailer type");
    if volume <= 0.0 {
        return Knapsack { counts: vec![0; types.len()], cost: 0.0 };
    }
    let integral = types.iter().all(|t| t.capacity.fract() == 0.0);
    let scale = if integral { 1.0 } else { 1000.0 };
    let caps: Vec<u64> = types.iter().map(|t| ((t.capacity * scale).floor() as u64).max(1)).collect();
    let g = caps.iter().copied().fold(0, gcd);
    let units: Vec<usize> = caps.iter().map(|&c| (c / g) as usize).collect();
    let target = ((volume * scale / g as f64) - 1e-9).ceil().max(0.0) as usize;

    // best[c]: cheapest mix covering at least c grid units.
    let mut best = vec![f64::INFINITY; target + 1];
    let mut choice = vec![usize::MAX; target + 1];
    best[0] = 0.0;
    for c in 1..=target {
        for (v, &u) in units.iter().enumerate() {
            let cand = types[v].cost + best[c.saturating_sub(u)];
            if cand < best[c] - 1e-12 {
                best[c] = cand;
                choice[c] = v;
            }
        }
    }
    let mut counts = vec![0; types.len()];
    let mut c = target;
    while c > 0 {
        let v = choice[c];
        counts[v] += 1;
        c = c.saturating_sub(units[v]);
    }
    Knapsack { counts, cost: best[target] }
}

/// Single compatible sort pair per commodity, several trailer types: a
/// min-knapsack per sort pair.
pub fn case3_solve(inst: &Instance) -> Result<LoadPlan> {
    if inst.commodities.iter().any(|c| !c.alternates.is_empty()) {
        return Err(Error::PreconditionViolated("commodities must have a single compatible sort pair".into()));
    }
    let mut load = vec![0.0; inst.num_sort_pairs()];
    let mut flows = Vec::new();
    for k in inst.commodity_ids() {
        let c = inst.commodity(k);
        load[c.primary.0] += c.volume;
        flows.push((k, c.primary, c.volume));
    }
    let mut y = vec![0; inst.grid_len()];
    for s in inst.sort_pair_ids() {
        knapsack_onto(inst, s, load[s.0], &mut y);
    }
    Ok(LoadPlan::from_pair_flows(inst, y, &flows))
}

fn knapsack_onto(inst: &Instance, s: SortPairId, volume: f64, y: &mut [u32]) -> f64 {
    let allowed = &inst.sort_pair(s).allowed_trailers;
    let types: Vec<TrailerType> = allowed.iter().map(|&v| inst.trailer(v).clone()).collect();
    let ks = min_knapsack(volume, &types);
    for (&v, &n) in allowed.iter().zip(&ks.counts) {
        y[inst.grid_index(s, v)] = n;
    }
    ks.cost
}

/// Every commodity compatible with every sort pair, several trailer types:
/// all volume on the sort pair whose best trailer mix is cheapest.
pub fn case4_solve(inst: &Instance) -> Result<LoadPlan> {
    let ns = inst.num_sort_pairs();
    if inst.commodities.iter().any(|c| c.compatible().count() != ns) {
        return Err(Error::PreconditionViolated("commodities must be compatible with every sort pair".into()));
    }
    // With different trailer menus per pair, splitting volume can beat any
    // single pair.
    let mut menus = inst.sort_pairs.iter().map(|sp| {
        let mut m = sp.allowed_trailers.clone();
        m.sort();
        m
    });
    if let Some(first) = menus.next() {
        if menus.any(|m| m != first) {
            return Err(Error::PreconditionViolated("every sort pair must allow the same trailer types".into()));
        }
    }
    let total = inst.total_volume();
    let mut best: Option<(f64, Vec<u32>, SortPairId)> = None;
    for s in inst.sort_pair_ids() {
        let mut y = vec![0; inst.grid_len()];
        let cost = knapsack_onto(inst, s, total, &mut y);
        if best.as_ref().is_none_or(|b| cost < b.0 - 1e-9) {
            best = Some((cost, y, s));
        }
    }
    let Some((_, y, s)) = best else {
        return Ok(LoadPlan::from_pair_flows(inst, vec![0; inst.grid_len()], &[]));
    };
    let flows: Vec<_> = inst.commodity_ids().map(|k| (k, s, inst.commodity(k).volume)).collect();
    Ok(LoadPlan::from_pair_flows(inst, y, &flows))
}

/// Minimum number of sets whose union covers `0..universe`, by subset
/// enumeration in order of size. Ties go to the lexicographically smallest
/// index set.
pub fn min_set_cover(universe: usize, sets: &[Vec<usize>]) -> Result<Option<Vec<usize>>> {
    if sets.len() > 20 {
        return Err(Error::TooLarge(format!("{} sets (limit 20)", sets.len())));
    }
    let full: u64 = if universe == 64 { u64::MAX } else { (1u64 << universe) - 1 };
    let masks: Vec<u64> = sets.iter().map(|s| s.iter().fold(0u64, |m, &e| m | (1 << e))).collect();
    let n = sets.len();
    for size in 0..=n {
        let mut best: Option<u32> = None;
        for subset in 0u32..(1u32 << n) {
            if subset.count_ones() as usize != size {
                continue;
            }
            let covered = (0..n).filter(|&i| subset & (1 << i) != 0).fold(0u64, |m, i| m | masks[i]);
            if covered & full == full {
                // Lexicographic order on index lists = smallest lowest bit
                // pattern read from bit 0 upward.
                if best.is_none_or(|b| subset.reverse_bits() > b.reverse_bits()) {
                    best = Some(subset);
                }
            }
        }
        if let Some(b) = best {
            return Ok(Some((0..n).filter(|&i| b & (1 << i) != 0).collect()));
        }
    }
    Ok(None)
}

/// Unit volumes, unit costs and a trailer large enough for everything a
/// sort pair could receive: the optimal plan is a minimum set cover.
pub fn case5_set_cover(inst: &Instance) -> Result<Vec<SortPairId>> {
    single_trailer_type(inst)?;
    let v = inst.sort_pairs.first().map(|s| s.allowed_trailers[0]);
    let max_degree = inst
        .sort_pair_ids()
        .map(|s| inst.commodities.iter().filter(|c| c.is_compatible(s)).count())
        .max()
        .unwrap_or(0);
    let ok = inst.commodities.iter().all(|c| c.volume == 1.0)
        && v.is_none_or(|v| inst.trailer(v).cost == 1.0 && inst.trailer(v).capacity >= max_degree as f64);
    if !ok {
        return Err(Error::PreconditionViolated(
            "unit volumes, unit cost and capacity covering every sort pair's reachable volume".into(),
        ));
    }
    let sets: Vec<Vec<usize>> = inst
        .sort_pair_ids()
        .map(|s| (0..inst.num_commodities()).filter(|&k| inst.commodities[k].is_compatible(s)).collect())
        .collect();
    let cover = min_set_cover(inst.num_commodities(), &sets)?.expect("every commodity has a compatible pair");
    Ok(cover.into_iter().map(SortPairId).collect())
}

/// Max-flow from commodities to sort pairs with capacities `lambda`. Returns
/// the routed `(k, s, volume)` triples and the total flow.
pub fn max_flow_routing(inst: &Instance, lambda: &[f64]) -> (Vec<(CommodityId, SortPairId, f64)>, f64) {
    let nk = inst.num_commodities();
    let ns = inst.num_sort_pairs();
    // Nodes: source, commodities, sort pairs, sink.
    let n = nk + ns + 2;
    let (src, sink) = (0, n - 1);
    let mut cap = vec![vec![0.0f64; n]; n];
    for (k, c) in inst.commodities.iter().enumerate() {
        cap[src][1 + k] = c.volume;
        for s in c.compatible() {
            cap[1 + k][1 + nk + s.0] = f64::INFINITY;
        }
    }
    for s in 0..ns {
        cap[1 + nk + s][sink] = lambda[s];
    }
    let orig = cap.clone();
    let mut total = 0.0;
    loop {
        let mut prev = vec![usize::MAX; n];
        prev[src] = src;
        let mut queue = VecDeque::from([src]);
        while let Some(u) = queue.pop_front() {
            for v in 0..n {
                if prev[v] == usize::MAX && cap[u][v] > 1e-12 {
                    prev[v] = u;
                    queue.push_back(v);
                }
            }
        }
        if prev[sink] == usize::MAX {
            break;
        }
        let mut push = f64::INFINITY;
        let mut v = sink;
        while v != src {
            push = push.min(cap[prev[v]][v]);
            v = prev[v];
        }
        let mut v = sink;
        while v != src {
            let u = prev[v];
            cap[u][v] -= push;
            cap[v][u] += push;
            v = u;
        }
        total += push;
    }
    let mut flows = Vec::new();
    for k in 0..nk {
        for s in 0..ns {
            if orig[1 + k][1 + nk + s] > 0.0 {
                // Flow on an infinite arc is what came back along its reverse.
                let f = cap[1 + nk + s][1 + k];
                if f > 1e-12 {
                    flows.push((CommodityId(k), SortPairId(s), f));
                }
            }
        }
    }
    (flows, total)
}

#[derive(Debug, Clone)]
pub struct BruteForce {
    pub cost: f64,
    pub plan: LoadPlan,
    /// Every cost-optimal trailer-count grid, in enumeration order.
    pub optimal_set: Vec<Vec<u32>>,
    pub candidates: u128,
}

/// Exhaustive search over trailer counts up to `min(ub, y_bound_cap)` per
/// compatible cell.
pub fn brute_force_dlpp(inst: &Instance, y_bound_cap: u32) -> Result<BruteForce> {
    let slots = inst.slots();
    let bounds: Vec<u32> = slots.iter().map(|&(s, v)| inst.trailer_upper_bound(s, v).min(y_bound_cap)).collect();
    let candidates: u128 = bounds.iter().map(|&b| b as u128 + 1).product();
    if candidates > ENUMERATION_BUDGET {
        return Err(Error::BudgetExceeded(candidates));
    }
    let total = inst.total_volume();
    let mut y = vec![0u32; inst.grid_len()];
    let mut counter = vec![0u32; slots.len()];
    let mut best = f64::INFINITY;
    let mut optimal_set: Vec<Vec<u32>> = Vec::new();
    loop {
        for (i, &(s, v)) in slots.iter().enumerate() {
            y[inst.grid_index(s, v)] = counter[i];
        }
        let cost: f64 = slots.iter().zip(&counter).map(|(&(_, v), &n)| inst.trailer(v).cost * n as f64).sum();
        if cost <= best + 1e-9 {
            let lambda = crate::plan::capacity_by_pair(inst, &y);
            let (_, routed) = max_flow_routing(inst, &lambda);
            if routed >= total - 1e-9 * (1.0 + total) {
                if cost < best - 1e-9 {
                    best = cost;
                    optimal_set.clear();
                }
                optimal_set.push(y.clone());
            }
        }
        let mut i = 0;
        while i < counter.len() {
            counter[i] += 1;
            if counter[i] <= bounds[i] {
                break;
            }
            counter[i] = 0;
            i += 1;
        }
        if i == counter.len() {
            break;
        }
    }
    let witness = optimal_set.first().cloned().ok_or(Error::Infeasible { stage: "brute force" })?;
    let lambda = crate::plan::capacity_by_pair(inst, &witness);
    let (flows, _) = max_flow_routing(inst, &lambda);
    let plan = LoadPlan::from_pair_flows(inst, witness, &flows);
    Ok(BruteForce { cost: best, plan, optimal_set, candidates })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::{self, InstanceBuilder};
    use crate::network::{restrict_scenario, Scenario, ServiceClass::OneDay};

    fn tt(q: f64, c: f64) -> TrailerType {
        TrailerType { name: String::new(), capacity: q, cost: c }
    }

    #[test]
    fn case1_formula() {
        let inst = InstanceBuilder::new()
            .trailer("t", 50.0, 50.0)
            .sort_pair("s", &["t"])
            .commodity("a", 30.0, OneDay, "s", &[])
            .commodity("b", 80.0, OneDay, "s", &[])
            .build()
            .unwrap();
        let plan = case1_solve(&inst).unwrap();
        assert_eq!(plan.y, vec![3]);
        plan.check(&inst).unwrap();

        let empty = InstanceBuilder::new().trailer("t", 50.0, 50.0).sort_pair("s", &["t"]).build().unwrap();
        assert_eq!(case1_solve(&empty).unwrap().y, vec![0]);
        assert!(matches!(case1_solve(&fixtures::t1()), Err(Error::PreconditionViolated(_))));
    }

    #[test]
    fn case2_puts_everything_on_one_pair() {
        let inst = InstanceBuilder::new()
            .trailer("t", 50.0, 50.0)
            .sort_pair("s1", &["t"])
            .sort_pair("s2", &["t"])
            .commodity("a", 30.0, OneDay, "s2", &[("s1", 1.0)])
            .commodity("b", 40.0, OneDay, "s1", &[("s2", 1.0)])
            .build()
            .unwrap();
        let plan = case2_solve(&inst).unwrap();
        assert_eq!(plan.y, vec![2, 0]);
        plan.check(&inst).unwrap();
        let zero = inst.with_volumes(&[0.0, 0.0]).unwrap();
        assert_eq!(case2_solve(&zero).unwrap().trailer_count(), 0);
    }

    #[test]
    fn knapsack_examples() {
        let types = [tt(50.0, 50.0), tt(20.0, 25.0)];
        assert_eq!(min_knapsack(0.0, &types), Knapsack { counts: vec![0, 0], cost: 0.0 });
        let ks = min_knapsack(110.0, &types);
        assert_eq!(ks.counts, vec![2, 1]);
        assert_eq!(ks.cost, 125.0);
        assert_eq!(min_knapsack(101.0, &[tt(50.0, 7.0)]).counts, vec![3]);

        // Exhaustive check up to six trailers.
        let mut best = f64::INFINITY;
        for a in 0..=6 {
            for b in 0..=6 - a {
                if 50.0 * a as f64 + 20.0 * b as f64 >= 110.0 {
                    best = best.min(50.0 * a as f64 + 25.0 * b as f64);
                }
            }
        }
        assert_eq!(best, 125.0);
    }

    #[test]
    fn knapsack_fractional_capacities() {
        let ks = min_knapsack(10.0, &[tt(2.5, 3.0), tt(3.3, 4.0)]);
        let cap = 2.5 * ks.counts[0] as f64 + 3.3 * ks.counts[1] as f64;
        assert!(cap >= 10.0);
        assert_eq!(ks.cost, 12.0);
    }

    #[test]
    fn set_cover_examples() {
        let sets = vec![vec![0, 1], vec![1, 2], vec![2]];
        assert_eq!(min_set_cover(3, &sets).unwrap(), Some(vec![0, 1]));
        let unique = vec![vec![0], vec![1], vec![2]];
        assert_eq!(min_set_cover(3, &unique).unwrap().unwrap().len(), 3);
        let many = vec![vec![0]; 21];
        assert!(matches!(min_set_cover(1, &many), Err(Error::TooLarge(_))));
    }

    #[test]
    fn brute_force_t1() {
        let bf = brute_force_dlpp(&fixtures::t1(), 10).unwrap();
        assert_eq!(bf.cost, 150.0);
        assert_eq!(bf.optimal_set, vec![vec![2, 1]]);
        bf.plan.check(&fixtures::t1()).unwrap();
    }

    #[test]
    fn brute_force_single() {
        let inst = InstanceBuilder::new()
            .trailer("t", 7.0, 7.0)
            .sort_pair("s", &["t"])
            .commodity("k", 20.0, OneDay, "s", &[])
            .build()
            .unwrap();
        assert_eq!(brute_force_dlpp(&inst, 10).unwrap().plan.y, vec![3]);
    }

    #[test]
    fn splitting_saves_a_trailer() {
        let inst = fixtures::splitting_example();
        let all = brute_force_dlpp(&inst, 5).unwrap();
        let primary = brute_force_dlpp(&restrict_scenario(&inst, Scenario::PrimaryOnly), 5).unwrap();
        assert_eq!(primary.plan.trailer_count(), 3);
        assert_eq!(all.plan.trailer_count(), 2);
        assert_eq!(primary.cost - all.cost, 5.0);
    }

    #[test]
    fn budget() {
        let inst = fixtures::t1().with_volumes(&[1e6, 1e6, 1e6]).unwrap();
        assert!(matches!(brute_force_dlpp(&inst, u32::MAX), Err(Error::BudgetExceeded(_))));
    }
}
