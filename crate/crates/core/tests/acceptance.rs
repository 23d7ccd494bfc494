//! Acceptance suite: one PASS/FAIL line per criterion, then a nonzero exit
//! if any failed. Runs as a plain binary so every line is printed.

mod common;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::Instant;

use dlpp_core::datagen::{self, Split, SweepSpec};
use dlpp_core::fixtures;
use dlpp_core::metrics::{
    self, normalized_distance, optimality_gap, shifted_geomean, total_variation, DistanceDomain, GAP_SHIFT,
    TIME_SHIFT,
};
use dlpp_core::oracles;
use dlpp_core::proxy::mlp::{smooth_l1, Mlp};
use dlpp_core::proxy::{grid_search, proxy_solve, GridSpec, ProxyModel, TrainingConfig};
use dlpp_core::restoration::{restore, restore_with_profile, violation_profile_from_z, PredictedPlan};
use dlpp_core::{
    greedy, restrict_scenario, solve_gdo, solve_model1, Instance, Scenario, StageLimits,
};
use dlpp_solver::MipStatus;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

struct Suite {
    results: Vec<(bool, String)>,
}

impl Suite {
    fn run(&mut self, name: &str, f: impl FnOnce() -> Outcome) {
        let started = Instant::now();
        let res = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panic".into());
            Err(format!("panicked: {msg}"))
        });
        let secs = started.elapsed().as_secs_f64();
        let (ok, detail) = match res {
            Ok(d) => (true, d),
            Err(d) => (false, d),
        };
        println!("[{}] {name} ({secs:.1}s): {detail}", if ok { "PASS" } else { "FAIL" });
        self.results.push((ok, name.to_string()));
    }
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn proven_cost(inst: &Instance) -> Result<f64, String> {
    let r = solve_model1(inst, &StageLimits::unlimited()).map_err(|e| e.to_string())?;
    ensure(r.mip.status == MipStatus::Optimal, || format!("MIP not proven: {:?}", r.mip.status))?;
    Ok(r.plan.cost(inst))
}

fn oracle_equivalence() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst: f64 = 0.0;
    let cases: [(&str, fn(&mut ChaCha8Rng) -> Instance); 5] = [
        ("case 1", common::case1),
        ("case 2", common::case2),
        ("case 3", common::case3),
        ("case 4", common::case4),
        ("case 5", common::case5),
    ];
    for (name, gen) in cases {
        for i in 0..100 {
            let inst = gen(&mut rng);
            let oracle = match name {
                "case 1" => oracles::case1_solve(&inst).map(|p| p.cost(&inst)),
                "case 2" => oracles::case2_solve(&inst).map(|p| p.cost(&inst)),
                "case 3" => oracles::case3_solve(&inst).map(|p| p.cost(&inst)),
                "case 4" => oracles::case4_solve(&inst).map(|p| p.cost(&inst)),
                _ => oracles::case5_set_cover(&inst).map(|c| c.len() as f64),
            }
            .map_err(|e| format!("{name} #{i}: oracle: {e}"))?;
            let mip = proven_cost(&inst).map_err(|e| format!("{name} #{i}: {e}"))?;
            let diff = (mip - oracle).abs();
            worst = worst.max(diff);
            ensure(diff <= 1e-6, || format!("{name} #{i}: MIP {mip} vs oracle {oracle}"))?;
        }
    }
    Ok(format!("500 instances (100 per case), max |MIP − oracle| = {worst:e}"))
}

fn brute_force_equivalence() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let mut enumerated = 0u128;
    for i in 0..50 {
        let inst = common::small_dlpp(&mut rng);
        let bf = oracles::brute_force_dlpp(&inst, 12).map_err(|e| format!("#{i}: {e}"))?;
        enumerated += bf.candidates;
        let mip = proven_cost(&inst).map_err(|e| format!("#{i}: {e}"))?;
        ensure((mip - bf.cost).abs() <= 1e-6, || format!("#{i}: MIP {mip} vs brute force {}", bf.cost))?;

        let gdo = solve_gdo(&inst, &StageLimits::unlimited()).map_err(|e| format!("#{i}: {e}"))?;
        ensure(gdo.stage2.status == MipStatus::Optimal, || format!("#{i}: GDO stage 2 not proven"))?;
        let gamma = inst.reference_grid().unwrap();
        ensure(bf.optimal_set.contains(&gdo.plan.y), || format!("#{i}: GDO y {:?} not cost-optimal", gdo.plan.y))?;
        let l1 = |y: &[u32]| y.iter().zip(&gamma).map(|(a, b)| (*a as f64 - *b as f64).abs()).sum::<f64>();
        let best = bf.optimal_set.iter().map(|y| l1(y)).fold(f64::INFINITY, f64::min);
        ensure(l1(&gdo.plan.y) == best, || format!("#{i}: GDO distance {} vs minimum {best}", l1(&gdo.plan.y)))?;
    }
    Ok(format!("50 instances, {enumerated} candidate plans enumerated; costs and GDO distances match"))
}

fn fixture_t1() -> Outcome {
    let inst = fixtures::t1_with_reference();
    let m1 = solve_model1(&inst, &StageLimits::unlimited()).map_err(|e| e.to_string())?;
    ensure(m1.mip.status == MipStatus::Optimal && m1.plan.cost(&inst) == 150.0, || {
        format!("Model 1 {:?} cost {}", m1.mip.status, m1.plan.cost(&inst))
    })?;
    let gdo = solve_gdo(&inst, &StageLimits::unlimited()).map_err(|e| e.to_string())?;
    ensure(gdo.plan.y == vec![2, 1] && gdo.hamming_distance == 1.0, || {
        format!("GDO y {:?}, distance {}", gdo.plan.y, gdo.hamming_distance)
    })?;
    let g = greedy::greedy_solve(&inst, greedy::iteration_bound(&inst)).map_err(|e| e.to_string())?;
    g.plan.check(&inst).map_err(|e| format!("greedy infeasible: {e}"))?;
    ensure(g.plan.cost(&inst) >= 150.0, || format!("greedy cost {}", g.plan.cost(&inst)))?;
    Ok(format!("Model 1 = 150, GDO y = [2, 1] at distance 1, greedy = {} (feasible)", g.plan.cost(&inst)))
}

fn splitting_value() -> Outcome {
    let inst = fixtures::splitting_example();
    let primary = restrict_scenario(&inst, Scenario::PrimaryOnly);
    let (all_mip, prim_mip) = (proven_cost(&inst)?, proven_cost(&primary)?);
    let all_bf = oracles::brute_force_dlpp(&inst, 20).map_err(|e| e.to_string())?.cost;
    let prim_bf = oracles::brute_force_dlpp(&primary, 20).map_err(|e| e.to_string())?.cost;
    ensure(all_mip < prim_mip, || format!("all-alt {all_mip} not below primary-only {prim_mip}"))?;
    ensure(prim_mip - all_mip == prim_bf - all_bf, || {
        format!("MIP savings {} vs brute-force savings {}", prim_mip - all_mip, prim_bf - all_bf)
    })?;
    Ok(format!("primary-only {prim_mip} → all-alt {all_mip}; savings {} equal brute force", prim_mip - all_mip))
}

fn restoration_guarantees() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5150);
    let mut pool: Vec<(Instance, f64)> = Vec::new();
    for inst in [fixtures::t1(), fixtures::splitting_example(), fixtures::three_pair_two_alternates(), fixtures::two_pair_shortfall()] {
        let z = proven_cost(&inst)?;
        pool.push((inst, z));
    }
    while pool.len() < 40 {
        let inst = common::small_dlpp(&mut rng);
        let z = proven_cost(&inst)?;
        pool.push((inst, z));
    }
    let mut added = 0u64;
    for i in 0..1000 {
        let (inst, z_star) = &pool[i % pool.len()];
        let y_hat: Vec<u32> = if i < pool.len() {
            vec![0; inst.grid_len()]
        } else {
            (0..inst.grid_len()).map(|_| rng.random_range(0..=4)).collect()
        };
        let pred = PredictedPlan::new(inst, y_hat).map_err(|e| e.to_string())?;
        let r = restore(inst, &pred).map_err(|e| format!("#{i}: {e}"))?;
        r.plan.check(inst).map_err(|e| format!("#{i}: restored plan infeasible: {e}"))?;
        let cost = r.plan.cost(inst);
        ensure(cost >= z_star - 1e-6, || format!("#{i}: restored cost {cost} below optimum {z_star}"))?;
        added += r.report.added.iter().map(|a| a.count as u64).sum::<u64>();
    }
    let inst = fixtures::two_pair_shortfall();
    let pred = PredictedPlan::new(&inst, vec![1, 1]).map_err(|e| e.to_string())?;
    let r = restore_with_profile(&inst, &pred, &violation_profile_from_z(&inst, vec![1.0, 1.0]))
        .map_err(|e| e.to_string())?;
    let n: u32 = r.report.added.iter().map(|a| a.count).sum();
    ensure(n == 1, || format!("two-pair example added {n} trailers"))?;
    r.plan.check(&inst).map_err(|e| e.to_string())?;
    Ok(format!("1000 predictions over {} instances feasible and ≥ optimum ({added} trailers added); two-pair example adds 1", pool.len()))
}

fn scenario_costs(inst: &Instance) -> Result<[f64; 3], String> {
    let mut out = [0.0; 3];
    for (i, sc) in [Scenario::PrimaryOnly, Scenario::OneAlt, Scenario::AllAlt].into_iter().enumerate() {
        out[i] = proven_cost(&restrict_scenario(inst, sc))?;
    }
    Ok(out)
}

fn scenario_monotonicity() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(31337);
    let mut insts = vec![fixtures::t1(), fixtures::splitting_example(), fixtures::three_pair_two_alternates(), fixtures::two_pair_shortfall()];
    for _ in 0..100 {
        insts.push(common::small_dlpp(&mut rng));
    }
    let mut strict = 0;
    for (i, inst) in insts.iter().enumerate() {
        let [p, o, a] = scenario_costs(inst).map_err(|e| format!("#{i}: {e}"))?;
        ensure(p >= o && o >= a, || format!("#{i}: primary-only {p}, one-alt {o}, all-alt {a}"))?;
        if p > a {
            strict += 1;
        }
    }
    Ok(format!("{} instances with proven optima; {strict} strictly cheaper with alternates", insts.len()))
}

struct PipelineOutput {
    reference: Instance,
    model: ProxyModel,
}

fn proxy_pipeline(out: &mut Option<PipelineOutput>) -> Outcome {
    let reference = datagen::synthetic_terminal(0);
    let t0 = Instant::now();
    let ds = datagen::generate_dataset(&reference, 500, 11, &StageLimits::nodes(300), 1).map_err(|e| e.to_string())?;
    let gen_secs = t0.elapsed().as_secs_f64();
    let train_set = ds.samples(Split::Train, false);
    let val_set = ds.samples(Split::Validation, false);
    let t1 = Instant::now();
    let base = TrainingConfig { epochs: 100, seed: 7, ..TrainingConfig::default() };
    let grid = grid_search(&reference, &train_set, &val_set, &base, &GridSpec::default()).map_err(|e| e.to_string())?;
    let train_secs = t1.elapsed().as_secs_f64();
    let model = grid.best.model;

    let (mut gaps, mut shares, mut ptimes, mut gtimes) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    for it in ds.split(Split::Test, false) {
        let sol = proxy_solve(&model, &it.instance).map_err(|e| e.to_string())?;
        sol.plan.check(&it.instance).map_err(|e| e.to_string())?;
        gaps.push(optimality_gap(sol.plan.cost(&it.instance), it.label_cost).max(0.0));
        shares.push(sol.predicted_capacity_share(&it.instance));
        ptimes.push(sol.total_time().as_secs_f64());
        gtimes.push(it.gdo_time.as_secs_f64());
    }
    let gap = shifted_geomean(&gaps, GAP_SHIFT).map_err(|e| e.to_string())?;
    let share = shifted_geomean(&shares, GAP_SHIFT).map_err(|e| e.to_string())?;
    let (pt, gt) = (
        shifted_geomean(&ptimes, TIME_SHIFT).map_err(|e| e.to_string())?,
        shifted_geomean(&gtimes, TIME_SHIFT).map_err(|e| e.to_string())?,
    );
    let total = t0.elapsed().as_secs_f64();
    let c = &model.config;
    let detail = format!(
        "{} test instances: gap {:.2}%, predicted share {:.1}%, proxy {:.4}s vs GDO {:.4}s (shifted geomeans); \
         labels {:.0}s ({} unproven, {} failed), grid {:.0}s picked lr={} layers={} hidden={}; total {:.0}s",
        gaps.len(),
        100.0 * gap,
        100.0 * share,
        pt,
        gt,
        gen_secs,
        ds.num_unproven(),
        ds.num_failed(),
        train_secs,
        c.learning_rate,
        c.layers,
        c.hidden,
        total
    );
    *out = Some(PipelineOutput { reference, model });
    ensure(gap <= 0.10 && share >= 0.90 && pt < gt && total < 1800.0, || detail.clone())?;
    Ok(detail)
}

fn consistency(pipeline: &Option<PipelineOutput>) -> Outcome {
    let p = pipeline.as_ref().ok_or("needs the trained proxy from the pipeline criterion")?;
    let sweep = datagen::generate_sweep(&p.reference, &SweepSpec { steps: 50, ..SweepSpec::default() })
        .map_err(|e| e.to_string())?;
    let limits = StageLimits::nodes(300);
    let (mut ym, mut yg, mut yp) = (Vec::new(), Vec::new(), Vec::new());
    let (mut dm, mut dg) = (Vec::new(), Vec::new());
    for inst in &sweep {
        let m = solve_model1(inst, &limits).map_err(|e| e.to_string())?.plan;
        let g = solve_gdo(inst, &limits).map_err(|e| e.to_string())?.plan;
        let x = proxy_solve(&p.model, inst).map_err(|e| e.to_string())?.plan;
        dm.push(metrics::plan_distance(inst, &m, DistanceDomain::Compatible).map_err(|e| e.to_string())?);
        dg.push(metrics::plan_distance(inst, &g, DistanceDomain::Compatible).map_err(|e| e.to_string())?);
        ym.push(m.y_f64());
        yg.push(g.y_f64());
        yp.push(x.y_f64());
    }
    let (tm, tg, tp) = (total_variation(&ym).value, total_variation(&yg).value, total_variation(&yp).value);
    let gm = shifted_geomean(&dm, metrics::DISTANCE_SHIFT).map_err(|e| e.to_string())?;
    let gg = shifted_geomean(&dg, metrics::DISTANCE_SHIFT).map_err(|e| e.to_string())?;
    let detail = format!("TV Model 1 {tm}, GDO {tg}, proxy {tp}; Δ geomean Model 1 {gm:.4}, GDO {gg:.4}");
    ensure(tg <= 1.05 * tm && tp <= 1.05 * tg && gg <= gm, || detail.clone())?;
    Ok(detail)
}

fn metric_units() -> Outcome {
    let close = |a: f64, b: f64| (a - b).abs() <= 1e-12;
    // Normalized distance.
    ensure(normalized_distance(&[1.0, 2.0], &[1.0, 2.0], &[0, 1]).unwrap() == 0.0, || "Δ(y=γ) ≠ 0".into())?;
    ensure(close(normalized_distance(&[3.0], &[2.0], &[0]).unwrap(), 0.5), || "Δ(γ=2,y=3) ≠ 0.5".into())?;
    ensure(close(normalized_distance(&[2.0], &[0.0], &[0]).unwrap(), 2.0), || "Δ(γ=0,y=2) ≠ 2".into())?;
    // Total variation.
    ensure(total_variation(&[vec![1.0, 2.0], vec![1.0, 2.0]]).value == 0.0, || "TV constant ≠ 0".into())?;
    ensure(total_variation(&[vec![2.0, 1.0], vec![3.0, 1.0]]).value == 1.0, || "TV one step ≠ 1".into())?;
    ensure(total_variation(&[vec![1.0]]).fewer_than_two, || "TV single plan not flagged".into())?;
    // Gap and geomean.
    ensure(optimality_gap(150.0, 150.0) == 0.0, || "gap at optimum ≠ 0".into())?;
    ensure(close(optimality_gap(165.0, 150.0), 0.1), || "gap 165/150 ≠ 0.1".into())?;
    ensure(shifted_geomean(&[7.0, 7.0, 7.0], 0.01).unwrap() == 7.0, || "geomean of constants".into())?;
    ensure(shifted_geomean(&[0.0, 0.0], 0.01).unwrap() == 0.0, || "geomean of zeros".into())?;
    // Smooth L1.
    ensure(smooth_l1(0.5, 1.0).0 == 0.125 && smooth_l1(3.0, 1.0).0 == 2.5, || "smooth L1 pieces".into())?;

    // Gradient check against central differences.
    let mut worst: f64 = 0.0;
    for bn in [false, true] {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut net = Mlp::new(&[3, 6, 5, 4], 0.0, bn, &mut rng);
        let xs = [vec![0.5, -1.0, 2.0], vec![1.5, 0.2, -0.7], vec![-0.3, 0.8, 0.1]];
        let ys = [vec![1.0, 0.0, 2.0, 3.0], vec![0.0, 1.0, 0.5, 0.2], vec![2.0, 2.0, 0.0, 0.0]];
        let xr: Vec<&[f64]> = xs.iter().map(|v| v.as_slice()).collect();
        let yr: Vec<&[f64]> = ys.iter().map(|v| v.as_slice()).collect();
        let mask = [true, true, false, true];
        // Lift biases so the output ReLUs are active and differentiable.
        let mut p0 = net.params();
        for v in p0.iter_mut() {
            *v += 0.05;
        }
        net.set_params(&p0);
        let (_, grad) = net.loss_and_grad(&xr, &yr, &mask, 1.0, None);
        let h = 1e-6;
        for i in 0..p0.len() {
            let mut p = p0.clone();
            p[i] += h;
            net.set_params(&p);
            let up = net.loss_and_grad(&xr, &yr, &mask, 1.0, None).0;
            p[i] -= 2.0 * h;
            net.set_params(&p);
            let down = net.loss_and_grad(&xr, &yr, &mask, 1.0, None).0;
            let fd = (up - down) / (2.0 * h);
            let rel = (fd - grad[i]).abs() / fd.abs().max(grad[i].abs()).max(1e-3);
            worst = worst.max(rel);
        }
        net.set_params(&p0);
    }
    ensure(worst <= 1e-4, || format!("gradient check relative error {worst:e}"))?;
    Ok(format!("metric examples exact; gradient check max relative error {worst:.1e}"))
}

fn determinism() -> Outcome {
    // Solve.
    let inst = datagen::perturb(&datagen::synthetic_terminal(1), 2, 0).map_err(|e| e.to_string())?;
    let solve = || -> Result<String, String> {
        let g = solve_gdo(&inst, &StageLimits::nodes(200)).map_err(|e| e.to_string())?;
        Ok(g.plan.to_json(&inst))
    };
    ensure(solve()? == solve()?, || "GDO plan JSON differs between runs".into())?;

    // Datagen: single- and multi-threaded runs write identical files.
    let reference = fixtures::t1_with_reference();
    let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
    for (d, jobs) in dirs.iter().zip([1, 3]) {
        let ds = datagen::generate_dataset(&reference, 30, 9, &StageLimits::nodes(500), jobs).map_err(|e| e.to_string())?;
        datagen::write_dataset(&ds, d.path()).map_err(|e| e.to_string())?;
    }
    let mut files = 0;
    for entry in walk(dirs[0].path()) {
        let rel = entry.strip_prefix(dirs[0].path()).unwrap();
        let a = std::fs::read(&entry).unwrap();
        let b = std::fs::read(dirs[1].path().join(rel)).map_err(|e| format!("{}: {e}", rel.display()))?;
        ensure(a == b, || format!("{} differs", rel.display()))?;
        files += 1;
    }

    // Training.
    let ds = datagen::read_dataset(dirs[0].path()).map_err(|e| e.to_string())?;
    let (tr, va) = (ds.samples(Split::Train, false), ds.samples(Split::Validation, false));
    let cfg = TrainingConfig { epochs: 20, seed: 5, ..TrainingConfig::default() };
    let grid = GridSpec { learning_rates: vec![0.01], layers: vec![3], hidden: vec![16, 32] };
    let a = grid_search(&reference, &tr, &va, &cfg, &grid).map_err(|e| e.to_string())?.best.model.to_json();
    let b = grid_search(&reference, &tr, &va, &cfg, &grid).map_err(|e| e.to_string())?.best.model.to_json();
    ensure(a == b, || "trained model checkpoints differ".into())?;
    Ok(format!("solve JSON, {files} dataset files (1 vs 3 threads) and model checkpoints byte-identical"))
}

fn walk(dir: &std::path::Path) -> Vec<std::path::PathBuf> {
    let mut out = Vec::new();
    for e in std::fs::read_dir(dir).unwrap() {
        let p = e.unwrap().path();
        if p.is_dir() {
            out.extend(walk(&p));
        } else {
            out.push(p);
        }
    }
    out.sort();
    out
}

fn main() {
    let mut suite = Suite { results: Vec::new() };
    let mut pipeline = None;
    suite.run("oracle equivalence (cases 1-5)", oracle_equivalence);
    suite.run("brute-force equivalence (Model 1 and GDO)", brute_force_equivalence);
    suite.run("fixture T1", fixture_t1);
    suite.run("splitting value", splitting_value);
    suite.run("restoration guarantees", restoration_guarantees);
    suite.run("scenario monotonicity", scenario_monotonicity);
    suite.run("proxy pipeline at desk scale", || proxy_pipeline(&mut pipeline));
    suite.run("consistency on a 50-step volume sweep", || consistency(&pipeline));
    suite.run("metric units and gradient check", metric_units);
    suite.run("determinism", determinism);
    let failed: Vec<&str> = suite.results.iter().filter(|r| !r.0).map(|r| r.1.as_str()).collect();
    println!("acceptance: {} passed, {} failed", suite.results.len() - failed.len(), failed.len());
    if !failed.is_empty() {
        std::process::exit(1);
    }
}
