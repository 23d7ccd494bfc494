mod common;

use dlpp_core::datagen::{self, Factors};
use dlpp_core::metrics::{normalized_distance, shifted_geomean, total_variation};
use dlpp_core::restoration::{restore, PredictedPlan};
use dlpp_core::network::{instance_to_json, parse_instance};
use dlpp_core::{epsilon_weight, greedy, polish_toward_reference, solve_gdo, solve_model1, StageLimits};
use dlpp_solver::MipStatus;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn config() -> ProptestConfig {
    ProptestConfig { cases: 48, ..ProptestConfig::default() }
}

proptest! {
    #![proptest_config(config())]

    #[test]
    fn optimal_plans_are_feasible_and_beat_greedy(seed in any::<u64>()) {
        let inst = common::small_dlpp(&mut ChaCha8Rng::seed_from_u64(seed));
        let m = solve_model1(&inst, &StageLimits::unlimited()).unwrap();
        prop_assert_eq!(m.mip.status, MipStatus::Optimal);
        prop_assert!(m.plan.check(&inst).is_ok());
        let g = greedy::greedy_solve(&inst, greedy::iteration_bound(&inst)).unwrap();
        prop_assert!(g.plan.check(&inst).is_ok());
        prop_assert!(g.plan.cost(&inst) >= m.plan.cost(&inst) - 1e-6);
    }

    #[test]
    fn gdo_keeps_the_optimal_cost_and_moves_no_further(seed in any::<u64>()) {
        let inst = common::small_dlpp(&mut ChaCha8Rng::seed_from_u64(seed));
        let m = solve_model1(&inst, &StageLimits::unlimited()).unwrap();
        let g = solve_gdo(&inst, &StageLimits::unlimited()).unwrap();
        prop_assert!(g.plan.check(&inst).is_ok());
        prop_assert!((g.plan.cost(&inst) - m.plan.cost(&inst)).abs() <= 1e-6);
        let gamma = inst.reference_grid().unwrap();
        prop_assert!(g.plan.hamming_distance(&gamma) <= m.plan.hamming_distance(&gamma) + 1e-9);
    }

    #[test]
    fn polish_keeps_budget_and_only_moves_closer(seed in any::<u64>()) {
        let inst = common::small_dlpp(&mut ChaCha8Rng::seed_from_u64(seed));
        let start = solve_model1(&inst, &StageLimits::unlimited()).unwrap().plan;
        let z = start.cost(&inst);
        let gamma = inst.reference_grid().unwrap();
        let (polished, _) = polish_toward_reference(&inst, &gamma, z, epsilon_weight(&inst), start.clone()).unwrap();
        prop_assert!(polished.check(&inst).is_ok());
        prop_assert!(polished.cost(&inst) <= z + 1e-6);
        prop_assert!(polished.hamming_distance(&gamma) <= start.hamming_distance(&gamma));
    }

    #[test]
    fn restoration_only_adds_capacity(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let inst = common::small_dlpp(&mut rng);
        let y_hat: Vec<u32> = (0..inst.grid_len()).map(|_| rng.random_range(0..=3)).collect();
        let pred = PredictedPlan::new(&inst, y_hat).unwrap();
        let r = restore(&inst, &pred).unwrap();
        prop_assert!(r.plan.check(&inst).is_ok());
        for (a, b) in r.plan.y.iter().zip(&pred.y_hat) {
            prop_assert!(a >= b);
        }
        prop_assert!(r.report.cost_delta >= -1e-9);
    }

    #[test]
    fn instance_json_round_trips(seed in any::<u64>()) {
        let inst = common::small_dlpp(&mut ChaCha8Rng::seed_from_u64(seed));
        let text = instance_to_json(&inst);
        let back = parse_instance(&text).unwrap();
        prop_assert_eq!(instance_to_json(&back), text);
    }

    #[test]
    fn identity_factors_leave_volumes_alone(seed in any::<u64>()) {
        let inst = common::small_dlpp(&mut ChaCha8Rng::seed_from_u64(seed));
        let same = datagen::apply_factors(&inst, &Factors::identity(inst.num_commodities())).unwrap();
        prop_assert_eq!(same.volumes(), inst.volumes());
    }

    #[test]
    fn distance_is_zero_only_at_the_reference(gamma in prop::collection::vec(0u32..6, 1..8), bump in 0usize..8) {
        let g: Vec<f64> = gamma.iter().map(|&n| n as f64).collect();
        let dom: Vec<usize> = (0..g.len()).collect();
        prop_assert_eq!(normalized_distance(&g, &g, &dom).unwrap(), 0.0);
        let mut y = g.clone();
        y[bump % g.len()] += 1.0;
        prop_assert!(normalized_distance(&y, &g, &dom).unwrap() > 0.0);
    }

    #[test]
    fn total_variation_obeys_the_triangle_inequality(plans in prop::collection::vec(prop::collection::vec(0u32..5, 3), 3..10)) {
        let p: Vec<Vec<f64>> = plans.iter().map(|v| v.iter().map(|&n| n as f64).collect()).collect();
        let direct = p[0].iter().zip(p.last().unwrap()).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
        prop_assert!(total_variation(&p).value >= direct - 1e-9);
    }

    #[test]
    fn geomean_lies_between_extremes(xs in prop::collection::vec(0.0f64..100.0, 1..20)) {
        let g = shifted_geomean(&xs, 1.0).unwrap();
        let lo = xs.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        prop_assert!(g >= lo - 1e-9 && g <= hi + 1e-9);
    }
}
