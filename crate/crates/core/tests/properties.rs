use proptest::prelude::*;
use robust_mrcpsp::benders::{solve_subproblem, CutRecord, SubproblemEngine};
use robust_mrcpsp::generate::{random_first_stage, random_psplib_like, random_tiny, rng};
use robust_mrcpsp::milp::BranchAndBound;
use robust_mrcpsp::network::{earliest_start_schedule, worst_case_longest_path};
use robust_mrcpsp::psplib::{parse_mm, RawPsplibFile};
use robust_mrcpsp::{Budget, Instance, ModeVector};

fn tiny(seed: u64) -> Instance {
    let mut r = rng(seed);
    let n = 3 + (seed % 3) as usize;
    random_tiny(&mut r, n, 2, 1 + (seed % 2) as usize)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn worst_case_is_monotone_and_bounded(seed in any::<u64>()) {
        let inst = random_psplib_like(&mut rng(seed), 8);
        let Some(sol) = random_first_stage(&inst, &mut rng(seed ^ 0x5eed)) else { return Ok(()) };
        let nominal = sol.modes.nominal_durations(&inst);
        let worst: Vec<i64> = nominal.iter().zip(sol.modes.deviations(&inst)).map(|(a, b)| a + b).collect();
        let values: Vec<i64> = (0..=9)
            .map(|g| worst_case_longest_path(&inst, &sol.modes, &sol.relation, Budget(g)).makespan)
            .collect();
        prop_assert!(values.windows(2).all(|w| w[0] <= w[1]));
        prop_assert_eq!(values[0], earliest_start_schedule(&sol.relation, &nominal).makespan());
        prop_assert_eq!(values[8], earliest_start_schedule(&sol.relation, &worst).makespan());
        prop_assert_eq!(values[9], values[8]);
    }

    #[test]
    fn worst_case_path_realises_its_value(seed in any::<u64>(), gamma in 0u32..4) {
        let inst = random_psplib_like(&mut rng(seed), 8);
        let Some(sol) = random_first_stage(&inst, &mut rng(seed.wrapping_add(1))) else { return Ok(()) };
        let wc = worst_case_longest_path(&inst, &sol.modes, &sol.relation, Budget(gamma));
        let durations = wc.realised_durations(&inst, &sol.modes);
        let along: i64 = wc.critical_path.iter().map(|&i| durations[i]).sum();
        prop_assert_eq!(along, wc.makespan);
        prop_assert!(wc.delayed_activities().len() <= gamma as usize);
        for e in wc.path_edges() {
            prop_assert!(sol.relation.contains(e.0, e.1));
        }
    }

    #[test]
    fn subproblem_engines_agree(seed in any::<u64>(), gamma in 0u32..4) {
        let inst = tiny(seed);
        let Some(sol) = random_first_stage(&inst, &mut rng(seed)) else { return Ok(()) };
        let bnb = BranchAndBound::new();
        let dp = solve_subproblem(&inst, &sol.modes, &sol.relation, Budget(gamma), SubproblemEngine::Dp, &bnb).unwrap();
        let milp = solve_subproblem(&inst, &sol.modes, &sol.relation, Budget(gamma), SubproblemEngine::Milp, &bnb).unwrap();
        prop_assert_eq!(dp.makespan, milp.makespan);
    }

    #[test]
    fn json_round_trip(seed in any::<u64>()) {
        let inst = tiny(seed);
        let text = inst.to_canonical_json();
        let back = Instance::from_json(&text).unwrap();
        prop_assert_eq!(back.to_canonical_json(), text);
        prop_assert_eq!(back, inst);
    }

    #[test]
    fn psplib_text_round_trip(seed in any::<u64>()) {
        let inst = random_psplib_like(&mut rng(seed), 12);
        let text = RawPsplibFile::from_instance(&inst).to_text();
        let back = parse_mm(&text).unwrap();
        let mut expected = inst.clone();
        for a in &mut expected.activities {
            for m in &mut a.modes {
                m.max_deviation = 0;
            }
        }
        prop_assert_eq!(back.to_canonical_json(), expected.to_canonical_json());
    }

    #[test]
    fn cut_binds_exactly_at_its_own_point(len in 1usize..6, value in 0i64..60, slack in 0i64..30) {
        let path: Vec<(usize, usize)> = (0..len).map(|i| (i, i + 1)).collect();
        let modes = ModeVector((0..=len).map(|i| i % 3).collect());
        let rec = CutRecord { path, modes: modes.clone(), value: value + slack, lb: value };
        let on_path = |i: usize, j: usize| j == i + 1;
        prop_assert_eq!(rec.scaled_rhs(on_path, |i, m| modes.get(i) == m), 3 * (value + slack));
    }
}
