use robust_mrcpsp::benders::{run_benders, BendersOptions};
use robust_mrcpsp::compact::{solve_compact, CompactOptions};
use robust_mrcpsp::generate::tiny_battery;
use robust_mrcpsp::milp::{BranchAndBound, SolveStatus};
use robust_mrcpsp::oracle::brute_force_solve;
use robust_mrcpsp::Budget;

#[test]
fn solvers_match_oracle_on_tiny_instances() {
    let bnb = BranchAndBound::new();
    for (idx, (inst, gamma)) in tiny_battery(20240601, 36).into_iter().enumerate() {
        let oracle = brute_force_solve(&inst, gamma).unwrap();
        let compact = solve_compact(&inst, gamma, &bnb, &CompactOptions::default()).unwrap();
        assert_eq!(compact.status(), &SolveStatus::Optimal);
        assert_eq!(compact.objective(), Some(oracle.makespan), "compact, instance {idx}");
        let run = run_benders(&inst, gamma, &bnb, &BendersOptions::default()).unwrap();
        assert_eq!(run.status, SolveStatus::Optimal);
        assert_eq!(run.objective(), Some(oracle.makespan), "benders, instance {idx}");
        assert_eq!(run.state.ub, Some(oracle.makespan));
    }
}

#[test]
fn oracle_is_monotone_in_budget() {
    for (inst, _) in tiny_battery(99, 18) {
        let values: Vec<i64> = (0..4).map(|g| brute_force_solve(&inst, Budget(g)).unwrap().makespan).collect();
        assert!(values.windows(2).all(|w| w[0] <= w[1]), "{values:?}");
    }
}
