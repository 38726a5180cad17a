//! Pure-Rust branch-and-bound over `microlp` LP relaxations.
//!
//! Depth-first with the nearer child first, most-fractional branching, and
//! rounded-bound pruning when the objective is known to be integral. Open
//! siblings keep a clone of their parent's solved LP so re-optimisation
//! starts from a warm basis.

use std::time::Instant;

use microlp::{ComparisonOp, OptimizationDirection, Problem, Solution, SolveOptions, Variable};

use super::{
    BackendError, Capabilities, ConstraintSense, MipModel, ObjectiveSense, SolveOutcome, SolveParams, SolveStatus,
    SolverBackend, VarKind,
};

const INT_TOL: f64 = 1e-6;
const FEAS_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Default)]
pub struct BranchAndBound {
    /// Optional node cap, mostly for tests.
    pub node_limit: Option<u64>,
}

impl BranchAndBound {
    pub fn new() -> Self {
        Self::default()
    }
}

enum Branch {
    Fix(f64),
    AtMost(f64),
    AtLeast(f64),
}

struct Pending {
    parent: Solution,
    bound: f64,
    var: usize,
    branch: Branch,
}

struct Presolved {
    lower: Vec<f64>,
    upper: Vec<f64>,
    /// Rows kept for the LP (indices into model constraints).
    rows: Vec<usize>,
}

/// Turns singleton rows into bounds and rounds integer bounds.
fn presolve(model: &MipModel) -> Option<Presolved> {
    let mut lower: Vec<f64> = model.variables().iter().map(|v| v.lower).collect();
    let mut upper: Vec<f64> = model.variables().iter().map(|v| v.upper).collect();
    let mut rows = Vec::new();
    for (idx, c) in model.constraints().iter().enumerate() {
        match c.terms.as_slice() {
            [] => {
                if c.violation(&[]) > FEAS_TOL {
                    return None;
                }
            }
            [(v, a)] => {
                let bound = c.rhs / a;
                let (lo_side, hi_side) = match (c.sense, *a > 0.0) {
                    (ConstraintSense::Eq, _) => (true, true),
                    (ConstraintSense::Le, true) | (ConstraintSense::Ge, false) => (false, true),
                    (ConstraintSense::Ge, true) | (ConstraintSense::Le, false) => (true, false),
                };
                if lo_side {
                    lower[v.0] = lower[v.0].max(bound);
                }
                if hi_side {
                    upper[v.0] = upper[v.0].min(bound);
                }
            }
            _ => rows.push(idx),
        }
    }
    for (i, var) in model.variables().iter().enumerate() {
        if var.kind.is_integral() {
            lower[i] = (lower[i] - INT_TOL).ceil();
            upper[i] = (upper[i] + INT_TOL).floor();
        }
        if lower[i] > upper[i] + FEAS_TOL {
            return None;
        }
        if lower[i] > upper[i] {
            upper[i] = lower[i];
        }
    }
    Some(Presolved { lower, upper, rows })
}

fn values_of(solution: &Solution, vars: &[Variable]) -> Vec<f64> {
    vars.iter().map(|&v| solution.var_value_raw(v)).collect()
}

fn most_fractional(model: &MipModel, values: &[f64]) -> Option<(usize, f64)> {
    let mut best: Option<(usize, f64, f64)> = None;
    for (i, var) in model.variables().iter().enumerate() {
        if !var.kind.is_integral() {
            continue;
        }
        let frac = values[i] - values[i].floor();
        let dist = frac.min(1.0 - frac);
        if dist > INT_TOL && best.is_none_or(|(_, _, d)| dist > d + 1e-12) {
            best = Some((i, values[i], dist));
        }
    }
    best.map(|(i, v, _)| (i, v))
}

struct Search<'a> {
    model: &'a MipModel,
    vars: Vec<Variable>,
    sign: f64,
    integral: bool,
    deadline: Option<Instant>,
    incumbent: Option<(f64, Vec<f64>)>,
    nodes: u64,
}

impl Search<'_> {
    /// Internal objective is always minimised.
    fn prunable(&self, bound: f64) -> bool {
        let Some((best, _)) = &self.incumbent else { return false };
        let bound = if self.integral { (bound - 1e-6).ceil() } else { bound };
        bound >= best - 1e-9 * (1.0 + best.abs())
    }

    fn timed_out(&self) -> bool {
        self.deadline.is_some_and(|d| Instant::now() >= d)
    }

    fn offer(&mut self, values: Vec<f64>) {
        let mut values = values;
        for (i, var) in self.model.variables().iter().enumerate() {
            if var.kind.is_integral() {
                values[i] = values[i].round();
            }
        }
        if self.model.max_violation(&values) > 1e-5 {
            return;
        }
        let obj = self.sign * self.model.objective_value(&values);
        if self.incumbent.as_ref().is_none_or(|(best, _)| obj < *best - 1e-9) {
            self.incumbent = Some((obj, values));
        }
    }

    fn apply(&self, parent: Solution, var: usize, branch: &Branch) -> Result<Option<Solution>, String> {
        let v = self.vars[var];
        let result = match *branch {
            Branch::Fix(x) => parent.fix_var(v, x),
            Branch::AtMost(x) => parent.add_constraint([(v, 1.0)], ComparisonOp::Le, x),
            Branch::AtLeast(x) => parent.add_constraint([(v, 1.0)], ComparisonOp::Ge, x),
        };
        match result {
            Ok(outcome) => match outcome.into_solution() {
                Ok(sol) => Ok(Some(sol)),
                Err(_) => Err("time limit inside LP".into()),
            },
            Err(microlp::Error::Infeasible) => Ok(None),
            Err(e) => Err(e.to_string()),
        }
    }
}

impl SolverBackend for BranchAndBound {
    fn name(&self) -> &str {
        "bundled"
    }

    fn capabilities(&self) -> Capabilities {
        Capabilities { time_limit: true, warm_start: true, concurrent: true }
    }

    fn describe(&self) -> Vec<(String, String)> {
        vec![
            ("lp_engine".into(), "microlp".into()),
            ("branching".into(), "most_fractional".into()),
            ("node_order".into(), "depth_first".into()),
            ("mip_gap".into(), "0".into()),
        ]
    }

    fn solve(&self, model: &MipModel, params: &SolveParams) -> Result<SolveOutcome, BackendError> {
        let start = Instant::now();
        let elapsed = || start.elapsed().as_secs_f64();
        let sign = match model.objective_sense() {
            ObjectiveSense::Minimize => 1.0,
            ObjectiveSense::Maximize => -1.0,
        };
        let Some(pre) = presolve(model) else {
            return Ok(SolveOutcome::without_solution(SolveStatus::Infeasible, elapsed()));
        };

        let mut obj = vec![0.0; model.num_variables()];
        for &(v, c) in model.objective() {
            obj[v.0] = sign * c;
        }
        let mut problem = Problem::new(OptimizationDirection::Minimize);
        let vars: Vec<Variable> = (0..model.num_variables())
            .map(|i| problem.add_var(obj[i], (pre.lower[i], pre.upper[i])))
            .collect();
        for &r in &pre.rows {
            let c = &model.constraints()[r];
            let op = match c.sense {
                ConstraintSense::Le => ComparisonOp::Le,
                ConstraintSense::Eq => ComparisonOp::Eq,
                ConstraintSense::Ge => ComparisonOp::Ge,
            };
            problem.add_constraint(c.terms.iter().map(|&(v, a)| (vars[v.0], a)).collect::<Vec<_>>(), op, c.rhs);
        }

        let mut options = SolveOptions::default();
        options.time_limit = params.time_limit;
        let root = match problem.solve_with(options) {
            Ok(outcome) => match outcome.into_solution() {
                Ok(sol) => sol,
                Err(_) => {
                    return Ok(SolveOutcome::without_solution(SolveStatus::NoSolutionFound, elapsed()));
                }
            },
            Err(microlp::Error::Infeasible) => {
                return Ok(SolveOutcome::without_solution(SolveStatus::Infeasible, elapsed()));
            }
            Err(microlp::Error::Unbounded) => {
                return Ok(SolveOutcome::without_solution(SolveStatus::Unbounded, elapsed()));
            }
            Err(e) => return Err(BackendError::Failed(e.to_string())),
        };

        let mut search = Search {
            model,
            vars,
            sign,
            integral: model.has_integral_objective(),
            deadline: params.time_limit.map(|t| start + t),
            incumbent: None,
            nodes: 0,
        };
        if let Some(ws) = &params.warm_start {
            if ws.len() == model.num_variables() {
                search.offer(ws.clone());
            }
        }

        let mut stack: Vec<Pending> = Vec::new();
        let mut current = Some(root);
        let mut timed_out = false;
        let mut open_bound = f64::INFINITY;
        loop {
            if let Some(sol) = current.take() {
                search.nodes += 1;
                let bound = sol.objective();
                if !search.prunable(bound) {
                    let values = values_of(&sol, &search.vars);
                    match most_fractional(model, &values) {
                        None => search.offer(values),
                        Some((var, x)) => {
                            let binary = model.variables()[var].kind == VarKind::Binary;
                            let (down, up) = if binary {
                                (Branch::Fix(0.0), Branch::Fix(1.0))
                            } else {
                                (Branch::AtMost(x.floor()), Branch::AtLeast(x.ceil()))
                            };
                            let (first, second) = if x - x.floor() >= 0.5 { (up, down) } else { (down, up) };
                            stack.push(Pending { parent: sol.clone(), bound, var, branch: second });
                            match search.apply(sol, var, &first) {
                                Ok(next) => current = next,
                                Err(_) => {
                                    timed_out = true;
                                    open_bound = open_bound.min(bound);
                                }
                            }
                        }
                    }
                }
            }
            if timed_out || search.timed_out() || self.node_limit.is_some_and(|l| search.nodes >= l) {
                timed_out = true;
                break;
            }
            if current.is_none() {
                let Some(p) = stack.pop() else { break };
                if search.prunable(p.bound) {
                    continue;
                }
                match search.apply(p.parent, p.var, &p.branch) {
                    Ok(next) => current = next,
                    Err(_) => {
                        open_bound = open_bound.min(p.bound);
                        timed_out = true;
                        break;
                    }
                }
            }
        }

        let seconds = elapsed();
        if timed_out {
            for p in &stack {
                open_bound = open_bound.min(p.bound);
            }
            if let Some(sol) = &current {
                open_bound = open_bound.min(sol.objective());
            }
        }
        let status = match (&search.incumbent, timed_out) {
            (Some(_), false) => SolveStatus::Optimal,
            (Some(_), true) => SolveStatus::Feasible,
            (None, false) => SolveStatus::Infeasible,
            (None, true) => SolveStatus::NoSolutionFound,
        };
        let nodes = search.nodes;
        let mut outcome = SolveOutcome::without_solution(status, seconds);
        outcome.nodes = nodes;
        if let Some((best, values)) = search.incumbent {
            let bound = if timed_out { open_bound.min(best) } else { best };
            let bound = if search.integral { (bound - 1e-6).ceil().min(best) } else { bound };
            outcome.objective = Some(sign * best);
            outcome.best_bound = Some(sign * bound);
            outcome.values = Some(values);
        } else if timed_out && open_bound.is_finite() {
            outcome.best_bound = Some(sign * open_bound);
        }
        Ok(outcome)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::milp::{solve, VarId};

    fn bnb() -> BranchAndBound {
        BranchAndBound::new()
    }

    #[test]
    fn integer_lower_bound() {
        let mut m = MipModel::new("t");
        let x = m.add_integer("x", 0.0, f64::INFINITY).unwrap();
        m.add_constraint("c", [(x, 1.0)], ConstraintSense::Ge, 3.0).unwrap();
        m.set_objective(ObjectiveSense::Minimize, [(x, 1.0)]).unwrap();
        let out = solve(&m, &bnb(), None, None).unwrap();
        assert_eq!(out.status, SolveStatus::Optimal);
        assert_eq!(out.objective, Some(3.0));
    }

    #[test]
    fn contradictory_bounds_infeasible() {
        let mut m = MipModel::new("t");
        let x = m.add_integer("x", 0.0, f64::INFINITY).unwrap();
        m.add_constraint("lo", [(x, 1.0)], ConstraintSense::Ge, 3.0).unwrap();
        m.add_constraint("hi", [(x, 1.0)], ConstraintSense::Le, 2.0).unwrap();
        let out = solve(&m, &bnb(), None, None).unwrap();
        assert_eq!(out.status, SolveStatus::Infeasible);
    }

    #[test]
    fn unbounded_detected() {
        let mut m = MipModel::new("t");
        let x = m.add_integer("x", 0.0, f64::INFINITY).unwrap();
        let y = m.add_continuous("y", 0.0, f64::INFINITY).unwrap();
        m.add_constraint("c", [(x, 1.0), (y, -1.0)], ConstraintSense::Le, 4.0).unwrap();
        m.set_objective(ObjectiveSense::Maximize, [(x, 1.0)]).unwrap();
        let out = solve(&m, &bnb(), None, None).unwrap();
        assert_eq!(out.status, SolveStatus::Unbounded);
    }

    #[test]
    fn knapsack() {
        // a + b is optimal (9): max 5a + 4b + 3c st 2a + 3b + c <= 5, 4a + b + 2c <= 11, 3a + 4b + 2c <= 8
        let mut m = MipModel::new("k");
        let v: Vec<VarId> = ["a", "b", "c"].iter().map(|n| m.add_binary(*n).unwrap()).collect();
        m.add_constraint("r1", [(v[0], 2.0), (v[1], 3.0), (v[2], 1.0)], ConstraintSense::Le, 5.0).unwrap();
        m.add_constraint("r2", [(v[0], 4.0), (v[1], 1.0), (v[2], 2.0)], ConstraintSense::Le, 11.0).unwrap();
        m.add_constraint("r3", [(v[0], 3.0), (v[1], 4.0), (v[2], 2.0)], ConstraintSense::Le, 8.0).unwrap();
        m.set_objective(ObjectiveSense::Maximize, [(v[0], 5.0), (v[1], 4.0), (v[2], 3.0)]).unwrap();
        let out = solve(&m, &bnb(), None, None).unwrap();
        assert_eq!(out.status, SolveStatus::Optimal);
        assert_eq!(out.objective, Some(9.0));
        assert!(m.max_violation(out.values.as_ref().unwrap()) < 1e-6);
    }

    #[test]
    fn general_integer_branching() {
        // min -x - y st 2x + 2y <= 7, x - y <= 0.5, x,y integer >= 0 -> 3
        let mut m = MipModel::new("g");
        let x = m.add_integer("x", 0.0, 10.0).unwrap();
        let y = m.add_integer("y", 0.0, 10.0).unwrap();
        m.add_constraint("a", [(x, 2.0), (y, 2.0)], ConstraintSense::Le, 7.0).unwrap();
        m.add_constraint("b", [(x, 1.0), (y, -1.0)], ConstraintSense::Le, 0.5).unwrap();
        m.set_objective(ObjectiveSense::Minimize, [(x, -1.0), (y, -1.0)]).unwrap();
        let out = solve(&m, &bnb(), None, None).unwrap();
        assert_eq!(out.status, SolveStatus::Optimal);
        assert_eq!(out.objective, Some(-3.0));
        assert_eq!(out.best_bound, Some(-3.0));
    }

    #[test]
    fn warm_start_accepted_and_ignored_when_bad() {
        let mut m = MipModel::new("w");
        let x = m.add_binary("x").unwrap();
        let y = m.add_binary("y").unwrap();
        m.add_constraint("c", [(x, 1.0), (y, 1.0)], ConstraintSense::Ge, 1.0).unwrap();
        m.set_objective(ObjectiveSense::Minimize, [(x, 2.0), (y, 3.0)]).unwrap();
        let good = solve(&m, &bnb(), None, Some(vec![0.0, 1.0])).unwrap();
        assert_eq!(good.objective, Some(2.0));
        let bad = solve(&m, &bnb(), None, Some(vec![0.0, 0.0])).unwrap();
        assert_eq!(bad.objective, Some(2.0));
        let short = solve(&m, &bnb(), None, Some(vec![0.0])).unwrap();
        assert_eq!(short.objective, Some(2.0));
    }

    #[test]
    fn empty_model_is_optimal_zero() {
        let m = MipModel::new("e");
        let out = solve(&m, &bnb(), None, None).unwrap();
        assert_eq!(out.status, SolveStatus::Optimal);
        assert_eq!(out.objective, Some(0.0));
    }

    #[test]
    fn node_limit_reports_honest_status() {
        let mut m = MipModel::new("n");
        let vars: Vec<VarId> = (0..12).map(|i| m.add_binary(format!("b{i}")).unwrap()).collect();
        // odd-weight equality with no integral solution at the root
        m.add_constraint("eq", vars.iter().map(|&v| (v, 2.0)), ConstraintSense::Eq, 11.0).unwrap();
        m.set_objective(ObjectiveSense::Minimize, vars.iter().map(|&v| (v, 1.0))).unwrap();
        let out = BranchAndBound { node_limit: Some(3) }.solve(&m, &SolveParams::default()).unwrap();
        assert_eq!(out.status, SolveStatus::NoSolutionFound);
        let full = solve(&m, &bnb(), Some(std::time::Duration::from_secs(30)), None).unwrap();
        assert_eq!(full.status, SolveStatus::Infeasible);
    }
}
