//! [`SolverBackend`] on top of the HiGHS MIP solver.

use std::ffi::CString;
use std::time::Instant;

use highs::{HighsModelStatus, RowProblem, Sense};
use robust_mrcpsp::milp::{
    BackendError, Capabilities, ConstraintSense, MipModel, ObjectiveSense, SolveOutcome, SolveParams, SolveStatus,
    SolverBackend,
};

#[derive(Debug, Clone, Default)]
pub struct HighsBackend {
    /// Passed to the `threads` option when set.
    pub threads: Option<i32>,
}

impl HighsBackend {
    pub fn new() -> Self {
        Self::default()
    }
}

fn double_info(model: &highs::SolvedModel, name: &str) -> Option<f64> {
    let key = CString::new(name).ok()?;
    let mut value = 0.0;
    let status = unsafe { highs_sys::Highs_getDoubleInfoValue(model.as_ptr() as *mut _, key.as_ptr(), &mut value) };
    (status == 0).then_some(value)
}

fn int64_info(model: &highs::SolvedModel, name: &str) -> Option<i64> {
    let key = CString::new(name).ok()?;
    let mut value: i64 = 0;
    let status = unsafe { highs_sys::Highs_getInt64InfoValue(model.as_ptr() as *mut _, key.as_ptr(), &mut value) };
    (status == 0).then_some(value)
}

fn int_info(model: &highs::SolvedModel, name: &str) -> Option<i64> {
    let key = CString::new(name).ok()?;
    let mut value: highs_sys::HighsInt = 0;
    let status = unsafe { highs_sys::Highs_getIntInfoValue(model.as_ptr() as *mut _, key.as_ptr(), &mut value) };
    (status == 0).then_some(value as i64)
}

impl SolverBackend for HighsBackend {
    fn name(&self) -> &str {
        "highs"
    }

    fn capabilities(&self) -> Capabilities {
        // one shared thread pool inside the library
        Capabilities { time_limit: true, warm_start: true, concurrent: false }
    }

    fn describe(&self) -> Vec<(String, String)> {
        vec![
            ("mip_rel_gap".into(), "0".into()),
            ("mip_abs_gap".into(), "0.999 for integral objectives, else 1e-9".into()),
            ("threads".into(), self.threads.map_or("default".into(), |t| t.to_string())),
        ]
    }

    fn solve(&self, model: &MipModel, params: &SolveParams) -> Result<SolveOutcome, BackendError> {
        let started = Instant::now();
        let sign = match model.objective_sense() {
            ObjectiveSense::Minimize => 1.0,
            ObjectiveSense::Maximize => -1.0,
        };
        let mut cost = vec![0.0; model.num_variables()];
        for &(v, c) in model.objective() {
            cost[v.0] += c;
        }
        let mut pb = RowProblem::default();
        let cols: Vec<_> = model
            .variables()
            .iter()
            .zip(&cost)
            .map(|(var, &c)| pb.add_column_with_integrality(c, var.lower..=var.upper, var.kind.is_integral()))
            .collect();
        for c in model.constraints() {
            let terms: Vec<_> = c.terms.iter().map(|&(v, a)| (cols[v.0], a)).collect();
            match c.sense {
                ConstraintSense::Le => pb.add_row(..=c.rhs, terms),
                ConstraintSense::Ge => pb.add_row(c.rhs.., terms),
                ConstraintSense::Eq => pb.add_row(c.rhs..=c.rhs, terms),
            }
        }
        let mut hm = pb.optimise(if sign > 0.0 { Sense::Minimise } else { Sense::Maximise });
        hm.make_quiet();
        hm.set_option("mip_rel_gap", params.mip_gap);
        hm.set_option("mip_abs_gap", if model.has_integral_objective() { 0.999 } else { 1e-9 });
        if let Some(limit) = params.time_limit {
            hm.set_option("time_limit", limit.as_secs_f64().max(0.01));
        }
        if let Some(t) = self.threads {
            hm.set_option("threads", t);
        }
        if let Some(ws) = &params.warm_start {
            // a rejected start only costs time
            let _ = hm.try_set_solution(Some(ws), None, None, None);
        }
        let solved = hm.try_solve().map_err(|e| BackendError::Failed(format!("{e:?}")))?;
        let seconds = started.elapsed().as_secs_f64();
        let has_primal = int_info(&solved, "primal_solution_status").is_some_and(|s| s == 2);
        let status = match solved.status() {
            HighsModelStatus::Optimal => SolveStatus::Optimal,
            HighsModelStatus::ModelEmpty => SolveStatus::Optimal,
            HighsModelStatus::Infeasible => SolveStatus::Infeasible,
            HighsModelStatus::Unbounded => SolveStatus::Unbounded,
            HighsModelStatus::ReachedTimeLimit
            | HighsModelStatus::ReachedIterationLimit
            | HighsModelStatus::ObjectiveBound
            | HighsModelStatus::ObjectiveTarget
            | HighsModelStatus::Unknown => {
                if has_primal {
                    SolveStatus::Feasible
                } else {
                    SolveStatus::NoSolutionFound
                }
            }
            other => {
                let mut out = SolveOutcome::without_solution(SolveStatus::Error, seconds);
                out.message = Some(format!("HiGHS model status {other:?}"));
                return Ok(out);
            }
        };
        let mut out = SolveOutcome::without_solution(status.clone(), seconds);
        out.nodes = int64_info(&solved, "mip_node_count").map_or(0, |n| n.max(0) as u64);
        if status.has_solution() {
            let values = if model.num_variables() == 0 { Vec::new() } else { solved.get_solution().columns().to_vec() };
            out.objective = Some(model.objective_value(&values));
            out.values = Some(values);
            let bound = if model.num_integral() == 0 || status == SolveStatus::Optimal {
                out.objective
            } else {
                double_info(&solved, "mip_dual_bound").filter(|b| b.is_finite())
            };
            out.best_bound = bound;
        } else {
            out.best_bound = double_info(&solved, "mip_dual_bound").filter(|b| b.is_finite());
        }
        Ok(out)
    }
}

/// Backend by name: `"bundled"` or `"highs"`.
pub fn backend_by_name(name: &str) -> Result<Box<dyn SolverBackend>, BackendError> {
    match name {
        "bundled" => Ok(Box::new(robust_mrcpsp::milp::BranchAndBound::new())),
        "highs" => Ok(Box::new(HighsBackend::new())),
        other => Err(BackendError::Unavailable(other.to_string())),
    }
}
