//! The compact robust formulation: `Γ + 1` copies of the start-time
//! variables linked by nominal rows within a level and worst-case rows
//! across consecutive levels, on top of the shared first-stage structure.

use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::formulation::{
    add_precedence_rows, add_start_times, add_structure, extract_first_stage, level_start_times, write_structure,
    ExtractionError, FirstStageSolution, Flow, FormulationError, FormulationOptions, StructureVars,
};
use crate::heuristic::initial_solution;
use crate::instance::{Instance, Time};
use crate::milp::{self, BackendError, MipModel, ObjectiveSense, SolveOutcome, SolveStatus, SolverBackend, VarId};
use crate::network::{worst_case_longest_path, Budget, WorstCaseResult};

#[derive(Debug, Clone)]
pub struct CompactModel {
    pub model: MipModel,
    pub structure: StructureVars,
    /// `s[i][γ]`
    pub s: Vec<Vec<VarId>>,
    /// Effective budget, `min(Γ, n)`.
    pub levels: usize,
}

impl CompactModel {
    pub fn objective_var(&self) -> VarId {
        self.s[self.s.len() - 1][self.levels]
    }

    /// Full assignment for a first-stage solution, start times taken from
    /// the layered longest-path table.
    pub fn assignment(&self, instance: &Instance, solution: &FirstStageSolution) -> Vec<f64> {
        let mut values = vec![0.0; self.model.num_variables()];
        write_structure(&self.structure, solution, &mut values);
        let starts = level_start_times(instance, solution, self.levels + 1);
        for (i, row) in self.s.iter().enumerate() {
            for (g, v) in row.iter().enumerate() {
                values[v.0] = starts[i][g] as f64;
            }
        }
        values
    }
}

pub fn build_compact(
    instance: &Instance,
    gamma: Budget,
    opts: &FormulationOptions,
) -> Result<CompactModel, FormulationError> {
    let levels = gamma.clamped(instance.n());
    let mut model = MipModel::new(format!("compact_gamma{}", gamma.value()));
    let structure = add_structure(&mut model, instance, opts)?;
    let s = add_start_times(&mut model, instance, levels + 1, opts)?;
    add_precedence_rows(&mut model, instance, &structure, &s, opts)?;
    model.set_objective(ObjectiveSense::Minimize, [(s[instance.sink()][levels], 1.0)])?;
    // for fixed binaries the optimum is a longest-path length
    model.set_integral_objective(true);
    Ok(CompactModel { model, structure, s, levels })
}

#[derive(Debug, Clone, Default)]
pub struct CompactOptions {
    pub formulation: FormulationOptions,
    pub time_limit: Option<Duration>,
    /// Seed the backend with the construction heuristic.
    pub heuristic_start: bool,
}

#[derive(Debug, Error)]
pub enum CompactError {
    #[error("instance is not solvable: {0}")]
    InvalidInstance(String),
    #[error(transparent)]
    Formulation(#[from] FormulationError),
    #[error(transparent)]
    Backend(#[from] BackendError),
    #[error("could not extract a first-stage solution: {0}")]
    Extraction(#[from] ExtractionError),
    #[error("model reports {milp} but the longest-path evaluation gives {dp}")]
    Mismatch { milp: f64, dp: Time },
    #[error("model is infeasible on a valid instance")]
    Infeasible,
}

#[derive(Debug, Clone)]
pub struct CompactResult {
    pub outcome: SolveOutcome,
    /// Present whenever the backend returned an incumbent.
    pub solution: Option<(FirstStageSolution, WorstCaseResult)>,
}

impl CompactResult {
    /// Worst-case makespan of the incumbent, re-evaluated exactly.
    pub fn objective(&self) -> Option<Time> {
        self.solution.as_ref().map(|(_, w)| w.makespan)
    }

    /// Best proven lower bound, rounded up to an integer.
    pub fn bound(&self) -> Option<Time> {
        self.outcome.best_bound.map(milp::integral_bound)
    }

    pub fn status(&self) -> &SolveStatus {
        &self.outcome.status
    }
}

pub fn solve_compact(
    instance: &Instance,
    gamma: Budget,
    backend: &dyn SolverBackend,
    options: &CompactOptions,
) -> Result<CompactResult, CompactError> {
    let report = instance.validate();
    if !report.is_empty() {
        return Err(CompactError::InvalidInstance(report.to_string()));
    }
    let cm = build_compact(instance, gamma, &options.formulation)?;
    let warm = if options.heuristic_start {
        initial_solution(instance, gamma).map(|(sol, _)| cm.assignment(instance, &sol))
    } else {
        None
    };
    let outcome = milp::solve(&cm.model, backend, options.time_limit, warm)?;
    match outcome.status {
        SolveStatus::Infeasible | SolveStatus::Unbounded => return Err(CompactError::Infeasible),
        _ => {}
    }
    let solution = match &outcome.values {
        Some(values) if outcome.status.has_solution() => {
            let first = extract_first_stage(instance, &cm.structure, values)?;
            let wc = worst_case_longest_path(instance, &first.modes, &first.relation, gamma);
            let milp_value = values[cm.objective_var().0];
            let reported = milp_value.round() as Time;
            let consistent = if outcome.status == SolveStatus::Optimal {
                reported == wc.makespan
            } else {
                wc.makespan <= reported
            };
            if !consistent {
                return Err(CompactError::Mismatch { milp: milp_value, dp: wc.makespan });
            }
            Some((first, wc))
        }
        _ => None,
    };
    Ok(CompactResult { outcome, solution })
}

/// JSON view of a solved instance.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolutionReport {
    pub method: String,
    pub gamma: u32,
    pub status: SolveStatus,
    /// One-based mode per activity, dummies included.
    pub modes: Vec<usize>,
    /// Extra precedences beyond the project's own closure.
    pub selection: Vec<(usize, usize)>,
    pub flows: Vec<Flow>,
    pub worst_case_makespan: Time,
    pub delayed_activities: Vec<usize>,
    pub critical_path: Vec<usize>,
    pub bound: Option<Time>,
    pub seconds: f64,
}

impl SolutionReport {
    pub fn new(
        method: &str,
        instance: &Instance,
        gamma: Budget,
        status: SolveStatus,
        solution: &FirstStageSolution,
        worst: &WorstCaseResult,
        bound: Option<Time>,
        seconds: f64,
    ) -> Self {
        Self {
            method: method.to_string(),
            gamma: gamma.value(),
            status,
            modes: solution.modes.0.iter().map(|m| m + 1).collect(),
            selection: solution.selection(instance),
            flows: solution.flows.clone(),
            worst_case_makespan: worst.makespan,
            delayed_activities: worst.delayed_activities(),
            critical_path: worst.critical_path.clone(),
            bound,
            seconds,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialises")
    }
}
