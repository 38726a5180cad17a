//! Benders' decomposition with a strengthened master.
//!
//! The master is the nominal single-level model plus an epigraph variable
//! `η`; the subproblem is the adversarial longest path through the
//! extended network, solved by the layered DP or, for audits, by a MILP.
//! Optimality cuts are kept in the integer form obtained by multiplying
//! through by 3:
//!
//! `3η − 4(V − LB)·Σ_{(i,j)∈π}(y_ij + x_i + x_j) ≥ (V − LB)(3 − 12|π|) + 3·LB`

use std::fmt::Write as _;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::formulation::{
    add_precedence_rows, add_start_times, add_structure, extract_first_stage, level_start_times, write_structure,
    ExtractionError, FirstStageSolution, FormulationError, FormulationOptions, StructureVars,
};
use crate::heuristic::initial_solution;
use crate::instance::{Instance, ModeVector, Time};
use crate::milp::{
    self, BackendError, Constraint, ConstraintSense, MipModel, ModelError, ObjectiveSense, SolveStatus,
    SolverBackend, VarId,
};
use crate::network::{worst_case_longest_path, Budget, ExtendedRelation, WorstCaseResult};

/// Everything a cut needs from the iteration that produced it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CutRecord {
    /// Consecutive arcs of the worst-case path, source to sink.
    pub path: Vec<(usize, usize)>,
    pub modes: ModeVector,
    /// Subproblem value `V`.
    pub value: Time,
    /// Lower bound when the cut was generated.
    pub lb: Time,
}

impl CutRecord {
    pub fn slope(&self) -> Time {
        self.value - self.lb
    }

    /// Three times the right-hand side at a binary point, in exact integer
    /// arithmetic. `y(i, j)` and `x(i, m)` report the master's choices.
    pub fn scaled_rhs(&self, y: impl Fn(usize, usize) -> bool, x: impl Fn(usize, usize) -> bool) -> Time {
        let hits: Time = self
            .path
            .iter()
            .map(|&(i, j)| Time::from(y(i, j)) + Time::from(x(i, self.modes.get(i))) + Time::from(x(j, self.modes.get(j))))
            .sum();
        let len = self.path.len() as Time;
        4 * self.slope() * hits + self.slope() * (3 - 12 * len) + 3 * self.lb
    }

    /// Right-hand side as an exact fraction `(numerator, 3)`.
    pub fn rhs_at(&self, modes: &ModeVector, relation: &ExtendedRelation) -> (Time, Time) {
        (self.scaled_rhs(|i, j| relation.contains(i, j), |i, m| modes.get(i) == m), 3)
    }
}

/// The cut row over the master's variables.
pub fn build_cut(record: &CutRecord, index: usize, sv: &StructureVars, eta: VarId) -> Constraint {
    let slope = record.slope() as f64;
    let mut terms = vec![(eta, 3.0)];
    if slope != 0.0 {
        for &(i, j) in &record.path {
            terms.push((sv.y[i][j], -4.0 * slope));
            terms.push((sv.x[i][record.modes.get(i)], -4.0 * slope));
            terms.push((sv.x[j][record.modes.get(j)], -4.0 * slope));
        }
    }
    let len = record.path.len() as f64;
    Constraint {
        name: format!("cut_{}", index + 1),
        terms,
        sense: ConstraintSense::Ge,
        rhs: slope * (3.0 - 12.0 * len) + 3.0 * record.lb as f64,
    }
}

#[derive(Debug, Clone)]
pub struct MasterModel {
    pub model: MipModel,
    pub structure: StructureVars,
    pub s: Vec<VarId>,
    pub eta: VarId,
}

impl MasterModel {
    /// Assignment for a first-stage solution with `η = eta`.
    pub fn assignment(&self, instance: &Instance, solution: &FirstStageSolution, eta: Time) -> Vec<f64> {
        let mut values = vec![0.0; self.model.num_variables()];
        write_structure(&self.structure, solution, &mut values);
        let starts = level_start_times(instance, solution, 1);
        for (i, v) in self.s.iter().enumerate() {
            values[v.0] = starts[i][0] as f64;
        }
        values[self.eta.0] = eta.max(starts[instance.sink()][0]) as f64;
        values
    }
}

pub fn build_master(
    instance: &Instance,
    cuts: &[CutRecord],
    opts: &FormulationOptions,
) -> Result<MasterModel, FormulationError> {
    let mut model = MipModel::new(format!("master_{}", cuts.len() + 1));
    let structure = add_structure(&mut model, instance, opts)?;
    let s: Vec<VarId> = add_start_times(&mut model, instance, 1, opts)?.into_iter().map(|row| row[0]).collect();
    let nested: Vec<Vec<VarId>> = s.iter().map(|&v| vec![v]).collect();
    add_precedence_rows(&mut model, instance, &structure, &nested, opts)?;
    let eta = model.add_integer("eta", 0.0, f64::INFINITY)?;
    model.add_constraint("epigraph", [(eta, 1.0), (s[instance.sink()], -1.0)], ConstraintSense::Ge, 0.0)?;
    for (idx, cut) in cuts.iter().enumerate() {
        let row = build_cut(cut, idx, &structure, eta);
        model.add_constraint(row.name, row.terms, row.sense, row.rhs)?;
    }
    model.set_objective(ObjectiveSense::Minimize, [(eta, 1.0)])?;
    Ok(MasterModel { model, structure, s, eta })
}

#[derive(Debug, Clone)]
pub struct SubproblemModel {
    pub model: MipModel,
    pub arcs: Vec<(usize, usize)>,
    pub alpha: Vec<VarId>,
    pub w: Vec<VarId>,
    pub xi: Vec<VarId>,
}

/// Path-flow MILP for the adversarial problem on a fixed first stage.
pub fn build_subproblem_milp(
    instance: &Instance,
    modes: &ModeVector,
    relation: &ExtendedRelation,
    gamma: Budget,
) -> Result<SubproblemModel, ModelError> {
    let size = relation.size();
    let nominal = modes.nominal_durations(instance);
    let dev = modes.deviations(instance);
    let arcs: Vec<(usize, usize)> = relation.pairs().collect();
    let mut model = MipModel::new(format!("subproblem_gamma{}", gamma.value()));
    let xi = (0..size).map(|i| model.add_continuous(format!("xi_{i}"), 0.0, 1.0)).collect::<Result<Vec<_>, _>>()?;
    let mut alpha = Vec::with_capacity(arcs.len());
    let mut w = Vec::with_capacity(arcs.len());
    for &(i, j) in &arcs {
        alpha.push(model.add_binary(format!("alpha_{i}_{j}"))?);
        w.push(model.add_continuous(format!("w_{i}_{j}"), 0.0, f64::INFINITY)?);
    }
    for v in 0..size {
        let mut terms = Vec::new();
        for (a, &(i, j)) in arcs.iter().enumerate() {
            if i == v {
                terms.push((alpha[a], 1.0));
            }
            if j == v {
                terms.push((alpha[a], -1.0));
            }
        }
        let rhs = if v == instance.source() {
            1.0
        } else if v == instance.sink() {
            -1.0
        } else {
            0.0
        };
        model.add_constraint(format!("flow_{v}"), terms, ConstraintSense::Eq, rhs)?;
    }
    for (a, &(i, j)) in arcs.iter().enumerate() {
        model.add_constraint(format!("wxi_{i}_{j}"), [(w[a], 1.0), (xi[i], -1.0)], ConstraintSense::Le, 0.0)?;
        model.add_constraint(format!("walpha_{i}_{j}"), [(w[a], 1.0), (alpha[a], -1.0)], ConstraintSense::Le, 0.0)?;
    }
    model.add_constraint("budget", xi.iter().map(|&v| (v, 1.0)), ConstraintSense::Le, f64::from(gamma.value()))?;
    let objective: Vec<(VarId, f64)> = arcs
        .iter()
        .enumerate()
        .flat_map(|(a, &(i, _))| [(alpha[a], nominal[i] as f64), (w[a], dev[i] as f64)])
        .collect();
    model.set_objective(ObjectiveSense::Maximize, objective)?;
    // integral budget over a fixed path: some optimum has binary ξ
    model.set_integral_objective(true);
    Ok(SubproblemModel { model, arcs, alpha, w, xi })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SubproblemEngine {
    #[default]
    Dp,
    Milp,
}

impl std::str::FromStr for SubproblemEngine {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "dp" => Ok(SubproblemEngine::Dp),
            "milp" => Ok(SubproblemEngine::Milp),
            other => Err(format!("unknown subproblem engine {other:?}")),
        }
    }
}

#[derive(Debug, Error)]
pub enum BendersError {
    #[error("instance is not solvable: {0}")]
    InvalidInstance(String),
    #[error(transparent)]
    Formulation(#[from] FormulationError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Backend(#[from] BackendError),
    #[error("could not extract a first-stage solution: {0}")]
    Extraction(#[from] ExtractionError),
    #[error("subproblem MILP ended with status {0}")]
    Subproblem(SolveStatus),
    #[error("subproblem engines disagree: dp {dp}, milp {milp}")]
    EngineMismatch { dp: Time, milp: Time },
    #[error("master problem is infeasible")]
    MasterInfeasible,
}

pub fn solve_subproblem(
    instance: &Instance,
    modes: &ModeVector,
    relation: &ExtendedRelation,
    gamma: Budget,
    engine: SubproblemEngine,
    backend: &dyn SolverBackend,
) -> Result<WorstCaseResult, BendersError> {
    match engine {
        SubproblemEngine::Dp => Ok(worst_case_longest_path(instance, modes, relation, gamma)),
        SubproblemEngine::Milp => {
            let sp = build_subproblem_milp(instance, modes, relation, gamma)?;
            let out = milp::solve(&sp.model, backend, None, None)?;
            if out.status != SolveStatus::Optimal {
                return Err(BendersError::Subproblem(out.status));
            }
            let values = out.values.as_ref().expect("optimal outcome carries values");
            let makespan = out.objective.expect("optimal outcome has an objective").round() as Time;
            let size = relation.size();
            let mut delays = vec![false; size];
            let mut path = vec![instance.source()];
            let mut at = instance.source();
            while at != instance.sink() {
                let Some(a) = (0..sp.arcs.len()).find(|&a| sp.arcs[a].0 == at && values[sp.alpha[a].0] >= 0.5) else {
                    break;
                };
                if values[sp.w[a].0] >= 0.5 {
                    delays[at] = true;
                }
                at = sp.arcs[a].1;
                path.push(at);
            }
            Ok(WorstCaseResult { makespan, delays, critical_path: path })
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub t: usize,
    pub lb: Option<Time>,
    pub ub: Option<Time>,
    pub eta: Option<Time>,
    /// `None` when the subproblem was skipped.
    pub value: Option<Time>,
    pub modes: ModeVector,
    pub path: Vec<usize>,
    pub master_seconds: f64,
    pub subproblem_seconds: f64,
    /// Cut added, or the loop closed on this master solve.
    pub complete: bool,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct BendersState {
    /// `None` stands for −∞.
    pub lb: Option<Time>,
    /// `None` stands for +∞.
    pub ub: Option<Time>,
    pub t: usize,
    pub cuts: Vec<CutRecord>,
    pub trace: Vec<TraceRow>,
}

impl BendersState {
    pub fn new() -> Self {
        Self { t: 1, ..Self::default() }
    }

    pub fn closed(&self) -> bool {
        matches!((self.lb, self.ub), (Some(l), Some(u)) if l >= u)
    }

    /// Iterations whose cut was added or which closed the gap.
    pub fn completed_iterations(&self) -> usize {
        self.trace.iter().filter(|r| r.complete).count()
    }

    pub fn gap_percent(&self) -> Option<f64> {
        let (lb, ub) = (self.lb?, self.ub?);
        if ub == 0 {
            return Some(0.0);
        }
        Some(100.0 * (ub - lb).max(0) as f64 / ub as f64)
    }

    /// Trace as CSV: `t,LB,UB,eta,V,modes,path,master_s,subproblem_s`.
    pub fn trace_csv(&self) -> String {
        let opt = |v: Option<Time>| v.map_or(String::from("-"), |v| v.to_string());
        let mut out = String::from("t,LB,UB,eta,V,modes,path,master_s,subproblem_s\n");
        for r in &self.trace {
            let path = r.path.iter().map(|i| i.to_string()).collect::<Vec<_>>().join("->");
            let _ = writeln!(
                out,
                "{},{},{},{},{},\"{}\",{},{:.6},{:.6}",
                r.t,
                opt(r.lb),
                opt(r.ub),
                opt(r.eta),
                opt(r.value),
                r.modes.display_real(),
                path,
                r.master_seconds,
                r.subproblem_seconds
            );
        }
        out
    }
}

#[derive(Debug, Clone)]
pub struct BendersOptions {
    pub formulation: FormulationOptions,
    pub time_limit: Option<Duration>,
    pub engine: SubproblemEngine,
    /// Also run the MILP engine on every subproblem and compare.
    pub audit: bool,
    /// Offer the incumbent (or the construction heuristic before there is
    /// one) to the master as a warm start.
    pub warm_start: bool,
}

impl Default for BendersOptions {
    fn default() -> Self {
        Self {
            formulation: FormulationOptions::default(),
            time_limit: None,
            engine: SubproblemEngine::Dp,
            audit: false,
            warm_start: true,
        }
    }
}

#[derive(Debug, Clone)]
pub struct BendersRun {
    /// `Optimal` when LB met UB, `Feasible`/`NoSolutionFound` on the time
    /// limit, `Error` when a backend failed mid-loop.
    pub status: SolveStatus,
    pub solution: Option<(FirstStageSolution, WorstCaseResult)>,
    pub state: BendersState,
    pub seconds: f64,
    pub message: Option<String>,
}

impl BendersRun {
    pub fn objective(&self) -> Option<Time> {
        self.solution.as_ref().map(|(_, w)| w.makespan)
    }
}

pub fn run_benders(
    instance: &Instance,
    gamma: Budget,
    backend: &dyn SolverBackend,
    options: &BendersOptions,
) -> Result<BendersRun, BendersError> {
    let report = instance.validate();
    if !report.is_empty() {
        return Err(BendersError::InvalidInstance(report.to_string()));
    }
    let started = Instant::now();
    let remaining = || options.time_limit.map(|l| l.saturating_sub(started.elapsed()));
    let mut state = BendersState::new();
    let mut incumbent: Option<(FirstStageSolution, WorstCaseResult)> = None;
    let mut status = SolveStatus::NoSolutionFound;
    let mut message = None;
    let first_guess = if options.warm_start { initial_solution(instance, gamma) } else { None };

    loop {
        if remaining().is_some_and(|r| r.is_zero()) {
            break;
        }
        let master = build_master(instance, &state.cuts, &options.formulation)?;
        let warm = if !options.warm_start {
            None
        } else if let Some((sol, wc)) = &incumbent {
            Some(master.assignment(instance, sol, wc.makespan))
        } else {
            first_guess.as_ref().map(|(sol, _)| master.assignment(instance, sol, 0))
        };
        let t0 = Instant::now();
        let outcome = match milp::solve(&master.model, backend, remaining(), warm) {
            Ok(o) => o,
            Err(e) => {
                status = SolveStatus::Error;
                message = Some(e.to_string());
                break;
            }
        };
        let master_seconds = t0.elapsed().as_secs_f64();
        match outcome.status {
            SolveStatus::Infeasible | SolveStatus::Unbounded => return Err(BendersError::MasterInfeasible),
            SolveStatus::Error => {
                status = SolveStatus::Error;
                message = outcome.message.clone();
                break;
            }
            _ => {}
        }
        let optimal = outcome.status == SolveStatus::Optimal;
        if let Some(bound) = outcome.best_bound.filter(|_| !optimal) {
            let bound = milp::integral_bound(bound);
            state.lb = Some(state.lb.map_or(bound, |lb| lb.max(bound)));
        }
        let Some(values) = outcome.values.as_ref().filter(|_| outcome.status.has_solution()) else {
            break;
        };
        let first = extract_first_stage(instance, &master.structure, values)?;
        let eta = values[master.eta.0].round() as Time;
        if optimal {
            state.lb = Some(state.lb.map_or(eta, |lb| lb.max(eta)));
        }
        let mut row = TraceRow {
            t: state.t,
            lb: state.lb,
            ub: state.ub,
            eta: Some(eta),
            value: None,
            modes: first.modes.clone(),
            path: Vec::new(),
            master_seconds,
            subproblem_seconds: 0.0,
            complete: false,
        };
        if optimal && state.closed() {
            // the master cannot beat the incumbent: skip the subproblem
            row.complete = true;
            state.trace.push(row);
            break;
        }
        if optimal && remaining().is_some_and(|r| r.is_zero()) {
            state.trace.push(row);
            break;
        }
        let t1 = Instant::now();
        let wc = match solve_subproblem(instance, &first.modes, &first.relation, gamma, options.engine, backend) {
            Ok(wc) => wc,
            Err(BendersError::Backend(e)) => {
                status = SolveStatus::Error;
                message = Some(e.to_string());
                state.trace.push(row);
                break;
            }
            Err(e) => return Err(e),
        };
        if options.audit {
            let other = match options.engine {
                SubproblemEngine::Dp => SubproblemEngine::Milp,
                SubproblemEngine::Milp => SubproblemEngine::Dp,
            };
            let check = solve_subproblem(instance, &first.modes, &first.relation, gamma, other, backend)?;
            if check.makespan != wc.makespan {
                let (dp, milp) = match options.engine {
                    SubproblemEngine::Dp => (wc.makespan, check.makespan),
                    SubproblemEngine::Milp => (check.makespan, wc.makespan),
                };
                return Err(BendersError::EngineMismatch { dp, milp });
            }
        }
        row.subproblem_seconds = t1.elapsed().as_secs_f64();
        row.value = Some(wc.makespan);
        row.path = wc.critical_path.clone();
        if state.ub.is_none_or(|ub| wc.makespan < ub) {
            state.ub = Some(wc.makespan);
            incumbent = Some((first.clone(), wc.clone()));
        }
        row.ub = state.ub;
        if !optimal {
            // η is no bound here; the incumbent is kept but no cut is derived
            state.trace.push(row);
            break;
        }
        let lb = state.lb.expect("set by an optimal master");
        state.cuts.push(CutRecord { path: wc.path_edges(), modes: first.modes.clone(), value: wc.makespan, lb });
        row.complete = true;
        state.trace.push(row);
        state.t += 1;
        if state.closed() {
            break;
        }
    }

    if status != SolveStatus::Error {
        status = if state.closed() {
            SolveStatus::Optimal
        } else if incumbent.is_some() {
            SolveStatus::Feasible
        } else {
            SolveStatus::NoSolutionFound
        };
    }
    Ok(BendersRun { status, solution: incumbent, state, seconds: started.elapsed().as_secs_f64(), message })
}
