//! Backend-agnostic MILP models, LP-format export and the solver interface.

mod bundled;
mod lp_format;

use std::collections::HashMap;
use std::fmt;
use std::time::Duration;

use thiserror::Error;

pub use bundled::BranchAndBound;
pub use lp_format::write_lp;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct VarId(pub usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum VarKind {
    Continuous,
    Integer,
    Binary,
}

impl VarKind {
    pub fn is_integral(self) -> bool {
        !matches!(self, VarKind::Continuous)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Variable {
    pub name: String,
    pub lower: f64,
    pub upper: f64,
    pub kind: VarKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ConstraintSense {
    Le,
    Eq,
    Ge,
}

impl ConstraintSense {
    pub fn symbol(self) -> &'static str {
        match self {
            ConstraintSense::Le => "<=",
            ConstraintSense::Eq => "=",
            ConstraintSense::Ge => ">=",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Constraint {
    pub name: String,
    /// Merged by variable, zero coefficients dropped, in first-seen order.
    pub terms: Vec<(VarId, f64)>,
    pub sense: ConstraintSense,
    pub rhs: f64,
}

impl Constraint {
    pub fn activity(&self, values: &[f64]) -> f64 {
        self.terms.iter().map(|&(v, c)| c * values[v.0]).sum()
    }

    /// Amount by which `values` violates the row (0 when satisfied).
    pub fn violation(&self, values: &[f64]) -> f64 {
        let lhs = self.activity(values);
        match self.sense {
            ConstraintSense::Le => (lhs - self.rhs).max(0.0),
            ConstraintSense::Ge => (self.rhs - lhs).max(0.0),
            ConstraintSense::Eq => (lhs - self.rhs).abs(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum ObjectiveSense {
    #[default]
    Minimize,
    Maximize,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("duplicate variable name {0:?}")]
    DuplicateVariable(String),
    #[error("duplicate constraint name {0:?}")]
    DuplicateConstraint(String),
    #[error("reference to unknown variable #{0}")]
    UnknownVariable(usize),
    #[error("variable {name:?} has lower bound {lower} above upper bound {upper}")]
    InvalidBounds { name: String, lower: f64, upper: f64 },
    #[error("invalid name {0:?}")]
    InvalidName(String),
    #[error("non-finite coefficient in {0:?}")]
    NonFinite(String),
}

/// Append-only mixed-integer linear model.
#[derive(Debug, Clone, Default)]
pub struct MipModel {
    pub name: String,
    variables: Vec<Variable>,
    constraints: Vec<Constraint>,
    objective: Vec<(VarId, f64)>,
    sense: ObjectiveSense,
    var_names: HashMap<String, VarId>,
    con_names: HashMap<String, usize>,
    integral_objective: bool,
}

fn valid_name(name: &str) -> bool {
    let mut chars = name.chars();
    match chars.next() {
        Some(c) if c.is_ascii_alphabetic() || c == '_' => {}
        _ => return false,
    }
    name.chars().all(|c| c.is_ascii_alphanumeric() || "_.[]".contains(c)) && name.len() <= 255
}

fn merge_terms(terms: impl IntoIterator<Item = (VarId, f64)>) -> Vec<(VarId, f64)> {
    let mut out: Vec<(VarId, f64)> = Vec::new();
    let mut pos: HashMap<VarId, usize> = HashMap::new();
    for (v, c) in terms {
        match pos.get(&v) {
            Some(&p) => out[p].1 += c,
            None => {
                pos.insert(v, out.len());
                out.push((v, c));
            }
        }
    }
    out.retain(|&(_, c)| c != 0.0);
    out
}

impl MipModel {
    pub fn new(name: impl Into<String>) -> Self {
        Self { name: name.into(), ..Self::default() }
    }

    pub fn add_variable(
        &mut self,
        name: impl Into<String>,
        lower: f64,
        upper: f64,
        kind: VarKind,
    ) -> Result<VarId, ModelError> {
        let name = name.into();
        if !valid_name(&name) {
            return Err(ModelError::InvalidName(name));
        }
        if self.var_names.contains_key(&name) {
            return Err(ModelError::DuplicateVariable(name));
        }
        if lower.is_nan() || upper.is_nan() || lower > upper || lower == f64::INFINITY || upper == f64::NEG_INFINITY {
            return Err(ModelError::InvalidBounds { name, lower, upper });
        }
        let id = VarId(self.variables.len());
        self.var_names.insert(name.clone(), id);
        self.variables.push(Variable { name, lower, upper, kind });
        Ok(id)
    }

    pub fn add_binary(&mut self, name: impl Into<String>) -> Result<VarId, ModelError> {
        self.add_variable(name, 0.0, 1.0, VarKind::Binary)
    }

    pub fn add_continuous(&mut self, name: impl Into<String>, lower: f64, upper: f64) -> Result<VarId, ModelError> {
        self.add_variable(name, lower, upper, VarKind::Continuous)
    }

    pub fn add_integer(&mut self, name: impl Into<String>, lower: f64, upper: f64) -> Result<VarId, ModelError> {
        self.add_variable(name, lower, upper, VarKind::Integer)
    }

    fn check_terms(&self, terms: &[(VarId, f64)], context: &str) -> Result<(), ModelError> {
        for &(v, c) in terms {
            if v.0 >= self.variables.len() {
                return Err(ModelError::UnknownVariable(v.0));
            }
            if !c.is_finite() {
                return Err(ModelError::NonFinite(context.to_string()));
            }
        }
        Ok(())
    }

    pub fn add_constraint(
        &mut self,
        name: impl Into<String>,
        terms: impl IntoIterator<Item = (VarId, f64)>,
        sense: ConstraintSense,
        rhs: f64,
    ) -> Result<usize, ModelError> {
        let name = name.into();
        if !valid_name(&name) {
            return Err(ModelError::InvalidName(name));
        }
        if self.con_names.contains_key(&name) {
            return Err(ModelError::DuplicateConstraint(name));
        }
        let terms: Vec<(VarId, f64)> = terms.into_iter().collect();
        self.check_terms(&terms, &name)?;
        if !rhs.is_finite() {
            return Err(ModelError::NonFinite(name));
        }
        let idx = self.constraints.len();
        self.con_names.insert(name.clone(), idx);
        self.constraints.push(Constraint { name, terms: merge_terms(terms), sense, rhs });
        Ok(idx)
    }

    pub fn set_objective(
        &mut self,
        sense: ObjectiveSense,
        terms: impl IntoIterator<Item = (VarId, f64)>,
    ) -> Result<(), ModelError> {
        let terms: Vec<(VarId, f64)> = terms.into_iter().collect();
        self.check_terms(&terms, "objective")?;
        self.sense = sense;
        self.objective = merge_terms(terms);
        Ok(())
    }

    /// Declares that every optimal solution has an integral objective value,
    /// even when the objective touches continuous variables. Backends may use
    /// this to prune with rounded bounds.
    pub fn set_integral_objective(&mut self, integral: bool) {
        self.integral_objective = integral;
    }

    /// True when the hint is set or the objective is an integer combination
    /// of integer variables.
    pub fn has_integral_objective(&self) -> bool {
        self.integral_objective
            || self
                .objective
                .iter()
                .all(|&(v, c)| self.variables[v.0].kind.is_integral() && c.fract() == 0.0)
    }

    pub fn variables(&self) -> &[Variable] {
        &self.variables
    }

    pub fn variable(&self, id: VarId) -> &Variable {
        &self.variables[id.0]
    }

    pub fn var_id(&self, name: &str) -> Option<VarId> {
        self.var_names.get(name).copied()
    }

    pub fn constraints(&self) -> &[Constraint] {
        &self.constraints
    }

    pub fn constraint(&self, name: &str) -> Option<&Constraint> {
        self.con_names.get(name).map(|&i| &self.constraints[i])
    }

    pub fn objective(&self) -> &[(VarId, f64)] {
        &self.objective
    }

    pub fn objective_sense(&self) -> ObjectiveSense {
        self.sense
    }

    pub fn num_variables(&self) -> usize {
        self.variables.len()
    }

    pub fn num_constraints(&self) -> usize {
        self.constraints.len()
    }

    pub fn num_integral(&self) -> usize {
        self.variables.iter().filter(|v| v.kind.is_integral()).count()
    }

    pub fn objective_value(&self, values: &[f64]) -> f64 {
        self.objective.iter().map(|&(v, c)| c * values[v.0]).sum()
    }

    /// Largest violation of any row, bound or integrality requirement.
    pub fn max_violation(&self, values: &[f64]) -> f64 {
        assert_eq!(values.len(), self.variables.len(), "assignment length mismatch");
        let rows = self.constraints.iter().map(|c| c.violation(values)).fold(0.0, f64::max);
        let cols = self
            .variables
            .iter()
            .zip(values)
            .map(|(var, &x)| {
                let bound = (var.lower - x).max(x - var.upper).max(0.0);
                let integrality = if var.kind.is_integral() { (x - x.round()).abs() } else { 0.0 };
                bound.max(integrality)
            })
            .fold(0.0, f64::max);
        rows.max(cols)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    Optimal,
    /// Stopped at the time limit with an incumbent.
    Feasible,
    Infeasible,
    Unbounded,
    /// Stopped at the time limit before any incumbent was found.
    NoSolutionFound,
    Error,
}

impl SolveStatus {
    pub fn has_solution(&self) -> bool {
        matches!(self, SolveStatus::Optimal | SolveStatus::Feasible)
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            SolveStatus::Optimal => "optimal",
            SolveStatus::Feasible => "feasible",
            SolveStatus::Infeasible => "infeasible",
            SolveStatus::Unbounded => "unbounded",
            SolveStatus::NoSolutionFound => "no_solution",
            SolveStatus::Error => "error",
        }
    }
}

impl fmt::Display for SolveStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for SolveStatus {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "optimal" => SolveStatus::Optimal,
            "feasible" => SolveStatus::Feasible,
            "infeasible" => SolveStatus::Infeasible,
            "unbounded" => SolveStatus::Unbounded,
            "no_solution" => SolveStatus::NoSolutionFound,
            "error" => SolveStatus::Error,
            other => return Err(format!("unknown status {other:?}")),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveOutcome {
    pub status: SolveStatus,
    pub objective: Option<f64>,
    /// Indexed by [`VarId`]; present whenever `status.has_solution()`.
    pub values: Option<Vec<f64>>,
    pub seconds: f64,
    pub best_bound: Option<f64>,
    pub nodes: u64,
    pub message: Option<String>,
}

impl SolveOutcome {
    pub fn without_solution(status: SolveStatus, seconds: f64) -> Self {
        Self { status, objective: None, values: None, seconds, best_bound: None, nodes: 0, message: None }
    }

    pub fn value(&self, var: VarId) -> Option<f64> {
        self.values.as_ref().map(|v| v[var.0])
    }

    /// Relative gap in percent between objective and bound.
    pub fn gap_percent(&self) -> Option<f64> {
        let obj = self.objective?;
        if self.status == SolveStatus::Optimal {
            return Some(0.0);
        }
        let bound = self.best_bound?;
        if obj.abs() < 1e-9 {
            return Some(if (obj - bound).abs() < 1e-9 { 0.0 } else { 100.0 });
        }
        Some(100.0 * (obj - bound).abs() / obj.abs())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Capabilities {
    pub time_limit: bool,
    pub warm_start: bool,
    /// Whether several solves may run on different threads at once.
    pub concurrent: bool,
}

#[derive(Debug, Clone, Default)]
pub struct SolveParams {
    pub time_limit: Option<Duration>,
    /// Full assignment indexed by [`VarId`].
    pub warm_start: Option<Vec<f64>>,
    /// Relative gap at which a solve may stop and still report optimal.
    pub mip_gap: f64,
}

#[derive(Debug, Clone, Error, PartialEq)]
pub enum BackendError {
    #[error("solver backend {0:?} is not available")]
    Unavailable(String),
    #[error("solver backend failed: {0}")]
    Failed(String),
}

pub trait SolverBackend: Send + Sync {
    fn name(&self) -> &str;

    fn capabilities(&self) -> Capabilities;

    /// Parameter settings worth recording next to results.
    fn describe(&self) -> Vec<(String, String)> {
        Vec::new()
    }

    fn solve(&self, model: &MipModel, params: &SolveParams) -> Result<SolveOutcome, BackendError>;
}

/// Smallest integer not below a bound reported for an integral
/// objective, allowing for the solver's relative tolerances.
pub fn integral_bound(bound: f64) -> i64 {
    (bound - 1e-5 * (1.0 + bound.abs())).ceil() as i64
}

/// Solves `model`, passing the warm start only to backends that accept one.
pub fn solve(
    model: &MipModel,
    backend: &dyn SolverBackend,
    time_limit: Option<Duration>,
    warm_start: Option<Vec<f64>>,
) -> Result<SolveOutcome, BackendError> {
    let caps = backend.capabilities();
    let params = SolveParams {
        time_limit: if caps.time_limit { time_limit } else { None },
        warm_start: warm_start.filter(|w| caps.warm_start && w.len() == model.num_variables()),
        mip_gap: 0.0,
    };
    backend.solve(model, &params)
}
