//! Pieces shared by the compact model and the Benders master: mode and
//! sequencing variables, resource flows, and the big-M start-time rows.

use petgraph::algo::dinics;
use petgraph::graph::{DiGraph, NodeIndex};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::instance::{upper_bound_n, Instance, ModeVector, Time};
use crate::milp::{ConstraintSense, MipModel, ModelError, VarId};
use crate::network::{base_relation, transitive_closure, ExtendedRelation};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FormulationOptions {
    /// Fix variables and drop rows whose value is implied by the project
    /// network. Off keeps every row of the unreduced model.
    pub reductions: bool,
    /// Use one big-M row per pair with `Σ_m d̄_im x_im` instead of one row
    /// per mode.
    pub aggregate_modes: bool,
}

impl Default for FormulationOptions {
    fn default() -> Self {
        Self { reductions: true, aggregate_modes: false }
    }
}

#[derive(Debug, Error)]
pub enum FormulationError {
    #[error("instance is not valid: {0}")]
    InvalidInstance(String),
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ExtractionError {
    #[error("activity {0} has no mode with x >= 0.5")]
    NoMode(usize),
    #[error("rounded sequencing variables are not transitive")]
    NotTransitive,
    #[error("rounded sequencing variables contain a cycle")]
    Cyclic,
    #[error("rounded sequencing variables miss project precedence ({0}, {1})")]
    MissingPrecedence(usize, usize),
    #[error("solution vector is missing")]
    NoValues,
}

/// Variables of the first-stage structure.
#[derive(Debug, Clone)]
pub struct StructureVars {
    pub size: usize,
    pub renewable: usize,
    /// `x[i][m]`
    pub x: Vec<Vec<VarId>>,
    /// `y[i][j]` over all of `V²`
    pub y: Vec<Vec<VarId>>,
    /// `f[(i * size + j) * K + k]`, absent where the flow is fixed to 0
    pub f: Vec<Option<VarId>>,
    /// Bounds used for `y`, `None` when free.
    y_fixed: Vec<Vec<Option<bool>>>,
    x_fixed_zero: Vec<Vec<bool>>,
}

impl StructureVars {
    pub fn flow(&self, i: usize, j: usize, k: usize) -> Option<VarId> {
        self.f[(i * self.size + j) * self.renewable + k]
    }

    pub fn y_fixed(&self, i: usize, j: usize) -> Option<bool> {
        self.y_fixed[i][j]
    }

    pub fn x_fixed_zero(&self, i: usize, m: usize) -> bool {
        self.x_fixed_zero[i][m]
    }
}

/// A resource flow `f_ijk`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Flow {
    pub from: usize,
    pub to: usize,
    pub resource: usize,
    pub amount: f64,
}

/// Mode choice and extended precedence relation `T(E ∪ X_m)`.
#[derive(Debug, Clone, PartialEq)]
pub struct FirstStageSolution {
    pub modes: ModeVector,
    pub relation: ExtendedRelation,
    pub flows: Vec<Flow>,
}

impl FirstStageSolution {
    /// Pairs of the relation outside `T(E)`.
    pub fn selection(&self, instance: &Instance) -> Vec<(usize, usize)> {
        let base = base_relation(instance).expect("valid instance");
        self.relation.difference(&base)
    }
}

fn mode_fits_alone(instance: &Instance, i: usize, m: usize) -> bool {
    let mode = instance.mode(i, m);
    mode.renewable_req.iter().zip(&instance.renewable_caps).all(|(r, c)| r <= c)
        && mode.nonrenewable_req.iter().zip(&instance.nonrenewable_caps).all(|(r, c)| r <= c)
}

/// Adds `x`, `y`, `f` with the sequencing, flow, mode and non-renewable
/// constraints.
pub fn add_structure(
    model: &mut MipModel,
    instance: &Instance,
    opts: &FormulationOptions,
) -> Result<StructureVars, FormulationError> {
    let size = instance.num_activities();
    let sink = instance.sink();
    let kr = instance.num_renewable();
    let base = base_relation(instance).map_err(|e| FormulationError::InvalidInstance(e.to_string()))?;

    let mut x_fixed_zero = Vec::with_capacity(size);
    let mut x = Vec::with_capacity(size);
    for i in 0..size {
        let mut row = Vec::new();
        let mut fixed = Vec::new();
        for m in 0..instance.modes(i).len() {
            let zero = opts.reductions && !mode_fits_alone(instance, i, m);
            let ub = if zero { 0.0 } else { 1.0 };
            row.push(model.add_variable(format!("x_{i}_{}", m + 1), 0.0, ub, crate::milp::VarKind::Binary)?);
            fixed.push(zero);
        }
        x.push(row);
        x_fixed_zero.push(fixed);
    }

    let mut y_fixed = vec![vec![None; size]; size];
    if opts.reductions {
        for i in 0..size {
            for j in 0..size {
                y_fixed[i][j] = if base.contains(i, j) || (i == sink && j == sink) {
                    Some(true)
                } else if base.contains(j, i) || i == j || j == 0 || i == sink {
                    Some(false)
                } else {
                    None
                };
            }
        }
    }
    let mut y = Vec::with_capacity(size);
    for (i, fixed_row) in y_fixed.iter().enumerate() {
        let mut row = Vec::with_capacity(size);
        for (j, fixed) in fixed_row.iter().enumerate() {
            let (lo, hi) = match fixed {
                Some(true) => (1.0, 1.0),
                Some(false) => (0.0, 0.0),
                None => (0.0, 1.0),
            };
            row.push(model.add_variable(format!("y_{i}_{j}"), lo, hi, crate::milp::VarKind::Binary)?);
        }
        y.push(row);
    }
    if !opts.reductions {
        let mut fixed_one: Vec<(usize, usize)> = instance.precedences.iter().copied().collect();
        fixed_one.push((sink, sink));
        for (i, j) in fixed_one {
            model.add_constraint(format!("fix_{i}_{j}"), [(y[i][j], 1.0)], ConstraintSense::Eq, 1.0)?;
        }
    }

    let ub = |i: usize, j: usize| y_fixed[i][j].map_or(1.0, |b| if b { 1.0 } else { 0.0 });
    let lb = |i: usize, j: usize| y_fixed[i][j].map_or(0.0, |b| if b { 1.0 } else { 0.0 });

    for i in 0..size {
        for j in i + 1..size {
            if opts.reductions && ub(i, j) + ub(j, i) <= 1.0 {
                continue;
            }
            model.add_constraint(format!("asym_{i}_{j}"), [(y[i][j], 1.0), (y[j][i], 1.0)], ConstraintSense::Le, 1.0)?;
        }
    }
    for i in 0..size {
        for j in 0..size {
            if i == j {
                continue;
            }
            for p in 0..size {
                if p == i || p == j {
                    continue;
                }
                if opts.reductions && (lb(i, j) == 1.0 || ub(i, p) == 0.0 || ub(p, j) == 0.0) {
                    continue;
                }
                model.add_constraint(
                    format!("trans_{i}_{j}_{p}"),
                    [(y[i][j], 1.0), (y[i][p], -1.0), (y[p][j], -1.0)],
                    ConstraintSense::Ge,
                    -1.0,
                )?;
            }
        }
    }

    let mut f = vec![None; size * size * kr];
    for i in 0..size {
        if i == sink {
            continue;
        }
        for j in 1..size {
            for k in 0..kr {
                let cap = instance.flow_capacity(i, j, k) as f64;
                if opts.reductions && (i == j || ub(i, j) == 0.0 || cap == 0.0) {
                    continue;
                }
                let fixed_arc = opts.reductions && lb(i, j) == 1.0;
                let upper = if fixed_arc { cap } else { f64::INFINITY };
                let var = model.add_continuous(format!("f_{i}_{j}_{}", k + 1), 0.0, upper)?;
                if !fixed_arc {
                    model.add_constraint(
                        format!("cap_{i}_{j}_{}", k + 1),
                        [(var, 1.0), (y[i][j], -cap)],
                        ConstraintSense::Le,
                        0.0,
                    )?;
                }
                f[(i * size + j) * kr + k] = Some(var);
            }
        }
    }
    let demand = |model: &MipModel, i: usize, k: usize| -> Vec<(VarId, f64)> {
        let _ = model;
        (0..instance.modes(i).len())
            .map(|m| (x[i][m], -(instance.flow_requirement(i, m, k) as f64)))
            .collect()
    };
    for k in 0..kr {
        for j in 1..size {
            let mut terms: Vec<(VarId, f64)> =
                (0..size).filter(|&i| i != sink).filter_map(|i| f[(i * size + j) * kr + k]).map(|v| (v, 1.0)).collect();
            terms.extend(demand(model, j, k));
            model.add_constraint(format!("inflow_{j}_{}", k + 1), terms, ConstraintSense::Eq, 0.0)?;
        }
        for i in 0..size {
            if i == sink {
                continue;
            }
            let mut terms: Vec<(VarId, f64)> =
                (1..size).filter_map(|j| f[(i * size + j) * kr + k]).map(|v| (v, 1.0)).collect();
            terms.extend(demand(model, i, k));
            model.add_constraint(format!("outflow_{i}_{}", k + 1), terms, ConstraintSense::Eq, 0.0)?;
        }
    }

    for (i, row) in x.iter().enumerate() {
        model.add_constraint(format!("mode_{i}"), row.iter().map(|&v| (v, 1.0)), ConstraintSense::Eq, 1.0)?;
    }
    for (k, &cap) in instance.nonrenewable_caps.iter().enumerate() {
        let terms: Vec<(VarId, f64)> = (0..size)
            .flat_map(|i| {
                let x = &x;
                (0..instance.modes(i).len()).map(move |m| (x[i][m], instance.mode(i, m).nonrenewable_req[k] as f64))
            })
            .collect();
        model.add_constraint(format!("nonrenew_{}", k + 1), terms, ConstraintSense::Le, cap as f64)?;
    }

    Ok(StructureVars { size, renewable: kr, x, y, f, y_fixed, x_fixed_zero })
}

/// Start-time variables `S_iγ`; `levels` copies of the network.
pub fn add_start_times(
    model: &mut MipModel,
    instance: &Instance,
    levels: usize,
    opts: &FormulationOptions,
) -> Result<Vec<Vec<VarId>>, FormulationError> {
    let big_m = upper_bound_n(instance) as f64;
    let upper = if opts.reductions { big_m } else { f64::INFINITY };
    let mut s = Vec::new();
    for i in 0..instance.num_activities() {
        let mut row = Vec::new();
        for g in 0..levels {
            let name = if levels == 1 { format!("S_{i}") } else { format!("S_{i}_{g}") };
            row.push(model.add_continuous(name, 0.0, upper)?);
        }
        s.push(row);
    }
    model.add_constraint("start", [(s[0][0], 1.0)], ConstraintSense::Eq, 0.0)?;
    Ok(s)
}

/// Big-M rows linking start times: within a level with nominal durations
/// and, when `s` has more than one level, from level γ to γ+1 with
/// worst-case durations.
pub fn add_precedence_rows(
    model: &mut MipModel,
    instance: &Instance,
    sv: &StructureVars,
    s: &[Vec<VarId>],
    opts: &FormulationOptions,
) -> Result<(), FormulationError> {
    let size = instance.num_activities();
    let sink = instance.sink();
    let levels = s[0].len();
    let big_m = upper_bound_n(instance) as f64;

    // (from level, to level, use worst-case durations)
    let mut families: Vec<(usize, usize, bool)> = (0..levels).map(|g| (g, g, false)).collect();
    families.extend((0..levels.saturating_sub(1)).map(|g| (g, g + 1, true)));

    for i in 0..size {
        for j in 0..size {
            let keep = if opts.reductions {
                sv.y_fixed(i, j) != Some(false)
            } else {
                true
            };
            if !keep {
                continue;
            }
            let fixed_one = opts.reductions && sv.y_fixed(i, j) == Some(true);
            for &(g_from, g_to, worst) in &families {
                if opts.reductions && i == j && !(i == sink && worst) {
                    continue;
                }
                let duration = |m: usize| {
                    let mode = instance.mode(i, m);
                    f64::from(if worst { mode.worst_duration() } else { mode.nominal_duration })
                };
                let tag = if worst { "dev" } else { "nom" };
                // S_j - S_i - d x - N y >= -N, or >= 0 once y is fixed to 1
                let mut build = |name: String, dur_terms: Vec<(VarId, f64)>| -> Result<(), FormulationError> {
                    let mut terms = vec![(s[j][g_to], 1.0), (s[i][g_from], -1.0)];
                    terms.extend(dur_terms);
                    let rhs = if fixed_one {
                        0.0
                    } else {
                        terms.push((sv.y[i][j], -big_m));
                        -big_m
                    };
                    model.add_constraint(name, terms, ConstraintSense::Ge, rhs)?;
                    Ok(())
                };
                if opts.aggregate_modes {
                    let terms = (0..instance.modes(i).len()).map(|m| (sv.x[i][m], -duration(m))).collect();
                    build(format!("{tag}_{i}_{j}_{g_from}"), terms)?;
                } else {
                    for m in 0..instance.modes(i).len() {
                        if opts.reductions && sv.x_fixed_zero(i, m) {
                            continue;
                        }
                        build(format!("{tag}_{i}_{j}_{}_{g_from}", m + 1), vec![(sv.x[i][m], -duration(m))])?;
                    }
                }
            }
        }
    }
    Ok(())
}

/// Rounds `x` (argmax, ≥ 0.5) and `y` (≥ 0.5) and checks that the
/// resulting relation is a closed, acyclic extension of the project.
pub fn extract_first_stage(
    instance: &Instance,
    sv: &StructureVars,
    values: &[f64],
) -> Result<FirstStageSolution, ExtractionError> {
    let size = sv.size;
    let mut modes = Vec::with_capacity(size);
    for (i, row) in sv.x.iter().enumerate() {
        let (best, value) = row
            .iter()
            .enumerate()
            .map(|(m, v)| (m, values[v.0]))
            .fold((0, f64::NEG_INFINITY), |acc, cur| if cur.1 > acc.1 { cur } else { acc });
        if value < 0.5 {
            return Err(ExtractionError::NoMode(i));
        }
        modes.push(best);
    }
    let mut edges = Vec::new();
    for i in 0..size {
        for j in 0..size {
            if i != j && values[sv.y[i][j].0] >= 0.5 {
                edges.push((i, j));
            }
        }
    }
    for &(i, j) in &instance.precedences {
        if values[sv.y[i][j].0] < 0.5 {
            return Err(ExtractionError::MissingPrecedence(i, j));
        }
    }
    let closure = transitive_closure(&edges, size).map_err(|_| ExtractionError::Cyclic)?;
    if closure.len() != edges.len() {
        return Err(ExtractionError::NotTransitive);
    }
    let mut flows = Vec::new();
    for i in 0..size {
        for j in 0..size {
            for k in 0..sv.renewable {
                if let Some(v) = sv.flow(i, j, k) {
                    let amount = values[v.0];
                    if amount > 1e-9 {
                        flows.push(Flow { from: i, to: j, resource: k, amount });
                    }
                }
            }
        }
    }
    Ok(FirstStageSolution { modes: ModeVector(modes), relation: closure, flows })
}

/// Resource flows certifying that `relation` is resource feasible under
/// `modes`, by one max-flow per renewable resource. `None` when some
/// resource cannot be routed along the relation.
pub fn resource_flows(instance: &Instance, modes: &ModeVector, relation: &ExtendedRelation) -> Option<Vec<Flow>> {
    let size = instance.num_activities();
    let sink = instance.sink();
    let mut flows = Vec::new();
    for k in 0..instance.num_renewable() {
        let req: Vec<u64> = (0..size).map(|i| instance.flow_requirement(i, modes.get(i), k) as u64).collect();
        let mut g: DiGraph<(), u64> = DiGraph::new();
        let src = g.add_node(());
        let outs: Vec<NodeIndex> = (0..size).map(|_| g.add_node(())).collect();
        let ins: Vec<NodeIndex> = (0..size).map(|_| g.add_node(())).collect();
        let dst = g.add_node(());
        let mut arcs = Vec::new();
        for i in 0..size {
            if i != sink && req[i] > 0 {
                g.add_edge(src, outs[i], req[i]);
            }
            if i != 0 && req[i] > 0 {
                g.add_edge(ins[i], dst, req[i]);
            }
        }
        for i in 0..size {
            for j in 0..size {
                if i != sink && j != 0 && relation.contains(i, j) {
                    let cap = req[i].min(req[j]);
                    if cap > 0 {
                        let e = g.add_edge(outs[i], ins[j], cap);
                        arcs.push((e, i, j));
                    }
                }
            }
        }
        let total: u64 = (1..size).map(|j| req[j]).sum();
        let (value, edge_flows) = dinics(&g, src, dst);
        if value != total {
            return None;
        }
        for (e, i, j) in arcs {
            let amount = edge_flows[e.index()];
            if amount > 0 {
                flows.push(Flow { from: i, to: j, resource: k, amount: amount as f64 });
            }
        }
    }
    Some(flows)
}

/// Fills `x`, `y` and `f` of `values` from a first-stage solution.
pub fn write_structure(sv: &StructureVars, solution: &FirstStageSolution, values: &mut [f64]) {
    for (i, row) in sv.x.iter().enumerate() {
        for (m, v) in row.iter().enumerate() {
            values[v.0] = if solution.modes.get(i) == m { 1.0 } else { 0.0 };
        }
    }
    let sink = sv.size - 1;
    for i in 0..sv.size {
        for j in 0..sv.size {
            let on = solution.relation.contains(i, j) || (i == sink && j == sink);
            values[sv.y[i][j].0] = if on { 1.0 } else { 0.0 };
        }
    }
    for v in sv.f.iter().flatten() {
        values[v.0] = 0.0;
    }
    for flow in &solution.flows {
        if let Some(v) = sv.flow(flow.from, flow.to, flow.resource) {
            values[v.0] += flow.amount;
        }
    }
}

/// Per-level start times for a fixed first stage: the longest-path table
/// with at most γ deviations.
pub fn level_start_times(instance: &Instance, solution: &FirstStageSolution, levels: usize) -> Vec<Vec<Time>> {
    let nominal = solution.modes.nominal_durations(instance);
    let dev = solution.modes.deviations(instance);
    crate::network::longest_path_levels(&solution.relation, &nominal, &dev, levels.saturating_sub(1))
}
