//! Precedence-network algorithms over the extended relation.
//!
//! Everything here works on the transitive closure of `E ∪ X_m`. Longest
//! paths are the same on a relation and on its closure because durations
//! are nonnegative, so the closure is used throughout.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::instance::{Instance, ModeVector, Time};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum NetworkError {
    #[error("precedence relation contains a cycle through activity {0}")]
    Cycle(usize),
    #[error("pair ({0}, {1}) references an activity outside 0..{2}")]
    OutOfRange(usize, usize, usize),
    #[error("budget must be a nonnegative integer, got {0:?}")]
    InvalidBudget(String),
}

/// Robustness budget Γ: the number of activities that may deviate at once.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Budget(pub u32);

impl Budget {
    pub fn new(gamma: u32) -> Self {
        Budget(gamma)
    }

    pub fn value(self) -> u32 {
        self.0
    }

    /// Γ beyond the number of real activities behaves like Γ = n.
    pub fn clamped(self, n: usize) -> usize {
        (self.0 as usize).min(n)
    }
}

impl fmt::Display for Budget {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl FromStr for Budget {
    type Err = NetworkError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        s.trim()
            .parse::<u32>()
            .map(Budget)
            .map_err(|_| NetworkError::InvalidBudget(s.to_string()))
    }
}

impl TryFrom<f64> for Budget {
    type Error = NetworkError;

    fn try_from(value: f64) -> Result<Self, Self::Error> {
        if value.is_finite() && value >= 0.0 && value.fract() == 0.0 && value <= f64::from(u32::MAX) {
            Ok(Budget(value as u32))
        } else {
            Err(NetworkError::InvalidBudget(value.to_string()))
        }
    }
}

/// Dense boolean relation over the activities; `contains(i, j)` means `i`
/// finishes before `j` starts.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ExtendedRelation {
    size: usize,
    bits: Vec<bool>,
}

impl ExtendedRelation {
    pub fn empty(size: usize) -> Self {
        Self { size, bits: vec![false; size * size] }
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn contains(&self, i: usize, j: usize) -> bool {
        self.bits[i * self.size + j]
    }

    pub(crate) fn set(&mut self, i: usize, j: usize, value: bool) {
        self.bits[i * self.size + j] = value;
    }

    pub fn comparable(&self, i: usize, j: usize) -> bool {
        self.contains(i, j) || self.contains(j, i)
    }

    /// All pairs in row-major order.
    pub fn pairs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.size)
            .flat_map(move |i| (0..self.size).map(move |j| (i, j)))
            .filter(move |&(i, j)| self.contains(i, j))
    }

    pub fn len(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.bits.iter().any(|&b| b)
    }

    pub fn predecessors(&self, j: usize) -> impl Iterator<Item = usize> + '_ {
        (0..self.size).filter(move |&i| self.contains(i, j))
    }

    pub fn is_transitive(&self) -> bool {
        for i in 0..self.size {
            for p in 0..self.size {
                if !self.contains(i, p) {
                    continue;
                }
                for j in 0..self.size {
                    if self.contains(p, j) && !self.contains(i, j) {
                        return false;
                    }
                }
            }
        }
        true
    }

    pub fn is_antisymmetric(&self) -> bool {
        (0..self.size).all(|i| (i + 1..self.size).all(|j| !(self.contains(i, j) && self.contains(j, i))))
    }

    pub fn is_irreflexive(&self) -> bool {
        (0..self.size).all(|i| !self.contains(i, i))
    }

    /// Closure-minus-base: the pairs that are not implied by `base`.
    pub fn difference(&self, base: &ExtendedRelation) -> Vec<(usize, usize)> {
        self.pairs().filter(|&(i, j)| !base.contains(i, j)).collect()
    }

    /// A topological order (ascending index among ready activities).
    pub fn topological_order(&self) -> Result<Vec<usize>, NetworkError> {
        let n = self.size;
        let mut indeg: Vec<usize> = (0..n).map(|j| self.predecessors(j).count()).collect();
        let mut ready: std::collections::BTreeSet<usize> = (0..n).filter(|&j| indeg[j] == 0).collect();
        let mut order = Vec::with_capacity(n);
        while let Some(&u) = ready.iter().next() {
            ready.remove(&u);
            order.push(u);
            for v in 0..n {
                if self.contains(u, v) {
                    indeg[v] -= 1;
                    if indeg[v] == 0 {
                        ready.insert(v);
                    }
                }
            }
        }
        if order.len() < n {
            let stuck = (0..n).find(|&j| indeg[j] > 0).unwrap_or(0);
            return Err(NetworkError::Cycle(stuck));
        }
        Ok(order)
    }

    /// Inserts `(i, j)` into an already closed relation and restores
    /// closure. The caller guarantees that `j` does not precede `i`.
    pub fn insert_closed(&mut self, i: usize, j: usize) {
        let before: Vec<usize> = (0..self.size).filter(|&a| a == i || self.contains(a, i)).collect();
        let after: Vec<usize> = (0..self.size).filter(|&b| b == j || self.contains(j, b)).collect();
        for &a in &before {
            for &b in &after {
                self.set(a, b, true);
            }
        }
    }
}

/// Smallest transitive relation containing `edges`.
pub fn transitive_closure<'a>(
    edges: impl IntoIterator<Item = &'a (usize, usize)>,
    size: usize,
) -> Result<ExtendedRelation, NetworkError> {
    let mut rel = ExtendedRelation::empty(size);
    for &(i, j) in edges {
        if i >= size || j >= size {
            return Err(NetworkError::OutOfRange(i, j, size));
        }
        if i == j {
            return Err(NetworkError::Cycle(i));
        }
        rel.set(i, j, true);
    }
    let order = rel.topological_order()?;
    // successors of later activities are final before earlier ones are merged
    for &u in order.iter().rev() {
        let direct: Vec<usize> = (0..size).filter(|&v| rel.contains(u, v)).collect();
        for v in direct {
            for w in 0..size {
                if rel.contains(v, w) {
                    rel.set(u, w, true);
                }
            }
        }
    }
    Ok(rel)
}

/// Closure of the instance's own precedence set `T(E)`.
pub fn base_relation(instance: &Instance) -> Result<ExtendedRelation, NetworkError> {
    transitive_closure(&instance.precedences, instance.num_activities())
}

/// Minimal forbidden set of the relation under `modes`, if one exists.
///
/// Antichains are enumerated by increasing size, so the first hit has no
/// forbidden proper subset. A single activity whose mode alone exceeds a
/// capacity counts as a forbidden set of size one.
pub fn find_forbidden_set(
    instance: &Instance,
    modes: &ModeVector,
    relation: &ExtendedRelation,
) -> Option<Vec<usize>> {
    let size = instance.num_activities();
    let usage: Vec<Vec<u32>> = (0..instance.num_renewable())
        .map(|k| (0..size).map(|i| instance.mode(i, modes.get(i)).renewable_req[k]).collect())
        .collect();
    let max_size = size;
    for target in 1..=max_size {
        let mut any_candidate = false;
        for (k, row) in usage.iter().enumerate() {
            let cap = instance.renewable_caps[k];
            let candidates: Vec<usize> = (0..size).filter(|&i| row[i] > 0).collect();
            if candidates.len() < target {
                continue;
            }
            any_candidate = true;
            let mut chosen = Vec::with_capacity(target);
            if let Some(found) = search_antichain(&candidates, 0, target, row, cap, 0, relation, &mut chosen) {
                return Some(found);
            }
        }
        if !any_candidate {
            break;
        }
    }
    None
}

#[allow(clippy::too_many_arguments)]
fn search_antichain(
    candidates: &[usize],
    from: usize,
    target: usize,
    usage: &[u32],
    cap: u32,
    load: u64,
    relation: &ExtendedRelation,
    chosen: &mut Vec<usize>,
) -> Option<Vec<usize>> {
    if chosen.len() == target {
        return (load > u64::from(cap)).then(|| chosen.clone());
    }
    let remaining = target - chosen.len();
    for pos in from..candidates.len() {
        if candidates.len() - pos < remaining {
            break;
        }
        let a = candidates[pos];
        if chosen.iter().any(|&b| relation.comparable(a, b)) {
            continue;
        }
        chosen.push(a);
        let hit = search_antichain(candidates, pos + 1, target, usage, cap, load + u64::from(usage[a]), relation, chosen);
        chosen.pop();
        if hit.is_some() {
            return hit;
        }
    }
    None
}

/// Start times of the earliest-start schedule.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScheduleResult {
    pub starts: Vec<Time>,
}

impl ScheduleResult {
    pub fn makespan(&self) -> Time {
        *self.starts.last().unwrap_or(&0)
    }
}

/// Forward CPM pass: `S_j = max_{i ≺ j} S_i + d_i`, `S_0 = 0`.
pub fn earliest_start_schedule(relation: &ExtendedRelation, durations: &[Time]) -> ScheduleResult {
    let order = relation.topological_order().expect("relation must be acyclic");
    let mut starts = vec![0; relation.size()];
    for &j in &order {
        starts[j] = relation
            .predecessors(j)
            .map(|i| starts[i] + durations[i])
            .max()
            .unwrap_or(0);
    }
    ScheduleResult { starts }
}

/// Worst-case makespan over the budgeted uncertainty set together with a
/// maximising delay pattern and the critical path realising it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WorstCaseResult {
    pub makespan: Time,
    /// `ξ_i ∈ {0, 1}` per activity.
    pub delays: Vec<bool>,
    /// Activities from source to sink along the extended relation.
    pub critical_path: Vec<usize>,
}

impl WorstCaseResult {
    pub fn delayed_activities(&self) -> Vec<usize> {
        self.delays.iter().enumerate().filter(|(_, &d)| d).map(|(i, _)| i).collect()
    }

    pub fn path_edges(&self) -> Vec<(usize, usize)> {
        self.critical_path.windows(2).map(|w| (w[0], w[1])).collect()
    }

    /// Realised durations `d̄ + ξ d̂` under this result's delay pattern.
    pub fn realised_durations(&self, instance: &Instance, modes: &ModeVector) -> Vec<Time> {
        let nominal = modes.nominal_durations(instance);
        let dev = modes.deviations(instance);
        (0..nominal.len()).map(|i| nominal[i] + if self.delays[i] { dev[i] } else { 0 }).collect()
    }
}

/// `value[j][g]`: latest start of `j` reachable along the relation when at
/// most `g` of the activities before it deviate. Nondecreasing in `g`.
pub fn longest_path_levels(
    relation: &ExtendedRelation,
    nominal: &[Time],
    dev: &[Time],
    levels: usize,
) -> Vec<Vec<Time>> {
    let order = relation.topological_order().expect("relation must be acyclic");
    let mut value = vec![vec![0 as Time; levels + 1]; relation.size()];
    for &j in &order {
        for g in 0..=levels {
            let mut best: Option<Time> = None;
            for i in relation.predecessors(j) {
                let plain = value[i][g] + nominal[i];
                best = Some(best.map_or(plain, |b| b.max(plain)));
                if g > 0 {
                    let delayed = value[i][g - 1] + nominal[i] + dev[i];
                    best = Some(best.map_or(delayed, |b| b.max(delayed)));
                }
            }
            value[j][g] = best.unwrap_or(0);
        }
    }
    value
}

/// Exact adversarial evaluation by dynamic programming over the layered
/// network: state `(activity, delays used)`, `Γ + 1` layers.
pub fn worst_case_longest_path(
    instance: &Instance,
    modes: &ModeVector,
    relation: &ExtendedRelation,
    gamma: Budget,
) -> WorstCaseResult {
    let size = relation.size();
    let levels = gamma.clamped(instance.n());
    let nominal = modes.nominal_durations(instance);
    let dev = modes.deviations(instance);
    let value = longest_path_levels(relation, &nominal, &dev, levels);

    let sink = instance.sink();
    let makespan = value[sink][levels];
    let mut delays = vec![false; size];
    let mut path = vec![sink];
    let (mut j, mut g) = (sink, levels);
    // lowest predecessor index first, undelayed before delayed
    while relation.predecessors(j).next().is_some() {
        let target = value[j][g];
        let mut step = None;
        for i in relation.predecessors(j) {
            if value[i][g] + nominal[i] == target {
                step = Some((i, false));
                break;
            }
            if g > 0 && value[i][g - 1] + nominal[i] + dev[i] == target {
                step = Some((i, true));
                break;
            }
        }
        let (i, delayed) = step.expect("DP backtrack must find a predecessor");
        if delayed {
            delays[i] = true;
            g -= 1;
        }
        path.push(i);
        j = i;
    }
    path.reverse();
    WorstCaseResult { makespan, delays, critical_path: path }
}

/// Runs the earliest-start schedule for `durations` and checks the
/// renewable usage at every instant against the capacities.
pub fn max_parallel_resource_check(
    instance: &Instance,
    modes: &ModeVector,
    relation: &ExtendedRelation,
    durations: &[Time],
) -> bool {
    let schedule = earliest_start_schedule(relation, durations);
    let mut events: Vec<Time> = schedule.starts.clone();
    events.sort_unstable();
    events.dedup();
    for &t in &events {
        for k in 0..instance.num_renewable() {
            let load: u64 = (0..relation.size())
                .filter(|&i| durations[i] > 0 && schedule.starts[i] <= t && t < schedule.starts[i] + durations[i])
                .map(|i| u64::from(instance.mode(i, modes.get(i)).renewable_req[k]))
                .sum();
            if load > u64::from(instance.renewable_caps[k]) {
                return false;
            }
        }
    }
    true
}
