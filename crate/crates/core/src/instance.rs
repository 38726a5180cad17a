//! Project data model: activities, modes, resources and the precedence DAG.

use std::collections::{BTreeSet, VecDeque};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Integral time unit used for all durations, start times and makespans.
pub type Time = i64;

/// One way of executing an activity.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Mode {
    pub nominal_duration: u32,
    pub max_deviation: u32,
    /// Per renewable resource, units held while the activity runs.
    pub renewable_req: Vec<u32>,
    /// Per non-renewable resource, units consumed over the whole project.
    pub nonrenewable_req: Vec<u32>,
}

impl Mode {
    pub fn new(nominal_duration: u32, max_deviation: u32) -> Self {
        Self {
            nominal_duration,
            max_deviation,
            renewable_req: Vec::new(),
            nonrenewable_req: Vec::new(),
        }
    }

    pub fn with_renewable(mut self, req: Vec<u32>) -> Self {
        self.renewable_req = req;
        self
    }

    pub fn with_nonrenewable(mut self, req: Vec<u32>) -> Self {
        self.nonrenewable_req = req;
        self
    }

    /// Duration when the full deviation is realised.
    pub fn worst_duration(&self) -> u32 {
        self.nominal_duration + self.max_deviation
    }

    fn dummy(renewable: usize, nonrenewable: usize) -> Self {
        Self {
            nominal_duration: 0,
            max_deviation: 0,
            renewable_req: vec![0; renewable],
            nonrenewable_req: vec![0; nonrenewable],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Activity {
    pub modes: Vec<Mode>,
}

impl Activity {
    pub fn new(modes: Vec<Mode>) -> Self {
        Self { modes }
    }
}

/// A multi-mode project with dummy source `0` and dummy sink `n + 1`.
///
/// Activities are stored densely; the dummies are explicit entries of
/// `activities`. The struct does no validation on construction, call
/// [`Instance::validate`] before handing it to a solver.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Instance {
    pub activities: Vec<Activity>,
    pub precedences: BTreeSet<(usize, usize)>,
    pub renewable_caps: Vec<u32>,
    pub nonrenewable_caps: Vec<u32>,
}

impl Instance {
    pub fn new(
        activities: Vec<Activity>,
        precedences: impl IntoIterator<Item = (usize, usize)>,
        renewable_caps: Vec<u32>,
        nonrenewable_caps: Vec<u32>,
    ) -> Self {
        Self {
            activities,
            precedences: precedences.into_iter().collect(),
            renewable_caps,
            nonrenewable_caps,
        }
    }

    /// Builds an instance from the non-dummy activities only. Dummy source
    /// and sink are added, and every activity without a predecessor
    /// (successor) is linked to the source (sink). `precedences` use the
    /// final numbering, i.e. the first real activity is `1`.
    pub fn from_real_activities(
        real: Vec<Activity>,
        precedences: impl IntoIterator<Item = (usize, usize)>,
        renewable_caps: Vec<u32>,
        nonrenewable_caps: Vec<u32>,
    ) -> Self {
        let n = real.len();
        let dummy = Activity::new(vec![Mode::dummy(renewable_caps.len(), nonrenewable_caps.len())]);
        let mut activities = Vec::with_capacity(n + 2);
        activities.push(dummy.clone());
        activities.extend(real);
        activities.push(dummy);
        let mut edges: BTreeSet<(usize, usize)> = precedences.into_iter().collect();
        for i in 1..=n {
            if !edges.iter().any(|&(_, j)| j == i) {
                edges.insert((0, i));
            }
            if !edges.iter().any(|&(h, _)| h == i) {
                edges.insert((i, n + 1));
            }
        }
        if n == 0 {
            edges.insert((0, 1));
        }
        Self {
            activities,
            precedences: edges,
            renewable_caps,
            nonrenewable_caps,
        }
    }

    /// Number of non-dummy activities.
    pub fn n(&self) -> usize {
        self.activities.len().saturating_sub(2)
    }

    /// `|V| = n + 2`.
    pub fn num_activities(&self) -> usize {
        self.activities.len()
    }

    pub fn source(&self) -> usize {
        0
    }

    pub fn sink(&self) -> usize {
        self.activities.len() - 1
    }

    pub fn is_dummy(&self, i: usize) -> bool {
        i == 0 || i == self.sink()
    }

    pub fn num_renewable(&self) -> usize {
        self.renewable_caps.len()
    }

    pub fn num_nonrenewable(&self) -> usize {
        self.nonrenewable_caps.len()
    }

    pub fn modes(&self, i: usize) -> &[Mode] {
        &self.activities[i].modes
    }

    pub fn mode(&self, i: usize, m: usize) -> &Mode {
        &self.activities[i].modes[m]
    }

    /// Renewable requirement seen by the resource-flow network: the source
    /// supplies and the sink absorbs the full capacity `R_k`, every other
    /// activity uses its mode's requirement.
    pub fn flow_requirement(&self, i: usize, m: usize, k: usize) -> u32 {
        if self.is_dummy(i) {
            self.renewable_caps[k]
        } else {
            self.mode(i, m).renewable_req[k]
        }
    }

    /// Bound on the resource flow `i -> j` used by the flow network, i.e.
    /// [`flow_bound_p`] evaluated on [`Instance::flow_requirement`].
    pub fn flow_capacity(&self, i: usize, j: usize, k: usize) -> u32 {
        let max_i = (0..self.modes(i).len()).map(|m| self.flow_requirement(i, m, k)).max().unwrap_or(0);
        let max_j = (0..self.modes(j).len()).map(|m| self.flow_requirement(j, m, k)).max().unwrap_or(0);
        max_i.min(max_j)
    }

    /// Copy of the instance in which every mode's deviation has been added to
    /// its nominal duration and the deviation set to zero.
    pub fn with_worst_case_durations(&self) -> Instance {
        let mut out = self.clone();
        for activity in &mut out.activities {
            for mode in &mut activity.modes {
                mode.nominal_duration += mode.max_deviation;
                mode.max_deviation = 0;
            }
        }
        out
    }

    /// Copy with all deviations set to zero (the deterministic instance).
    pub fn nominal(&self) -> Instance {
        let mut out = self.clone();
        for mode in out.activities.iter_mut().flat_map(|a| a.modes.iter_mut()) {
            mode.max_deviation = 0;
        }
        out
    }

    pub fn validate(&self) -> ValidationReport {
        validate(self)
    }

    pub fn to_canonical_json(&self) -> String {
        let view = CanonicalInstance {
            n: self.n(),
            renewable_caps: self.renewable_caps.clone(),
            nonrenewable_caps: self.nonrenewable_caps.clone(),
            precedences: self.precedences.iter().map(|&(i, j)| [i, j]).collect(),
            activities: self.activities.clone(),
        };
        let mut text = serde_json::to_string_pretty(&view).expect("instance serialises");
        text.push('\n');
        text
    }

    pub fn from_json(text: &str) -> Result<Instance, InstanceJsonError> {
        let view: CanonicalInstance = serde_json::from_str(text)?;
        if view.activities.len() != view.n + 2 {
            return Err(InstanceJsonError::CountMismatch {
                n: view.n,
                activities: view.activities.len(),
            });
        }
        Ok(Instance {
            activities: view.activities,
            precedences: view.precedences.into_iter().map(|[i, j]| (i, j)).collect(),
            renewable_caps: view.renewable_caps,
            nonrenewable_caps: view.nonrenewable_caps,
        })
    }
}

/// On-disk JSON layout of an [`Instance`]; field order is the key order.
#[derive(Serialize, Deserialize)]
struct CanonicalInstance {
    n: usize,
    renewable_caps: Vec<u32>,
    nonrenewable_caps: Vec<u32>,
    precedences: Vec<[usize; 2]>,
    activities: Vec<Activity>,
}

#[derive(Debug, Error)]
pub enum InstanceJsonError {
    #[error("malformed instance JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("field n = {n} disagrees with {activities} activities (expected n + 2)")]
    CountMismatch { n: usize, activities: usize },
}

/// Chosen mode index (0-based) for every activity, dummies included.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ModeVector(pub Vec<usize>);

impl ModeVector {
    /// Every activity in its first mode.
    pub fn first_modes(instance: &Instance) -> Self {
        ModeVector(vec![0; instance.num_activities()])
    }

    pub fn get(&self, i: usize) -> usize {
        self.0[i]
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn is_valid_for(&self, instance: &Instance) -> bool {
        self.0.len() == instance.num_activities()
            && self.0.iter().enumerate().all(|(i, &m)| m < instance.modes(i).len())
    }

    /// Total non-renewable consumption stays within every `R'_k`.
    pub fn is_nonrenewable_feasible(&self, instance: &Instance) -> bool {
        (0..instance.num_nonrenewable()).all(|k| {
            let used: u64 = self
                .0
                .iter()
                .enumerate()
                .map(|(i, &m)| u64::from(instance.mode(i, m).nonrenewable_req[k]))
                .sum();
            used <= u64::from(instance.nonrenewable_caps[k])
        })
    }

    /// Nominal duration of each activity under this mode choice.
    pub fn nominal_durations(&self, instance: &Instance) -> Vec<Time> {
        self.0
            .iter()
            .enumerate()
            .map(|(i, &m)| Time::from(instance.mode(i, m).nominal_duration))
            .collect()
    }

    pub fn deviations(&self, instance: &Instance) -> Vec<Time> {
        self.0
            .iter()
            .enumerate()
            .map(|(i, &m)| Time::from(instance.mode(i, m).max_deviation))
            .collect()
    }

    /// 1-based mode numbers of the non-dummy activities, PSPLIB style.
    pub fn display_real(&self) -> String {
        let inner = &self.0[1..self.0.len().saturating_sub(1)];
        inner.iter().map(|m| (m + 1).to_string()).collect::<Vec<_>>().join(",")
    }
}

/// `N = sum_i max_m (d̄_im + d̂_im)`, the big-M used by the formulations.
pub fn upper_bound_n(instance: &Instance) -> Time {
    instance
        .activities
        .iter()
        .map(|a| a.modes.iter().map(|m| Time::from(m.worst_duration())).max().unwrap_or(0))
        .sum()
}

/// `P_ijk = min(max_m r_imk, max_m r_jmk)` on the instance's raw
/// requirement profiles.
pub fn flow_bound_p(instance: &Instance, i: usize, j: usize, k: usize) -> u32 {
    let peak = |a: usize| instance.modes(a).iter().map(|m| m.renewable_req[k]).max().unwrap_or(0);
    peak(i).min(peak(j))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    TooFewActivities(usize),
    NoModes { activity: usize },
    ResourceArity { activity: usize, mode: usize },
    EdgeOutOfRange { from: usize, to: usize },
    SelfLoop { activity: usize },
    Cycle { activities: Vec<usize> },
    NotReachableFromSource { activity: usize },
    DoesNotReachSink { activity: usize },
    DummyNotTrivial { activity: usize },
    ModeExceedsCapacity { activity: usize, mode: usize, resource: usize, required: u32, capacity: u32 },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::TooFewActivities(count) => {
                write!(f, "{count} activities; need at least the two dummies")
            }
            Violation::NoModes { activity } => write!(f, "activity {activity} has no modes"),
            Violation::ResourceArity { activity, mode } => write!(
                f,
                "activity {activity} mode {mode} has a requirement vector of the wrong length"
            ),
            Violation::EdgeOutOfRange { from, to } => {
                write!(f, "precedence ({from}, {to}) references an unknown activity")
            }
            Violation::SelfLoop { activity } => write!(f, "self loop on activity {activity}"),
            Violation::Cycle { activities } => write!(f, "precedence cycle through {activities:?}"),
            Violation::NotReachableFromSource { activity } => {
                write!(f, "activity {activity} is not preceded by the source")
            }
            Violation::DoesNotReachSink { activity } => {
                write!(f, "activity {activity} does not precede the sink")
            }
            Violation::DummyNotTrivial { activity } => write!(
                f,
                "dummy activity {activity} must have one mode with zero duration, deviation and usage"
            ),
            Violation::ModeExceedsCapacity { activity, mode, resource, required, capacity } => write!(
                f,
                "activity {activity} mode {mode} needs {required} of renewable resource {resource} (capacity {capacity})"
            ),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_empty(&self) -> bool {
        self.violations.is_empty()
    }

    /// True when the only findings are modes that exceed a renewable capacity.
    /// Such modes are kept in the data; the formulations never select them.
    pub fn is_solvable(&self) -> bool {
        self.violations
            .iter()
            .all(|v| matches!(v, Violation::ModeExceedsCapacity { .. }))
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.violations.is_empty() {
            return write!(f, "ok");
        }
        for (idx, v) in self.violations.iter().enumerate() {
            if idx > 0 {
                writeln!(f)?;
            }
            write!(f, "{v}")?;
        }
        Ok(())
    }
}

fn validate(instance: &Instance) -> ValidationReport {
    let mut violations = Vec::new();
    let size = instance.activities.len();
    if size < 2 {
        violations.push(Violation::TooFewActivities(size));
        return ValidationReport { violations };
    }
    let kr = instance.num_renewable();
    let kn = instance.num_nonrenewable();

    for (i, activity) in instance.activities.iter().enumerate() {
        if activity.modes.is_empty() {
            violations.push(Violation::NoModes { activity: i });
            continue;
        }
        for (m, mode) in activity.modes.iter().enumerate() {
            if mode.renewable_req.len() != kr || mode.nonrenewable_req.len() != kn {
                violations.push(Violation::ResourceArity { activity: i, mode: m });
                continue;
            }
            for (k, (&req, &cap)) in mode.renewable_req.iter().zip(&instance.renewable_caps).enumerate() {
                if req > cap {
                    violations.push(Violation::ModeExceedsCapacity {
                        activity: i,
                        mode: m,
                        resource: k,
                        required: req,
                        capacity: cap,
                    });
                }
            }
        }
        if instance.is_dummy(i) {
            let trivial = activity.modes.len() == 1 && {
                let mode = &activity.modes[0];
                mode.nominal_duration == 0
                    && mode.max_deviation == 0
                    && mode.renewable_req.iter().all(|&r| r == 0)
                    && mode.nonrenewable_req.iter().all(|&r| r == 0)
            };
            if !trivial {
                violations.push(Violation::DummyNotTrivial { activity: i });
            }
        }
    }

    let mut succ = vec![Vec::new(); size];
    let mut pred = vec![Vec::new(); size];
    for &(i, j) in &instance.precedences {
        if i >= size || j >= size {
            violations.push(Violation::EdgeOutOfRange { from: i, to: j });
            continue;
        }
        if i == j {
            violations.push(Violation::SelfLoop { activity: i });
            continue;
        }
        succ[i].push(j);
        pred[j].push(i);
    }

    if let Some(cycle) = find_cycle(&succ) {
        violations.push(Violation::Cycle { activities: cycle });
    }

    let from_source = reachable(0, &succ);
    let to_sink = reachable(size - 1, &pred);
    for i in 0..size {
        if !from_source[i] {
            violations.push(Violation::NotReachableFromSource { activity: i });
        }
        if !to_sink[i] {
            violations.push(Violation::DoesNotReachSink { activity: i });
        }
    }
    ValidationReport { violations }
}

fn reachable(start: usize, adj: &[Vec<usize>]) -> Vec<bool> {
    let mut seen = vec![false; adj.len()];
    let mut queue = VecDeque::from([start]);
    seen[start] = true;
    while let Some(u) = queue.pop_front() {
        for &v in &adj[u] {
            if !seen[v] {
                seen[v] = true;
                queue.push_back(v);
            }
        }
    }
    seen
}

/// Returns the activities of one directed cycle, if any.
fn find_cycle(succ: &[Vec<usize>]) -> Option<Vec<usize>> {
    #[derive(Clone, Copy, PartialEq)]
    enum Mark {
        New,
        Open,
        Done,
    }
    let n = succ.len();
    let mut mark = vec![Mark::New; n];
    let mut parent = vec![usize::MAX; n];
    for root in 0..n {
        if mark[root] != Mark::New {
            continue;
        }
        let mut stack = vec![(root, 0usize)];
        mark[root] = Mark::Open;
        while let Some(&mut (u, ref mut next)) = stack.last_mut() {
            if *next < succ[u].len() {
                let v = succ[u][*next];
                *next += 1;
                match mark[v] {
                    Mark::New => {
                        mark[v] = Mark::Open;
                        parent[v] = u;
                        stack.push((v, 0));
                    }
                    Mark::Open => {
                        let mut cycle = vec![v];
                        let mut w = u;
                        while w != v {
                            cycle.push(w);
                            w = parent[w];
                        }
                        cycle.reverse();
                        return Some(cycle);
                    }
                    Mark::Done => {}
                }
            } else {
                mark[u] = Mark::Done;
                stack.pop();
            }
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;

    fn chain(durations: &[(u32, u32)]) -> Instance {
        let real = durations
            .iter()
            .map(|&(d, h)| Activity::new(vec![Mode::new(d, h).with_renewable(vec![1])]))
            .collect();
        let n = durations.len();
        let edges = (1..n).map(|i| (i, i + 1));
        Instance::from_real_activities(real, edges, vec![4], vec![])
    }

    #[test]
    fn well_formed_chain_has_empty_report() {
        let inst = chain(&[(3, 2), (4, 1)]);
        let report = inst.validate();
        assert!(report.is_empty(), "{report}");
        assert_eq!(inst.n(), 2);
        assert_eq!(inst.sink(), 3);
    }

    #[test]
    fn two_cycle_is_reported() {
        let mut inst = chain(&[(1, 0), (1, 0)]);
        inst.precedences.insert((2, 1));
        let report = inst.validate();
        assert!(report
            .violations
            .iter()
            .any(|v| matches!(v, Violation::Cycle { activities } if activities.contains(&1) && activities.contains(&2))));
    }

    #[test]
    fn oversized_mode_is_flagged() {
        let real = vec![Activity::new(vec![Mode::new(2, 0).with_renewable(vec![5])])];
        let inst = Instance::from_real_activities(real, [], vec![4], vec![]);
        let report = inst.validate();
        assert_eq!(
            report.violations,
            vec![Violation::ModeExceedsCapacity { activity: 1, mode: 0, resource: 0, required: 5, capacity: 4 }]
        );
        assert!(report.is_solvable());
    }

    #[test]
    fn unreachable_activity_and_bad_dummy() {
        let mut inst = chain(&[(1, 0), (1, 0)]);
        inst.precedences.remove(&(0, 1));
        inst.activities[0].modes[0].nominal_duration = 3;
        let report = inst.validate();
        assert!(report.violations.contains(&Violation::NotReachableFromSource { activity: 1 }));
        assert!(report.violations.contains(&Violation::DummyNotTrivial { activity: 0 }));
    }

    #[test]
    fn validate_is_idempotent() {
        let mut inst = chain(&[(1, 0), (2, 0)]);
        inst.precedences.insert((2, 1));
        assert_eq!(inst.validate(), inst.validate());
    }

    #[test]
    fn big_m_examples() {
        let zero = chain(&[(0, 0), (0, 0)]);
        assert_eq!(upper_bound_n(&zero), 0);

        let a = Activity::new(vec![Mode::new(3, 2)]);
        let b = Activity::new(vec![Mode::new(4, 1), Mode::new(6, 0)]);
        let two = Instance::from_real_activities(vec![a, b], [], vec![], vec![]);
        assert_eq!(upper_bound_n(&two), 11);

        let single = Instance::from_real_activities(vec![Activity::new(vec![Mode::new(10, 7)])], [], vec![], vec![]);
        assert_eq!(upper_bound_n(&single), 17);
    }

    #[test]
    fn flow_bound_examples() {
        let i = Activity::new(vec![
            Mode::new(1, 0).with_renewable(vec![2]),
            Mode::new(1, 0).with_renewable(vec![3]),
        ]);
        let j = Activity::new(vec![Mode::new(1, 0).with_renewable(vec![1])]);
        let twin = Activity::new(vec![Mode::new(1, 0).with_renewable(vec![4])]);
        let inst = Instance::from_real_activities(vec![i, j, twin.clone(), twin], [], vec![4], vec![]);
        assert_eq!(flow_bound_p(&inst, 1, 2, 0), 1);
        assert_eq!(flow_bound_p(&inst, 1, inst.sink(), 0), 0);
        assert_eq!(flow_bound_p(&inst, 3, 4, 0), 4);
        assert_eq!(flow_bound_p(&inst, 2, 1, 0), flow_bound_p(&inst, 1, 2, 0));
        // the flow network treats the dummies as full-capacity supply and demand
        assert_eq!(inst.flow_capacity(0, 1, 0), 3);
        assert_eq!(inst.flow_capacity(1, inst.sink(), 0), 3);
    }

    #[test]
    fn json_round_trip_is_stable() {
        let inst = chain(&[(3, 2), (4, 1)]);
        let text = inst.to_canonical_json();
        let back = Instance::from_json(&text).unwrap();
        assert_eq!(back, inst);
        assert_eq!(back.to_canonical_json(), text);
        assert!(text.starts_with("{\n  \"n\": 2,"));
    }

    #[test]
    fn nonrenewable_feasibility() {
        let a = Activity::new(vec![
            Mode::new(1, 0).with_nonrenewable(vec![3]),
            Mode::new(2, 0).with_nonrenewable(vec![1]),
        ]);
        let inst = Instance::from_real_activities(vec![a.clone(), a], [], vec![], vec![4]);
        assert!(!ModeVector(vec![0, 0, 0, 0]).is_nonrenewable_feasible(&inst));
        assert!(ModeVector(vec![0, 0, 1, 0]).is_nonrenewable_feasible(&inst));
        assert_eq!(ModeVector(vec![0, 0, 1, 0]).display_real(), "1,2");
    }
}
