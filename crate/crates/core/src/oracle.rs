//! Brute-force ground truth for tiny instances.
//!
//! Deliberately plain: its own closure, antichain and worst-case routines,
//! none shared with the solvers it is used to check.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::instance::{Instance, ModeVector, Time};
use crate::network::{transitive_closure, Budget, ExtendedRelation};

pub const MAX_ACTIVITIES: usize = 6;
pub const MAX_MODE_VECTORS: usize = 64;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleResult {
    pub makespan: Time,
    pub modes: ModeVector,
    /// Extra precedences beyond the project's own closure.
    pub selection: Vec<(usize, usize)>,
    /// Mode vectors and selections evaluated.
    pub evaluated: u64,
}

impl OracleResult {
    pub fn relation(&self, instance: &Instance) -> ExtendedRelation {
        let mut edges: Vec<(usize, usize)> = instance.precedences.iter().copied().collect();
        edges.extend(&self.selection);
        transitive_closure(&edges, instance.num_activities()).expect("oracle selections are acyclic")
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum OracleError {
    #[error("{0} activities exceed the oracle limit of {MAX_ACTIVITIES}")]
    TooManyActivities(usize),
    #[error("{0} mode vectors exceed the oracle limit of {MAX_MODE_VECTORS}")]
    TooManyModes(usize),
    #[error("no feasible mode vector and selection")]
    Infeasible,
}

type Matrix = Vec<Vec<bool>>;

fn close(reach: &mut Matrix) {
    let size = reach.len();
    for k in 0..size {
        for i in 0..size {
            if reach[i][k] {
                for j in 0..size {
                    if reach[k][j] {
                        reach[i][j] = true;
                    }
                }
            }
        }
    }
}

fn acyclic(reach: &Matrix) -> bool {
    (0..reach.len()).all(|i| !reach[i][i])
}

/// Every antichain of every size, checked against every capacity.
fn resource_feasible(instance: &Instance, modes: &ModeVector, reach: &Matrix) -> bool {
    let size = reach.len();
    for subset in 1u32..(1 << size) {
        let members: Vec<usize> = (0..size).filter(|&i| subset & (1 << i) != 0).collect();
        let antichain =
            members.iter().all(|&a| members.iter().all(|&b| a == b || (!reach[a][b] && !reach[b][a])));
        if !antichain {
            continue;
        }
        for (k, &cap) in instance.renewable_caps.iter().enumerate() {
            let load: u64 = members.iter().map(|&i| u64::from(instance.mode(i, modes.get(i)).renewable_req[k])).sum();
            if load > u64::from(cap) {
                return false;
            }
        }
    }
    true
}

/// Worst case over every set of at most `gamma` delayed activities.
fn worst_case(instance: &Instance, modes: &ModeVector, reach: &Matrix, gamma: usize) -> Time {
    let size = reach.len();
    let sink = instance.sink();
    let mut best = 0;
    for delayed in 0u32..(1 << size) {
        if delayed.count_ones() as usize > gamma {
            continue;
        }
        let dur: Vec<Time> = (0..size)
            .map(|i| {
                let m = instance.mode(i, modes.get(i));
                Time::from(m.nominal_duration) + if delayed & (1 << i) != 0 { Time::from(m.max_deviation) } else { 0 }
            })
            .collect();
        // Bellman-style relaxation; the closure keeps every path to one arc
        let mut start = vec![0 as Time; size];
        for _ in 0..size {
            for i in 0..size {
                for j in 0..size {
                    if reach[i][j] {
                        start[j] = start[j].max(start[i] + dur[i]);
                    }
                }
            }
        }
        best = best.max(start[sink]);
    }
    best
}

struct Search<'a> {
    instance: &'a Instance,
    modes: &'a ModeVector,
    gamma: usize,
    pairs: Vec<(usize, usize)>,
    best: Option<(Time, ModeVector, Matrix)>,
    evaluated: u64,
}

impl Search<'_> {
    fn visit(&mut self, from: usize, reach: &Matrix) {
        if resource_feasible(self.instance, self.modes, reach) {
            // any superset only lengthens paths
            self.evaluated += 1;
            let value = worst_case(self.instance, self.modes, reach, self.gamma);
            if self.best.as_ref().is_none_or(|(b, _, _)| value < *b) {
                self.best = Some((value, self.modes.clone(), reach.clone()));
            }
            return;
        }
        let Some(offset) = self.pairs[from..].iter().position(|&(a, b)| !reach[a][b] && !reach[b][a]) else {
            return;
        };
        let p = from + offset;
        let (a, b) = self.pairs[p];
        self.visit(p + 1, reach);
        for (u, v) in [(a, b), (b, a)] {
            let mut next = reach.clone();
            next[u][v] = true;
            close(&mut next);
            if acyclic(&next) {
                self.visit(p + 1, &next);
            }
        }
    }
}

pub fn brute_force_solve(instance: &Instance, gamma: Budget) -> Result<OracleResult, OracleError> {
    let n = instance.n();
    if n > MAX_ACTIVITIES {
        return Err(OracleError::TooManyActivities(n));
    }
    let size = instance.num_activities();
    let counts: Vec<usize> = (0..size).map(|i| instance.modes(i).len()).collect();
    let total = counts.iter().try_fold(1usize, |acc, &c| acc.checked_mul(c)).unwrap_or(usize::MAX);
    if total > MAX_MODE_VECTORS {
        return Err(OracleError::TooManyModes(total));
    }
    let mut base = vec![vec![false; size]; size];
    for &(i, j) in &instance.precedences {
        base[i][j] = true;
    }
    close(&mut base);
    if !acyclic(&base) {
        return Err(OracleError::Infeasible);
    }
    let pairs: Vec<(usize, usize)> = (1..=n).flat_map(|a| (a + 1..=n).map(move |b| (a, b))).collect();
    let gamma = (gamma.value() as usize).min(n);

    let mut best: Option<(Time, ModeVector, Matrix)> = None;
    let mut evaluated = 0;
    for code in 0..total {
        let mut rest = code;
        let modes = ModeVector(
            counts
                .iter()
                .map(|&c| {
                    let m = rest % c;
                    rest /= c;
                    m
                })
                .collect(),
        );
        if !modes.is_nonrenewable_feasible(instance) {
            continue;
        }
        let mut search = Search { instance, modes: &modes, gamma, pairs: pairs.clone(), best: None, evaluated: 0 };
        search.visit(0, &base);
        evaluated += search.evaluated;
        if let Some(found) = search.best {
            if best.as_ref().is_none_or(|(b, _, _)| found.0 < *b) {
                best = Some(found);
            }
        }
    }
    let (makespan, modes, reach) = best.ok_or(OracleError::Infeasible)?;
    let selection = (0..size)
        .flat_map(|i| (0..size).map(move |j| (i, j)))
        .filter(|&(i, j)| reach[i][j] && !base[i][j])
        .collect();
    Ok(OracleResult { makespan, modes, selection, evaluated })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::{Activity, Mode};

    #[test]
    fn single_activity() {
        let inst = Instance::from_real_activities(vec![Activity::new(vec![Mode::new(3, 2)])], vec![], vec![], vec![]);
        assert_eq!(brute_force_solve(&inst, Budget(1)).unwrap().makespan, 5);
        assert_eq!(brute_force_solve(&inst, Budget(0)).unwrap().makespan, 3);
    }

    #[test]
    fn forced_sequencing() {
        let inst = Instance::from_real_activities(
            vec![
                Activity::new(vec![Mode::new(3, 0).with_renewable(vec![3])]),
                Activity::new(vec![Mode::new(4, 0).with_renewable(vec![3])]),
            ],
            vec![],
            vec![4],
            vec![],
        );
        let res = brute_force_solve(&inst, Budget(0)).unwrap();
        assert_eq!(res.makespan, 7);
        assert_eq!(res.selection.len(), 1);
    }

    #[test]
    fn nonrenewable_budget_limits_modes() {
        let fast_or_cheap = || {
            Activity::new(vec![
                Mode::new(1, 0).with_renewable(vec![]).with_nonrenewable(vec![3]),
                Mode::new(5, 0).with_renewable(vec![]).with_nonrenewable(vec![1]),
            ])
        };
        let inst = Instance::from_real_activities(vec![fast_or_cheap(), fast_or_cheap()], vec![(1, 2)], vec![], vec![4]);
        let res = brute_force_solve(&inst, Budget(0)).unwrap();
        assert_eq!(res.makespan, 6);
    }

    #[test]
    fn guard_rails() {
        let many = Activity::new(vec![Mode::new(1, 0); 3]);
        let inst = Instance::from_real_activities(vec![many.clone(); 4], vec![], vec![], vec![]);
        assert_eq!(brute_force_solve(&inst, Budget(0)), Err(OracleError::TooManyModes(81)));
        let seven = Instance::from_real_activities(vec![Activity::new(vec![Mode::new(1, 0)]); 7], vec![], vec![], vec![]);
        assert_eq!(brute_force_solve(&seven, Budget(0)), Err(OracleError::TooManyActivities(7)));
    }
}
