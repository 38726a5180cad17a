//! Aggregates over result rows: summary table, objective means,
//! performance profiles and optimality-gap curves.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::Serialize;

use crate::config::Method;
use crate::record::RunRecord;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryRow {
    pub set: String,
    /// Empty on the per-set average row.
    pub gamma: Option<u32>,
    pub method: Method,
    pub instances: usize,
    pub pct_solved: f64,
    /// Over runs with an incumbent.
    pub mean_gap: Option<f64>,
    /// Unsolved runs count at the time limit.
    pub mean_seconds: f64,
    pub mean_iterations: Option<f64>,
    pub mean_iteration_seconds: Option<f64>,
}

fn mean(values: impl IntoIterator<Item = f64>) -> Option<f64> {
    let (sum, count) = values.into_iter().fold((0.0, 0usize), |(s, c), v| (s + v, c + 1));
    (count > 0).then(|| sum / count as f64)
}

fn summary_row(set: &str, gamma: Option<u32>, method: Method, rows: &[&RunRecord]) -> SummaryRow {
    let solved = rows.iter().filter(|r| r.is_optimal()).count();
    SummaryRow {
        set: set.to_string(),
        gamma,
        method,
        instances: rows.len(),
        pct_solved: 100.0 * solved as f64 / rows.len() as f64,
        mean_gap: mean(rows.iter().filter_map(|r| r.gap)),
        mean_seconds: mean(rows.iter().map(|r| r.seconds)).unwrap_or(0.0),
        mean_iterations: mean(rows.iter().filter_map(|r| r.iterations.map(|i| i as f64))),
        mean_iteration_seconds: mean(rows.iter().filter_map(|r| r.iteration_seconds)),
    }
}

/// One row per (set, Γ, method), then one average row per (set, method).
pub fn summarize(records: &[RunRecord]) -> Vec<SummaryRow> {
    let mut groups: BTreeMap<(String, Option<u32>, Method), Vec<&RunRecord>> = BTreeMap::new();
    for r in records {
        groups.entry((r.set.clone(), Some(r.gamma), r.method)).or_default().push(r);
        groups.entry((r.set.clone(), None, r.method)).or_default().push(r);
    }
    let mut rows: Vec<SummaryRow> =
        groups.iter().map(|((set, gamma, method), rows)| summary_row(set, *gamma, *method, rows)).collect();
    // averages after the per-Γ rows of their set
    rows.sort_by(|a, b| (&a.set, a.gamma.is_none(), a.gamma, a.method).cmp(&(&b.set, b.gamma.is_none(), b.gamma, b.method)));
    rows
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ObjectiveMean {
    pub set: String,
    pub gamma: u32,
    pub mean: f64,
    pub instances: usize,
}

/// Mean optimal objective per (set, Γ), over the instances of the set
/// solved to optimality at every Γ present for that set. Methods that
/// both prove optimality must agree.
pub fn objective_means(records: &[RunRecord]) -> Result<Vec<ObjectiveMean>, String> {
    let mut gammas: BTreeMap<&str, BTreeSet<u32>> = BTreeMap::new();
    let mut optimal: BTreeMap<(&str, &str, u32), i64> = BTreeMap::new();
    for r in records {
        gammas.entry(&r.set).or_default().insert(r.gamma);
        if let (true, Some(obj)) = (r.is_optimal(), r.objective) {
            let key = (r.set.as_str(), r.instance.as_str(), r.gamma);
            if let Some(&prev) = optimal.get(&key) {
                if prev != obj {
                    return Err(format!("{} at gamma {}: optimal values {prev} and {obj} disagree", r.instance, r.gamma));
                }
            }
            optimal.insert(key, obj);
        }
    }
    let mut out = Vec::new();
    for (set, grid) in &gammas {
        let names: BTreeSet<&str> = records.iter().filter(|r| r.set == *set).map(|r| r.instance.as_str()).collect();
        let eligible: Vec<&str> =
            names.into_iter().filter(|n| grid.iter().all(|&g| optimal.contains_key(&(*set, *n, g)))).collect();
        if eligible.is_empty() {
            continue;
        }
        for &g in grid {
            let total: i64 = eligible.iter().map(|n| optimal[&(*set, *n, g)]).sum();
            out.push(ObjectiveMean {
                set: set.to_string(),
                gamma: g,
                mean: total as f64 / eligible.len() as f64,
                instances: eligible.len(),
            });
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProfilePoint {
    pub tau: f64,
    pub method: Method,
    pub percent: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Profile {
    pub points: Vec<ProfilePoint>,
    /// Ratio assigned to unsolved runs; above every finite ratio.
    pub cap: f64,
}

/// Performance profile over the problems (set, instance, Γ) every method
/// attempted. Unsolved runs get ratio `cap`, raised above the largest
/// finite ratio when needed; curves are sampled at every distinct finite
/// ratio, so their right-most values are the solved percentages.
pub fn performance_profile(records: &[RunRecord], cap: f64) -> Result<Profile, String> {
    let methods: BTreeSet<Method> = records.iter().map(|r| r.method).collect();
    if methods.len() < 2 {
        return Err("a performance profile needs at least two methods".into());
    }
    let mut by_problem: BTreeMap<(&str, &str, u32), BTreeMap<Method, Option<f64>>> = BTreeMap::new();
    for r in records {
        let time = r.is_optimal().then_some(r.seconds.max(1e-9));
        by_problem.entry((r.set.as_str(), r.instance.as_str(), r.gamma)).or_default().insert(r.method, time);
    }
    by_problem.retain(|_, m| m.len() == methods.len());
    if by_problem.is_empty() {
        return Err("no problem was attempted by every method".into());
    }
    let mut ratios: BTreeMap<Method, Vec<Option<f64>>> = BTreeMap::new();
    let mut finite = Vec::new();
    for times in by_problem.values() {
        let best = times.values().flatten().copied().fold(f64::INFINITY, f64::min);
        for (&method, &t) in times {
            let r = t.map(|t| t / best);
            if let Some(r) = r {
                finite.push(r);
            }
            ratios.entry(method).or_default().push(r);
        }
    }
    let max_finite = finite.iter().copied().fold(1.0, f64::max);
    let cap = if cap > max_finite { cap } else { 2.0 * max_finite };
    finite.push(1.0);
    finite.sort_by(f64::total_cmp);
    finite.dedup();
    let problems = by_problem.len() as f64;
    let mut points = Vec::new();
    for (&method, rs) in &ratios {
        for &tau in &finite {
            let within = rs.iter().filter(|r| r.is_some_and(|r| r <= tau)).count();
            points.push(ProfilePoint { tau, method, percent: 100.0 * within as f64 / problems });
        }
    }
    Ok(Profile { points, cap })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GapPoint {
    pub method: Method,
    pub gap: f64,
    pub percent: f64,
}

/// Share of runs with an incumbent whose gap is at most `g`, per method;
/// runs without an incumbent count in the denominator only.
pub fn gap_curve(records: &[RunRecord]) -> Vec<GapPoint> {
    let mut by_method: BTreeMap<Method, Vec<Option<f64>>> = BTreeMap::new();
    for r in records {
        by_method.entry(r.method).or_default().push(r.gap.filter(|_| r.has_incumbent()));
    }
    let mut points = Vec::new();
    for (method, gaps) in by_method {
        let mut thresholds: Vec<f64> = gaps.iter().flatten().copied().collect();
        thresholds.push(0.0);
        thresholds.sort_by(f64::total_cmp);
        thresholds.dedup();
        for g in thresholds {
            let within = gaps.iter().filter(|x| x.is_some_and(|x| x <= g)).count();
            points.push(GapPoint { method, gap: g, percent: 100.0 * within as f64 / gaps.len() as f64 });
        }
    }
    points
}

pub fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_path(path)?;
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::record::gap_percent;
    use robust_mrcpsp::milp::SolveStatus;

    fn rec(instance: &str, method: Method, gamma: u32, status: SolveStatus, obj: Option<i64>, bound: Option<i64>, secs: f64) -> RunRecord {
        RunRecord {
            instance: instance.into(),
            set: "j10".into(),
            method,
            gamma,
            gap: gap_percent(&status, obj, bound),
            status,
            objective: obj,
            bound,
            seconds: secs,
            iterations: (method == Method::Benders).then_some(4),
            iteration_seconds: (method == Method::Benders).then_some(secs / 4.0),
            backend: "bundled".into(),
        }
    }

    #[test]
    fn summary_counts_unsolved_at_limit() {
        let rows = vec![
            rec("a", Method::Compact, 0, SolveStatus::Optimal, Some(10), Some(10), 1.0),
            rec("b", Method::Compact, 0, SolveStatus::Feasible, Some(20), Some(18), 7200.0),
        ];
        let s = summarize(&rows);
        assert_eq!(s.len(), 2);
        assert_eq!(s[0].gamma, Some(0));
        assert_eq!(s[0].pct_solved, 50.0);
        assert_eq!(s[0].mean_gap, Some(5.0));
        assert_eq!(s[0].mean_seconds, 3600.5);
        assert_eq!(s[1].gamma, None);
        let all_fast = vec![rec("a", Method::Compact, 0, SolveStatus::Optimal, Some(10), Some(10), 1.0)];
        let s = summarize(&all_fast);
        assert_eq!((s[0].pct_solved, s[0].mean_gap, s[0].mean_seconds), (100.0, Some(0.0), 1.0));
    }

    #[test]
    fn objective_means_need_every_gamma() {
        let rows = vec![
            rec("a", Method::Compact, 0, SolveStatus::Optimal, Some(10), Some(10), 1.0),
            rec("a", Method::Compact, 3, SolveStatus::Optimal, Some(14), Some(14), 1.0),
            rec("b", Method::Compact, 0, SolveStatus::Optimal, Some(20), Some(20), 1.0),
            rec("b", Method::Compact, 3, SolveStatus::Feasible, Some(30), Some(25), 9.0),
            rec("a", Method::Benders, 3, SolveStatus::Optimal, Some(14), Some(14), 1.0),
        ];
        let means = objective_means(&rows).unwrap();
        assert_eq!(means.len(), 2);
        assert_eq!((means[0].mean, means[0].instances), (10.0, 1));
        assert_eq!(means[1].mean, 14.0);
        let mut bad = rows.clone();
        bad.push(rec("a", Method::Benders, 0, SolveStatus::Optimal, Some(11), Some(11), 1.0));
        assert!(objective_means(&bad).is_err());
    }

    #[test]
    fn profile_shapes() {
        let rows = vec![
            rec("a", Method::Compact, 0, SolveStatus::Optimal, Some(1), Some(1), 1.0),
            rec("a", Method::Benders, 0, SolveStatus::Optimal, Some(1), Some(1), 3.0),
            rec("b", Method::Compact, 0, SolveStatus::Optimal, Some(1), Some(1), 2.0),
            rec("b", Method::Benders, 0, SolveStatus::NoSolutionFound, None, None, 7200.0),
        ];
        let p = performance_profile(&rows, 10.0).unwrap();
        let compact: Vec<_> = p.points.iter().filter(|q| q.method == Method::Compact).collect();
        assert_eq!(compact[0].tau, 1.0);
        assert_eq!(compact[0].percent, 100.0);
        let benders: Vec<_> = p.points.iter().filter(|q| q.method == Method::Benders).collect();
        assert_eq!(benders[0].percent, 0.0);
        assert_eq!(benders.last().unwrap().percent, 50.0);
        assert!(benders.windows(2).all(|w| w[0].percent <= w[1].percent));
        assert!(p.cap > 3.0);
        assert!(performance_profile(&rows[..1], 10.0).is_err());
    }

    #[test]
    fn gap_curve_steps() {
        let rows = vec![
            rec("a", Method::Compact, 0, SolveStatus::Optimal, Some(10), Some(10), 1.0),
            rec("b", Method::Compact, 0, SolveStatus::Feasible, Some(20), Some(18), 9.0),
            rec("c", Method::Compact, 0, SolveStatus::NoSolutionFound, None, Some(3), 9.0),
        ];
        let g = gap_curve(&rows);
        assert_eq!(g.len(), 2);
        assert_eq!((g[0].gap, g[0].percent), (0.0, 100.0 / 3.0));
        assert_eq!((g[1].gap, g[1].percent), (10.0, 200.0 / 3.0));
    }
}
