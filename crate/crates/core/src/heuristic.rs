//! Construction heuristic for starting solutions: a greedy mode choice
//! followed by a serial schedule whose interval order becomes the
//! selection.

use crate::formulation::{resource_flows, FirstStageSolution};
use crate::instance::{Instance, ModeVector, Time};
use crate::network::{base_relation, transitive_closure, worst_case_longest_path, Budget, ExtendedRelation};

/// Picks, activity by activity, the mode with the smallest key that still
/// leaves room for the cheapest non-renewable completion.
fn greedy_modes(instance: &Instance, key: impl Fn(usize, usize) -> (u32, u32)) -> Option<ModeVector> {
    let size = instance.num_activities();
    let kn = instance.num_nonrenewable();
    let cheapest: Vec<Vec<u32>> = (0..size)
        .map(|i| {
            (0..kn)
                .map(|k| instance.modes(i).iter().map(|m| m.nonrenewable_req[k]).min().unwrap_or(0))
                .collect()
        })
        .collect();
    let mut rest: Vec<u32> = (0..kn).map(|k| (0..size).map(|i| cheapest[i][k]).sum()).collect();
    let mut used = vec![0u32; kn];
    let mut modes = Vec::with_capacity(size);
    for i in 0..size {
        for (k, r) in rest.iter_mut().enumerate() {
            *r -= cheapest[i][k];
        }
        let fits = |m: usize| {
            let mode = instance.mode(i, m);
            (0..instance.num_renewable()).all(|k| mode.renewable_req[k] <= instance.renewable_caps[k])
                && (0..kn).all(|k| used[k] + mode.nonrenewable_req[k] + rest[k] <= instance.nonrenewable_caps[k])
        };
        let best = (0..instance.modes(i).len()).filter(|&m| fits(m)).min_by_key(|&m| (key(i, m), m))?;
        for (k, u) in used.iter_mut().enumerate() {
            *u += instance.mode(i, best).nonrenewable_req[k];
        }
        modes.push(best);
    }
    Some(ModeVector(modes))
}

/// Serial schedule generation with durations `max(d, 1)`; the interval
/// order of the resulting schedule is acyclic and every antichain of it
/// overlaps in time, so it is free of forbidden sets.
pub fn serial_schedule_relation(instance: &Instance, modes: &ModeVector, durations: &[Time]) -> Option<ExtendedRelation> {
    let order = base_relation(instance).ok()?.topological_order().ok()?;
    serial_schedule_relation_in_order(instance, modes, durations, &order)
}

/// As [`serial_schedule_relation`], scheduling in the given order, which
/// must be a linear extension of the project's precedences.
pub fn serial_schedule_relation_in_order(
    instance: &Instance,
    modes: &ModeVector,
    durations: &[Time],
    order: &[usize],
) -> Option<ExtendedRelation> {
    let size = instance.num_activities();
    let base = base_relation(instance).ok()?;
    let dur: Vec<Time> = durations.iter().map(|&d| d.max(1)).collect();
    let horizon: Time = dur.iter().sum::<Time>() + 1;
    let kr = instance.num_renewable();
    let mut usage = vec![vec![0u32; horizon as usize + 1]; kr];
    let mut start = vec![0 as Time; size];
    for &j in order {
        let req = &instance.mode(j, modes.get(j)).renewable_req;
        let mut t = base.predecessors(j).map(|i| start[i] + dur[i]).max().unwrap_or(0);
        loop {
            if t + dur[j] > horizon {
                return None;
            }
            let clash = (t..t + dur[j]).find(|&u| (0..kr).any(|k| usage[k][u as usize] + req[k] > instance.renewable_caps[k]));
            match clash {
                None => break,
                Some(u) => t = u + 1,
            }
        }
        for k in 0..kr {
            for u in t..t + dur[j] {
                usage[k][u as usize] += req[k];
            }
        }
        start[j] = t;
    }
    let mut edges: Vec<(usize, usize)> = base.pairs().collect();
    for i in 0..size {
        for j in 0..size {
            if i != j && start[i] + dur[i] <= start[j] {
                edges.push((i, j));
            }
        }
    }
    transitive_closure(&edges, size).ok()
}

/// Total order along a topological order of the project; always a
/// sufficient selection when every chosen mode fits the capacities alone.
pub fn chain_relation(instance: &Instance) -> Option<ExtendedRelation> {
    let order = base_relation(instance).ok()?.topological_order().ok()?;
    let edges: Vec<(usize, usize)> = order.windows(2).map(|w| (w[0], w[1])).collect();
    transitive_closure(&edges, instance.num_activities()).ok()
}

/// Best of a few constructed first-stage solutions under the worst case
/// with budget `gamma`.
pub fn initial_solution(instance: &Instance, gamma: Budget) -> Option<(FirstStageSolution, Time)> {
    let keys: [&dyn Fn(usize, usize) -> (u32, u32); 3] = [
        &|i, m| (instance.mode(i, m).worst_duration(), instance.mode(i, m).nominal_duration),
        &|i, m| (instance.mode(i, m).nominal_duration, instance.mode(i, m).worst_duration()),
        &|i, m| (instance.mode(i, m).nonrenewable_req.iter().sum(), instance.mode(i, m).worst_duration()),
    ];
    let mut best: Option<(FirstStageSolution, Time)> = None;
    for key in keys {
        let Some(modes) = greedy_modes(instance, key) else { continue };
        if !modes.is_nonrenewable_feasible(instance) {
            continue;
        }
        let nominal = modes.nominal_durations(instance);
        let worst: Vec<Time> = nominal.iter().zip(modes.deviations(instance)).map(|(a, b)| a + b).collect();
        let candidates = [
            serial_schedule_relation(instance, &modes, &nominal),
            serial_schedule_relation(instance, &modes, &worst),
            chain_relation(instance),
        ];
        for relation in candidates.into_iter().flatten() {
            let Some(flows) = resource_flows(instance, &modes, &relation) else { continue };
            let value = worst_case_longest_path(instance, &modes, &relation, gamma).makespan;
            if best.as_ref().is_none_or(|(_, v)| value < *v) {
                best = Some((FirstStageSolution { modes: modes.clone(), relation, flows }, value));
            }
        }
    }
    best
}
