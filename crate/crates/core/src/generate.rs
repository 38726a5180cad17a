//! Seeded random instances and first-stage solutions for tests and
//! benchmarks. Same seed, same output, on every platform.

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::formulation::{resource_flows, FirstStageSolution};
use crate::heuristic::serial_schedule_relation_in_order;
use crate::instance::{Activity, Instance, Mode, ModeVector};
use crate::network::{base_relation, Budget};
use crate::psplib::{apply_deviation_rule, DeviationFactor};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random order-respecting arcs between real activities `1..=n`.
fn random_precedences(rng: &mut impl Rng, n: usize, density: f64, max_succ: usize) -> Vec<(usize, usize)> {
    let mut edges = Vec::new();
    for i in 1..=n {
        let mut later: Vec<usize> = (i + 1..=n).collect();
        later.shuffle(rng);
        for j in later.into_iter().take(max_succ) {
            if rng.random_bool(density) {
                edges.push((i, j));
            }
        }
    }
    edges
}

/// Non-renewable capacity between the cheapest and dearest total use.
fn nonrenewable_caps(rng: &mut impl Rng, activities: &[Activity], kinds: usize) -> Vec<u32> {
    (0..kinds)
        .map(|k| {
            let low: u32 = activities.iter().map(|a| a.modes.iter().map(|m| m.nonrenewable_req[k]).min().unwrap_or(0)).sum();
            let high: u32 = activities.iter().map(|a| a.modes.iter().map(|m| m.nonrenewable_req[k]).max().unwrap_or(0)).sum();
            low + (f64::from(high - low) * rng.random_range(0.3..=0.8)).round() as u32
        })
        .collect()
}

/// A tiny instance: durations 1..=5, deviations 0..=3, capacities 3..=5,
/// one non-renewable resource.
pub fn random_tiny(rng: &mut impl Rng, n: usize, max_modes: usize, renewable: usize) -> Instance {
    let rcaps: Vec<u32> = (0..renewable).map(|_| rng.random_range(3..=5)).collect();
    let activities: Vec<Activity> = (0..n)
        .map(|_| {
            let count = rng.random_range(1..=max_modes);
            Activity::new(
                (0..count)
                    .map(|_| {
                        Mode::new(rng.random_range(1..=5), rng.random_range(0..=3))
                            .with_renewable(rcaps.iter().map(|&c| rng.random_range(0..=c)).collect())
                            .with_nonrenewable(vec![rng.random_range(0..=4)])
                    })
                    .collect(),
            )
        })
        .collect();
    let ncaps = nonrenewable_caps(rng, &activities, 1);
    let edges = random_precedences(rng, n, 0.3, n);
    Instance::from_real_activities(activities, edges, rcaps, ncaps)
}

/// Tiny instances with budgets: `n ∈ {3,4,5}`, one or two modes, one or
/// two renewable resources, `Γ ∈ {0,1,2}`, in a fixed rotation.
pub fn tiny_battery(seed: u64, count: usize) -> Vec<(Instance, Budget)> {
    let mut rng = rng(seed);
    (0..count)
        .map(|idx| {
            let n = 3 + idx % 3;
            let renewable = 1 + (idx / 3) % 2;
            let gamma = Budget((idx / 6 % 3) as u32);
            (random_tiny(&mut rng, n, 2, renewable), gamma)
        })
        .collect()
}

/// A project in the shape of the PSPLIB j10 multi-mode set: ten jobs with
/// three modes, two renewable and two non-renewable resources, durations
/// 1..=10 and deviations `⌊0.7·d̄⌋`.
pub fn random_j10_like(rng: &mut impl Rng) -> Instance {
    random_psplib_like(rng, 10)
}

/// As [`random_j10_like`] with `n` jobs.
pub fn random_psplib_like(rng: &mut impl Rng, n: usize) -> Instance {
    let activities: Vec<Activity> = (0..n)
        .map(|_| {
            let rk = rng.random_range(0..2);
            let nk = rng.random_range(0..2);
            let mut modes: Vec<Mode> = (0..3)
                .map(|_| {
                    let mut r = vec![0; 2];
                    r[rk] = rng.random_range(1..=10);
                    let mut q = vec![0; 2];
                    q[nk] = rng.random_range(1..=10);
                    Mode::new(rng.random_range(1..=10), 0).with_renewable(r).with_nonrenewable(q)
                })
                .collect();
            modes.sort_by_key(|m| m.nominal_duration);
            Activity::new(modes)
        })
        .collect();
    let rcaps: Vec<u32> = (0..2)
        .map(|k| {
            let peak = activities.iter().flat_map(|a| a.modes.iter().map(|m| m.renewable_req[k])).max().unwrap_or(0);
            peak.max(1) + rng.random_range(0..=peak / 2)
        })
        .collect();
    let ncaps = nonrenewable_caps(rng, &activities, 2);
    let edges = random_precedences(rng, n, 0.35, 3);
    let inst = Instance::from_real_activities(activities, edges, rcaps, ncaps);
    apply_deviation_rule(&inst, DeviationFactor::default())
}

pub fn j10_like_set(seed: u64, count: usize) -> Vec<Instance> {
    let mut rng = rng(seed);
    (0..count).map(|_| random_j10_like(&mut rng)).collect()
}

/// A random non-renewable-feasible mode vector, by rejection.
pub fn random_modes(instance: &Instance, rng: &mut impl Rng) -> Option<ModeVector> {
    for _ in 0..1000 {
        let modes = ModeVector((0..instance.num_activities()).map(|i| rng.random_range(0..instance.modes(i).len())).collect());
        let fits_alone = (0..instance.num_activities()).all(|i| {
            let m = instance.mode(i, modes.get(i));
            m.renewable_req.iter().zip(&instance.renewable_caps).all(|(r, c)| r <= c)
        });
        if fits_alone && modes.is_nonrenewable_feasible(instance) {
            return Some(modes);
        }
    }
    None
}

/// A random sufficient selection: a serial schedule built along a random
/// linear extension with random durations.
pub fn random_first_stage(instance: &Instance, rng: &mut impl Rng) -> Option<FirstStageSolution> {
    let modes = random_modes(instance, rng)?;
    let base = base_relation(instance).ok()?;
    let size = instance.num_activities();
    let mut order = Vec::with_capacity(size);
    let mut placed = vec![false; size];
    while order.len() < size {
        let ready: Vec<usize> =
            (0..size).filter(|&j| !placed[j] && base.predecessors(j).all(|i| placed[i])).collect();
        let &j = ready.as_slice().choose(rng)?;
        placed[j] = true;
        order.push(j);
    }
    let durations: Vec<i64> = (0..size).map(|_| rng.random_range(1..=10)).collect();
    let relation = serial_schedule_relation_in_order(instance, &modes, &durations, &order)?;
    let flows = resource_flows(instance, &modes, &relation)?;
    Some(FirstStageSolution { modes, relation, flows })
}
