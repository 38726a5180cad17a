//! Γ sweeps over an instance directory with a resumable results file.

use std::collections::HashSet;
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::{Duration, Instant};

use robust_mrcpsp::benders::{run_benders, BendersOptions, BendersRun};
use robust_mrcpsp::compact::{solve_compact, CompactOptions, SolutionReport};
use robust_mrcpsp::milp::{BackendError, SolveStatus, SolverBackend};
use robust_mrcpsp::psplib::{apply_deviation_rule, load_instance_set, LoadError};
use robust_mrcpsp::{Budget, Instance};
use robust_mrcpsp_highs::backend_by_name;
use thiserror::Error;

use crate::config::{ExperimentConfig, Method};
use crate::record::{gap_percent, read_records, RecordWriter, RunRecord};

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error(transparent)]
    Load(#[from] LoadError),
    #[error(transparent)]
    Backend(#[from] BackendError),
    #[error("results file: {0}")]
    Io(#[from] std::io::Error),
    #[error("results file: {0}")]
    Csv(#[from] csv::Error),
}

/// A single solve with everything the CLI and the harness report.
pub struct SolveRun {
    pub record: RunRecord,
    pub report: Option<SolutionReport>,
    pub benders: Option<BendersRun>,
}

pub fn solve_one(
    name: &str,
    set: &str,
    instance: &Instance,
    method: Method,
    gamma: Budget,
    backend: &dyn SolverBackend,
    time_limit: Duration,
) -> Result<SolveRun, String> {
    let started = Instant::now();
    let mut record = RunRecord {
        instance: name.to_string(),
        set: set.to_string(),
        method,
        gamma: gamma.value(),
        status: SolveStatus::Error,
        objective: None,
        bound: None,
        gap: None,
        seconds: 0.0,
        iterations: None,
        iteration_seconds: None,
        backend: backend.name().to_string(),
    };
    let (report, benders) = match method {
        Method::Compact => {
            let opts = CompactOptions { time_limit: Some(time_limit), heuristic_start: true, ..Default::default() };
            let res = solve_compact(instance, gamma, backend, &opts).map_err(|e| e.to_string())?;
            record.status = res.status().clone();
            record.objective = res.objective();
            record.bound = if record.is_optimal() { record.objective } else { res.bound() };
            let report = res.solution.as_ref().map(|(sol, wc)| {
                SolutionReport::new("compact", instance, gamma, record.status.clone(), sol, wc, record.bound, 0.0)
            });
            (report, None)
        }
        Method::Benders => {
            let opts = BendersOptions { time_limit: Some(time_limit), ..Default::default() };
            let run = run_benders(instance, gamma, backend, &opts).map_err(|e| e.to_string())?;
            if run.status == SolveStatus::Error {
                return Err(run.message.clone().unwrap_or_else(|| "backend failure".into()));
            }
            record.status = run.status.clone();
            record.objective = run.objective();
            record.bound = run.state.lb;
            let iterations = run.state.completed_iterations();
            record.iterations = Some(iterations);
            record.iteration_seconds = (iterations > 0).then(|| run.seconds / iterations as f64);
            let report = run.solution.as_ref().map(|(sol, wc)| {
                SolutionReport::new("benders", instance, gamma, record.status.clone(), sol, wc, record.bound, 0.0)
            });
            (report, Some(run))
        }
    };
    record.gap = gap_percent(&record.status, record.objective, record.bound);
    let elapsed = started.elapsed().as_secs_f64();
    record.seconds = if record.is_optimal() { elapsed } else { time_limit.as_secs_f64() };
    let report = report.map(|mut r| {
        r.seconds = elapsed;
        r
    });
    Ok(SolveRun { record, report, benders })
}

#[derive(Debug, Default)]
pub struct ExperimentOutcome {
    /// Every row in the results file after the run.
    pub records: Vec<RunRecord>,
    pub new_records: usize,
    pub skipped: usize,
    /// Unreadable instance files and failed solves.
    pub failures: Vec<(String, String)>,
}

impl ExperimentOutcome {
    pub fn is_partial(&self) -> bool {
        !self.failures.is_empty()
    }
}

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Stop after this many new rows; the next call resumes.
    pub max_new_records: Option<usize>,
}

pub fn load_instances(config: &ExperimentConfig) -> Result<(Vec<(String, Instance)>, Vec<(String, String)>), LoadError> {
    let set = load_instance_set(&config.instances_dir, &config.pattern)?;
    let instances =
        set.instances.into_iter().map(|(name, inst)| (name, apply_deviation_rule(&inst, config.deviation_factor))).collect();
    let failures = set.failures.into_iter().map(|(name, err)| (name, err.to_string())).collect();
    Ok((instances, failures))
}

pub fn run_experiment(
    config: &ExperimentConfig,
    results: &Path,
    options: &RunOptions,
) -> Result<ExperimentOutcome, ExperimentError> {
    let backend = backend_by_name(&config.backend)?;
    let (instances, mut failures) = load_instances(config)?;
    let done: HashSet<(String, Method, u32)> =
        if results.exists() { read_records(results)?.iter().map(RunRecord::key).collect() } else { HashSet::new() };

    let mut tasks = Vec::new();
    let mut skipped = 0;
    for (idx, (name, _)) in instances.iter().enumerate() {
        for &gamma in &config.gammas {
            for &method in &config.methods {
                if done.contains(&(name.clone(), method, gamma)) {
                    skipped += 1;
                } else {
                    tasks.push((idx, method, gamma));
                }
            }
        }
    }
    let quota = options.max_new_records.unwrap_or(usize::MAX).min(tasks.len());
    let workers = if backend.capabilities().concurrent { config.workers.max(1) } else { 1 };

    let writer = Mutex::new(RecordWriter::open(results)?);
    let next = AtomicUsize::new(0);
    let written = AtomicUsize::new(0);
    let errors = Mutex::new(Vec::new());
    let write_error: Mutex<Option<csv::Error>> = Mutex::new(None);
    std::thread::scope(|scope| {
        for _ in 0..workers.min(quota.max(1)) {
            scope.spawn(|| loop {
                let slot = next.fetch_add(1, Ordering::SeqCst);
                if slot >= quota {
                    break;
                }
                let (idx, method, gamma) = tasks[slot];
                let (name, inst) = &instances[idx];
                match solve_one(name, &config.set, inst, method, Budget(gamma), backend.as_ref(), config.time_limit) {
                    Ok(run) => {
                        let mut w = writer.lock().expect("writer lock");
                        match w.append(&run.record) {
                            Ok(()) => {
                                written.fetch_add(1, Ordering::SeqCst);
                            }
                            Err(e) => {
                                write_error.lock().expect("error lock").get_or_insert(e);
                            }
                        }
                    }
                    Err(msg) => errors.lock().expect("error lock").push((format!("{name} {method} gamma={gamma}"), msg)),
                }
            });
        }
    });
    if let Some(e) = write_error.into_inner().expect("error lock") {
        return Err(e.into());
    }
    drop(writer);
    failures.extend(errors.into_inner().expect("error lock"));
    Ok(ExperimentOutcome {
        records: read_records(results)?,
        new_records: written.into_inner(),
        skipped,
        failures,
    })
}
