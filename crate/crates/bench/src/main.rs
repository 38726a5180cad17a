use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use clap::{Parser, Subcommand, ValueEnum};
use robust_mrcpsp::benders::build_master;
use robust_mrcpsp::compact::build_compact;
use robust_mrcpsp::formulation::FormulationOptions;
use robust_mrcpsp::generate::{random_psplib_like, random_tiny, rng};
use robust_mrcpsp::milp::write_lp;
use robust_mrcpsp::oracle::brute_force_solve;
use robust_mrcpsp::psplib::{apply_deviation_rule, parse_mm, DeviationFactor, RawPsplibFile};
use robust_mrcpsp::{Budget, Instance};
use robust_mrcpsp_bench::config::{ExperimentConfig, Method};
use robust_mrcpsp_bench::experiment::{run_experiment, solve_one, RunOptions};
use robust_mrcpsp_bench::record::read_records;
use robust_mrcpsp_bench::report::{gap_curve, objective_means, performance_profile, summarize, write_csv};
use robust_mrcpsp_highs::backend_by_name;

/// Robust multi-mode project scheduling: solvers and experiment harness.
#[derive(Parser)]
#[command(name = "rmrcpsp", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one instance and print the solution as JSON.
    Solve {
        instance: PathBuf,
        #[arg(long, value_enum, default_value = "compact")]
        method: MethodArg,
        #[arg(long, default_value_t = 0)]
        gamma: u32,
        #[arg(long, default_value = "bundled")]
        backend: String,
        #[arg(long, default_value_t = 7200.0)]
        time_limit: f64,
        /// Deviation factor for `.mm` input: d̂ = ⌊factor·d̄⌋.
        #[arg(long, default_value = "0.7")]
        deviation_factor: DeviationFactor,
        /// Benders only: write the iteration trace here as CSV.
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Run the sweep described by a config file.
    Sweep {
        config: PathBuf,
        #[arg(long, default_value = "results.csv")]
        results: PathBuf,
        /// Stop after this many new runs; rerun to resume.
        #[arg(long)]
        max_runs: Option<usize>,
    },
    /// Summary, objective means, performance profile and gap curve CSVs.
    Report {
        results: PathBuf,
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
        /// Ratio given to unsolved runs in the performance profile.
        #[arg(long, default_value_t = 100.0)]
        ratio_cap: f64,
    },
    /// Brute-force optimum of a tiny instance.
    Oracle {
        instance: PathBuf,
        #[arg(long, default_value_t = 0)]
        gamma: u32,
        #[arg(long, default_value = "0.7")]
        deviation_factor: DeviationFactor,
    },
    /// Write a model in CPLEX LP format.
    ExportLp {
        instance: PathBuf,
        #[arg(long, value_enum, default_value = "compact")]
        model: ModelArg,
        #[arg(long, default_value_t = 0)]
        gamma: u32,
        /// Write the unreduced model.
        #[arg(long)]
        no_reductions: bool,
        #[arg(long, default_value = "0.7")]
        deviation_factor: DeviationFactor,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Write seeded random instances as `.mm` files.
    Generate {
        #[arg(long, value_enum)]
        shape: ShapeArg,
        #[arg(long, default_value_t = 10)]
        count: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Compact,
    Benders,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModelArg {
    Compact,
    Master,
}

#[derive(Clone, Copy, ValueEnum)]
enum ShapeArg {
    Tiny,
    J10,
    J20,
}

enum Failure {
    Config(String),
    Partial(String),
}

fn config_err(e: impl std::fmt::Display) -> Failure {
    Failure::Config(e.to_string())
}

fn load_instance(path: &Path, factor: DeviationFactor) -> Result<Instance, Failure> {
    let text = fs::read_to_string(path).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?;
    if path.extension().is_some_and(|e| e == "json") {
        Instance::from_json(&text).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))
    } else {
        let inst = parse_mm(&text).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?;
        Ok(apply_deviation_rule(&inst, factor))
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Solve { instance, method, gamma, backend, time_limit, deviation_factor, trace } => {
            let inst = load_instance(&instance, deviation_factor)?;
            let backend = backend_by_name(&backend).map_err(config_err)?;
            let method = match method {
                MethodArg::Compact => Method::Compact,
                MethodArg::Benders => Method::Benders,
            };
            let name = instance.file_name().map_or(String::new(), |n| n.to_string_lossy().into_owned());
            let limit = Duration::from_secs_f64(time_limit.max(0.0));
            let run = solve_one(&name, "", &inst, method, Budget(gamma), backend.as_ref(), limit)
                .map_err(Failure::Partial)?;
            if let (Some(path), Some(b)) = (trace, &run.benders) {
                fs::write(&path, b.state.trace_csv()).map_err(|e| Failure::Partial(e.to_string()))?;
            }
            match run.report {
                Some(report) => println!("{}", report.to_json()),
                None => println!("{}", serde_json::to_string_pretty(&run.record).expect("record serialises")),
            }
            Ok(())
        }
        Command::Sweep { config, results, max_runs } => {
            let cfg = ExperimentConfig::load(&config).map_err(config_err)?;
            let out = run_experiment(&cfg, &results, &RunOptions { max_new_records: max_runs }).map_err(config_err)?;
            eprintln!("{} new runs, {} already recorded, {} failures", out.new_records, out.skipped, out.failures.len());
            for (what, why) in &out.failures {
                eprintln!("failed: {what}: {why}");
            }
            if out.is_partial() {
                return Err(Failure::Partial(format!("{} runs failed", out.failures.len())));
            }
            Ok(())
        }
        Command::Report { results, out_dir, ratio_cap } => {
            let records = read_records(&results).map_err(config_err)?;
            if records.is_empty() {
                return Err(Failure::Config("results file has no rows".into()));
            }
            fs::create_dir_all(&out_dir).map_err(config_err)?;
            write_csv(&out_dir.join("summary.csv"), &summarize(&records)).map_err(config_err)?;
            write_csv(&out_dir.join("gap_curve.csv"), &gap_curve(&records)).map_err(config_err)?;
            let mut partial = Vec::new();
            match objective_means(&records) {
                Ok(means) => write_csv(&out_dir.join("objective_means.csv"), &means).map_err(config_err)?,
                Err(e) => partial.push(e),
            }
            match performance_profile(&records, ratio_cap) {
                Ok(p) => {
                    write_csv(&out_dir.join("profile.csv"), &p.points).map_err(config_err)?;
                    eprintln!("profile: unsolved runs at ratio {}", p.cap);
                }
                Err(e) => eprintln!("profile skipped: {e}"),
            }
            if partial.is_empty() {
                Ok(())
            } else {
                Err(Failure::Partial(partial.join("; ")))
            }
        }
        Command::Oracle { instance, gamma, deviation_factor } => {
            let inst = load_instance(&instance, deviation_factor)?;
            let res = brute_force_solve(&inst, Budget(gamma)).map_err(config_err)?;
            println!("{}", serde_json::to_string_pretty(&res).expect("result serialises"));
            Ok(())
        }
        Command::ExportLp { instance, model, gamma, no_reductions, deviation_factor, output } => {
            let inst = load_instance(&instance, deviation_factor)?;
            let opts = FormulationOptions { reductions: !no_reductions, ..Default::default() };
            let built = match model {
                ModelArg::Compact => build_compact(&inst, Budget(gamma), &opts).map(|m| m.model),
                ModelArg::Master => build_master(&inst, &[], &opts).map(|m| m.model),
            }
            .map_err(config_err)?;
            let text = write_lp(&built);
            match output {
                Some(path) => fs::write(path, text).map_err(config_err)?,
                None => print!("{text}"),
            }
            Ok(())
        }
        Command::Generate { shape, count, seed, out } => {
            fs::create_dir_all(&out).map_err(config_err)?;
            let mut r = rng(seed);
            for idx in 1..=count {
                let (inst, prefix) = match shape {
                    ShapeArg::Tiny => (random_tiny(&mut r, 3 + idx % 3, 2, 1 + idx % 2), "tiny"),
                    ShapeArg::J10 => (random_psplib_like(&mut r, 10), "j10"),
                    ShapeArg::J20 => (random_psplib_like(&mut r, 20), "j20"),
                };
                let path = out.join(format!("synthetic_{prefix}_{idx:03}.mm"));
                fs::write(path, RawPsplibFile::from_instance(&inst).to_text()).map_err(config_err)?;
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(1);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Partial(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
