//! `assort`: command-line front end for the assortment solvers.
//!
//! Results and errors are JSON on stdout; logs go to stderr. Exit codes:
//! 0 success, 1 infeasible or violated, 2 parse/config/usage error,
//! 3 budget or convergence failure.

use assort_core::constrained::solve_constrained_with;
use assort_core::exact::{solve_exact_with_tolerance, INNER_TOL};
use assort_core::generator::{generate_stream, GeneratorConfig};
use assort_core::harness::{run_bench, BenchOptions};
use assort_core::io::{
    error_json, from_json, instance_to_file, parse_instance, parse_placement, placement_entries,
    violation_json,
};
use assort_core::model::{check_feasible, expected_revenue, revenue_parts};
use assort_core::oracle::{oracle_p0, oracle_p2, OracleBudget};
use assort_core::submodular::MaximizeOptions;
use assort_core::{Error, Instance};
use clap::{ArgGroup, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser, Debug)]
#[command(
    name = "assort",
    version,
    about = "Assortment planning with sponsored products"
)]
struct Cli {
    /// Convergence tolerance of the exact solver.
    #[arg(long, global = true, default_value_t = INNER_TOL)]
    tolerance: f64,
    /// Overrides the seed of a generator config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Solve an instance file.
    #[command(group(ArgGroup::new("mode").required(true).args(["exact", "constrained"])))]
    Solve {
        /// Optimal placement, ignoring the organic constraint.
        #[arg(long)]
        exact: bool,
        /// Approximate placement respecting the organic constraint.
        #[arg(long)]
        constrained: bool,
        /// Polish matroid-constrained organic choices with local search.
        #[arg(long)]
        local_search: bool,
        file: PathBuf,
    },
    /// Solve a small instance by enumeration.
    Oracle {
        file: PathBuf,
        #[arg(long, value_enum, default_value_t = Problem::P0)]
        problem: Problem,
        #[arg(long)]
        max_products: Option<usize>,
        #[arg(long)]
        max_positions: Option<usize>,
    },
    /// Check a placement file against an instance.
    Check { file: PathBuf, placement: PathBuf },
    /// Generate instances and compare solvers with the oracles.
    Bench {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value_t = 50)]
        trials: usize,
        #[arg(long)]
        max_products: Option<usize>,
        #[arg(long)]
        local_search: bool,
    },
    /// Print a generated instance file.
    Generate {
        #[arg(long)]
        config: PathBuf,
        /// Which instance of the seeded sequence to print.
        #[arg(long, default_value_t = 0)]
        index: u64,
    },
}

#[derive(Copy, Clone, Debug, ValueEnum)]
enum Problem {
    /// Unconstrained.
    P0,
    /// With the organic constraint.
    P2,
}

enum Failure {
    Core(Error),
    Io { file: PathBuf, message: String },
    Usage(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Core(e)
    }
}

impl Failure {
    fn exit_code(&self) -> u8 {
        match self {
            Failure::Io { .. } | Failure::Usage(_) => 2,
            Failure::Core(e) => match e {
                Error::Parse { .. } | Error::Validation { .. } | Error::Config(_) => 2,
                Error::InfeasibleSponsoredAssignment
                | Error::InvalidPlacement(_)
                | Error::ProductNotPlaced(_)
                | Error::ProductNotInSet(_) => 1,
                Error::BudgetExceeded { .. }
                | Error::ConvergenceFailure { .. }
                | Error::GroundSetTooLarge { .. }
                | Error::NoPerfectMatching => 3,
            },
        }
    }

    fn to_json(&self) -> Value {
        match self {
            Failure::Core(e) => error_json(e),
            Failure::Io { file, message } => json!({
                "error": { "kind": "io_error", "file": file.display().to_string(), "message": message }
            }),
            Failure::Usage(message) => {
                json!({ "error": { "kind": "usage_error", "message": message } })
            }
        }
    }
}

/// A successful run: the JSON to print and the exit code.
struct Outcome {
    body: Value,
    code: u8,
}

impl Outcome {
    fn ok(body: Value) -> Self {
        Outcome { body, code: 0 }
    }
}

fn read(path: &Path) -> Result<String, Failure> {
    std::fs::read_to_string(path).map_err(|e| Failure::Io {
        file: path.to_path_buf(),
        message: e.to_string(),
    })
}

fn load_instance(path: &Path) -> Result<Instance, Failure> {
    let inst = parse_instance(&read(path)?)?;
    log::info!(
        "loaded {}: {} organic, {} sponsored, k = {}",
        path.display(),
        inst.organic().len(),
        inst.sponsored().len(),
        inst.k()
    );
    Ok(inst)
}

fn load_config(path: &Path, seed: Option<u64>) -> Result<GeneratorConfig, Failure> {
    let mut cfg: GeneratorConfig = from_json(&read(path)?)?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn budget(max_products: Option<usize>, max_positions: Option<usize>) -> OracleBudget {
    let d = OracleBudget::default();
    OracleBudget {
        max_products: max_products.unwrap_or(d.max_products),
        max_positions: max_positions.unwrap_or(d.max_positions),
        ..d
    }
}

fn run(cli: Cli) -> Result<Outcome, Failure> {
    if !(cli.tolerance.is_finite() && cli.tolerance >= 0.0) {
        return Err(Failure::Usage(format!(
            "--tolerance must be finite and nonnegative, got {}",
            cli.tolerance
        )));
    }
    match cli.command {
        Command::Solve {
            exact,
            local_search,
            file,
            ..
        } => {
            let inst = load_instance(&file)?;
            if exact {
                let sol = solve_exact_with_tolerance(&inst, cli.tolerance)?;
                log::info!("converged after {} iterations", sol.trace.iterations.len());
                Ok(Outcome::ok(json!({
                    "problem": "unconstrained",
                    "revenue": sol.revenue,
                    "placement": placement_entries(&inst, &sol.placement),
                    "iterations": sol.trace.iterations,
                    "converged": sol.trace.converged,
                })))
            } else {
                let opts = MaximizeOptions {
                    local_search,
                    ..MaximizeOptions::default()
                };
                let report = solve_constrained_with(&inst, &opts)?;
                let candidates: Vec<Value> = report
                    .both
                    .iter()
                    .map(|c| {
                        let mut v = serde_json::to_value(c).expect("reports serialize");
                        v["placement"] = json!(placement_entries(&inst, &c.placement));
                        v
                    })
                    .collect();
                Ok(Outcome::ok(json!({
                    "problem": "constrained",
                    "revenue": report.best.revenue,
                    "role": report.best.role,
                    "placement": placement_entries(&inst, &report.best.placement),
                    "beta": report.beta_used,
                    "guaranteed_ratio": report.guaranteed_ratio(),
                    "candidates": candidates,
                })))
            }
        }
        Command::Oracle {
            file,
            problem,
            max_products,
            max_positions,
        } => {
            let inst = load_instance(&file)?;
            let budget = budget(max_products, max_positions);
            match problem {
                Problem::P0 => {
                    let (pl, rev) = oracle_p0(&inst, &budget)?;
                    Ok(Outcome::ok(json!({
                        "problem": "p0",
                        "revenue": rev,
                        "placement": placement_entries(&inst, &pl),
                    })))
                }
                Problem::P2 => {
                    let opt = oracle_p2(&inst, &budget)?;
                    Ok(Outcome::ok(json!({
                        "problem": "p2",
                        "revenue": opt.revenue,
                        "part_sponsored": opt.part_sponsored,
                        "part_organic": opt.part_organic,
                        "placement": placement_entries(&inst, &opt.placement),
                    })))
                }
            }
        }
        Command::Check { file, placement } => {
            let inst = load_instance(&file)?;
            let pl = parse_placement(&inst, &read(&placement)?)?;
            let verdict = check_feasible(&inst, &pl);
            let mut body = json!({
                "feasible": verdict.is_ok(),
                "violations": verdict.violations.iter().map(|v| violation_json(&inst, v)).collect::<Vec<_>>(),
            });
            if let (Ok(rev), Ok((s, o))) = (expected_revenue(&inst, &pl), revenue_parts(&inst, &pl))
            {
                body["revenue"] = json!(rev);
                body["part_sponsored"] = json!(s);
                body["part_organic"] = json!(o);
            }
            Ok(Outcome {
                body,
                code: if verdict.is_ok() { 0 } else { 1 },
            })
        }
        Command::Bench {
            config,
            trials,
            max_products,
            local_search,
        } => {
            let cfg = load_config(&config, cli.seed)?;
            let opts = BenchOptions {
                trials,
                budget: budget(max_products, None),
                tolerance: cli.tolerance,
                maximize: MaximizeOptions {
                    local_search,
                    ..MaximizeOptions::default()
                },
            };
            let report = run_bench(&cfg, &opts)?;
            log::info!(
                "{} certified, {} uncertified, {} errors",
                report.summary.certified,
                report.summary.uncertified,
                report.summary.errors
            );
            Ok(Outcome::ok(
                serde_json::to_value(&report).expect("reports serialize"),
            ))
        }
        Command::Generate { config, index } => {
            let cfg = load_config(&config, cli.seed)?;
            let inst = generate_stream(&cfg, index)?;
            Ok(Outcome::ok(
                serde_json::to_value(instance_to_file(&inst)).expect("instances serialize"),
            ))
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let (body, code) = match Cli::try_parse() {
        Err(e) if !e.use_stderr() => {
            // --help and --version
            print!("{e}");
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let f = Failure::Usage(e.to_string().trim_end().to_string());
            (f.to_json(), f.exit_code())
        }
        Ok(cli) => match run(cli) {
            Ok(o) => (o.body, o.code),
            Err(f) => {
                log::error!(
                    "{}",
                    f.to_json()["error"]["message"].as_str().unwrap_or_default()
                );
                (f.to_json(), f.exit_code())
            }
        },
    };
    println!(
        "{}",
        serde_json::to_string_pretty(&body).expect("values serialize")
    );
    ExitCode::from(code)
}
