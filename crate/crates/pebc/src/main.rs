//! `pebc` — check, simulate, statistically estimate, exactly analyze, and
//! export probabilistic Event-B machines.
//!
//! Exit codes: 0 success; 1 model diagnostics (including analyses whose
//! preconditions fail); 2 usage errors (bad flags, unreadable files,
//! malformed queries); 3 runtime evaluation errors; 4 resource bounds
//! (state or solver limits).

use clap::{Parser, Subcommand, ValueEnum};
use num_traits::ToPrimitive;
use peb_core::diag::Severity;
use peb_core::exact::{build_dtmc, build_dtmc_abstracting, exact_query, BuildError, ExactError, ExactOptions};
use peb_core::ir::CExpr;
use peb_core::query::Query;
use peb_core::sim::{run, RunConfig, SimError, RNG_ALGORITHM};
use pebc::export;
use pebc::load::{build_query, load, render_diagnostic, LoadError, Loaded};
use pebc::output::*;
use pebc::smc::{estimate, SmcError, SmcOptions};
use std::io::Write;
use std::path::PathBuf;
use std::time::Instant;

#[derive(Parser)]
#[command(name = "pebc", version, about = "Simulator and model checker for probabilistic Event-B machines")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
    /// Emit results (and errors) as JSON on stdout.
    #[arg(long, global = true)]
    json: bool,
}

#[derive(Subcommand)]
enum Cmd {
    /// Parse and check a model; exit 0 iff it is well-formed.
    Check {
        /// Model file(s): one combined file or a context/machine pair.
        #[arg(required = true)]
        files: Vec<PathBuf>,
    },
    /// Run one seeded simulation and print the final state.
    Simulate {
        #[arg(required = true)]
        files: Vec<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1_000_000)]
        max_steps: u64,
        /// Write the trace as line-delimited JSON to a file, or `-` for stdout.
        #[arg(long)]
        trace: Option<PathBuf>,
        /// Stop the run when this boolean expression holds.
        #[arg(long)]
        stop: Option<String>,
    },
    /// Estimate a query by Monte-Carlo simulation with a confidence interval.
    Smc {
        #[arg(required = true)]
        files: Vec<PathBuf>,
        /// A PROPERTIES name or an ad-hoc expression.
        #[arg(long)]
        query: String,
        /// Estimate the probability of reaching the predicate within K steps.
        #[arg(long, value_name = "K")]
        within: Option<u64>,
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
        #[arg(long, default_value_t = 0.01)]
        delta: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1_000_000)]
        max_runs: u64,
        #[arg(long, default_value_t = 64)]
        batch: u64,
        /// Parallel simulation workers.
        #[arg(long, env = "PEBC_JOBS", default_value_t = 1)]
        jobs: usize,
        #[arg(long, default_value_t = 1_000_000)]
        max_steps: u64,
        /// Write per-run samples as CSV.
        #[arg(long)]
        samples: Option<PathBuf>,
        /// Write a gnuplot-compatible histogram of the samples.
        #[arg(long)]
        histogram: Option<PathBuf>,
    },
    /// Answer a query exactly by enumerating the reachable DTMC.
    Exact {
        #[arg(required = true)]
        files: Vec<PathBuf>,
        #[arg(long)]
        query: String,
        #[arg(long, value_name = "K")]
        within: Option<u64>,
        /// Step horizon for chains without almost-sure termination.
        #[arg(long, value_name = "K")]
        horizon: Option<u64>,
        #[arg(long, default_value_t = peb_core::exact::DEFAULT_MAX_STATES)]
        max_states: usize,
        #[arg(long, default_value_t = peb_core::exact::DEFAULT_SOLVE_LIMIT)]
        solve_limit: usize,
    },
    /// Export the reachable DTMC as explicit-state files.
    Export {
        #[arg(required = true)]
        files: Vec<PathBuf>,
        #[arg(long, value_enum)]
        format: ExportFormat,
        /// Output path prefix; produces PREFIX.tra/.sta or PREFIX.dot.
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = peb_core::exact::DEFAULT_MAX_STATES)]
        max_states: usize,
        /// Abstract away pure counter variables before enumeration.
        #[arg(long)]
        abstract_counters: bool,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum ExportFormat {
    Tra,
    Dot,
}

struct CliError {
    code: i32,
    kind: &'static str,
    message: String,
}

impl CliError {
    fn new(code: i32, kind: &'static str, message: impl Into<String>) -> Self {
        CliError { code, kind, message: message.into() }
    }
}

impl From<LoadError> for CliError {
    fn from(e: LoadError) -> Self {
        match &e {
            LoadError::Io { .. } => CliError::new(2, "io", e.to_string()),
            LoadError::Diagnostics { .. } => CliError::new(1, "diagnostics", e.to_string()),
            LoadError::Query(_) => CliError::new(2, "usage", e.to_string()),
        }
    }
}

impl From<SimError> for CliError {
    fn from(e: SimError) -> Self {
        match e {
            SimError::Eval { .. } => CliError::new(3, "evaluation", e.to_string()),
            SimError::InvalidConfig(_) => CliError::new(2, "usage", e.to_string()),
        }
    }
}

impl From<SmcError> for CliError {
    fn from(e: SmcError) -> Self {
        match e {
            SmcError::Run { .. } => CliError::new(3, "evaluation", e.to_string()),
            SmcError::Invalid(_) => CliError::new(2, "usage", e.to_string()),
        }
    }
}

impl From<ExactError> for CliError {
    fn from(e: ExactError) -> Self {
        match &e {
            ExactError::Build(BuildError::StateBound { .. }) | ExactError::SolveLimit { .. } => {
                CliError::new(4, "resource-bound", e.to_string())
            }
            ExactError::Build(BuildError::Eval { .. }) | ExactError::Eval(_) => {
                CliError::new(3, "evaluation", e.to_string())
            }
            ExactError::NoAbsorption => CliError::new(1, "diagnostics", e.to_string()),
            ExactError::Unsupported(_) => CliError::new(2, "usage", e.to_string()),
        }
    }
}

fn io_err(path: &PathBuf, e: std::io::Error) -> CliError {
    CliError::new(2, "io", format!("cannot write `{}`: {e}", path.display()))
}

fn main() {
    let cli = Cli::parse();
    let json = cli.json;
    match dispatch(cli) {
        Ok(code) => std::process::exit(code),
        Err(e) => {
            if json {
                let out = ErrorJson {
                    error: e.kind.to_string(),
                    message: e.message.clone(),
                    exit_code: e.code,
                };
                println!("{}", serde_json::to_string_pretty(&out).unwrap());
            } else {
                eprintln!("pebc: {}", e.message);
            }
            std::process::exit(e.code);
        }
    }
}

fn print_warnings(loaded: &Loaded) {
    for w in &loaded.warnings {
        if w.severity == Severity::Warning {
            eprintln!("{}", render_diagnostic(w, &loaded.files));
        }
    }
}

fn parse_query(
    loaded: &Loaded,
    compiled: CExpr,
    raw: &str,
    within: Option<u64>,
) -> Result<Query, CliError> {
    build_query(&loaded.model, compiled, raw, within).map_err(CliError::from)
}

fn dispatch(cli: Cli) -> Result<i32, CliError> {
    match cli.cmd {
        Cmd::Check { files } => {
            match load(&files, &[]) {
                Ok((loaded, _)) => {
                    if cli.json {
                        let out = CheckJson {
                            well_formed: true,
                            diagnostics: loaded
                                .warnings
                                .iter()
                                .map(|d| DiagnosticJson {
                                    severity: d.severity.to_string(),
                                    message: d.message.clone(),
                                    file: loaded
                                        .files
                                        .get(d.span.file.0 as usize)
                                        .map(|p| p.display().to_string())
                                        .unwrap_or_default(),
                                    line: d.span.line,
                                    col: d.span.col,
                                })
                                .collect(),
                        };
                        println!("{}", serde_json::to_string_pretty(&out).unwrap());
                    } else {
                        print_warnings(&loaded);
                        println!(
                            "{}: machine {} (sees {}) is well-formed: {} variables, {} events",
                            files[0].display(),
                            loaded.model.machine_name,
                            loaded.model.context_name,
                            loaded.model.var_names.len(),
                            loaded.model.events.len()
                        );
                    }
                    Ok(0)
                }
                Err(LoadError::Diagnostics { diagnostics, files }) if cli.json => {
                    let out = CheckJson {
                        well_formed: false,
                        diagnostics: diagnostics
                            .iter()
                            .map(|d| DiagnosticJson {
                                severity: d.severity.to_string(),
                                message: d.message.clone(),
                                file: files
                                    .get(d.span.file.0 as usize)
                                    .map(|p| p.display().to_string())
                                    .unwrap_or_default(),
                                line: d.span.line,
                                col: d.span.col,
                            })
                            .collect(),
                    };
                    println!("{}", serde_json::to_string_pretty(&out).unwrap());
                    Ok(1)
                }
                Err(e) => Err(e.into()),
            }
        }
        Cmd::Simulate { files, seed, max_steps, trace, stop } => {
            let stop_strings: Vec<&str> = stop.as_deref().into_iter().collect();
            let (loaded, mut queries) = load(&files, &stop_strings)?;
            print_warnings(&loaded);
            let stop_expr = queries.pop();
            let mut cfg = RunConfig::new(seed, max_steps);
            cfg.stop = stop_expr.as_ref();
            let result = run(&loaded.model, &cfg)?;
            if let Some(path) = &trace {
                if path.as_os_str() == "-" {
                    let stdout = std::io::stdout();
                    export::write_trace_jsonl(&loaded.model, &result, &mut stdout.lock())
                        .map_err(|e| io_err(path, e))?;
                } else {
                    let mut f = std::fs::File::create(path).map_err(|e| io_err(path, e))?;
                    export::write_trace_jsonl(&loaded.model, &result, &mut f)
                        .map_err(|e| io_err(path, e))?;
                }
            }
            if cli.json {
                let out = SimulateJson {
                    seed,
                    steps: result.steps.len() as u64,
                    termination: result.termination.to_string(),
                    final_state: export::state_json(&loaded.model, result.final_state()),
                    rng_algorithm: RNG_ALGORITHM.to_string(),
                };
                println!("{}", serde_json::to_string_pretty(&out).unwrap());
            } else {
                println!(
                    "termination: {} after {} steps (seed {seed}, rng {RNG_ALGORITHM})",
                    result.termination,
                    result.steps.len()
                );
                let rendered: Vec<String> = loaded
                    .model
                    .var_names
                    .iter()
                    .zip(result.final_state().values())
                    .map(|(n, v)| format!("{n}={}", v.display(&loaded.model.symbols)))
                    .collect();
                println!("{}", rendered.join(" "));
            }
            Ok(0)
        }
        Cmd::Smc {
            files,
            query,
            within,
            alpha,
            delta,
            seed,
            max_runs,
            batch,
            jobs,
            max_steps,
            samples,
            histogram,
        } => {
            let started = Instant::now();
            let (loaded, mut compiled) = load(&files, &[query.as_str()])?;
            print_warnings(&loaded);
            let q = parse_query(&loaded, compiled.pop().unwrap(), &query, within)?;
            let opts = SmcOptions {
                alpha,
                delta,
                master_seed: seed,
                max_runs,
                batch,
                jobs,
                max_steps,
            };
            let result = estimate(&loaded.model, &q, &opts)?;
            if let Some(path) = &samples {
                let mut f = std::fs::File::create(path).map_err(|e| io_err(path, e))?;
                writeln!(f, "run,value,truncated").map_err(|e| io_err(path, e))?;
                for (i, s) in result.samples.iter().enumerate() {
                    writeln!(f, "{i},{},{}", s.value, s.truncated).map_err(|e| io_err(path, e))?;
                }
            }
            if let Some(path) = &histogram {
                let mut f = std::fs::File::create(path).map_err(|e| io_err(path, e))?;
                let values: Vec<f64> = result.samples.iter().map(|s| s.value).collect();
                export::write_histogram(&values, 32, &mut f).map_err(|e| io_err(path, e))?;
            }
            let est = &result.estimate;
            if est.truncated_runs > 0 {
                eprintln!(
                    "pebc: warning: {} of {} runs hit the step bound ({max_steps}); they contribute their last state",
                    est.truncated_runs, est.runs
                );
            }
            if cli.json {
                let out = EstimateJson {
                    query: query.clone(),
                    mean: est.mean,
                    half_width: est.half_width,
                    confidence: est.confidence,
                    runs: est.runs,
                    seed: est.master_seed,
                    wall_time: started.elapsed().as_secs_f64(),
                    truncated_runs: est.truncated_runs,
                    rng_algorithm: est.rng_algorithm.to_string(),
                };
                println!("{}", serde_json::to_string_pretty(&out).unwrap());
            } else {
                println!("query: {query}");
                println!(
                    "mean = {:.6} \u{00b1} {:.6} ({:.0}% confidence, {} runs, seed {})",
                    est.mean,
                    est.half_width,
                    est.confidence * 100.0,
                    est.runs,
                    est.master_seed
                );
            }
            Ok(0)
        }
        Cmd::Exact { files, query, within, horizon, max_states, solve_limit } => {
            let started = Instant::now();
            let (loaded, mut compiled) = load(&files, &[query.as_str()])?;
            print_warnings(&loaded);
            let q = parse_query(&loaded, compiled.pop().unwrap(), &query, within)?;
            let opts = ExactOptions { max_states, solve_limit, horizon };
            let analysis = exact_query(&loaded.model, &q, &opts)?;
            let decimal = analysis.value.to_f64().unwrap_or(f64::NAN);
            if cli.json {
                let out = ExactJson {
                    query: query.clone(),
                    exact: analysis.value.to_string(),
                    decimal,
                    states: analysis.states,
                    transitions: analysis.transitions,
                    abstracted: analysis.abstracted.clone(),
                    wall_time: started.elapsed().as_secs_f64(),
                };
                println!("{}", serde_json::to_string_pretty(&out).unwrap());
            } else {
                println!("query: {query}");
                let abstracted = if analysis.abstracted.is_empty() {
                    String::new()
                } else {
                    format!("; abstracted counters: {}", analysis.abstracted.join(", "))
                };
                println!(
                    "exact = {} = {decimal:.6} ({} states, {} transitions{abstracted})",
                    analysis.value, analysis.states, analysis.transitions
                );
            }
            Ok(0)
        }
        Cmd::Export { files, format, out, max_states, abstract_counters } => {
            let (loaded, _) = load(&files, &[])?;
            print_warnings(&loaded);
            let dtmc = if abstract_counters {
                let drop: Vec<_> =
                    peb_core::exact::accumulators(&loaded.model).iter().map(|a| a.var).collect();
                build_dtmc_abstracting(&loaded.model, &drop, max_states, None)
            } else {
                build_dtmc(&loaded.model, max_states)
            }
            .map_err(ExactError::from)?;
            let mut written = Vec::new();
            match format {
                ExportFormat::Tra => {
                    let tra = out.with_extension("tra");
                    let sta = out.with_extension("sta");
                    let mut f = std::fs::File::create(&tra).map_err(|e| io_err(&tra, e))?;
                    export::write_tra(&loaded.model, &dtmc, &mut f).map_err(|e| io_err(&tra, e))?;
                    let mut f = std::fs::File::create(&sta).map_err(|e| io_err(&sta, e))?;
                    export::write_sta(&loaded.model, &dtmc, &mut f).map_err(|e| io_err(&sta, e))?;
                    written.push(tra.display().to_string());
                    written.push(sta.display().to_string());
                }
                ExportFormat::Dot => {
                    let dot = out.with_extension("dot");
                    let mut f = std::fs::File::create(&dot).map_err(|e| io_err(&dot, e))?;
                    export::write_dot(&loaded.model, &dtmc, &mut f).map_err(|e| io_err(&dot, e))?;
                    written.push(dot.display().to_string());
                }
            }
            if cli.json {
                let out = ExportJson {
                    states: dtmc.num_states(),
                    transitions: dtmc.num_transitions(),
                    files: written,
                };
                println!("{}", serde_json::to_string_pretty(&out).unwrap());
            } else {
                println!(
                    "exported {} states, {} transitions to {}",
                    dtmc.num_states(),
                    dtmc.num_transitions(),
                    written.join(", ")
                );
            }
            Ok(0)
        }
    }
}
