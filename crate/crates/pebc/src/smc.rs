//! Statistical estimation of quantitative queries by repeated simulation.
//!
//! Runs execute in batches until the Student-t confidence interval at level
//! `1 - alpha` has half-width at most `delta` (or the run budget is
//! exhausted). After an initial batch the next batch size is projected from
//! the current sample variance, so the stopping rule takes only a handful of
//! looks at the data.
//!
//! Estimates are reproducible bit-for-bit: per-run seeds derive from
//! `(master seed, run index)`, samples are aggregated in run-index order,
//! and the worker count has no influence on the result.

use peb_core::ir::CompiledModel;
use peb_core::query::{run_query, Query};
use peb_core::sim::{derive_run_seed, RunConfig, SimError, Termination, RNG_ALGORITHM};
use statrs::distribution::{ContinuousCDF, StudentsT};
use thiserror::Error;

#[derive(Debug, Clone, Copy)]
pub struct SmcOptions {
    /// Confidence level is `1 - alpha`.
    pub alpha: f64,
    /// Target half-width of the confidence interval.
    pub delta: f64,
    pub master_seed: u64,
    pub max_runs: u64,
    /// Initial batch size (also the minimum growth per look).
    pub batch: u64,
    pub jobs: usize,
    pub max_steps: u64,
}

impl Default for SmcOptions {
    fn default() -> Self {
        SmcOptions {
            alpha: 0.05,
            delta: 0.01,
            master_seed: 0,
            max_runs: 1_000_000,
            batch: 64,
            jobs: 1,
            max_steps: 1_000_000,
        }
    }
}

/// One simulation sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunSample {
    pub value: f64,
    /// True when the run hit the step bound instead of terminating.
    pub truncated: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Estimate {
    pub mean: f64,
    pub half_width: f64,
    /// Confidence level `1 - alpha`.
    pub confidence: f64,
    pub runs: u64,
    pub master_seed: u64,
    /// Runs that hit the step bound; they contribute their final state.
    pub truncated_runs: u64,
    pub rng_algorithm: &'static str,
}

#[derive(Debug, Clone)]
pub struct SmcResult {
    pub estimate: Estimate,
    /// Per-run query values in run-index order.
    pub samples: Vec<RunSample>,
}

#[derive(Debug, Error)]
pub enum SmcError {
    #[error("run {run}: {source}")]
    Run {
        run: u64,
        #[source]
        source: SimError,
    },
    #[error("invalid options: {0}")]
    Invalid(&'static str),
}

fn t_quantile(alpha: f64, df: f64) -> f64 {
    StudentsT::new(0.0, 1.0, df)
        .expect("df >= 1")
        .inverse_cdf(1.0 - alpha / 2.0)
}

fn mean_sd(samples: &[RunSample]) -> (f64, f64) {
    let n = samples.len() as f64;
    let mean = samples.iter().map(|s| s.value).sum::<f64>() / n;
    if samples.len() < 2 {
        return (mean, 0.0);
    }
    let ss = samples.iter().map(|s| (s.value - mean) * (s.value - mean)).sum::<f64>();
    (mean, (ss / (n - 1.0)).sqrt())
}

/// Runs the indices `[from, to)` across `jobs` workers; results come back in
/// run-index order regardless of scheduling.
fn run_batch(
    model: &CompiledModel,
    query: &Query,
    opts: &SmcOptions,
    from: u64,
    to: u64,
) -> Result<Vec<RunSample>, SmcError> {
    let total = (to - from) as usize;
    let jobs = opts.jobs.max(1).min(total.max(1));
    let chunk = total.div_ceil(jobs);
    let mut chunks: Vec<Result<Vec<RunSample>, SmcError>> = Vec::new();
    std::thread::scope(|scope| {
        let handles: Vec<_> = (0..jobs)
            .map(|w| {
                let start = from + (w * chunk) as u64;
                let end = to.min(from + ((w + 1) * chunk) as u64);
                scope.spawn(move || -> Result<Vec<RunSample>, SmcError> {
                    let mut out = Vec::with_capacity((end.saturating_sub(start)) as usize);
                    for i in start..end {
                        let cfg = RunConfig::new(derive_run_seed(opts.master_seed, i), opts.max_steps);
                        let outcome = run_query(model, &cfg, query)
                            .map_err(|source| SmcError::Run { run: i, source })?;
                        out.push(RunSample {
                            value: outcome.value,
                            truncated: outcome.termination == Termination::StepBound,
                        });
                    }
                    Ok(out)
                })
            })
            .collect();
        for h in handles {
            chunks.push(h.join().expect("worker panicked"));
        }
    });
    let mut out = Vec::with_capacity(total);
    for c in chunks {
        out.extend(c?);
    }
    Ok(out)
}

/// Estimates the query value with a `1 - alpha` Student-t confidence
/// interval, stopping when the half-width reaches `delta` or `max_runs`.
pub fn estimate(
    model: &CompiledModel,
    query: &Query,
    opts: &SmcOptions,
) -> Result<SmcResult, SmcError> {
    if !(0.0..1.0).contains(&opts.alpha) || opts.alpha <= 0.0 {
        return Err(SmcError::Invalid("alpha must lie in (0, 1)"));
    }
    if opts.delta < 0.0 {
        return Err(SmcError::Invalid("delta must be nonnegative"));
    }
    if opts.batch < 2 {
        return Err(SmcError::Invalid("batch must be at least 2"));
    }
    if opts.max_runs < 2 {
        return Err(SmcError::Invalid("max_runs must be at least 2"));
    }
    if opts.max_steps == 0 {
        return Err(SmcError::Invalid("max_steps must be at least 1"));
    }
    let mut samples: Vec<RunSample> = Vec::new();
    let mut target = opts.batch.min(opts.max_runs);
    let (mean, half_width) = loop {
        let done = samples.len() as u64;
        samples.extend(run_batch(model, query, opts, done, target)?);
        let n = samples.len() as u64;
        let (mean, sd) = mean_sd(&samples);
        let t = t_quantile(opts.alpha, (n - 1) as f64);
        let half_width = if sd == 0.0 { 0.0 } else { t * sd / (n as f64).sqrt() };
        if half_width <= opts.delta || n >= opts.max_runs {
            break (mean, half_width);
        }
        // projected run count for the target half-width, with 10% slack;
        // growth is at least geometric so the rule takes few looks (frequent
        // near-threshold looks would bias the stopped interval)
        let projected = (t * sd / opts.delta).powi(2) * 1.1;
        let projected = if projected.is_finite() { projected.ceil() as u64 } else { opts.max_runs };
        target = projected
            .max(n.saturating_add(opts.batch))
            .max(n.saturating_add(n / 2))
            .min(opts.max_runs);
    };
    let truncated_runs = samples.iter().filter(|s| s.truncated).count() as u64;
    Ok(SmcResult {
        estimate: Estimate {
            mean,
            half_width,
            confidence: 1.0 - opts.alpha,
            runs: samples.len() as u64,
            master_seed: opts.master_seed,
            truncated_runs,
            rng_algorithm: RNG_ALGORITHM,
        },
        samples,
    })
}
