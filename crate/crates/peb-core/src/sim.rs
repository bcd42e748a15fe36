//! Seeded Monte-Carlo execution.
//!
//! Each step mirrors the three-phase execution pipeline: compute the status
//! of every event, pick the next event by accumulated weights, then execute
//! it with sampled parameter and assignment choices.
//!
//! Determinism contract: the generator is ChaCha8 seeded from a 64-bit seed;
//! per-run seeds in batch mode derive from `(master seed, run index)` via
//! [`derive_run_seed`]. Per step the generator is consumed in a fixed order:
//! (1) one bounded-uniform sample for the event choice, (2) one
//! bounded-uniform sample for the parameter valuation iff the chosen event
//! declares parameters, (3) one sample per probabilistic assignment in
//! action declaration order (bounded-uniform for uniform set/list choices, a
//! 53-bit uniform real for enumerated ones). Deterministic assignments
//! consume nothing. Bounded-uniform sampling may reject and re-draw
//! internally, but the draw sequence is a pure function of the seed.

use crate::eval::{Ctx, EvalError, EvalErrorKind, EvalResult, Evaluator};
use crate::ir::{CExpr, CRhs, CompiledModel, EventId};
use crate::semantics::{initial_state, EventStatus, MachineState, ParamValuation};
use crate::value::Value;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Name of the RNG algorithm, recorded in trace metadata.
pub const RNG_ALGORITHM: &str = "chacha8";

/// Derives an independent per-run seed from a master seed and a run index
/// through a splitmix64-style avalanche mix.
pub fn derive_run_seed(master: u64, run_index: u64) -> u64 {
    let mut z = master ^ run_index.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Picks the next event: filter the enabled events preserving declaration
/// order, accumulate their weights, and return the first event whose
/// accumulated weight strictly exceeds `r`. Requires `0 <= r < sum of
/// enabled weights`; returns `None` if nothing is enabled or `r` is out of
/// range.
pub fn pick_event(statuses: &[(EventId, EventStatus)], r: u64) -> Option<EventId> {
    let mut acc: u128 = 0;
    for (id, st) in statuses {
        if let EventStatus::Enabled { weight } = st {
            acc += *weight as u128;
            if acc > r as u128 {
                return Some(*id);
            }
        }
    }
    None
}

/// First index whose cumulative mass strictly exceeds the sample.
pub fn pick_cumulative(cumulative: &[f64], u: f64) -> usize {
    cumulative.iter().position(|c| u < *c).unwrap_or(cumulative.len() - 1)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    Deadlock,
    StepBound,
    StopPredicate,
}

impl fmt::Display for Termination {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Termination::Deadlock => "deadlock",
            Termination::StepBound => "step-bound",
            Termination::StopPredicate => "stop-predicate",
        })
    }
}

/// Configuration of one run.
#[derive(Debug, Clone, Copy)]
pub struct RunConfig<'m> {
    pub seed: u64,
    pub max_steps: u64,
    /// Optional boolean stop predicate, checked on the current state
    /// (including the initial one) before each step.
    pub stop: Option<&'m CExpr>,
}

impl<'m> RunConfig<'m> {
    pub fn new(seed: u64, max_steps: u64) -> Self {
        RunConfig { seed, max_steps, stop: None }
    }
}

/// A recorded execution: the initial state and one `(step index, event,
/// post-state)` entry per transition, 1-based.
#[derive(Debug, Clone)]
pub struct Trace {
    pub initial: MachineState,
    pub steps: Vec<(u64, EventId, MachineState)>,
    pub termination: Termination,
    pub seed: u64,
    pub rng_algorithm: &'static str,
}

impl Trace {
    pub fn final_state(&self) -> &MachineState {
        self.steps.last().map(|(_, _, s)| s).unwrap_or(&self.initial)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SimError {
    /// Evaluator error at a given step (0 = during initialization checks).
    Eval { step: u64, error: EvalError },
    InvalidConfig(&'static str),
}

impl fmt::Display for SimError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SimError::Eval { step, error } => write!(f, "step {step}: {error}"),
            SimError::InvalidConfig(m) => write!(f, "invalid run configuration: {m}"),
        }
    }
}

impl core::error::Error for SimError {}

/// Stateful step engine: one RNG per run, reusable evaluator.
pub struct Simulator<'m> {
    model: &'m CompiledModel,
    rng: ChaCha8Rng,
    eval: Evaluator<'m>,
}

impl<'m> Simulator<'m> {
    pub fn new(model: &'m CompiledModel, seed: u64) -> Self {
        Simulator { model, rng: ChaCha8Rng::seed_from_u64(seed), eval: Evaluator::new() }
    }

    /// Performs one probabilistic step from `state`; `None` on deadlock.
    pub fn step(&mut self, state: &MachineState) -> EvalResult<Option<(EventId, MachineState)>> {
        let model = self.model;
        // phase 1: event statuses (weights plus existence of a
        // guard-satisfying valuation); domains are kept for the chosen event
        let mut statuses: Vec<(EventId, EventStatus)> = Vec::with_capacity(model.events.len());
        let mut domains: Vec<Option<Vec<Vec<Value>>>> = vec![None; model.events.len()];
        let mut total: u64 = 0;
        let ctx = Ctx::model(model, state.values(), &[]);
        for (i, event) in model.events.iter().enumerate() {
            let w = {
                let v = self.eval.eval(&ctx, &event.weight)?;
                let w = v.as_int().ok_or_else(|| {
                    EvalError::new(
                        EvalErrorKind::KindMismatch("event weight must be an integer".into()),
                        event.weight.span,
                    )
                })?;
                if w < 0 {
                    return Err(EvalError::new(
                        EvalErrorKind::NegativeWeight(w),
                        event.weight.span,
                    ));
                }
                w as u64
            };
            if w == 0 {
                statuses.push((i as EventId, EventStatus::Blocked));
                continue;
            }
            let ds = self.eval_domains(state, i as EventId)?;
            // existence check with early exit
            let mut any = false;
            self.for_each_valuation(state, i as EventId, &ds, &mut |_| {
                any = true;
                false
            })?;
            if any {
                total = total.checked_add(w).ok_or_else(|| {
                    EvalError::new(EvalErrorKind::IntegerOverflow, event.weight.span)
                })?;
                statuses.push((i as EventId, EventStatus::Enabled { weight: w }));
                domains[i] = Some(ds);
            } else {
                statuses.push((i as EventId, EventStatus::Blocked));
            }
        }
        if total == 0 {
            return Ok(None);
        }

        // phase 2: weighted event choice
        let r = self.rng.gen_range(0..total);
        let event = pick_event(&statuses, r).expect("r < total implies a pick");

        // phase 3: parameter choice and assignment execution
        let e = &model.events[event as usize];
        let params: ParamValuation = if e.params.is_empty() {
            Vec::new()
        } else {
            let ds = domains[event as usize].take().expect("enabled event has domains");
            let mut valuations: Vec<ParamValuation> = Vec::new();
            self.for_each_valuation(state, event, &ds, &mut |v| {
                valuations.push(v.to_vec());
                true
            })?;
            let j = self.rng.gen_range(0..valuations.len());
            valuations.swap_remove(j)
        };

        let ctx = Ctx::model(model, state.values(), &params);
        let mut next = state.clone();
        for action in &e.actions {
            let value = match &action.rhs {
                CRhs::Det(expr) => self.eval.eval(&ctx, expr)?,
                CRhs::UniformSet(expr) => {
                    let v = self.eval.eval(&ctx, expr)?;
                    let elems = v.as_set().ok_or_else(|| {
                        EvalError::new(
                            EvalErrorKind::KindMismatch("`:in` needs a set to choose from".into()),
                            expr.span,
                        )
                    })?;
                    if elems.is_empty() {
                        return Err(EvalError::new(EvalErrorKind::EmptyChoice, expr.span));
                    }
                    let j = self.rng.gen_range(0..elems.len());
                    elems[j].clone()
                }
                CRhs::UniformList(exprs) => {
                    let j = self.rng.gen_range(0..exprs.len());
                    self.eval.eval(&ctx, &exprs[j])?
                }
                CRhs::Enumerated { branches, cumulative } => {
                    let u = self.uniform_real();
                    let j = pick_cumulative(cumulative, u);
                    self.eval.eval(&ctx, &branches[j].0)?
                }
            };
            next.set(action.target, value);
        }
        Ok(Some((event, next)))
    }

    /// 53-bit uniform real in `[0, 1)`.
    fn uniform_real(&mut self) -> f64 {
        const SCALE: f64 = 1.0 / (1u64 << 53) as f64;
        (self.rng.next_u64() >> 11) as f64 * SCALE
    }

    fn eval_domains(&mut self, state: &MachineState, event: EventId) -> EvalResult<Vec<Vec<Value>>> {
        let e = &self.model.events[event as usize];
        let ctx = Ctx::model(self.model, state.values(), &[]);
        let mut out = Vec::with_capacity(e.params.len());
        for p in &e.params {
            let v = self.eval.eval(&ctx, &p.domain)?;
            let elems = v.as_set().ok_or_else(|| {
                EvalError::new(
                    EvalErrorKind::KindMismatch("parameter domain must be a set".into()),
                    p.domain.span,
                )
            })?;
            out.push(elems.to_vec());
        }
        Ok(out)
    }

    fn for_each_valuation(
        &mut self,
        state: &MachineState,
        event: EventId,
        domains: &[Vec<Value>],
        f: &mut dyn FnMut(&[Value]) -> bool,
    ) -> EvalResult<()> {
        let e = &self.model.events[event as usize];
        if domains.iter().any(|d| d.is_empty()) {
            return Ok(());
        }
        let mut idx = vec![0usize; domains.len()];
        let mut current: Vec<Value> = domains.iter().map(|d| d[0].clone()).collect();
        loop {
            let ctx = Ctx::model(self.model, state.values(), &current);
            let g = self.eval.eval(&ctx, &e.guard)?;
            let holds = g.as_bool().ok_or_else(|| {
                EvalError::new(
                    EvalErrorKind::KindMismatch("guard must be a boolean".into()),
                    e.guard.span,
                )
            })?;
            if holds && !f(&current) {
                return Ok(());
            }
            let mut k = domains.len();
            loop {
                if k == 0 {
                    return Ok(());
                }
                k -= 1;
                idx[k] += 1;
                if idx[k] < domains[k].len() {
                    current[k] = domains[k][idx[k]].clone();
                    break;
                }
                idx[k] = 0;
                current[k] = domains[k][0].clone();
            }
        }
    }

    /// Evaluates a boolean expression in a state (used for stop predicates).
    pub fn eval_bool(&mut self, state: &MachineState, expr: &'m CExpr) -> EvalResult<bool> {
        let ctx = Ctx::model(self.model, state.values(), &[]);
        let v = self.eval.eval(&ctx, expr)?;
        v.as_bool().ok_or_else(|| {
            EvalError::new(
                EvalErrorKind::KindMismatch("stop predicate must be a boolean".into()),
                expr.span,
            )
        })
    }
}

/// Runs one seeded simulation to deadlock, the step bound, or the stop
/// predicate, recording the full trace. Fully deterministic given
/// `(model, config)`.
pub fn run<'m>(model: &'m CompiledModel, config: &RunConfig<'m>) -> Result<Trace, SimError> {
    if config.max_steps == 0 {
        return Err(SimError::InvalidConfig("max_steps must be at least 1"));
    }
    let mut sim = Simulator::new(model, config.seed);
    let mut state = initial_state(model);
    let mut steps = Vec::new();
    let mut termination = Termination::StepBound;
    let check_stop = |sim: &mut Simulator<'m>, st: &MachineState, at: u64| -> Result<bool, SimError> {
        match config.stop {
            Some(pred) => sim.eval_bool(st, pred).map_err(|error| SimError::Eval { step: at, error }),
            None => Ok(false),
        }
    };
    if check_stop(&mut sim, &state, 0)? {
        return Ok(Trace {
            initial: state,
            steps,
            termination: Termination::StopPredicate,
            seed: config.seed,
            rng_algorithm: RNG_ALGORITHM,
        });
    }
    for i in 1..=config.max_steps {
        match sim.step(&state).map_err(|error| SimError::Eval { step: i, error })? {
            None => {
                termination = Termination::Deadlock;
                break;
            }
            Some((event, next)) => {
                steps.push((i, event, next.clone()));
                state = next;
            }
        }
        if check_stop(&mut sim, &state, i)? {
            termination = Termination::StopPredicate;
            break;
        }
    }
    Ok(Trace {
        initial: initial_state(model),
        steps,
        termination,
        seed: config.seed,
        rng_algorithm: RNG_ALGORITHM,
    })
}
