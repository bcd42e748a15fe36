//! Explicit-state enumeration of the reachable DTMC and exact queries.
//!
//! States are deduplicated by their canonical representation and indexed in
//! BFS discovery order (index 0 = initial state). Absorption quantities
//! ("at end" queries) are computed by solving the exact linear absorption
//! system over rationals; bounded reachability uses exact k-step
//! distribution propagation.
//!
//! Pure counter variables (assigned only `v := v + c` with a constant `c`,
//! and read nowhere else) can be abstracted away during enumeration. This
//! keeps chains finite whose only unbounded component is such a counter;
//! their expected final value is recovered from expected event firing
//! counts.

use crate::ast::BinOp;
use crate::eval::{Ctx, EvalError, Evaluator};
use crate::ir::{expr_uses_var, CExpr, CExprKind, CRhs, CompiledModel, EventId, VarId};
use crate::query::Query;
use crate::semantics::{initial_state, successor_distribution, MachineState};
use crate::value::Value;
use alloc::collections::{BTreeMap, VecDeque};
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

/// Default bound on enumerated states.
pub const DEFAULT_MAX_STATES: usize = 1_000_000;
/// Default bound on the dense rational linear solve.
pub const DEFAULT_SOLVE_LIMIT: usize = 2_000;

/// Explicit reachable DTMC.
#[derive(Debug, Clone)]
pub struct Dtmc {
    /// Indexed states; index 0 is the initial state.
    pub states: Vec<MachineState>,
    /// Outgoing transitions per state, sorted by (event, target).
    pub transitions: Vec<Vec<(EventId, u32, BigRational)>>,
    pub deadlock: Vec<bool>,
    /// Variables whose slots are pinned to their initial value in all state
    /// keys (quotiented out of the state space).
    pub abstracted: Vec<VarId>,
}

impl Dtmc {
    pub fn num_states(&self) -> usize {
        self.states.len()
    }

    pub fn num_transitions(&self) -> usize {
        self.transitions.iter().map(Vec::len).sum()
    }
}

#[derive(Debug, Clone)]
pub enum BuildError {
    /// Enumeration exceeded the state bound.
    StateBound { limit: usize },
    /// Evaluation failed while expanding a state.
    Eval { state: MachineState, error: EvalError },
}

impl fmt::Display for BuildError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BuildError::StateBound { limit } => {
                write!(f, "state space exceeds {limit} states")
            }
            BuildError::Eval { error, .. } => write!(f, "{error}"),
        }
    }
}

impl core::error::Error for BuildError {}

/// Breadth-first enumeration of the reachable state space.
pub fn build_dtmc(model: &CompiledModel, max_states: usize) -> Result<Dtmc, BuildError> {
    build_dtmc_abstracting(model, &[], max_states, None)
}

/// Like [`build_dtmc`], with the given variables pinned to their initial
/// values in every state key. Sound only when the pinned variables influence
/// no weight, guard, domain, or other assignment (see [`accumulators`]).
/// With `depth_limit`, states at the limit are kept but not expanded.
pub fn build_dtmc_abstracting(
    model: &CompiledModel,
    drop: &[VarId],
    max_states: usize,
    depth_limit: Option<u64>,
) -> Result<Dtmc, BuildError> {
    let project = |mut s: MachineState| -> MachineState {
        for v in drop {
            s.set(*v, model.initial[*v as usize].clone());
        }
        s
    };
    let init = project(initial_state(model));
    let mut index: BTreeMap<MachineState, u32> = BTreeMap::new();
    let mut states = vec![init.clone()];
    let mut depth = vec![0u64];
    let mut transitions: Vec<Vec<(EventId, u32, BigRational)>> = Vec::new();
    let mut deadlock = Vec::new();
    index.insert(init, 0);
    let mut queue: VecDeque<u32> = VecDeque::new();
    queue.push_back(0);
    while let Some(i) = queue.pop_front() {
        let state = states[i as usize].clone();
        debug_assert_eq!(transitions.len(), i as usize);
        if depth_limit.is_some_and(|k| depth[i as usize] >= k) {
            transitions.push(Vec::new());
            deadlock.push(false);
            continue;
        }
        let dist = successor_distribution(model, &state)
            .map_err(|error| BuildError::Eval { state: state.clone(), error })?;
        let Some(dist) = dist else {
            transitions.push(Vec::new());
            deadlock.push(true);
            continue;
        };
        let mut merged: BTreeMap<(EventId, u32), BigRational> = BTreeMap::new();
        for ((event, succ), p) in dist.entries() {
            let key = project(succ.clone());
            let target = match index.get(&key) {
                Some(t) => *t,
                None => {
                    if states.len() >= max_states {
                        return Err(BuildError::StateBound { limit: max_states });
                    }
                    let t = states.len() as u32;
                    index.insert(key.clone(), t);
                    states.push(key);
                    depth.push(depth[i as usize] + 1);
                    queue.push_back(t);
                    t
                }
            };
            *merged.entry((*event, target)).or_insert_with(BigRational::zero) += p;
        }
        transitions.push(merged.into_iter().map(|((e, t), p)| (e, t, p)).collect());
        deadlock.push(false);
    }
    Ok(Dtmc { states, transitions, deadlock, abstracted: drop.to_vec() })
}

/// A pure counter variable: every assignment to it has the shape
/// `v := v + c` with a literal constant `c`, and it is read nowhere else
/// (weights, guards, domains, or other assignments).
#[derive(Debug, Clone)]
pub struct Accumulator {
    pub var: VarId,
    /// Increment applied by each event (0 when the event does not touch it).
    pub increments: Vec<i64>,
}

fn increment_of(rhs: &CRhs, var: VarId) -> Option<i64> {
    let CRhs::Det(e) = rhs else { return None };
    match &e.kind {
        CExprKind::Binary(BinOp::Add, a, b) => match (&a.kind, &b.kind) {
            (CExprKind::Var(v), CExprKind::Lit(Value::Int(c))) if *v == var => Some(*c),
            (CExprKind::Lit(Value::Int(c)), CExprKind::Var(v)) if *v == var => Some(*c),
            _ => None,
        },
        _ => None,
    }
}

/// Finds all variables eligible for counter abstraction.
pub fn accumulators(model: &CompiledModel) -> Vec<Accumulator> {
    let mut out = Vec::new();
    'vars: for var in 0..model.var_names.len() as VarId {
        if model.initial[var as usize].as_int().is_none() {
            continue;
        }
        let mut increments = Vec::with_capacity(model.events.len());
        for event in &model.events {
            if expr_uses_var(&event.weight, var) || expr_uses_var(&event.guard, var) {
                continue 'vars;
            }
            if event.params.iter().any(|p| expr_uses_var(&p.domain, var)) {
                continue 'vars;
            }
            let mut inc = 0i64;
            for action in &event.actions {
                if action.target == var {
                    match increment_of(&action.rhs, var) {
                        Some(c) => inc = c,
                        None => continue 'vars,
                    }
                } else {
                    let uses = match &action.rhs {
                        CRhs::Det(e) | CRhs::UniformSet(e) => expr_uses_var(e, var),
                        CRhs::UniformList(es) => es.iter().any(|e| expr_uses_var(e, var)),
                        CRhs::Enumerated { branches, .. } => {
                            branches.iter().any(|(e, _)| expr_uses_var(e, var))
                        }
                    };
                    if uses {
                        continue 'vars;
                    }
                }
            }
            increments.push(inc);
        }
        out.push(Accumulator { var, increments });
    }
    out
}

#[derive(Debug, Clone)]
pub enum ExactError {
    Build(BuildError),
    Eval(EvalError),
    /// Recurrent non-deadlock behavior and no horizon given.
    NoAbsorption,
    /// The transient system is too large for the dense rational solve.
    SolveLimit { transient: usize, limit: usize },
    Unsupported(String),
}

impl fmt::Display for ExactError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExactError::Build(e) => write!(f, "{e}"),
            ExactError::Eval(e) => write!(f, "{e}"),
            ExactError::NoAbsorption => write!(
                f,
                "the chain has reachable non-terminating behavior; supply a horizon"
            ),
            ExactError::SolveLimit { transient, limit } => write!(
                f,
                "{transient} transient states exceed the exact solve limit of {limit}"
            ),
            ExactError::Unsupported(m) => write!(f, "{m}"),
        }
    }
}

impl core::error::Error for ExactError {}

impl From<BuildError> for ExactError {
    fn from(e: BuildError) -> Self {
        ExactError::Build(e)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct ExactOptions {
    pub max_states: usize,
    pub solve_limit: usize,
    /// Step horizon for at-end queries on chains without almost-sure
    /// absorption.
    pub horizon: Option<u64>,
}

impl Default for ExactOptions {
    fn default() -> Self {
        ExactOptions { max_states: DEFAULT_MAX_STATES, solve_limit: DEFAULT_SOLVE_LIMIT, horizon: None }
    }
}

/// Result of an exact analysis.
#[derive(Debug, Clone)]
pub struct ExactAnalysis {
    pub value: BigRational,
    pub states: usize,
    pub transitions: usize,
    /// Names of counter-abstracted variables.
    pub abstracted: Vec<String>,
}

fn rational_of(v: &Value, span: crate::diag::SourceSpan) -> Result<BigRational, ExactError> {
    match v {
        Value::Int(i) => Ok(BigRational::from_integer(BigInt::from(*i))),
        Value::Bool(b) => Ok(BigRational::from_integer(BigInt::from(if *b { 1 } else { 0 }))),
        _ => Err(ExactError::Eval(EvalError::new(
            crate::eval::EvalErrorKind::KindMismatch(
                "query expression must be numeric or boolean".into(),
            ),
            span,
        ))),
    }
}

fn eval_on_state(
    model: &CompiledModel,
    state: &MachineState,
    e: &CExpr,
) -> Result<Value, ExactError> {
    let ctx = Ctx::model(model, state.values(), &[]);
    Evaluator::new().eval(&ctx, e).map_err(ExactError::Eval)
}

/// States that can reach a deadlock state (indices), via reverse BFS.
fn coreachable(dtmc: &Dtmc) -> Vec<bool> {
    let n = dtmc.states.len();
    let mut rev: Vec<Vec<u32>> = vec![Vec::new(); n];
    for (src, outs) in dtmc.transitions.iter().enumerate() {
        for (_, dst, _) in outs {
            rev[*dst as usize].push(src as u32);
        }
    }
    let mut ok = vec![false; n];
    let mut queue: VecDeque<u32> = VecDeque::new();
    for (i, d) in dtmc.deadlock.iter().enumerate() {
        if *d {
            ok[i] = true;
            queue.push_back(i as u32);
        }
    }
    while let Some(i) = queue.pop_front() {
        for &p in &rev[i as usize] {
            if !ok[p as usize] {
                ok[p as usize] = true;
                queue.push_back(p);
            }
        }
    }
    ok
}

/// Solves `A x = b` by Gaussian elimination over rationals. `A` is consumed.
fn gauss_solve(mut a: Vec<Vec<BigRational>>, mut b: Vec<BigRational>) -> Option<Vec<BigRational>> {
    let n = b.len();
    for col in 0..n {
        let pivot = (col..n).find(|&r| !a[r][col].is_zero())?;
        a.swap(col, pivot);
        b.swap(col, pivot);
        let inv = a[col][col].clone();
        for r in 0..n {
            if r == col || a[r][col].is_zero() {
                continue;
            }
            let factor = &a[r][col] / &inv;
            for c in col..n {
                let sub = &factor * &a[col][c];
                a[r][c] -= sub;
            }
            let sub = &factor * &b[col];
            b[r] -= sub;
        }
    }
    Some((0..n).map(|i| &b[i] / &a[i][i]).collect())
}

/// Marginal transition matrix restricted to transient states, as an index
/// map plus per-state rows of `(column, mass)` with columns over all states.
struct TransientSystem {
    /// Dense transient index per state (`usize::MAX` = absorbing).
    transient_ix: Vec<usize>,
    transient: Vec<u32>,
}

fn transient_system(dtmc: &Dtmc) -> TransientSystem {
    let n = dtmc.states.len();
    let mut transient_ix = vec![usize::MAX; n];
    let mut transient = Vec::new();
    for i in 0..n {
        if !dtmc.deadlock[i] {
            transient_ix[i] = transient.len();
            transient.push(i as u32);
        }
    }
    TransientSystem { transient_ix, transient }
}

/// Expected value, over the absorption distribution, of `f(state)` given per
/// state values for absorbing states. Requires almost-sure absorption.
fn absorption_value(
    dtmc: &Dtmc,
    f: &dyn Fn(usize) -> Result<BigRational, ExactError>,
    solve_limit: usize,
) -> Result<BigRational, ExactError> {
    let ok = coreachable(dtmc);
    if ok.iter().any(|r| !r) {
        return Err(ExactError::NoAbsorption);
    }
    if dtmc.deadlock[0] {
        return f(0);
    }
    let sys = transient_system(dtmc);
    let n = sys.transient.len();
    if n > solve_limit {
        return Err(ExactError::SolveLimit { transient: n, limit: solve_limit });
    }
    // (I - Q) h = R f over transient states
    let mut a = vec![vec![BigRational::zero(); n]; n];
    let mut b = vec![BigRational::zero(); n];
    for (row, &s) in sys.transient.iter().enumerate() {
        a[row][row] = BigRational::one();
        for (_, t, p) in &dtmc.transitions[s as usize] {
            let t = *t as usize;
            if dtmc.deadlock[t] {
                b[row] += p * f(t)?;
            } else {
                let col = sys.transient_ix[t];
                a[row][col] -= p;
            }
        }
    }
    let h = gauss_solve(a, b).ok_or(ExactError::NoAbsorption)?;
    Ok(h[sys.transient_ix[0]].clone())
}

/// Expected number of visits to each transient state before absorption,
/// starting from state 0. Requires almost-sure absorption.
fn expected_visits(dtmc: &Dtmc, solve_limit: usize) -> Result<Vec<BigRational>, ExactError> {
    let ok = coreachable(dtmc);
    if ok.iter().any(|r| !r) {
        return Err(ExactError::NoAbsorption);
    }
    let sys = transient_system(dtmc);
    let n = sys.transient.len();
    if n == 0 {
        return Ok(Vec::new());
    }
    if n > solve_limit {
        return Err(ExactError::SolveLimit { transient: n, limit: solve_limit });
    }
    // mu = e0 (I - Q)^-1, i.e. (I - Q)^T mu^T = e0^T
    let mut a = vec![vec![BigRational::zero(); n]; n];
    let mut b = vec![BigRational::zero(); n];
    for (row, &s) in sys.transient.iter().enumerate() {
        a[row][row] += BigRational::one();
        for (_, t, p) in &dtmc.transitions[s as usize] {
            let t = *t as usize;
            if !dtmc.deadlock[t] {
                let col = sys.transient_ix[t];
                // transposed: entry (t, s)
                a[col][row] -= p;
            }
        }
    }
    if !dtmc.deadlock[0] {
        b[sys.transient_ix[0]] = BigRational::one();
    }
    gauss_solve(a, b).ok_or(ExactError::NoAbsorption)
}

/// Exact k-step propagation. `absorb` marks states whose mass is collected
/// into the result as soon as it arrives (including at step 0); without any
/// `absorb` marks this returns the full step-`k` distribution instead.
fn propagate(
    dtmc: &Dtmc,
    k: u64,
    absorb: Option<&[bool]>,
    mut on_step: Option<&mut dyn FnMut(&[BigRational])>,
) -> (Vec<BigRational>, BigRational) {
    let n = dtmc.states.len();
    let mut v = vec![BigRational::zero(); n];
    v[0] = BigRational::one();
    let mut collected = BigRational::zero();
    if let Some(mask) = absorb {
        if mask[0] {
            collected += core::mem::replace(&mut v[0], BigRational::zero());
        }
    }
    for _ in 0..k {
        if let Some(f) = on_step.as_deref_mut() {
            f(&v);
        }
        let mut next = vec![BigRational::zero(); n];
        for (s, mass) in v.iter().enumerate() {
            if mass.is_zero() {
                continue;
            }
            if dtmc.transitions[s].is_empty() {
                // deadlock (or truncated frontier) holds its mass
                next[s] += mass;
                continue;
            }
            for (_, t, p) in &dtmc.transitions[s] {
                next[*t as usize] += mass * p;
            }
        }
        if let Some(mask) = absorb {
            for (s, m) in next.iter_mut().enumerate() {
                if mask[s] && !m.is_zero() {
                    collected += core::mem::replace(m, BigRational::zero());
                }
            }
        }
        v = next;
    }
    (v, collected)
}

/// Answers a query exactly. Counter variables not mentioned by the query are
/// abstracted away before enumeration; `ExpectedAtEnd(v)` for a counter `v`
/// is answered through expected event-firing counts.
pub fn exact_query(
    model: &CompiledModel,
    q: &Query,
    opts: &ExactOptions,
) -> Result<ExactAnalysis, ExactError> {
    let accs = accumulators(model);
    // reward path: expected final value of a counter variable
    if let Query::ExpectedAtEnd(e) = q {
        if let CExprKind::Var(v) = e.kind {
            if let Some(acc) = accs.iter().find(|a| a.var == v) {
                let drop: Vec<VarId> = accs.iter().map(|a| a.var).collect();
                let dtmc =
                    build_dtmc_abstracting(model, &drop, opts.max_states, opts.horizon)?;
                let v0 = BigRational::from_integer(BigInt::from(
                    model.initial[v as usize].as_int().expect("accumulators are integers"),
                ));
                let value = match opts.horizon {
                    None => {
                        let mu = expected_visits(&dtmc, opts.solve_limit)?;
                        let sys = transient_system(&dtmc);
                        let mut total = v0;
                        for (row, &s) in sys.transient.iter().enumerate() {
                            let mut inc_rate = BigRational::zero();
                            for (ev, _, p) in &dtmc.transitions[s as usize] {
                                let c = acc.increments[*ev as usize];
                                if c != 0 {
                                    inc_rate += p * BigRational::from_integer(BigInt::from(c));
                                }
                            }
                            if !inc_rate.is_zero() {
                                total += &mu[row] * inc_rate;
                            }
                        }
                        total
                    }
                    Some(k) => {
                        let mut total = v0;
                        {
                            let mut add_step = |v: &[BigRational]| {
                                for (s, mass) in v.iter().enumerate() {
                                    if mass.is_zero() {
                                        continue;
                                    }
                                    for (ev, _, p) in &dtmc.transitions[s] {
                                        let c = acc.increments[*ev as usize];
                                        if c != 0 {
                                            total += mass
                                                * p
                                                * BigRational::from_integer(BigInt::from(c));
                                        }
                                    }
                                }
                            };
                            propagate(&dtmc, k, None, Some(&mut add_step));
                        }
                        total
                    }
                };
                return Ok(ExactAnalysis {
                    value,
                    states: dtmc.num_states(),
                    transitions: dtmc.num_transitions(),
                    abstracted: drop
                        .iter()
                        .map(|v| model.var_names[*v as usize].clone())
                        .collect(),
                });
            }
        }
    }

    // general path: abstract counters the query does not mention
    let drop: Vec<VarId> = accs
        .iter()
        .map(|a| a.var)
        .filter(|v| !expr_uses_var(q.expr(), *v))
        .collect();
    let depth_limit = match q {
        Query::ProbReachWithin(_, k) => Some((*k).max(opts.horizon.unwrap_or(0))),
        _ => opts.horizon,
    };
    let dtmc = build_dtmc_abstracting(model, &drop, opts.max_states, depth_limit)?;
    let abstracted: Vec<String> =
        drop.iter().map(|v| model.var_names[*v as usize].clone()).collect();
    let value = match q {
        Query::ProbReachWithin(e, k) => {
            let mut mask = Vec::with_capacity(dtmc.states.len());
            for s in &dtmc.states {
                let v = eval_on_state(model, s, e)?;
                mask.push(v.as_bool().ok_or_else(|| {
                    ExactError::Eval(EvalError::new(
                        crate::eval::EvalErrorKind::KindMismatch(
                            "reachability predicate must be boolean".into(),
                        ),
                        e.span,
                    ))
                })?);
            }
            let (_, reached) = propagate(&dtmc, *k, Some(&mask), None);
            reached
        }
        Query::ExpectedAtEnd(e) | Query::ProbAtEnd(e) => {
            let is_prob = matches!(q, Query::ProbAtEnd(_));
            let value_of = |i: usize| -> Result<BigRational, ExactError> {
                let v = eval_on_state(model, &dtmc.states[i], e)?;
                if is_prob {
                    match v.as_bool() {
                        Some(true) => Ok(BigRational::one()),
                        Some(false) => Ok(BigRational::zero()),
                        None => Err(ExactError::Eval(EvalError::new(
                            crate::eval::EvalErrorKind::KindMismatch(
                                "query expression must be boolean".into(),
                            ),
                            e.span,
                        ))),
                    }
                } else {
                    rational_of(&v, e.span)
                }
            };
            match opts.horizon {
                None => absorption_value(&dtmc, &value_of, opts.solve_limit)?,
                Some(k) => {
                    let (dist, _) = propagate(&dtmc, k, None, None);
                    let mut total = BigRational::zero();
                    for (i, mass) in dist.iter().enumerate() {
                        if !mass.is_zero() {
                            total += mass * value_of(i)?;
                        }
                    }
                    total
                }
            }
        }
    };
    debug_assert!(!value.is_negative() || matches!(q, Query::ExpectedAtEnd(_)));
    Ok(ExactAnalysis {
        value,
        states: dtmc.num_states(),
        transitions: dtmc.num_transitions(),
        abstracted,
    })
}
