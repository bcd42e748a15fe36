//! Probabilistic transition semantics: enabledness, parameter valuations,
//! assignment outcome distributions, and the exact transition distribution
//! of a state.
//!
//! All probability arithmetic here is exact (arbitrary-precision rationals);
//! floats appear only in the statistical layer. An event is enabled when its
//! weight evaluates to a positive natural and some guard-satisfying
//! parameter valuation exists; the probability of a transition factorizes as
//! weight normalization x uniform parameter choice x assignment outcome
//! probabilities, with equal-value outcomes aggregated.

use crate::eval::{Ctx, EvalError, EvalErrorKind, EvalResult, Evaluator};
use crate::ir::{CEvent, CRhs, CompiledModel, EventId, VarId};
use crate::value::Value;
use alloc::boxed::Box;
use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};

/// Total valuation of the machine's variables (constants live in the model).
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct MachineState(Box<[Value]>);

impl MachineState {
    pub fn new(values: Vec<Value>) -> Self {
        MachineState(values.into_boxed_slice())
    }

    pub fn values(&self) -> &[Value] {
        &self.0
    }

    pub fn get(&self, var: VarId) -> &Value {
        &self.0[var as usize]
    }

    pub fn set(&mut self, var: VarId, value: Value) {
        self.0[var as usize] = value;
    }
}

/// The machine state after initialization.
pub fn initial_state(model: &CompiledModel) -> MachineState {
    MachineState::new(model.initial.clone())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EventStatus {
    Blocked,
    Enabled { weight: u64 },
}

/// A parameter valuation, in parameter declaration order.
pub type ParamValuation = Vec<Value>;

/// Finite distribution over `(event, successor state)` pairs with exact
/// rational masses; masses lie in (0,1] and sum to 1.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TransitionDistribution {
    entries: BTreeMap<(EventId, MachineState), BigRational>,
}

impl TransitionDistribution {
    pub fn entries(&self) -> impl Iterator<Item = (&(EventId, MachineState), &BigRational)> {
        self.entries.iter()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn mass(&self, event: EventId, state: &MachineState) -> Option<&BigRational> {
        self.entries.get(&(event, state.clone()))
    }

    pub fn total_mass(&self) -> BigRational {
        self.entries.values().sum()
    }

    /// Sums masses per successor state, dropping event labels. Loses no
    /// total mass.
    pub fn marginal(&self) -> BTreeMap<MachineState, BigRational> {
        let mut out: BTreeMap<MachineState, BigRational> = BTreeMap::new();
        for ((_, state), p) in &self.entries {
            *out.entry(state.clone()).or_insert_with(BigRational::zero) += p;
        }
        out
    }
}

/// Evaluates an event weight; negative values violate the DTMC obligation
/// and abort the analysis.
fn eval_weight<'m>(
    ev: &mut Evaluator<'m>,
    ctx: &Ctx<'_>,
    model: &'m CompiledModel,
    event: EventId,
) -> EvalResult<i64> {
    let e = &model.events[event as usize];
    let v = ev.eval(ctx, &e.weight)?;
    let w = v.as_int().ok_or_else(|| {
        EvalError::new(
            EvalErrorKind::KindMismatch("event weight must be an integer".into()),
            e.weight.span,
        )
    })?;
    if w < 0 {
        return Err(EvalError::new(EvalErrorKind::NegativeWeight(w), e.weight.span));
    }
    Ok(w)
}

/// Evaluates the parameter domains of an event in the given state, in
/// declaration order.
fn eval_domains<'m>(
    ev: &mut Evaluator<'m>,
    model: &'m CompiledModel,
    state: &MachineState,
    event: &'m CEvent,
) -> EvalResult<Vec<Vec<Value>>> {
    let ctx = Ctx::model(model, state.values(), &[]);
    let mut domains = Vec::with_capacity(event.params.len());
    for p in &event.params {
        let v = ev.eval(&ctx, &p.domain)?;
        let elems = v.as_set().ok_or_else(|| {
            EvalError::new(
                EvalErrorKind::KindMismatch("parameter domain must be a set".into()),
                p.domain.span,
            )
        })?;
        domains.push(elems.to_vec());
    }
    Ok(domains)
}

/// Walks the Cartesian product of the domains in canonical order (parameter
/// declaration order, value order within each domain), calling `f` for each
/// valuation satisfying the guard until `f` returns `false`.
fn for_each_valuation<'m>(
    ev: &mut Evaluator<'m>,
    model: &'m CompiledModel,
    state: &MachineState,
    event: &'m CEvent,
    domains: &[Vec<Value>],
    f: &mut dyn FnMut(&[Value]) -> bool,
) -> EvalResult<()> {
    if domains.iter().any(|d| d.is_empty()) {
        return Ok(());
    }
    let mut idx = vec![0usize; domains.len()];
    let mut current: Vec<Value> =
        domains.iter().map(|d| d[0].clone()).collect();
    loop {
        let ctx = Ctx::model(model, state.values(), &current);
        let g = ev.eval(&ctx, &event.guard)?;
        let holds = g.as_bool().ok_or_else(|| {
            EvalError::new(
                EvalErrorKind::KindMismatch("guard must be a boolean".into()),
                event.guard.span,
            )
        })?;
        if holds && !f(&current) {
            return Ok(());
        }
        // advance the odometer, last parameter fastest
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

/// The guard-satisfying parameter valuations of an event at a state, in
/// canonical enumeration order. A parameterless event yields one empty
/// valuation when its guard holds.
pub fn guard_valuations(
    model: &CompiledModel,
    state: &MachineState,
    event: EventId,
) -> EvalResult<Vec<ParamValuation>> {
    let mut ev = Evaluator::new();
    let e = &model.events[event as usize];
    let domains = eval_domains(&mut ev, model, state, e)?;
    let mut out = Vec::new();
    for_each_valuation(&mut ev, model, state, e, &domains, &mut |val| {
        out.push(val.to_vec());
        true
    })?;
    Ok(out)
}

/// Event status per the enabledness rule: enabled with weight `w` iff
/// `w > 0` and a guard-satisfying parameter valuation exists.
pub fn event_status(
    model: &CompiledModel,
    state: &MachineState,
    event: EventId,
) -> EvalResult<EventStatus> {
    let mut ev = Evaluator::new();
    let ctx = Ctx::model(model, state.values(), &[]);
    let w = eval_weight(&mut ev, &ctx, model, event)?;
    if w == 0 {
        return Ok(EventStatus::Blocked);
    }
    let e = &model.events[event as usize];
    let domains = eval_domains(&mut ev, model, state, e)?;
    let mut any = false;
    for_each_valuation(&mut ev, model, state, e, &domains, &mut |_| {
        any = true;
        false
    })?;
    Ok(if any { EventStatus::Enabled { weight: w as u64 } } else { EventStatus::Blocked })
}

/// Per-variable outcome list: `(value, probability)` with equal values
/// aggregated. The right-hand sides are evaluated in the pre-state extended
/// with the parameter valuation.
fn rhs_outcomes<'m>(
    ev: &mut Evaluator<'m>,
    ctx: &Ctx<'_>,
    rhs: &'m CRhs,
    aggregate: bool,
) -> EvalResult<Vec<(Value, BigRational)>> {
    let mut raw: Vec<(Value, BigRational)> = Vec::new();
    match rhs {
        CRhs::Det(e) => raw.push((ev.eval(ctx, e)?, BigRational::one())),
        CRhs::UniformSet(e) => {
            let v = ev.eval(ctx, e)?;
            let elems = v.as_set().ok_or_else(|| {
                EvalError::new(
                    EvalErrorKind::KindMismatch("`:in` needs a set to choose from".into()),
                    e.span,
                )
            })?;
            if elems.is_empty() {
                return Err(EvalError::new(EvalErrorKind::EmptyChoice, e.span));
            }
            let p = BigRational::new(BigInt::one(), BigInt::from(elems.len()));
            for el in elems {
                raw.push((el.clone(), p.clone()));
            }
        }
        CRhs::UniformList(es) => {
            let p = BigRational::new(BigInt::one(), BigInt::from(es.len()));
            for e in es {
                raw.push((ev.eval(ctx, e)?, p.clone()));
            }
        }
        CRhs::Enumerated { branches, .. } => {
            for (e, p) in branches {
                raw.push((ev.eval(ctx, e)?, p.clone()));
            }
        }
    }
    if !aggregate {
        return Ok(raw);
    }
    let mut merged: BTreeMap<Value, BigRational> = BTreeMap::new();
    for (v, p) in raw {
        *merged.entry(v).or_insert_with(BigRational::zero) += p;
    }
    Ok(merged.into_iter().collect())
}

fn outcomes_for<'m>(
    ev: &mut Evaluator<'m>,
    model: &'m CompiledModel,
    state: &MachineState,
    params: &[Value],
    event: &'m CEvent,
    aggregate: bool,
) -> EvalResult<Vec<(MachineState, BigRational)>> {
    let ctx = Ctx::model(model, state.values(), params);
    let mut per_action: Vec<(VarId, Vec<(Value, BigRational)>)> =
        Vec::with_capacity(event.actions.len());
    for a in &event.actions {
        per_action.push((a.target, rhs_outcomes(ev, &ctx, &a.rhs, aggregate)?));
    }
    // joint distribution: product over target variables, applied
    // simultaneously against the pre-state
    let mut combos: Vec<(MachineState, BigRational)> = vec![(state.clone(), BigRational::one())];
    for (target, outcomes) in per_action {
        let mut next = Vec::with_capacity(combos.len() * outcomes.len());
        for (st, p) in combos {
            for (v, q) in &outcomes {
                let mut st2 = st.clone();
                st2.set(target, v.clone());
                next.push((st2, p.clone() * q));
            }
        }
        combos = next;
    }
    if !aggregate {
        return Ok(combos);
    }
    let mut merged: BTreeMap<MachineState, BigRational> = BTreeMap::new();
    for (st, p) in combos {
        *merged.entry(st).or_insert_with(BigRational::zero) += p;
    }
    Ok(merged.into_iter().collect())
}

/// The distribution over successor states produced by executing an enabled
/// event under a fixed parameter valuation. Unassigned variables keep their
/// pre-state values; outcomes yielding the same state are aggregated.
pub fn assignment_outcomes(
    model: &CompiledModel,
    state: &MachineState,
    params: &[Value],
    event: EventId,
) -> EvalResult<Vec<(MachineState, BigRational)>> {
    let mut ev = Evaluator::new();
    outcomes_for(&mut ev, model, state, params, &model.events[event as usize], true)
}

fn successors(
    model: &CompiledModel,
    state: &MachineState,
    aggregate: bool,
) -> EvalResult<Option<Vec<((EventId, MachineState), BigRational)>>> {
    let mut ev = Evaluator::new();
    let ctx = Ctx::model(model, state.values(), &[]);
    let mut enabled: Vec<(EventId, i64, Vec<ParamValuation>)> = Vec::new();
    let mut total_weight = BigInt::zero();
    for (i, e) in model.events.iter().enumerate() {
        let w = eval_weight(&mut ev, &ctx, model, i as EventId)?;
        if w == 0 {
            continue;
        }
        let domains = eval_domains(&mut ev, model, state, e)?;
        let mut vals = Vec::new();
        for_each_valuation(&mut ev, model, state, e, &domains, &mut |v| {
            vals.push(v.to_vec());
            true
        })?;
        if vals.is_empty() {
            continue;
        }
        total_weight += BigInt::from(w);
        enabled.push((i as EventId, w, vals));
    }
    if enabled.is_empty() {
        return Ok(None);
    }
    let mut entries: Vec<((EventId, MachineState), BigRational)> = Vec::new();
    for (event, w, valuations) in enabled {
        let weight_term = BigRational::new(BigInt::from(w), total_weight.clone());
        let param_term = BigRational::new(BigInt::one(), BigInt::from(valuations.len()));
        for val in &valuations {
            let outcomes = outcomes_for(
                &mut ev,
                model,
                state,
                val,
                &model.events[event as usize],
                aggregate,
            )?;
            for (succ, p) in outcomes {
                entries.push(((event, succ), weight_term.clone() * &param_term * p));
            }
        }
    }
    Ok(Some(entries))
}

/// The transition probability function at `state`: `None` when no event is
/// enabled (deadlock), otherwise the exact distribution over
/// `(event, successor)` pairs, which sums to 1.
pub fn successor_distribution(
    model: &CompiledModel,
    state: &MachineState,
) -> EvalResult<Option<TransitionDistribution>> {
    let Some(raw) = successors(model, state, true)? else {
        return Ok(None);
    };
    let mut entries: BTreeMap<(EventId, MachineState), BigRational> = BTreeMap::new();
    for (key, p) in raw {
        *entries.entry(key).or_insert_with(BigRational::zero) += p;
    }
    Ok(Some(TransitionDistribution { entries }))
}

/// Oracle variant of [`successor_distribution`] that skips all intermediate
/// aggregation and only merges at the very end; used to cross-check that
/// aggregation loses nothing.
pub fn successor_distribution_unaggregated(
    model: &CompiledModel,
    state: &MachineState,
) -> EvalResult<Option<TransitionDistribution>> {
    let Some(raw) = successors(model, state, false)? else {
        return Ok(None);
    };
    let mut entries: BTreeMap<(EventId, MachineState), BigRational> = BTreeMap::new();
    for (key, p) in raw {
        *entries.entry(key).or_insert_with(BigRational::zero) += p;
    }
    Ok(Some(TransitionDistribution { entries }))
}
