//! Quantitative queries over runs, shared by statistical and exact analysis.
//!
//! "At end" means the state in which a run terminated (deadlock or stop
//! predicate); a run truncated by the step bound contributes its last state
//! and is flagged by the caller. Boolean results coerce to 1.0/0.0.

use crate::ast::BinOp;
use crate::eval::{Ctx, EvalError, EvalErrorKind, EvalResult, Evaluator};
use crate::ir::{CExpr, CExprKind, CompiledModel, ValueKind};
use crate::semantics::{initial_state, MachineState};
use crate::sim::{RunConfig, SimError, Simulator, Termination, Trace};
use crate::value::Value;
use alloc::string::ToString;

#[derive(Debug, Clone)]
pub enum Query {
    /// Expected value of a numeric expression in the final state.
    ExpectedAtEnd(CExpr),
    /// Probability that a boolean expression holds in the final state.
    ProbAtEnd(CExpr),
    /// Probability that a boolean expression holds in some state within the
    /// first `k` steps (the initial state is step 0).
    ProbReachWithin(CExpr, u64),
}

impl Query {
    pub fn expr(&self) -> &CExpr {
        match self {
            Query::ExpectedAtEnd(e) | Query::ProbAtEnd(e) | Query::ProbReachWithin(e, _) => e,
        }
    }
}

fn numeric(v: &Value, span: crate::diag::SourceSpan) -> EvalResult<f64> {
    match v {
        Value::Int(i) => Ok(*i as f64),
        Value::Bool(b) => Ok(if *b { 1.0 } else { 0.0 }),
        _ => Err(EvalError::new(
            EvalErrorKind::KindMismatch("query expression must be numeric or boolean".to_string()),
            span,
        )),
    }
}

fn boolean(v: &Value, span: crate::diag::SourceSpan) -> EvalResult<bool> {
    v.as_bool().ok_or_else(|| {
        EvalError::new(
            EvalErrorKind::KindMismatch("query expression must be boolean".to_string()),
            span,
        )
    })
}

fn eval_in(model: &CompiledModel, state: &MachineState, e: &CExpr) -> EvalResult<Value> {
    let ctx = Ctx::model(model, state.values(), &[]);
    Evaluator::new().eval(&ctx, e)
}

/// Evaluates a query on a finished trace.
pub fn eval_query(model: &CompiledModel, trace: &Trace, q: &Query) -> EvalResult<f64> {
    match q {
        Query::ExpectedAtEnd(e) => {
            let v = eval_in(model, trace.final_state(), e)?;
            numeric(&v, e.span)
        }
        Query::ProbAtEnd(e) => {
            let v = eval_in(model, trace.final_state(), e)?;
            Ok(if boolean(&v, e.span)? { 1.0 } else { 0.0 })
        }
        Query::ProbReachWithin(e, k) => {
            let v = eval_in(model, &trace.initial, e)?;
            if boolean(&v, e.span)? {
                return Ok(1.0);
            }
            for (step, _, state) in &trace.steps {
                if step > k {
                    break;
                }
                let v = eval_in(model, state, e)?;
                if boolean(&v, e.span)? {
                    return Ok(1.0);
                }
            }
            Ok(0.0)
        }
    }
}

/// Result of one streamed run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunOutcome {
    pub value: f64,
    pub termination: Termination,
    pub steps: u64,
}

/// Runs one simulation and evaluates the query without retaining the trace.
/// Consumes the generator exactly like [`crate::sim::run`], so
/// `run_query(model, cfg, q)` equals `eval_query(model, &run(model, cfg)?, q)`.
pub fn run_query<'m>(
    model: &'m CompiledModel,
    config: &RunConfig<'m>,
    q: &'m Query,
) -> Result<RunOutcome, SimError> {
    if config.max_steps == 0 {
        return Err(SimError::InvalidConfig("max_steps must be at least 1"));
    }
    let mut sim = Simulator::new(model, config.seed);
    let mut state = initial_state(model);
    let mut reached = false;
    let check_reach = |sim_state: &MachineState, step: u64, reached: &mut bool| -> EvalResult<()> {
        if let (Query::ProbReachWithin(e, k), false) = (q, *reached) {
            if step <= *k {
                let v = eval_in(model, sim_state, e)?;
                if boolean(&v, e.span)? {
                    *reached = true;
                }
            }
        }
        Ok(())
    };
    check_reach(&state, 0, &mut reached).map_err(|error| SimError::Eval { step: 0, error })?;
    let mut termination = Termination::StepBound;
    let mut steps = 0;
    let stopped_initially = match config.stop {
        Some(pred) => sim
            .eval_bool(&state, pred)
            .map_err(|error| SimError::Eval { step: 0, error })?,
        None => false,
    };
    if stopped_initially {
        termination = Termination::StopPredicate;
    } else {
        for i in 1..=config.max_steps {
            match sim.step(&state).map_err(|error| SimError::Eval { step: i, error })? {
                None => {
                    termination = Termination::Deadlock;
                    break;
                }
                Some((_, next)) => {
                    steps = i;
                    state = next;
                }
            }
            check_reach(&state, i, &mut reached)
                .map_err(|error| SimError::Eval { step: i, error })?;
            if let Some(pred) = config.stop {
                let stop = sim
                    .eval_bool(&state, pred)
                    .map_err(|error| SimError::Eval { step: i, error })?;
                if stop {
                    termination = Termination::StopPredicate;
                    break;
                }
            }
        }
    }
    let value = match q {
        Query::ExpectedAtEnd(e) => {
            let v = eval_in(model, &state, e).map_err(|error| SimError::Eval { step: steps, error })?;
            numeric(&v, e.span).map_err(|error| SimError::Eval { step: steps, error })?
        }
        Query::ProbAtEnd(e) => {
            let v = eval_in(model, &state, e).map_err(|error| SimError::Eval { step: steps, error })?;
            if boolean(&v, e.span).map_err(|error| SimError::Eval { step: steps, error })? {
                1.0
            } else {
                0.0
            }
        }
        Query::ProbReachWithin(..) => {
            if reached {
                1.0
            } else {
                0.0
            }
        }
    };
    Ok(RunOutcome { value, termination, steps })
}

/// Static classification of a query expression, used to choose between
/// probability and expectation queries.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QueryKind {
    Boolean,
    Numeric,
}

pub fn infer_query_kind(model: &CompiledModel, e: &CExpr) -> Option<QueryKind> {
    match &e.kind {
        CExprKind::Lit(Value::Bool(_)) => Some(QueryKind::Boolean),
        CExprKind::Lit(Value::Int(_)) => Some(QueryKind::Numeric),
        CExprKind::Lit(_) => None,
        CExprKind::Var(i) => match model.var_kinds[*i as usize] {
            ValueKind::Bool => Some(QueryKind::Boolean),
            ValueKind::Int => Some(QueryKind::Numeric),
            _ => None,
        },
        CExprKind::Const(i) => match model.const_kinds[*i as usize] {
            ValueKind::Bool => Some(QueryKind::Boolean),
            ValueKind::Int => Some(QueryKind::Numeric),
            _ => None,
        },
        CExprKind::Unary(crate::ast::UnOp::Not, _) => Some(QueryKind::Boolean),
        CExprKind::Unary(crate::ast::UnOp::Neg, _) => Some(QueryKind::Numeric),
        CExprKind::Binary(op, a, _) => match op {
            BinOp::Eq
            | BinOp::Ne
            | BinOp::Lt
            | BinOp::Le
            | BinOp::Gt
            | BinOp::Ge
            | BinOp::In
            | BinOp::NotIn
            | BinOp::Subset => Some(QueryKind::Boolean),
            BinOp::Add | BinOp::Div | BinOp::Mod => Some(QueryKind::Numeric),
            BinOp::And | BinOp::Or | BinOp::Sub | BinOp::Mul => infer_query_kind(model, a),
            _ => None,
        },
        CExprKind::Call(crate::ast::Builtin::Card, _) => Some(QueryKind::Numeric),
        _ => None,
    }
}
