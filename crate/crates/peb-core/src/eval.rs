//! Evaluation of compiled set-theoretic, arithmetic and boolean expressions.
//!
//! Evaluation is pure and deterministic: given the same environment it
//! always produces the same canonical [`Value`]. Stuck terms (wrong kinds,
//! division by zero, overflow) become [`EvalError`]s carrying the span of
//! the offending operator; there are no partial results.
//!
//! `/\`, `\/`, `-` and `*` are kind-dispatched at runtime: conjunction /
//! disjunction / subtraction / multiplication on booleans and integers,
//! intersection / union / difference / Cartesian product on sets.

use crate::ast::{BinOp, Builtin, UnOp};
use crate::diag::SourceSpan;
use crate::ir::{CComp, CExpr, CExprKind, CompiledModel};
use crate::value::{canonical_set, ElemKind, Value};
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

/// Hard cap on constructed set cardinality (intervals and products).
pub const MAX_SET_SIZE: usize = 1 << 20;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum EvalErrorKind {
    DivisionByZero,
    /// `div`/`mod` with a negative divisor.
    NegativeDivisor,
    IntegerOverflow,
    KindMismatch(String),
    /// Uniform choice from an empty set.
    EmptyChoice,
    /// An event weight evaluated to a negative number.
    NegativeWeight(i64),
    /// Interval or product larger than [`MAX_SET_SIZE`].
    SetTooLarge,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EvalError {
    pub kind: EvalErrorKind,
    pub span: SourceSpan,
}

impl EvalError {
    pub fn new(kind: EvalErrorKind, span: SourceSpan) -> Self {
        EvalError { kind, span }
    }
}

impl fmt::Display for EvalError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.kind {
            EvalErrorKind::DivisionByZero => write!(f, "division by zero"),
            EvalErrorKind::NegativeDivisor => write!(f, "div/mod by a negative divisor"),
            EvalErrorKind::IntegerOverflow => write!(f, "integer overflow"),
            EvalErrorKind::KindMismatch(m) => write!(f, "kind mismatch: {m}"),
            EvalErrorKind::EmptyChoice => write!(f, "uniform choice from an empty set"),
            EvalErrorKind::NegativeWeight(w) => {
                write!(f, "event weight evaluated to {w}, weights must be natural numbers")
            }
            EvalErrorKind::SetTooLarge => {
                write!(f, "constructed set exceeds {MAX_SET_SIZE} elements")
            }
        }
    }
}

impl core::error::Error for EvalError {}

pub type EvalResult<T> = Result<T, EvalError>;

/// Read-only bindings for one evaluation: constants, deferred sets, current
/// variable values and in-scope event parameters.
#[derive(Clone, Copy)]
pub struct Ctx<'a> {
    pub consts: &'a [Value],
    pub sets: &'a [Value],
    pub vars: &'a [Value],
    pub params: &'a [Value],
}

impl<'a> Ctx<'a> {
    pub fn model(model: &'a CompiledModel, vars: &'a [Value], params: &'a [Value]) -> Self {
        Ctx { consts: &model.const_values, sets: &model.set_values, vars, params }
    }
}

struct Frame<'m> {
    exprs: &'m [CExpr],
    values: Vec<Option<Value>>,
}

/// Expression evaluator. Holds the binder stack and the per-comprehension
/// frames of lazily computed hoisted values; reusable across evaluations to
/// avoid re-allocating.
pub struct Evaluator<'m> {
    binders: Vec<Value>,
    frames: Vec<Frame<'m>>,
}

impl<'m> Default for Evaluator<'m> {
    fn default() -> Self {
        Self::new()
    }
}

impl<'m> Evaluator<'m> {
    pub fn new() -> Self {
        Evaluator { binders: Vec::new(), frames: Vec::new() }
    }

    pub fn eval(&mut self, ctx: &Ctx<'_>, e: &'m CExpr) -> EvalResult<Value> {
        match &e.kind {
            CExprKind::Lit(v) => Ok(v.clone()),
            CExprKind::Const(i) => Ok(ctx.consts[*i as usize].clone()),
            CExprKind::Var(i) => Ok(ctx.vars[*i as usize].clone()),
            CExprKind::Param(i) => Ok(ctx.params[*i as usize].clone()),
            CExprKind::Binder(d) => Ok(self.binders[*d as usize].clone()),
            CExprKind::SetRef(i) => Ok(ctx.sets[*i as usize].clone()),
            CExprKind::Hoisted { depth, index } => self.hoisted(ctx, *depth, *index),
            CExprKind::Unary(op, a) => {
                let v = self.eval(ctx, a)?;
                unary(*op, v, e.span)
            }
            CExprKind::Binary(op, a, b) => self.binary(ctx, *op, a, b, e.span),
            CExprKind::SetLit(elems) => {
                let mut vs = Vec::with_capacity(elems.len());
                for el in elems {
                    vs.push(self.eval(ctx, el)?);
                }
                canonical_set(vs)
                    .map_err(|err| EvalError::new(EvalErrorKind::KindMismatch(format!("{err}")), e.span))
            }
            CExprKind::Call(b, a) => {
                let v = self.eval(ctx, a)?;
                builtin(*b, v, e.span)
            }
            CExprKind::Comprehension(c) => self.comprehension(ctx, c, e.span),
        }
    }

    fn hoisted(&mut self, ctx: &Ctx<'_>, depth: u16, index: u16) -> EvalResult<Value> {
        let (d, i) = (depth as usize, index as usize);
        if let Some(v) = &self.frames[d].values[i] {
            return Ok(v.clone());
        }
        let expr: &'m CExpr = &self.frames[d].exprs[i];
        let v = self.eval(ctx, expr)?;
        self.frames[d].values[i] = Some(v.clone());
        Ok(v)
    }

    fn comprehension(&mut self, ctx: &Ctx<'_>, c: &'m CComp, span: SourceSpan) -> EvalResult<Value> {
        let domain = self.eval(ctx, &c.domain)?;
        let Some(elems) = domain.as_set() else {
            return Err(kind_err("comprehension domain must be a set", span));
        };
        let elems = elems.to_vec();
        debug_assert_eq!(self.frames.len(), c.depth as usize);
        self.frames.push(Frame { exprs: &c.hoisted, values: vec![None; c.hoisted.len()] });

        // filter keeps domain elements on a true body; map collects body
        // values. The first element's body kind picks the mode and the rest
        // must agree.
        let mut is_filter: Option<bool> = None;
        let mut out = Vec::new();
        let mut result = Ok(());
        for elem in elems {
            self.binders.push(elem.clone());
            let body = self.eval(ctx, &c.body);
            self.binders.pop();
            let body = match body {
                Ok(v) => v,
                Err(e) => {
                    result = Err(e);
                    break;
                }
            };
            let body_is_bool = matches!(body, Value::Bool(_));
            match is_filter {
                None => is_filter = Some(body_is_bool),
                Some(f) if f != body_is_bool => {
                    result = Err(kind_err(
                        "comprehension body mixes boolean and non-boolean results",
                        span,
                    ));
                    break;
                }
                _ => {}
            }
            if body_is_bool {
                if body == Value::Bool(true) {
                    out.push(elem);
                }
            } else {
                out.push(body);
            }
        }
        self.frames.pop();
        result?;
        match is_filter {
            // filtered elements keep the domain's canonical order
            Some(true) | None => Ok(Value::set_from_sorted(out)),
            Some(false) => canonical_set(out)
                .map_err(|err| kind_err(&format!("comprehension result: {err}"), span)),
        }
    }

    fn binary(
        &mut self,
        ctx: &Ctx<'_>,
        op: BinOp,
        a: &'m CExpr,
        b: &'m CExpr,
        span: SourceSpan,
    ) -> EvalResult<Value> {
        // boolean connectives short-circuit; on sets they are intersection
        // and union
        if matches!(op, BinOp::And | BinOp::Or) {
            let lhs = self.eval(ctx, a)?;
            return match lhs {
                Value::Bool(lb) => {
                    if (op == BinOp::And && !lb) || (op == BinOp::Or && lb) {
                        return Ok(Value::Bool(lb));
                    }
                    let rhs = self.eval(ctx, b)?;
                    match rhs {
                        Value::Bool(rb) => Ok(Value::Bool(rb)),
                        _ => Err(kind_err("boolean connective applied to a non-boolean", span)),
                    }
                }
                Value::Set(_) => {
                    let rhs = self.eval(ctx, b)?;
                    if op == BinOp::And {
                        set_intersection(lhs, rhs, span)
                    } else {
                        set_union(lhs, rhs, span)
                    }
                }
                _ => Err(kind_err("`/\\` and `\\/` apply to booleans or sets", span)),
            };
        }
        let lhs = self.eval(ctx, a)?;
        let rhs = self.eval(ctx, b)?;
        binary_strict(op, lhs, rhs, span)
    }
}

fn kind_err(msg: &str, span: SourceSpan) -> EvalError {
    EvalError::new(EvalErrorKind::KindMismatch(msg.into()), span)
}

fn int_of(v: &Value, what: &str, span: SourceSpan) -> EvalResult<i64> {
    v.as_int().ok_or_else(|| kind_err(&format!("{what} must be an integer"), span))
}

fn unary(op: UnOp, v: Value, span: SourceSpan) -> EvalResult<Value> {
    match op {
        UnOp::Neg => {
            let i = int_of(&v, "operand of `-`", span)?;
            i.checked_neg()
                .map(Value::Int)
                .ok_or_else(|| EvalError::new(EvalErrorKind::IntegerOverflow, span))
        }
        UnOp::Not => match v {
            Value::Bool(b) => Ok(Value::Bool(!b)),
            _ => Err(kind_err("operand of `not` must be a boolean", span)),
        },
    }
}

fn builtin(b: Builtin, v: Value, span: SourceSpan) -> EvalResult<Value> {
    let Some(elems) = v.as_set() else {
        return Err(kind_err("argument must be a set", span));
    };
    match b {
        Builtin::Card => Ok(Value::Int(elems.len() as i64)),
        Builtin::Dom | Builtin::Ran => {
            let mut out = Vec::with_capacity(elems.len());
            for e in elems {
                let Value::Pair(x, y) = e else {
                    return Err(kind_err("argument must be a set of pairs", span));
                };
                out.push(Value::from(if b == Builtin::Dom { *x } else { *y }));
            }
            if b == Builtin::Dom {
                // firsts of a sorted pair list are already sorted
                out.dedup();
                Ok(Value::set_from_sorted(out))
            } else {
                canonical_set(out).map_err(|e| kind_err(&format!("{e}"), span))
            }
        }
    }
}

fn set_elem_kind(elems: &[Value]) -> Option<ElemKind> {
    elems.first().map(Value::elem_kind)
}

fn compatible(a: &[Value], b: &[Value]) -> bool {
    match (set_elem_kind(a), set_elem_kind(b)) {
        (Some(x), Some(y)) => x == y,
        _ => true,
    }
}

fn both_sets(lhs: &Value, rhs: &Value, what: &str, span: SourceSpan) -> EvalResult<()> {
    if lhs.as_set().is_none() || rhs.as_set().is_none() {
        return Err(kind_err(&format!("operands of {what} must be sets"), span));
    }
    Ok(())
}

fn set_union(lhs: Value, rhs: Value, span: SourceSpan) -> EvalResult<Value> {
    both_sets(&lhs, &rhs, "union", span)?;
    let (a, b) = (lhs.as_set().unwrap(), rhs.as_set().unwrap());
    if !compatible(a, b) {
        return Err(kind_err("union of sets with different element kinds", span));
    }
    let mut out = Vec::with_capacity(a.len() + b.len());
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            core::cmp::Ordering::Less => {
                out.push(a[i].clone());
                i += 1;
            }
            core::cmp::Ordering::Greater => {
                out.push(b[j].clone());
                j += 1;
            }
            core::cmp::Ordering::Equal => {
                out.push(a[i].clone());
                i += 1;
                j += 1;
            }
        }
    }
    out.extend_from_slice(&a[i..]);
    out.extend_from_slice(&b[j..]);
    Ok(Value::set_from_sorted(out))
}

fn set_intersection(lhs: Value, rhs: Value, span: SourceSpan) -> EvalResult<Value> {
    both_sets(&lhs, &rhs, "intersection", span)?;
    let (a, b) = (lhs.as_set().unwrap(), rhs.as_set().unwrap());
    if !compatible(a, b) {
        return Err(kind_err("intersection of sets with different element kinds", span));
    }
    let mut out = Vec::new();
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            core::cmp::Ordering::Less => i += 1,
            core::cmp::Ordering::Greater => j += 1,
            core::cmp::Ordering::Equal => {
                out.push(a[i].clone());
                i += 1;
                j += 1;
            }
        }
    }
    Ok(Value::set_from_sorted(out))
}

fn set_difference(lhs: Value, rhs: Value, span: SourceSpan) -> EvalResult<Value> {
    both_sets(&lhs, &rhs, "difference", span)?;
    if !compatible(lhs.as_set().unwrap(), rhs.as_set().unwrap()) {
        return Err(kind_err("difference of sets with different element kinds", span));
    }
    let b = rhs;
    let b = b.as_set().unwrap();
    let mut out = lhs.clone().into_set_vec().unwrap();
    out.retain(|e| !Value::set_contains(b, e));
    Ok(Value::set_from_sorted(out))
}

fn cartesian_product(lhs: Value, rhs: Value, span: SourceSpan) -> EvalResult<Value> {
    both_sets(&lhs, &rhs, "`*`", span)?;
    let (a, b) = (lhs.as_set().unwrap(), rhs.as_set().unwrap());
    if a.len().saturating_mul(b.len()) > MAX_SET_SIZE {
        return Err(EvalError::new(EvalErrorKind::SetTooLarge, span));
    }
    let mut out = Vec::with_capacity(a.len() * b.len());
    for x in a {
        let Some(xs) = x.as_scalar() else {
            return Err(kind_err("product operands must be sets of scalars", span));
        };
        for y in b {
            let Some(ys) = y.as_scalar() else {
                return Err(kind_err("product operands must be sets of scalars", span));
            };
            out.push(Value::Pair(xs, ys));
        }
    }
    // pairs inherit the sortedness of the nested iteration
    Ok(Value::set_from_sorted(out))
}

fn pair_set<'v>(v: &'v Value, what: &str, span: SourceSpan) -> EvalResult<&'v [Value]> {
    let Some(elems) = v.as_set() else {
        return Err(kind_err(&format!("{what} must be a relation (set of pairs)"), span));
    };
    if !elems.is_empty() && set_elem_kind(elems) != Some(ElemKind::Pair) {
        return Err(kind_err(&format!("{what} must be a relation (set of pairs)"), span));
    }
    Ok(elems)
}

fn binary_strict(op: BinOp, lhs: Value, rhs: Value, span: SourceSpan) -> EvalResult<Value> {
    use BinOp::*;
    match op {
        And | Or => unreachable!("handled with short-circuiting"),
        Add => {
            let (x, y) = (int_of(&lhs, "operand of `+`", span)?, int_of(&rhs, "operand of `+`", span)?);
            x.checked_add(y)
                .map(Value::Int)
                .ok_or_else(|| EvalError::new(EvalErrorKind::IntegerOverflow, span))
        }
        Sub => match (&lhs, &rhs) {
            (Value::Set(_), _) | (_, Value::Set(_)) => set_difference(lhs, rhs, span),
            _ => {
                let (x, y) =
                    (int_of(&lhs, "operand of `-`", span)?, int_of(&rhs, "operand of `-`", span)?);
                x.checked_sub(y)
                    .map(Value::Int)
                    .ok_or_else(|| EvalError::new(EvalErrorKind::IntegerOverflow, span))
            }
        },
        Mul => match (&lhs, &rhs) {
            (Value::Set(_), _) | (_, Value::Set(_)) => cartesian_product(lhs, rhs, span),
            _ => {
                let (x, y) =
                    (int_of(&lhs, "operand of `*`", span)?, int_of(&rhs, "operand of `*`", span)?);
                x.checked_mul(y)
                    .map(Value::Int)
                    .ok_or_else(|| EvalError::new(EvalErrorKind::IntegerOverflow, span))
            }
        },
        Div | Mod => {
            let x = int_of(&lhs, "dividend", span)?;
            let y = int_of(&rhs, "divisor", span)?;
            if y == 0 {
                return Err(EvalError::new(EvalErrorKind::DivisionByZero, span));
            }
            if y < 0 {
                return Err(EvalError::new(EvalErrorKind::NegativeDivisor, span));
            }
            Ok(Value::Int(if op == Div { x.div_euclid(y) } else { x.rem_euclid(y) }))
        }
        Eq => Ok(Value::Bool(lhs == rhs)),
        Ne => Ok(Value::Bool(lhs != rhs)),
        Lt | Le | Gt | Ge => {
            let x = int_of(&lhs, "comparison operand", span)?;
            let y = int_of(&rhs, "comparison operand", span)?;
            Ok(Value::Bool(match op {
                Lt => x < y,
                Le => x <= y,
                Gt => x > y,
                _ => x >= y,
            }))
        }
        MapsTo => {
            let (Some(x), Some(y)) = (lhs.as_scalar(), rhs.as_scalar()) else {
                return Err(kind_err("pair components must be scalars", span));
            };
            Ok(Value::Pair(x, y))
        }
        Interval => {
            let a = int_of(&lhs, "interval bound", span)?;
            let b = int_of(&rhs, "interval bound", span)?;
            if a > b {
                return Ok(Value::empty_set());
            }
            let len = (b - a) as u128 + 1;
            if len > MAX_SET_SIZE as u128 {
                return Err(EvalError::new(EvalErrorKind::SetTooLarge, span));
            }
            Ok(Value::set_from_sorted((a..=b).map(Value::Int).collect()))
        }
        RangeRestrict => {
            let _ = pair_set(&lhs, "left operand of `|>`", span)?;
            let Some(s) = rhs.as_set() else {
                return Err(kind_err("right operand of `|>` must be a set", span));
            };
            let mut out = lhs.clone().into_set_vec().unwrap();
            out.retain(|p| match p {
                Value::Pair(_, y) => Value::set_contains(s, &Value::from(*y)),
                _ => false,
            });
            Ok(Value::set_from_sorted(out))
        }
        DomSubtract => {
            let _ = pair_set(&rhs, "right operand of `<<|`", span)?;
            let Some(s) = lhs.as_set() else {
                return Err(kind_err("left operand of `<<|` must be a set", span));
            };
            let s = s.to_vec();
            let mut out = rhs.clone().into_set_vec().unwrap();
            out.retain(|p| match p {
                Value::Pair(x, _) => !Value::set_contains(&s, &Value::from(*x)),
                _ => false,
            });
            Ok(Value::set_from_sorted(out))
        }
        Override => {
            let r = pair_set(&lhs, "left operand of `<+`", span)?;
            let s = pair_set(&rhs, "right operand of `<+`", span)?;
            let dom_s: Vec<Value> = {
                let mut d: Vec<Value> =
                    s.iter()
                        .map(|p| match p {
                            Value::Pair(x, _) => Value::from(*x),
                            _ => unreachable!(),
                        })
                        .collect();
                d.dedup();
                d
            };
            let kept: Vec<Value> = r
                .iter()
                .filter(|p| match p {
                    Value::Pair(x, _) => !Value::set_contains(&dom_s, &Value::from(*x)),
                    _ => false,
                })
                .cloned()
                .collect();
            let merged = set_union(
                Value::set_from_sorted(kept),
                Value::set_from_sorted(s.to_vec()),
                span,
            )?;
            Ok(merged)
        }
        In | NotIn => {
            let Some(s) = rhs.as_set() else {
                return Err(kind_err("right operand of membership must be a set", span));
            };
            if lhs.elem_kind() == ElemKind::Set {
                return Err(kind_err("membership tests elements, not sets; use `subset`", span));
            }
            let found = Value::set_contains(s, &lhs);
            Ok(Value::Bool(if op == In { found } else { !found }))
        }
        Subset => {
            both_sets(&lhs, &rhs, "`subset`", span)?;
            let (a, b) = (lhs.as_set().unwrap(), rhs.as_set().unwrap());
            Ok(Value::Bool(a.iter().all(|e| Value::set_contains(b, e))))
        }
    }
}

/// One-shot evaluation with a fresh evaluator.
pub fn eval_expr(ctx: &Ctx<'_>, e: &CExpr) -> EvalResult<Value> {
    Evaluator::new().eval(ctx, e)
}
