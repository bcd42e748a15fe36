//! Slot-indexed compiled form of a checked model.
//!
//! Identifiers are resolved to array indices, symbol literals are interned,
//! constant subexpressions are folded, and comprehension bodies have their
//! loop-invariant subexpressions hoisted into lazily evaluated slots. All
//! analyses (evaluation, simulation, exact enumeration) run on this form.

use crate::ast::{BinOp, Builtin, UnOp};
use crate::diag::SourceSpan;
use crate::value::{SymTable, Value};
use alloc::boxed::Box;
use alloc::string::String;
use alloc::vec::Vec;
use num_rational::BigRational;

pub type VarId = u16;
pub type ConstId = u16;
pub type SetId = u16;
pub type EventId = u16;
pub type ParamId = u16;

#[derive(Debug, Clone)]
pub struct CExpr {
    pub kind: CExprKind,
    pub span: SourceSpan,
}

#[derive(Debug, Clone)]
pub enum CExprKind {
    Lit(Value),
    Const(ConstId),
    Var(VarId),
    Param(ParamId),
    /// Reference to the comprehension binder at the given nesting depth.
    Binder(u16),
    /// A deferred set used as a value.
    SetRef(SetId),
    /// Loop-invariant subexpression hoisted out of the comprehension at
    /// `depth`; evaluated lazily once per comprehension evaluation.
    Hoisted { depth: u16, index: u16 },
    Unary(UnOp, Box<CExpr>),
    Binary(BinOp, Box<CExpr>, Box<CExpr>),
    SetLit(Vec<CExpr>),
    Call(Builtin, Box<CExpr>),
    Comprehension(Box<CComp>),
}

#[derive(Debug, Clone)]
pub struct CComp {
    /// Nesting depth of this comprehension's binder (0 = outermost).
    pub depth: u16,
    pub domain: CExpr,
    /// Subexpressions of `body` that do not depend on this binder (or any
    /// deeper one), replaced in `body` by [`CExprKind::Hoisted`] references.
    pub hoisted: Vec<CExpr>,
    pub body: CExpr,
}

#[derive(Debug, Clone)]
pub enum CRhs {
    Det(CExpr),
    UniformSet(CExpr),
    UniformList(Vec<CExpr>),
    Enumerated {
        branches: Vec<(CExpr, BigRational)>,
        /// Cumulative branch probabilities as floats, for sampling.
        cumulative: Vec<f64>,
    },
}

#[derive(Debug, Clone)]
pub struct CAction {
    pub target: VarId,
    pub rhs: CRhs,
}

#[derive(Debug, Clone)]
pub struct CParam {
    pub name: String,
    pub domain: CExpr,
}

#[derive(Debug, Clone)]
pub struct CEvent {
    pub name: String,
    pub weight: CExpr,
    pub params: Vec<CParam>,
    pub guard: CExpr,
    pub actions: Vec<CAction>,
}

/// Shallow kind of a declared variable or constant, from its type
/// annotation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ValueKind {
    Int,
    Bool,
    Sym,
    Pair,
    SetOfScalar,
    SetOfPair,
}

/// A checked, compiled model. Immutable after construction; safe to share
/// across threads.
#[derive(Debug, Clone)]
pub struct CompiledModel {
    pub context_name: String,
    pub machine_name: String,
    pub symbols: SymTable,
    pub set_names: Vec<String>,
    /// Deferred-set values (canonical sets of symbols), indexed by [`SetId`].
    pub set_values: Vec<Value>,
    pub const_names: Vec<String>,
    pub const_kinds: Vec<ValueKind>,
    pub const_values: Vec<Value>,
    pub var_names: Vec<String>,
    pub var_kinds: Vec<ValueKind>,
    /// Initial variable values, evaluated at compile time.
    pub initial: Vec<Value>,
    pub events: Vec<CEvent>,
    pub properties: Vec<(String, CExpr)>,
}

impl CompiledModel {
    pub fn event(&self, id: EventId) -> &CEvent {
        &self.events[id as usize]
    }

    pub fn event_name(&self, id: EventId) -> &str {
        &self.events[id as usize].name
    }

    pub fn var_id(&self, name: &str) -> Option<VarId> {
        self.var_names.iter().position(|n| n == name).map(|i| i as VarId)
    }

    pub fn property(&self, name: &str) -> Option<&CExpr> {
        self.properties.iter().find(|(n, _)| n == name).map(|(_, e)| e)
    }
}

/// True when the expression mentions the given variable.
pub fn expr_uses_var(e: &CExpr, var: VarId) -> bool {
    match &e.kind {
        CExprKind::Var(v) => *v == var,
        CExprKind::Lit(_)
        | CExprKind::Const(_)
        | CExprKind::Param(_)
        | CExprKind::Binder(_)
        | CExprKind::SetRef(_)
        | CExprKind::Hoisted { .. } => false,
        CExprKind::Unary(_, a) => expr_uses_var(a, var),
        CExprKind::Binary(_, a, b) => expr_uses_var(a, var) || expr_uses_var(b, var),
        CExprKind::SetLit(es) => es.iter().any(|e| expr_uses_var(e, var)),
        CExprKind::Call(_, a) => expr_uses_var(a, var),
        CExprKind::Comprehension(c) => {
            expr_uses_var(&c.domain, var)
                || expr_uses_var(&c.body, var)
                || c.hoisted.iter().any(|h| expr_uses_var(h, var))
        }
    }
}

/// True when the expression mentions any event parameter.
pub fn expr_uses_params(e: &CExpr) -> bool {
    match &e.kind {
        CExprKind::Param(_) => true,
        CExprKind::Lit(_)
        | CExprKind::Const(_)
        | CExprKind::Var(_)
        | CExprKind::Binder(_)
        | CExprKind::SetRef(_)
        | CExprKind::Hoisted { .. } => false,
        CExprKind::Unary(_, a) => expr_uses_params(a),
        CExprKind::Binary(_, a, b) => expr_uses_params(a) || expr_uses_params(b),
        CExprKind::SetLit(es) => es.iter().any(expr_uses_params),
        CExprKind::Call(_, a) => expr_uses_params(a),
        CExprKind::Comprehension(c) => {
            expr_uses_params(&c.domain)
                || expr_uses_params(&c.body)
                || c.hoisted.iter().any(expr_uses_params)
        }
    }
}
