//! Surface syntax of probabilistic Event-B models.
//!
//! Every node carries a [`SourceSpan`]; structural equality (`PartialEq`)
//! deliberately ignores spans so that round-trip properties can compare
//! reparsed models directly.

use crate::diag::SourceSpan;
use alloc::boxed::Box;
use alloc::string::String;
use alloc::vec::Vec;
use num_rational::Ratio;

/// Exact probability literal (decimals are parsed as base-10 rationals).
pub type Prob = Ratio<i64>;

#[derive(Debug, Clone, Eq)]
pub struct Ident {
    pub name: String,
    pub span: SourceSpan,
}

impl PartialEq for Ident {
    fn eq(&self, other: &Self) -> bool {
        self.name == other.name
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UnOp {
    Neg,
    Not,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Mod,
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
    /// `/\`: conjunction on booleans, intersection on sets.
    And,
    /// `\/`: disjunction on booleans, union on sets.
    Or,
    /// `|->`
    MapsTo,
    /// `..`
    Interval,
    /// `|>`
    RangeRestrict,
    /// `<<|`
    DomSubtract,
    /// `<+`
    Override,
    In,
    NotIn,
    Subset,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Builtin {
    Card,
    Dom,
    Ran,
}

#[derive(Debug, Clone, Eq)]
pub struct Expr {
    pub kind: ExprKind,
    pub span: SourceSpan,
}

impl PartialEq for Expr {
    fn eq(&self, other: &Self) -> bool {
        self.kind == other.kind
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ExprKind {
    Int(i64),
    Bool(bool),
    /// String literal, e.g. `"emp"`; denotes the same symbol as the bare
    /// deferred-set element of that name.
    Str(String),
    Ident(String),
    Unary(UnOp, Box<Expr>),
    Binary(BinOp, Box<Expr>, Box<Expr>),
    SetLit(Vec<Expr>),
    /// `{x . S | body}` — filter when the body is boolean-valued, map
    /// otherwise.
    Comprehension { binder: String, domain: Box<Expr>, body: Box<Expr> },
    Call(Builtin, Box<Expr>),
}

#[derive(Debug, Clone, Eq)]
pub struct TypeExpr {
    pub kind: TypeKind,
    pub span: SourceSpan,
}

impl PartialEq for TypeExpr {
    fn eq(&self, other: &Self) -> bool {
        self.kind == other.kind
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TypeKind {
    Nat,
    Int,
    Bool,
    /// A deferred-set name.
    Named(String),
    Pow(Box<TypeExpr>),
    Prod(Box<TypeExpr>, Box<TypeExpr>),
}

/// Definition of a deferred set: by enumeration or by cardinality (`S:n`
/// generates elements `S1..Sn`).
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SetDef {
    Elems(Vec<Ident>),
    Card(u32),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SetDecl {
    pub name: Ident,
    pub def: SetDef,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConstDecl {
    pub name: Ident,
    pub ty: TypeExpr,
    pub init: Expr,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Context {
    pub name: Ident,
    pub sets: Vec<SetDecl>,
    pub constants: Vec<ConstDecl>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum AssignRhs {
    Deterministic(Expr),
    /// `x :in S` — uniform choice from the evaluated set.
    UniformSet(Expr),
    /// `x := {E1, ..., En}` with n >= 2 in an event action — uniform choice
    /// among the expressions.
    UniformList(Vec<Expr>),
    /// `x := {E1@p1, ..., En@pn}`.
    Enumerated(Vec<(Expr, Prob)>),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Assignment {
    pub target: Ident,
    pub rhs: AssignRhs,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Event {
    pub name: Ident,
    /// Defaults to the literal `1` when the WEIGHT section is omitted.
    pub weight: Expr,
    pub params: Vec<(Ident, Expr)>,
    /// Defaults to `true` when the WHERE section is omitted.
    pub guard: Expr,
    pub actions: Vec<Assignment>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Machine {
    pub name: Ident,
    pub sees: Ident,
    pub variables: Vec<Ident>,
    pub invariants: Vec<(Ident, TypeExpr)>,
    pub init: Vec<(Ident, Expr)>,
    pub events: Vec<Event>,
    pub properties: Vec<(Ident, Expr)>,
}

/// A parsed context/machine pair (a machine sees exactly one context).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Model {
    pub context: Context,
    pub machine: Machine,
}

/// One top-level section of a source file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Unit {
    Context(Context),
    Machine(Machine),
}
