//! Well-formedness checking and compilation to the slot-indexed IR.
//!
//! Checking enforces, with one diagnostic per violation and without stopping
//! at the first error:
//!
//! * every identifier resolves (constant, variable, parameter, deferred-set
//!   element or deferred-set name);
//! * every variable has exactly one typing invariant and exactly one
//!   initialization, and initialization expressions are constant;
//! * enumerated probabilities lie in (0,1] and sum to exactly 1 (checked
//!   over rationals);
//! * weights are integer-valued expressions over constants and variables,
//!   parameter domains are set-valued, and no variable is assigned twice
//!   within one event;
//! * shallow kinds match between declarations, initializers and assignment
//!   right-hand sides.
//!
//! Successful checking yields a [`CompiledModel`] with constants and the
//! initial state already evaluated.

use crate::ast::{self, AssignRhs, BinOp, Builtin, Expr, ExprKind, Model, SetDef, TypeExpr, TypeKind, UnOp};
use crate::diag::{Diagnostic, SourceSpan};
use crate::eval::{eval_expr, Ctx};
use crate::ir::*;
use crate::value::{SymTable, Value};
use alloc::boxed::Box;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

/// Richer shallow kind lattice used during checking.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Kind {
    Int,
    Bool,
    Sym,
    Pair,
    Set(ElemK),
    Unknown,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum ElemK {
    Int,
    Bool,
    Sym,
    Pair,
    Unknown,
}

impl Kind {
    fn elem(self) -> ElemK {
        match self {
            Kind::Int => ElemK::Int,
            Kind::Bool => ElemK::Bool,
            Kind::Sym => ElemK::Sym,
            Kind::Pair => ElemK::Pair,
            Kind::Set(_) | Kind::Unknown => ElemK::Unknown,
        }
    }

    fn of_elem(e: ElemK) -> Kind {
        match e {
            ElemK::Int => Kind::Int,
            ElemK::Bool => Kind::Bool,
            ElemK::Sym => Kind::Sym,
            ElemK::Pair => Kind::Pair,
            ElemK::Unknown => Kind::Unknown,
        }
    }

    /// Kinds unify when either side is unknown or they agree; set element
    /// kinds unify recursively.
    fn compatible(self, other: Kind) -> bool {
        match (self, other) {
            (Kind::Unknown, _) | (_, Kind::Unknown) => true,
            (Kind::Set(a), Kind::Set(b)) => {
                a == b || a == ElemK::Unknown || b == ElemK::Unknown
            }
            (a, b) => a == b,
        }
    }

    fn describe(self) -> &'static str {
        match self {
            Kind::Int => "an integer",
            Kind::Bool => "a boolean",
            Kind::Sym => "a set element",
            Kind::Pair => "a pair",
            Kind::Set(ElemK::Pair) => "a relation",
            Kind::Set(_) => "a set",
            Kind::Unknown => "of unknown kind",
        }
    }
}

fn coarse(k: Kind) -> ValueKind {
    match k {
        Kind::Int => ValueKind::Int,
        Kind::Bool => ValueKind::Bool,
        Kind::Sym | Kind::Unknown => ValueKind::Sym,
        Kind::Pair => ValueKind::Pair,
        Kind::Set(ElemK::Pair) => ValueKind::SetOfPair,
        Kind::Set(_) => ValueKind::SetOfScalar,
    }
}

/// Result of a successful check.
pub struct CheckOutcome {
    pub model: CompiledModel,
    /// Compiled extra query expressions, in input order.
    pub queries: Vec<CExpr>,
    pub warnings: Vec<Diagnostic>,
}

/// Checks a parsed model; see the module docs for the guarantees.
pub fn check_model(model: &Model) -> Result<CompiledModel, Vec<Diagnostic>> {
    check_model_with_queries(model, &[]).map(|o| o.model)
}

/// Like [`check_model`], additionally resolving and compiling ad-hoc query
/// expressions against the model's constants, variables and sets.
pub fn check_model_with_queries(
    model: &Model,
    queries: &[Expr],
) -> Result<CheckOutcome, Vec<Diagnostic>> {
    let mut c = Compiler::new(model);
    c.collect_sets();
    c.collect_names();
    c.build_symbols(queries);
    c.compile_constants();
    c.compile_variables();
    let events = c.compile_events();
    let properties = c.compile_properties();
    let compiled_queries: Vec<CExpr> = queries
        .iter()
        .map(|q| c.compile_expr(q, Scope::PROPERTY).0)
        .collect();

    if c.diags.iter().any(|d| d.severity == crate::diag::Severity::Error) {
        return Err(c.diags);
    }
    let model = CompiledModel {
        context_name: model.context.name.name.clone(),
        machine_name: model.machine.name.name.clone(),
        symbols: c.symbols,
        set_names: c.set_names,
        set_values: c.set_values,
        const_names: c.const_names,
        const_kinds: c.const_kinds.iter().map(|k| coarse(*k)).collect(),
        const_values: c.const_values,
        var_names: c.var_names,
        var_kinds: c.var_kinds.iter().map(|k| coarse(*k)).collect(),
        initial: c.initial,
        events,
        properties,
    };
    Ok(CheckOutcome { model, queries: compiled_queries, warnings: c.diags })
}

#[derive(Clone, Copy)]
struct Scope {
    vars: bool,
    params: bool,
    /// For constant initializers: only the first `n` constants are visible.
    const_limit: Option<usize>,
}

impl Scope {
    /// Constant initializers: earlier constants, elements and set names.
    const fn consts(n: usize) -> Scope {
        Scope { vars: false, params: false, const_limit: Some(n) }
    }
    /// Machine initialization: constants only (must be state-independent).
    const INIT: Scope = Scope { vars: false, params: false, const_limit: None };
    /// Weights and parameter domains: constants and variables.
    const STATE: Scope = Scope { vars: true, params: false, const_limit: None };
    /// Guards and action right-hand sides: everything incl. parameters.
    const EVENT: Scope = Scope { vars: true, params: true, const_limit: None };
    /// Properties and queries: constants and variables.
    const PROPERTY: Scope = Scope { vars: true, params: false, const_limit: None };
}

struct Compiler<'a> {
    ast: &'a Model,
    diags: Vec<Diagnostic>,
    symbols: SymTable,
    set_names: Vec<String>,
    set_elems: Vec<Vec<String>>,
    set_values: Vec<Value>,
    const_names: Vec<String>,
    const_kinds: Vec<Kind>,
    const_values: Vec<Value>,
    var_names: Vec<String>,
    var_kinds: Vec<Kind>,
    initial: Vec<Value>,
    /// Parameters of the event currently being compiled.
    params: Vec<(String, ElemK)>,
    /// Comprehension binders currently in scope.
    binders: Vec<(String, ElemK)>,
}

impl<'a> Compiler<'a> {
    fn new(ast: &'a Model) -> Self {
        Compiler {
            ast,
            diags: Vec::new(),
            symbols: SymTable::default(),
            set_names: Vec::new(),
            set_elems: Vec::new(),
            set_values: Vec::new(),
            const_names: Vec::new(),
            const_kinds: Vec::new(),
            const_values: Vec::new(),
            var_names: Vec::new(),
            var_kinds: Vec::new(),
            initial: Vec::new(),
            params: Vec::new(),
            binders: Vec::new(),
        }
    }

    fn error(&mut self, msg: impl Into<String>, span: SourceSpan) {
        self.diags.push(Diagnostic::error(msg, span));
    }

    fn warn(&mut self, msg: impl Into<String>, span: SourceSpan) {
        self.diags.push(Diagnostic::warning(msg, span));
    }

    fn collect_sets(&mut self) {
        for decl in &self.ast.context.sets {
            if self.set_names.contains(&decl.name.name) {
                self.error(
                    format!("duplicate deferred set `{}`", decl.name.name),
                    decl.name.span,
                );
                continue;
            }
            let elems: Vec<String> = match &decl.def {
                SetDef::Elems(ids) => ids.iter().map(|i| i.name.clone()).collect(),
                SetDef::Card(n) => {
                    (1..=*n).map(|i| format!("{}{}", decl.name.name, i)).collect()
                }
            };
            self.set_names.push(decl.name.name.clone());
            self.set_elems.push(elems);
        }
    }

    /// Global identifier namespace: set names, element names, constant names
    /// and variable names must be mutually distinct.
    fn collect_names(&mut self) {
        let mut seen: Vec<(String, &'static str)> = Vec::new();
        for (i, s) in self.set_names.iter().enumerate() {
            seen.push((s.clone(), "deferred set"));
            for e in &self.set_elems[i] {
                seen.push((e.clone(), "set element"));
            }
        }
        let check = |name: &str, what: &'static str, span: SourceSpan, seen: &mut Vec<(String, &'static str)>, diags: &mut Vec<Diagnostic>| {
            if let Some((_, prev)) = seen.iter().find(|(n, _)| n == name) {
                diags.push(Diagnostic::error(
                    format!("{what} `{name}` clashes with a {prev} of the same name"),
                    span,
                ));
            } else {
                seen.push((name.to_string(), what));
            }
        };
        // element duplicates across sets
        let mut elem_seen: Vec<&String> = Vec::new();
        for elems in &self.set_elems {
            for e in elems {
                if elem_seen.contains(&e) {
                    self.diags.push(Diagnostic::error(
                        format!("set element `{e}` is declared in more than one deferred set"),
                        self.ast.context.name.span,
                    ));
                }
                elem_seen.push(e);
            }
        }
        for c in &self.ast.context.constants {
            check(&c.name.name, "constant", c.name.span, &mut seen, &mut self.diags);
        }
        for v in &self.ast.machine.variables {
            check(&v.name, "variable", v.span, &mut seen, &mut self.diags);
        }
    }

    /// Interns every symbol the model (or a query) can ever mention: set
    /// elements plus all string literals.
    fn build_symbols(&mut self, queries: &[Expr]) {
        fn strings(e: &Expr, out: &mut Vec<String>) {
            match &e.kind {
                ExprKind::Str(s) => out.push(s.clone()),
                ExprKind::Unary(_, a) => strings(a, out),
                ExprKind::Binary(_, a, b) => {
                    strings(a, out);
                    strings(b, out);
                }
                ExprKind::SetLit(es) => es.iter().for_each(|e| strings(e, out)),
                ExprKind::Comprehension { domain, body, .. } => {
                    strings(domain, out);
                    strings(body, out);
                }
                ExprKind::Call(_, a) => strings(a, out),
                _ => {}
            }
        }
        let mut names: Vec<String> = self.set_elems.iter().flatten().cloned().collect();
        let m = &self.ast.machine;
        let mut exprs: Vec<&Expr> = Vec::new();
        exprs.extend(self.ast.context.constants.iter().map(|c| &c.init));
        exprs.extend(m.init.iter().map(|(_, e)| e));
        for ev in &m.events {
            exprs.push(&ev.weight);
            exprs.extend(ev.params.iter().map(|(_, d)| d));
            exprs.push(&ev.guard);
            for a in &ev.actions {
                match &a.rhs {
                    AssignRhs::Deterministic(e) | AssignRhs::UniformSet(e) => exprs.push(e),
                    AssignRhs::UniformList(es) => exprs.extend(es.iter()),
                    AssignRhs::Enumerated(bs) => exprs.extend(bs.iter().map(|(e, _)| e)),
                }
            }
        }
        exprs.extend(m.properties.iter().map(|(_, e)| e));
        exprs.extend(queries.iter());
        for e in exprs {
            strings(e, &mut names);
        }
        self.symbols = SymTable::new(names);
        for elems in &self.set_elems {
            let vals: Vec<Value> = elems
                .iter()
                .map(|e| Value::Sym(self.symbols.resolve(e).expect("interned")))
                .collect();
            self.set_values.push(crate::value::canonical_set(vals).expect("symbols are scalars"));
        }
    }

    fn type_kind(&mut self, ty: &TypeExpr) -> Kind {
        match &ty.kind {
            TypeKind::Nat | TypeKind::Int => Kind::Int,
            TypeKind::Bool => Kind::Bool,
            TypeKind::Named(n) => {
                if !self.set_names.iter().any(|s| s == n) {
                    self.error(format!("unknown deferred set `{n}` in type"), ty.span);
                }
                Kind::Sym
            }
            TypeKind::Prod(a, b) => {
                for side in [a, b] {
                    if matches!(side.kind, TypeKind::Pow(_) | TypeKind::Prod(..)) {
                        self.error("product components must be basic types", side.span);
                    } else {
                        self.type_kind(side);
                    }
                }
                Kind::Pair
            }
            TypeKind::Pow(inner) => match &inner.kind {
                TypeKind::Pow(_) => {
                    self.error("nested powerset types are not supported", inner.span);
                    Kind::Set(ElemK::Unknown)
                }
                _ => {
                    let k = self.type_kind(inner);
                    Kind::Set(k.elem())
                }
            },
        }
    }

    fn compile_constants(&mut self) {
        for decl in &self.ast.context.constants {
            let declared = self.type_kind(&decl.ty);
            let n = self.const_values.len();
            let (cexpr, kind) = self.compile_expr(&decl.init, Scope::consts(n));
            if !kind.compatible(declared) {
                self.error(
                    format!(
                        "constant `{}` is declared {} but its initializer is {}",
                        decl.name.name,
                        declared.describe(),
                        kind.describe()
                    ),
                    decl.init.span,
                );
            }
            let ctx = Ctx {
                consts: &self.const_values,
                sets: &self.set_values,
                vars: &[],
                params: &[],
            };
            let value = match eval_expr(&ctx, &cexpr) {
                Ok(v) => v,
                Err(e) => {
                    self.diags.push(Diagnostic::error(
                        format!("constant `{}`: {e}", decl.name.name),
                        e.span,
                    ));
                    Value::Int(0)
                }
            };
            self.const_names.push(decl.name.name.clone());
            self.const_kinds.push(declared);
            self.const_values.push(value);
        }
    }

    fn compile_variables(&mut self) {
        let m = &self.ast.machine;
        for v in &m.variables {
            let typings: Vec<&TypeExpr> = m
                .invariants
                .iter()
                .filter(|(name, _)| name.name == v.name)
                .map(|(_, t)| t)
                .collect();
            let kind = match typings.len() {
                0 => {
                    self.error(
                        format!("variable `{}` has no typing invariant `{} : A`", v.name, v.name),
                        v.span,
                    );
                    Kind::Unknown
                }
                1 => self.type_kind(typings[0]),
                _ => {
                    self.error(
                        format!("variable `{}` has more than one typing invariant", v.name),
                        v.span,
                    );
                    self.type_kind(typings[0])
                }
            };
            self.var_names.push(v.name.clone());
            self.var_kinds.push(kind);
        }
        for (name, _) in &m.invariants {
            if !m.variables.iter().any(|v| v.name == name.name) {
                self.error(
                    format!("invariant types `{}`, which is not a declared variable", name.name),
                    name.span,
                );
            }
        }
        // exactly one constant initialization per variable
        for v in &m.variables {
            let inits: Vec<&Expr> = m
                .init
                .iter()
                .filter(|(name, _)| name.name == v.name)
                .map(|(_, e)| e)
                .collect();
            let var_ix = self.var_names.iter().position(|n| *n == v.name).unwrap();
            let declared = self.var_kinds[var_ix];
            let value = match inits.len() {
                0 => {
                    self.error(format!("variable `{}` is never initialized", v.name), v.span);
                    Value::Int(0)
                }
                n => {
                    if n > 1 {
                        self.error(
                            format!("variable `{}` is initialized more than once", v.name),
                            v.span,
                        );
                    }
                    let (cexpr, kind) = self.compile_expr(inits[0], Scope::INIT);
                    if !kind.compatible(declared) {
                        self.error(
                            format!(
                                "initialization of `{}` is {} but the variable is {}",
                                v.name,
                                kind.describe(),
                                declared.describe()
                            ),
                            inits[0].span,
                        );
                    }
                    let ctx = Ctx {
                        consts: &self.const_values,
                        sets: &self.set_values,
                        vars: &[],
                        params: &[],
                    };
                    match eval_expr(&ctx, &cexpr) {
                        Ok(v) => v,
                        Err(e) => {
                            self.diags.push(Diagnostic::error(
                                format!("initialization of `{}`: {e}", v.name),
                                e.span,
                            ));
                            Value::Int(0)
                        }
                    }
                }
            };
            self.initial.push(value);
        }
        for (name, _) in &m.init {
            if !m.variables.iter().any(|v| v.name == name.name) {
                self.error(
                    format!("initialization of `{}`, which is not a declared variable", name.name),
                    name.span,
                );
            }
        }
    }

    fn compile_events(&mut self) -> Vec<CEvent> {
        let mut out = Vec::new();
        let mut names: Vec<&String> = Vec::new();
        for ev in &self.ast.machine.events {
            if names.contains(&&ev.name.name) {
                self.error(format!("duplicate event `{}`", ev.name.name), ev.name.span);
            }
            names.push(&ev.name.name);
            out.push(self.compile_event(ev));
        }
        out
    }

    fn compile_event(&mut self, ev: &ast::Event) -> CEvent {
        // weights may mention constants and variables but not parameters
        let (weight, wkind) = self.compile_expr(&ev.weight, Scope::STATE);
        if !wkind.compatible(Kind::Int) {
            self.error(
                format!("weight of `{}` must be an integer expression", ev.name.name),
                ev.weight.span,
            );
        }

        self.params.clear();
        let mut params = Vec::new();
        for (p, domain) in &ev.params {
            if self.params.iter().any(|(n, _)| n == &p.name) {
                self.error(format!("duplicate parameter `{}`", p.name), p.span);
            }
            if self.resolves_globally(&p.name) {
                self.error(
                    format!(
                        "parameter `{}` shadows a constant, variable or set name",
                        p.name
                    ),
                    p.span,
                );
            }
            // domains are evaluated before any parameter is bound
            let (cdomain, dkind) = self.compile_expr(domain, Scope::STATE);
            let elem = match dkind {
                Kind::Set(e) => e,
                Kind::Unknown => ElemK::Unknown,
                other => {
                    self.error(
                        format!("domain of parameter `{}` must be a set, not {}", p.name, other.describe()),
                        domain.span,
                    );
                    ElemK::Unknown
                }
            };
            self.params.push((p.name.clone(), elem));
            params.push(CParam { name: p.name.clone(), domain: cdomain });
        }

        let (guard, gkind) = self.compile_expr(&ev.guard, Scope::EVENT);
        if !gkind.compatible(Kind::Bool) {
            self.error(
                format!("guard of `{}` must be a boolean expression", ev.name.name),
                ev.guard.span,
            );
        }

        let mut actions = Vec::new();
        let mut targets: Vec<VarId> = Vec::new();
        for a in &ev.actions {
            let Some(var) = self.var_names.iter().position(|v| *v == a.target.name) else {
                self.error(
                    format!("assignment to unknown variable `{}`", a.target.name),
                    a.target.span,
                );
                continue;
            };
            let var = var as VarId;
            if targets.contains(&var) {
                self.error(
                    format!(
                        "variable `{}` is assigned twice in event `{}`; a variable can appear only once as an assignment target",
                        a.target.name, ev.name.name
                    ),
                    a.target.span,
                );
            }
            targets.push(var);
            let declared = self.var_kinds[var as usize];
            let rhs = self.compile_rhs(&a.rhs, declared, &a.target.name);
            actions.push(CAction { target: var, rhs });
        }
        self.params.clear();
        CEvent {
            name: ev.name.name.clone(),
            weight,
            params,
            guard,
            actions,
        }
    }

    fn compile_rhs(&mut self, rhs: &AssignRhs, declared: Kind, target: &str) -> CRhs {
        let check_kind = |c: &mut Self, kind: Kind, span: SourceSpan| {
            if !kind.compatible(declared) {
                c.error(
                    format!(
                        "assignment to `{target}` is {} but the variable is {}",
                        kind.describe(),
                        declared.describe()
                    ),
                    span,
                );
            }
        };
        match rhs {
            AssignRhs::Deterministic(e) => {
                let (ce, kind) = self.compile_expr(e, Scope::EVENT);
                check_kind(self, kind, e.span);
                CRhs::Det(ce)
            }
            AssignRhs::UniformSet(e) => {
                let (ce, kind) = self.compile_expr(e, Scope::EVENT);
                match kind {
                    Kind::Set(elem) => check_kind(self, Kind::of_elem(elem), e.span),
                    Kind::Unknown => {}
                    other => self.error(
                        format!(
                            "`{target} :in` needs a set to choose from, found {}",
                            other.describe()
                        ),
                        e.span,
                    ),
                }
                CRhs::UniformSet(ce)
            }
            AssignRhs::UniformList(es) => {
                let mut ces = Vec::new();
                for e in es {
                    let (ce, kind) = self.compile_expr(e, Scope::EVENT);
                    check_kind(self, kind, e.span);
                    ces.push(ce);
                }
                CRhs::UniformList(ces)
            }
            AssignRhs::Enumerated(branches) => {
                let mut ces = Vec::new();
                let mut sum = BigRational::zero();
                let span = branches.first().map(|(e, _)| e.span);
                for (e, p) in branches {
                    let (ce, kind) = self.compile_expr(e, Scope::EVENT);
                    check_kind(self, kind, e.span);
                    let p = BigRational::new(BigInt::from(*p.numer()), BigInt::from(*p.denom()));
                    if !p.is_positive() || p > BigRational::one() {
                        self.error(
                            format!("probability {p} is outside (0, 1]"),
                            e.span,
                        );
                    }
                    sum += &p;
                    ces.push((ce, p));
                }
                if sum != BigRational::one() {
                    self.error(
                        format!("probabilities sum to {sum} \u{2260} 1"),
                        span.unwrap_or(SourceSpan::synthetic(crate::diag::FileId::MAIN)),
                    );
                }
                let mut cumulative = Vec::with_capacity(ces.len());
                let mut acc = BigRational::zero();
                for (_, p) in &ces {
                    acc += p;
                    cumulative.push(acc.to_f64().unwrap_or(1.0));
                }
                CRhs::Enumerated { branches: ces, cumulative }
            }
        }
    }

    fn compile_properties(&mut self) -> Vec<(String, CExpr)> {
        let mut out = Vec::new();
        let mut names: Vec<&String> = Vec::new();
        for (name, e) in &self.ast.machine.properties {
            if names.contains(&&name.name) {
                self.error(format!("duplicate property `{}`", name.name), name.span);
            }
            names.push(&name.name);
            let (ce, _) = self.compile_expr(e, Scope::PROPERTY);
            out.push((name.name.clone(), ce));
        }
        out
    }

    fn resolves_globally(&self, name: &str) -> bool {
        self.var_names.iter().any(|v| v == name)
            || self.const_names.iter().any(|c| c == name)
            || self.ast.context.constants.iter().any(|c| c.name.name == name)
            || self.set_names.iter().any(|s| s == name)
            || self.set_elems.iter().flatten().any(|e| e == name)
    }

    // ---- expression compilation ------------------------------------------

    fn compile_expr(&mut self, e: &Expr, scope: Scope) -> (CExpr, Kind) {
        let (kind_c, k) = self.compile_kind(e, scope);
        let mut node = CExpr { kind: kind_c, span: e.span };
        fold_constants(&mut node);
        (node, k)
    }

    fn recover(&mut self, msg: String, span: SourceSpan) -> (CExprKind, Kind) {
        self.error(msg, span);
        (CExprKind::Lit(Value::Int(0)), Kind::Unknown)
    }

    fn compile_kind(&mut self, e: &Expr, scope: Scope) -> (CExprKind, Kind) {
        match &e.kind {
            ExprKind::Int(i) => (CExprKind::Lit(Value::Int(*i)), Kind::Int),
            ExprKind::Bool(b) => (CExprKind::Lit(Value::Bool(*b)), Kind::Bool),
            ExprKind::Str(s) => {
                let sym = self.symbols.resolve(s).expect("literal interned");
                (CExprKind::Lit(Value::Sym(sym)), Kind::Sym)
            }
            ExprKind::Ident(name) => self.compile_ident(name, e.span, scope),
            ExprKind::Unary(op, a) => {
                let (ca, ka) = self.compile_expr(a, scope);
                let k = match op {
                    UnOp::Neg => {
                        self.expect_kind(ka, Kind::Int, "operand of `-`", a.span);
                        Kind::Int
                    }
                    UnOp::Not => {
                        self.expect_kind(ka, Kind::Bool, "operand of `not`", a.span);
                        Kind::Bool
                    }
                };
                (CExprKind::Unary(*op, Box::new(ca)), k)
            }
            ExprKind::Binary(op, a, b) => {
                let (ca, ka) = self.compile_expr(a, scope);
                let (cb, kb) = self.compile_expr(b, scope);
                let k = self.binary_kind(*op, ka, kb, e.span);
                (CExprKind::Binary(*op, Box::new(ca), Box::new(cb)), k)
            }
            ExprKind::SetLit(elems) => {
                let mut ces = Vec::new();
                let mut elem = ElemK::Unknown;
                for el in elems {
                    let (ce, k) = self.compile_expr(el, scope);
                    if elem == ElemK::Unknown {
                        elem = k.elem();
                    } else if k.elem() != ElemK::Unknown && k.elem() != elem {
                        self.error("set literal mixes element kinds", el.span);
                    }
                    if matches!(k, Kind::Set(_)) {
                        self.error("sets cannot contain other sets", el.span);
                    }
                    ces.push(ce);
                }
                (CExprKind::SetLit(ces), Kind::Set(elem))
            }
            ExprKind::Comprehension { binder, domain, body } => {
                self.compile_comprehension(binder, domain, body, e.span, scope)
            }
            ExprKind::Call(builtin, a) => {
                let (ca, ka) = self.compile_expr(a, scope);
                let k = match builtin {
                    Builtin::Card => {
                        self.expect_kind(ka, Kind::Set(ElemK::Unknown), "argument of `card`", a.span);
                        Kind::Int
                    }
                    Builtin::Dom | Builtin::Ran => {
                        self.expect_kind(ka, Kind::Set(ElemK::Pair), "argument", a.span);
                        Kind::Set(ElemK::Unknown)
                    }
                };
                (CExprKind::Call(*builtin, Box::new(ca)), k)
            }
        }
    }

    fn compile_ident(&mut self, name: &str, span: SourceSpan, scope: Scope) -> (CExprKind, Kind) {
        // innermost binder first
        if let Some(depth) = self.binders.iter().rposition(|(n, _)| n == name) {
            let elem = self.binders[depth].1;
            return (CExprKind::Binder(depth as u16), Kind::of_elem(elem));
        }
        if let Some(i) = self.params.iter().position(|(n, _)| n == name) {
            if scope.params {
                let elem = self.params[i].1;
                return (CExprKind::Param(i as u16), Kind::of_elem(elem));
            }
            return self.recover(
                format!("parameter `{name}` cannot be used here (weights and parameter domains are evaluated before parameters are bound)"),
                span,
            );
        }
        if let Some(i) = self.var_names.iter().position(|v| v == name) {
            if scope.vars {
                return (CExprKind::Var(i as VarId), self.var_kinds[i]);
            }
            return self.recover(
                format!("variable `{name}` cannot be used in a constant context"),
                span,
            );
        }
        if let Some(i) = self.const_names.iter().position(|c| c == name) {
            if scope.const_limit.map_or(true, |limit| i < limit) {
                return (CExprKind::Const(i as ConstId), self.const_kinds[i]);
            }
            return self.recover(
                format!("constant `{name}` is used before its declaration"),
                span,
            );
        }
        if self.set_elems.iter().flatten().any(|e| e == name) {
            let sym = self.symbols.resolve(name).expect("elements interned");
            return (CExprKind::Lit(Value::Sym(sym)), Kind::Sym);
        }
        if let Some(i) = self.set_names.iter().position(|s| s == name) {
            return (CExprKind::SetRef(i as SetId), Kind::Set(ElemK::Sym));
        }
        self.recover(format!("unknown identifier `{name}`"), span)
    }

    fn compile_comprehension(
        &mut self,
        binder: &str,
        domain: &Expr,
        body: &Expr,
        span: SourceSpan,
        scope: Scope,
    ) -> (CExprKind, Kind) {
        let (cdomain, dkind) = self.compile_expr(domain, scope);
        let elem = match dkind {
            Kind::Set(e) => e,
            Kind::Unknown => ElemK::Unknown,
            other => {
                self.error(
                    format!("comprehension domain must be a set, not {}", other.describe()),
                    domain.span,
                );
                ElemK::Unknown
            }
        };
        let depth = self.binders.len() as u16;
        if depth >= 64 {
            return self.recover("comprehensions nest too deeply (max 64)".into(), span);
        }
        if self.resolves_globally(binder)
            || self.params.iter().any(|(n, _)| n == binder)
            || self.binders.iter().any(|(n, _)| n == binder)
        {
            self.warn(
                format!("comprehension binder `{binder}` shadows an outer binding"),
                span,
            );
        }
        self.binders.push((binder.to_string(), elem));
        let (mut cbody, bkind) = self.compile_expr(body, scope);
        self.binders.pop();

        let mut hoisted = Vec::new();
        hoist_invariants(&mut cbody, depth, &mut hoisted);
        let result_elem = if bkind == Kind::Bool {
            // could still be a map producing booleans; the evaluator decides
            elem
        } else {
            bkind.elem()
        };
        (
            CExprKind::Comprehension(Box::new(CComp {
                depth,
                domain: cdomain,
                hoisted,
                body: cbody,
            })),
            Kind::Set(result_elem),
        )
    }

    fn expect_kind(&mut self, got: Kind, want: Kind, what: &str, span: SourceSpan) {
        if !got.compatible(want) {
            self.error(
                format!("{what} must be {}, found {}", want.describe(), got.describe()),
                span,
            );
        }
    }

    fn binary_kind(&mut self, op: BinOp, ka: Kind, kb: Kind, span: SourceSpan) -> Kind {
        use BinOp::*;
        match op {
            Add => {
                self.expect_kind(ka, Kind::Int, "operand of `+`", span);
                self.expect_kind(kb, Kind::Int, "operand of `+`", span);
                Kind::Int
            }
            Div | Mod => {
                self.expect_kind(ka, Kind::Int, "operand", span);
                self.expect_kind(kb, Kind::Int, "operand", span);
                Kind::Int
            }
            Sub => match (ka, kb) {
                (Kind::Set(x), Kind::Set(_)) => Kind::Set(x),
                (Kind::Unknown, _) | (_, Kind::Unknown) => Kind::Unknown,
                _ => {
                    self.expect_kind(ka, Kind::Int, "operand of `-`", span);
                    self.expect_kind(kb, Kind::Int, "operand of `-`", span);
                    Kind::Int
                }
            },
            Mul => match (ka, kb) {
                (Kind::Set(_), Kind::Set(_)) => Kind::Set(ElemK::Pair),
                (Kind::Unknown, _) | (_, Kind::Unknown) => Kind::Unknown,
                _ => {
                    self.expect_kind(ka, Kind::Int, "operand of `*`", span);
                    self.expect_kind(kb, Kind::Int, "operand of `*`", span);
                    Kind::Int
                }
            },
            And | Or => match (ka, kb) {
                (Kind::Set(x), Kind::Set(y)) => {
                    if x == y || y == ElemK::Unknown {
                        Kind::Set(x)
                    } else if x == ElemK::Unknown {
                        Kind::Set(y)
                    } else {
                        self.error("set operands have different element kinds", span);
                        Kind::Set(ElemK::Unknown)
                    }
                }
                (Kind::Bool, Kind::Bool) => Kind::Bool,
                (Kind::Unknown, k) | (k, Kind::Unknown) => {
                    if matches!(k, Kind::Set(_)) {
                        k
                    } else {
                        Kind::Unknown
                    }
                }
                _ => {
                    self.error(
                        "`/\\` and `\\/` apply to two booleans or two sets",
                        span,
                    );
                    Kind::Unknown
                }
            },
            Eq | Ne => {
                if !ka.compatible(kb) {
                    self.error(
                        format!("comparing {} with {}", ka.describe(), kb.describe()),
                        span,
                    );
                }
                Kind::Bool
            }
            Lt | Le | Gt | Ge => {
                self.expect_kind(ka, Kind::Int, "comparison operand", span);
                self.expect_kind(kb, Kind::Int, "comparison operand", span);
                Kind::Bool
            }
            MapsTo => {
                for k in [ka, kb] {
                    if matches!(k, Kind::Set(_) | Kind::Pair) {
                        self.error("pair components must be basic (scalar) values", span);
                    }
                }
                Kind::Pair
            }
            Interval => {
                self.expect_kind(ka, Kind::Int, "interval bound", span);
                self.expect_kind(kb, Kind::Int, "interval bound", span);
                Kind::Set(ElemK::Int)
            }
            RangeRestrict => {
                self.expect_kind(ka, Kind::Set(ElemK::Pair), "left operand of `|>`", span);
                self.expect_kind(kb, Kind::Set(ElemK::Unknown), "right operand of `|>`", span);
                Kind::Set(ElemK::Pair)
            }
            DomSubtract => {
                self.expect_kind(ka, Kind::Set(ElemK::Unknown), "left operand of `<<|`", span);
                self.expect_kind(kb, Kind::Set(ElemK::Pair), "right operand of `<<|`", span);
                Kind::Set(ElemK::Pair)
            }
            Override => {
                self.expect_kind(ka, Kind::Set(ElemK::Pair), "left operand of `<+`", span);
                self.expect_kind(kb, Kind::Set(ElemK::Pair), "right operand of `<+`", span);
                Kind::Set(ElemK::Pair)
            }
            In | NotIn => {
                self.expect_kind(kb, Kind::Set(ElemK::Unknown), "right operand of membership", span);
                Kind::Bool
            }
            Subset => {
                self.expect_kind(ka, Kind::Set(ElemK::Unknown), "operand of `subset`", span);
                self.expect_kind(kb, Kind::Set(ElemK::Unknown), "operand of `subset`", span);
                Kind::Bool
            }
        }
    }
}

/// Bitmask of the binder depths an expression references freely.
fn binder_mask(e: &CExpr) -> u64 {
    match &e.kind {
        CExprKind::Binder(d) => 1u64 << (*d as u64).min(63),
        CExprKind::Lit(_)
        | CExprKind::Const(_)
        | CExprKind::Var(_)
        | CExprKind::Param(_)
        | CExprKind::SetRef(_)
        | CExprKind::Hoisted { .. } => 0,
        CExprKind::Unary(_, a) => binder_mask(a),
        CExprKind::Binary(_, a, b) => binder_mask(a) | binder_mask(b),
        CExprKind::SetLit(es) => es.iter().map(binder_mask).fold(0, |a, b| a | b),
        CExprKind::Call(_, a) => binder_mask(a),
        CExprKind::Comprehension(c) => {
            let inner = binder_mask(&c.domain)
                | binder_mask(&c.body)
                | c.hoisted.iter().map(binder_mask).fold(0, |a, b| a | b);
            inner & !(1u64 << (c.depth as u64).min(63))
        }
    }
}

/// True for node shapes that are worth hoisting out of a comprehension
/// body (set constructions and nested comprehensions).
fn worth_hoisting(e: &CExpr) -> bool {
    match &e.kind {
        CExprKind::Comprehension(_) | CExprKind::Call(_, _) => true,
        CExprKind::Binary(op, _, _) => matches!(
            op,
            BinOp::RangeRestrict | BinOp::DomSubtract | BinOp::Override | BinOp::Interval | BinOp::Mul
        ),
        _ => false,
    }
}

/// Replaces maximal loop-invariant subtrees of a comprehension body (nodes
/// that do not reference the binder at `depth` or deeper) with lazily
/// evaluated [`CExprKind::Hoisted`] slots.
fn hoist_invariants(e: &mut CExpr, depth: u16, out: &mut Vec<CExpr>) {
    if worth_hoisting(e) && binder_mask(e) >> depth == 0 {
        let index = out.len() as u16;
        let span = e.span;
        let node = core::mem::replace(e, CExpr { kind: CExprKind::Hoisted { depth, index }, span });
        out.push(node);
        return;
    }
    match &mut e.kind {
        CExprKind::Unary(_, a) => hoist_invariants(a, depth, out),
        CExprKind::Binary(_, a, b) => {
            hoist_invariants(a, depth, out);
            hoist_invariants(b, depth, out);
        }
        CExprKind::SetLit(es) => es.iter_mut().for_each(|e| hoist_invariants(e, depth, out)),
        CExprKind::Call(_, a) => hoist_invariants(a, depth, out),
        CExprKind::Comprehension(c) => {
            hoist_invariants(&mut c.domain, depth, out);
            // the inner body keeps referencing its own hoist frame; only
            // descend into subtrees the inner hoisting left in place
            hoist_invariants(&mut c.body, depth, out);
            for h in &mut c.hoisted {
                hoist_invariants(h, depth, out);
            }
        }
        _ => {}
    }
}

/// Folds literal-only subtrees; leaves nodes whose evaluation errors intact
/// so the error surfaces (or is short-circuited away) at run time.
fn fold_constants(e: &mut CExpr) {
    let all_lit = |es: &[&CExpr]| {
        es.iter().all(|e| matches!(e.kind, CExprKind::Lit(_)))
    };
    let foldable = match &e.kind {
        CExprKind::Unary(_, a) => all_lit(&[a]),
        CExprKind::Binary(op, a, b) => {
            // `/\` and `\/` short-circuit; skip them so a literal error
            // operand cannot be evaluated eagerly
            !matches!(op, BinOp::And | BinOp::Or) && all_lit(&[a, b])
        }
        CExprKind::SetLit(es) => es.iter().all(|e| matches!(e.kind, CExprKind::Lit(_))),
        CExprKind::Call(_, a) => all_lit(&[a]),
        _ => false,
    };
    if !foldable {
        return;
    }
    let ctx = Ctx { consts: &[], sets: &[], vars: &[], params: &[] };
    if let Ok(v) = eval_expr(&ctx, e) {
        e.kind = CExprKind::Lit(v);
    }
}
