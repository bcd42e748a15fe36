//! Recursive-descent parser for `.peb` model files.
//!
//! Binding strength, tightest first:
//!
//! ```text
//! atoms; unary `-`/`not`; `*` `div` `mod`; `+` `-`; `..`; `|->`;
//! `|>` `<<|` `<+`; comparisons (`=` `/=` `<` `<=` `>` `>=` `in` `notin`
//! `subset`); `/\`; `\/`
//! ```
//!
//! Sections are keyword-delimited and newline-insensitive. In event actions
//! a top-level brace list `{E1, ..., En}` with n >= 2 denotes a uniform
//! probabilistic choice and `{E1@p1, ..., En@pn}` an enumerated one; in any
//! other position braces are a set literal or comprehension.

use crate::ast::*;
use crate::diag::{Diagnostic, FileId, SourceSpan};
use crate::lex::{tokenize, Token, TokenKind};
use alloc::boxed::Box;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use num_rational::Ratio;

/// Words that cannot be used as identifiers.
pub const RESERVED: &[&str] = &[
    "div", "mod", "not", "in", "notin", "subset", "true", "false", "card", "dom", "ran", "POW",
    "Nat", "Int", "Bool", "BOOL", "CONTEXT", "SETS", "CONSTANTS", "END", "MACHINE", "SEES",
    "VARIABLES", "INVARIANTS", "INITIALISATION", "EVENT", "WEIGHT", "ANY", "WHERE", "THEN",
    "PROPERTIES",
];

const SECTION_KEYWORDS: &[&str] = &[
    "CONTEXT", "SETS", "CONSTANTS", "END", "MACHINE", "SEES", "VARIABLES", "INVARIANTS",
    "INITIALISATION", "EVENT", "WEIGHT", "ANY", "WHERE", "THEN", "PROPERTIES",
];

type PResult<T> = Result<T, Diagnostic>;

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> &TokenKind {
        &self.tokens[self.pos].kind
    }

    fn peek_at(&self, n: usize) -> &TokenKind {
        &self.tokens[(self.pos + n).min(self.tokens.len() - 1)].kind
    }

    fn span(&self) -> SourceSpan {
        self.tokens[self.pos].span
    }

    fn bump(&mut self) -> Token {
        let t = self.tokens[self.pos].clone();
        if self.pos + 1 < self.tokens.len() {
            self.pos += 1;
        }
        t
    }

    fn eat(&mut self, kind: &TokenKind) -> bool {
        if self.peek() == kind {
            self.bump();
            true
        } else {
            false
        }
    }

    fn expect(&mut self, kind: TokenKind, what: &str) -> PResult<Token> {
        if self.peek() == &kind {
            Ok(self.bump())
        } else {
            Err(Diagnostic::error(
                format!("expected {what}, found {}", self.peek().describe()),
                self.span(),
            ))
        }
    }

    /// True when the current token is the given keyword.
    fn at_kw(&self, kw: &str) -> bool {
        matches!(self.peek(), TokenKind::Ident(s) if s == kw)
    }

    fn at_any_section_kw(&self) -> bool {
        matches!(self.peek(), TokenKind::Ident(s) if SECTION_KEYWORDS.contains(&s.as_str()))
    }

    fn eat_kw(&mut self, kw: &str) -> bool {
        if self.at_kw(kw) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn expect_kw(&mut self, kw: &str) -> PResult<()> {
        if self.eat_kw(kw) {
            Ok(())
        } else {
            Err(Diagnostic::error(
                format!("expected `{kw}`, found {}", self.peek().describe()),
                self.span(),
            ))
        }
    }

    fn ident(&mut self, what: &str) -> PResult<Ident> {
        match self.peek().clone() {
            TokenKind::Ident(name) => {
                if RESERVED.contains(&name.as_str()) {
                    return Err(Diagnostic::error(
                        format!("`{name}` is a reserved word and cannot name a {what}"),
                        self.span(),
                    ));
                }
                let span = self.span();
                self.bump();
                Ok(Ident { name, span })
            }
            other => Err(Diagnostic::error(
                format!("expected {what} name, found {}", other.describe()),
                self.span(),
            )),
        }
    }

    // ---- expressions ----------------------------------------------------

    fn expr(&mut self) -> PResult<Expr> {
        self.or_expr()
    }

    fn or_expr(&mut self) -> PResult<Expr> {
        let mut lhs = self.and_expr()?;
        while self.peek() == &TokenKind::Or {
            let span = self.span();
            self.bump();
            let rhs = self.and_expr()?;
            lhs = Expr { kind: ExprKind::Binary(BinOp::Or, Box::new(lhs), Box::new(rhs)), span };
        }
        Ok(lhs)
    }

    fn and_expr(&mut self) -> PResult<Expr> {
        let mut lhs = self.cmp_expr()?;
        while self.peek() == &TokenKind::And {
            let span = self.span();
            self.bump();
            let rhs = self.cmp_expr()?;
            lhs = Expr { kind: ExprKind::Binary(BinOp::And, Box::new(lhs), Box::new(rhs)), span };
        }
        Ok(lhs)
    }

    fn cmp_op(&self) -> Option<BinOp> {
        match self.peek() {
            TokenKind::Eq => Some(BinOp::Eq),
            TokenKind::Ne => Some(BinOp::Ne),
            TokenKind::Lt => Some(BinOp::Lt),
            TokenKind::Le => Some(BinOp::Le),
            TokenKind::Gt => Some(BinOp::Gt),
            TokenKind::Ge => Some(BinOp::Ge),
            TokenKind::Ident(s) if s == "in" => Some(BinOp::In),
            TokenKind::Ident(s) if s == "notin" => Some(BinOp::NotIn),
            TokenKind::Ident(s) if s == "subset" => Some(BinOp::Subset),
            _ => None,
        }
    }

    fn cmp_expr(&mut self) -> PResult<Expr> {
        let lhs = self.rel_expr()?;
        if let Some(op) = self.cmp_op() {
            let span = self.span();
            self.bump();
            let rhs = self.rel_expr()?;
            return Ok(Expr { kind: ExprKind::Binary(op, Box::new(lhs), Box::new(rhs)), span });
        }
        Ok(lhs)
    }

    fn rel_expr(&mut self) -> PResult<Expr> {
        let mut lhs = self.pair_expr()?;
        loop {
            let op = match self.peek() {
                TokenKind::RangeRestrict => BinOp::RangeRestrict,
                TokenKind::DomSubtract => BinOp::DomSubtract,
                TokenKind::Override => BinOp::Override,
                _ => break,
            };
            let span = self.span();
            self.bump();
            let rhs = self.pair_expr()?;
            lhs = Expr { kind: ExprKind::Binary(op, Box::new(lhs), Box::new(rhs)), span };
        }
        Ok(lhs)
    }

    fn pair_expr(&mut self) -> PResult<Expr> {
        let lhs = self.interval_expr()?;
        if self.peek() == &TokenKind::MapsTo {
            let span = self.span();
            self.bump();
            let rhs = self.interval_expr()?;
            return Ok(Expr {
                kind: ExprKind::Binary(BinOp::MapsTo, Box::new(lhs), Box::new(rhs)),
                span,
            });
        }
        Ok(lhs)
    }

    fn interval_expr(&mut self) -> PResult<Expr> {
        let lhs = self.add_expr()?;
        if self.peek() == &TokenKind::DotDot {
            let span = self.span();
            self.bump();
            let rhs = self.add_expr()?;
            return Ok(Expr {
                kind: ExprKind::Binary(BinOp::Interval, Box::new(lhs), Box::new(rhs)),
                span,
            });
        }
        Ok(lhs)
    }

    fn add_expr(&mut self) -> PResult<Expr> {
        let mut lhs = self.mul_expr()?;
        loop {
            let op = match self.peek() {
                TokenKind::Plus => BinOp::Add,
                TokenKind::Minus => BinOp::Sub,
                _ => break,
            };
            let span = self.span();
            self.bump();
            let rhs = self.mul_expr()?;
            lhs = Expr { kind: ExprKind::Binary(op, Box::new(lhs), Box::new(rhs)), span };
        }
        Ok(lhs)
    }

    fn mul_expr(&mut self) -> PResult<Expr> {
        let mut lhs = self.unary_expr()?;
        loop {
            let op = match self.peek() {
                TokenKind::Star => BinOp::Mul,
                TokenKind::Ident(s) if s == "div" => BinOp::Div,
                TokenKind::Ident(s) if s == "mod" => BinOp::Mod,
                _ => break,
            };
            let span = self.span();
            self.bump();
            let rhs = self.unary_expr()?;
            lhs = Expr { kind: ExprKind::Binary(op, Box::new(lhs), Box::new(rhs)), span };
        }
        Ok(lhs)
    }

    fn unary_expr(&mut self) -> PResult<Expr> {
        if self.peek() == &TokenKind::Minus {
            let span = self.span();
            self.bump();
            let operand = self.unary_expr()?;
            return Ok(Expr { kind: ExprKind::Unary(UnOp::Neg, Box::new(operand)), span });
        }
        if self.at_kw("not") {
            let span = self.span();
            self.bump();
            let operand = self.unary_expr()?;
            return Ok(Expr { kind: ExprKind::Unary(UnOp::Not, Box::new(operand)), span });
        }
        self.atom()
    }

    fn atom(&mut self) -> PResult<Expr> {
        let span = self.span();
        match self.peek().clone() {
            TokenKind::Int(i) => {
                self.bump();
                Ok(Expr { kind: ExprKind::Int(i), span })
            }
            TokenKind::Str(s) => {
                self.bump();
                Ok(Expr { kind: ExprKind::Str(s), span })
            }
            TokenKind::LParen => {
                self.bump();
                let inner = self.expr()?;
                self.expect(TokenKind::RParen, "`)`")?;
                Ok(inner)
            }
            TokenKind::LBrace => self.brace_expr(),
            TokenKind::Ident(name) => match name.as_str() {
                "true" => {
                    self.bump();
                    Ok(Expr { kind: ExprKind::Bool(true), span })
                }
                "false" => {
                    self.bump();
                    Ok(Expr { kind: ExprKind::Bool(false), span })
                }
                "card" | "dom" | "ran" => {
                    self.bump();
                    let builtin = match name.as_str() {
                        "card" => Builtin::Card,
                        "dom" => Builtin::Dom,
                        _ => Builtin::Ran,
                    };
                    self.expect(TokenKind::LParen, "`(`")?;
                    let arg = self.expr()?;
                    self.expect(TokenKind::RParen, "`)`")?;
                    Ok(Expr { kind: ExprKind::Call(builtin, Box::new(arg)), span })
                }
                _ if RESERVED.contains(&name.as_str()) => Err(Diagnostic::error(
                    format!("reserved word `{name}` cannot appear here"),
                    span,
                )),
                _ => {
                    self.bump();
                    Ok(Expr { kind: ExprKind::Ident(name), span })
                }
            },
            TokenKind::Dec(_) => Err(Diagnostic::error(
                "decimal literals are only allowed as probabilities after `@`",
                span,
            )),
            other => Err(Diagnostic::error(
                format!("expected an expression, found {}", other.describe()),
                span,
            )),
        }
    }

    /// `{ ... }` in expression position: empty set, comprehension, or set
    /// literal.
    fn brace_expr(&mut self) -> PResult<Expr> {
        let span = self.span();
        self.expect(TokenKind::LBrace, "`{`")?;
        if self.eat(&TokenKind::RBrace) {
            return Ok(Expr { kind: ExprKind::SetLit(Vec::new()), span });
        }
        // `{x . S | body}`
        if matches!(self.peek(), TokenKind::Ident(s) if !RESERVED.contains(&s.as_str()))
            && self.peek_at(1) == &TokenKind::Dot
        {
            let binder = self.ident("comprehension binder")?;
            self.expect(TokenKind::Dot, "`.`")?;
            let domain = self.expr()?;
            self.expect(TokenKind::Bar, "`|`")?;
            let body = self.expr()?;
            self.expect(TokenKind::RBrace, "`}`")?;
            return Ok(Expr {
                kind: ExprKind::Comprehension {
                    binder: binder.name,
                    domain: Box::new(domain),
                    body: Box::new(body),
                },
                span,
            });
        }
        let mut elems = vec![self.expr()?];
        while self.eat(&TokenKind::Comma) {
            elems.push(self.expr()?);
        }
        self.expect(TokenKind::RBrace, "`}` or `,`")?;
        Ok(Expr { kind: ExprKind::SetLit(elems), span })
    }

    // ---- probabilities and assignments ----------------------------------

    fn probability(&mut self) -> PResult<(Prob, SourceSpan)> {
        let span = self.span();
        match self.peek().clone() {
            TokenKind::Int(i) => {
                self.bump();
                Ok((Ratio::from_integer(i), span))
            }
            TokenKind::Dec(text) => {
                self.bump();
                let (int_part, frac_part) = text.split_once('.').unwrap();
                if frac_part.len() > 18 {
                    return Err(Diagnostic::error("probability literal has too many digits", span));
                }
                let scale = 10i64.pow(frac_part.len() as u32);
                let int_val: i64 = int_part.parse().map_err(|_| {
                    Diagnostic::error("probability literal out of range", span)
                })?;
                let frac_val: i64 = frac_part.parse().unwrap_or(0);
                let num = int_val
                    .checked_mul(scale)
                    .and_then(|v| v.checked_add(frac_val))
                    .ok_or_else(|| Diagnostic::error("probability literal out of range", span))?;
                Ok((Ratio::new(num, scale), span))
            }
            other => Err(Diagnostic::error(
                format!("expected a probability literal, found {}", other.describe()),
                span,
            )),
        }
    }

    /// Looks ahead from a `{` for an `@` at brace depth 1, which signals an
    /// enumerated probabilistic assignment.
    fn brace_has_probabilities(&self) -> bool {
        debug_assert_eq!(self.peek(), &TokenKind::LBrace);
        let mut depth = 0usize;
        for tok in &self.tokens[self.pos..] {
            match tok.kind {
                TokenKind::LBrace => depth += 1,
                TokenKind::RBrace => {
                    depth -= 1;
                    if depth == 0 {
                        return false;
                    }
                }
                TokenKind::At if depth == 1 => return true,
                TokenKind::Eof => return false,
                _ => {}
            }
        }
        false
    }

    fn assignment_rhs(&mut self, in_event: bool) -> PResult<AssignRhs> {
        if in_event && self.peek() == &TokenKind::LBrace && self.brace_has_probabilities() {
            let open = self.span();
            self.bump();
            let mut branches = Vec::new();
            loop {
                let expr = self.expr()?;
                self.expect(TokenKind::At, "`@`")?;
                let (prob, _) = self.probability()?;
                branches.push((expr, prob));
                if !self.eat(&TokenKind::Comma) {
                    break;
                }
            }
            self.expect(TokenKind::RBrace, "`}`")?;
            if branches.is_empty() {
                return Err(Diagnostic::error("empty enumerated assignment", open));
            }
            return Ok(AssignRhs::Enumerated(branches));
        }
        let expr = self.expr()?;
        if in_event {
            if let ExprKind::SetLit(elems) = &expr.kind {
                if elems.len() >= 2 {
                    return Ok(AssignRhs::UniformList(elems.clone()));
                }
            }
        }
        Ok(AssignRhs::Deterministic(expr))
    }

    // ---- types -----------------------------------------------------------

    fn type_expr(&mut self) -> PResult<TypeExpr> {
        let lhs = self.type_atom()?;
        if self.peek() == &TokenKind::Star {
            let span = self.span();
            self.bump();
            let rhs = self.type_atom()?;
            return Ok(TypeExpr { kind: TypeKind::Prod(Box::new(lhs), Box::new(rhs)), span });
        }
        Ok(lhs)
    }

    fn type_atom(&mut self) -> PResult<TypeExpr> {
        let span = self.span();
        match self.peek().clone() {
            TokenKind::LParen => {
                self.bump();
                let inner = self.type_expr()?;
                self.expect(TokenKind::RParen, "`)`")?;
                Ok(inner)
            }
            TokenKind::Ident(name) => match name.as_str() {
                "Nat" => {
                    self.bump();
                    Ok(TypeExpr { kind: TypeKind::Nat, span })
                }
                "Int" => {
                    self.bump();
                    Ok(TypeExpr { kind: TypeKind::Int, span })
                }
                "Bool" | "BOOL" => {
                    self.bump();
                    Ok(TypeExpr { kind: TypeKind::Bool, span })
                }
                "POW" => {
                    self.bump();
                    self.expect(TokenKind::LParen, "`(`")?;
                    let inner = self.type_expr()?;
                    self.expect(TokenKind::RParen, "`)`")?;
                    Ok(TypeExpr { kind: TypeKind::Pow(Box::new(inner)), span })
                }
                _ if RESERVED.contains(&name.as_str()) => Err(Diagnostic::error(
                    format!("reserved word `{name}` is not a type"),
                    span,
                )),
                _ => {
                    self.bump();
                    Ok(TypeExpr { kind: TypeKind::Named(name), span })
                }
            },
            other => Err(Diagnostic::error(
                format!("expected a type, found {}", other.describe()),
                span,
            )),
        }
    }

    // ---- sections ---------------------------------------------------------

    fn context(&mut self) -> PResult<Context> {
        self.expect_kw("CONTEXT")?;
        let name = self.ident("context")?;
        let mut sets = Vec::new();
        let mut constants = Vec::new();
        let mut seen_sets = false;
        let mut seen_constants = false;
        loop {
            if self.eat_kw("END") {
                break;
            }
            if self.at_kw("SETS") {
                if seen_sets {
                    return Err(Diagnostic::error("duplicate SETS section", self.span()));
                }
                seen_sets = true;
                self.bump();
                while !self.at_any_section_kw() {
                    sets.push(self.set_decl()?);
                }
            } else if self.at_kw("CONSTANTS") {
                if seen_constants {
                    return Err(Diagnostic::error("duplicate CONSTANTS section", self.span()));
                }
                seen_constants = true;
                self.bump();
                while !self.at_any_section_kw() {
                    constants.push(self.const_decl()?);
                }
            } else {
                return Err(Diagnostic::error(
                    format!(
                        "expected SETS, CONSTANTS or END in context, found {}",
                        self.peek().describe()
                    ),
                    self.span(),
                ));
            }
        }
        Ok(Context { name, sets, constants })
    }

    fn set_decl(&mut self) -> PResult<SetDecl> {
        let name = self.ident("deferred set")?;
        self.expect(TokenKind::Colon, "`:`")?;
        if self.eat(&TokenKind::LBrace) {
            let mut elems = vec![self.ident("set element")?];
            while self.eat(&TokenKind::Comma) {
                elems.push(self.ident("set element")?);
            }
            self.expect(TokenKind::RBrace, "`}`")?;
            return Ok(SetDecl { name, def: SetDef::Elems(elems) });
        }
        let span = self.span();
        match self.peek() {
            TokenKind::Int(n) if *n >= 1 => {
                let n = *n as u32;
                self.bump();
                Ok(SetDecl { name, def: SetDef::Card(n) })
            }
            _ => Err(Diagnostic::error(
                "expected `{elements}` or a positive cardinality",
                span,
            )),
        }
    }

    fn const_decl(&mut self) -> PResult<ConstDecl> {
        let name = self.ident("constant")?;
        self.expect(TokenKind::Colon, "`:`")?;
        let ty = self.type_expr()?;
        self.expect(TokenKind::Assign, "`:=`")?;
        let init = self.expr()?;
        Ok(ConstDecl { name, ty, init })
    }

    fn machine(&mut self) -> PResult<Machine> {
        self.expect_kw("MACHINE")?;
        let name = self.ident("machine")?;
        self.expect_kw("SEES")?;
        let sees = self.ident("context")?;
        let mut variables = Vec::new();
        let mut invariants = Vec::new();
        let mut init = Vec::new();
        let mut events = Vec::new();
        let mut properties = Vec::new();
        let mut seen: Vec<&str> = Vec::new();
        loop {
            if self.eat_kw("END") {
                break;
            }
            let section = match self.peek() {
                TokenKind::Ident(s) if SECTION_KEYWORDS.contains(&s.as_str()) => s.clone(),
                other => {
                    return Err(Diagnostic::error(
                        format!("expected a machine section or END, found {}", other.describe()),
                        self.span(),
                    ));
                }
            };
            if section != "EVENT" && seen.iter().any(|s| **s == section) {
                return Err(Diagnostic::error(
                    format!("duplicate {section} section"),
                    self.span(),
                ));
            }
            match section.as_str() {
                "VARIABLES" => {
                    seen.push("VARIABLES");
                    self.bump();
                    while !self.at_any_section_kw() {
                        variables.push(self.ident("variable")?);
                    }
                }
                "INVARIANTS" => {
                    seen.push("INVARIANTS");
                    self.bump();
                    while !self.at_any_section_kw() {
                        let var = self.ident("variable")?;
                        self.expect(TokenKind::Colon, "`:`")?;
                        let ty = self.type_expr()?;
                        invariants.push((var, ty));
                    }
                }
                "INITIALISATION" => {
                    seen.push("INITIALISATION");
                    self.bump();
                    while !self.at_any_section_kw() {
                        let var = self.ident("variable")?;
                        self.expect(TokenKind::Assign, "`:=`")?;
                        init.push((var, self.expr()?));
                    }
                }
                "EVENT" => {
                    events.push(self.event()?);
                }
                "PROPERTIES" => {
                    seen.push("PROPERTIES");
                    self.bump();
                    while !self.at_any_section_kw() {
                        let name = self.ident("property")?;
                        self.expect(TokenKind::Assign, "`:=`")?;
                        properties.push((name, self.expr()?));
                    }
                }
                other => {
                    return Err(Diagnostic::error(
                        format!("section {other} is not allowed in a machine"),
                        self.span(),
                    ));
                }
            }
        }
        Ok(Machine { name, sees, variables, invariants, init, events, properties })
    }

    fn event(&mut self) -> PResult<Event> {
        self.expect_kw("EVENT")?;
        let name = self.ident("event")?;
        let weight = if self.eat_kw("WEIGHT") {
            self.expr()?
        } else {
            Expr { kind: ExprKind::Int(1), span: SourceSpan::synthetic(name.span.file) }
        };
        let mut params = Vec::new();
        if self.eat_kw("ANY") {
            loop {
                let p = self.ident("parameter")?;
                self.expect(TokenKind::Colon, "`:`")?;
                self.expect_kw("in")?;
                let domain = self.expr()?;
                params.push((p, domain));
                if self.at_kw("WHERE") || self.at_kw("THEN") {
                    break;
                }
            }
        }
        let guard = if self.eat_kw("WHERE") {
            self.expr()?
        } else {
            Expr { kind: ExprKind::Bool(true), span: SourceSpan::synthetic(name.span.file) }
        };
        self.expect_kw("THEN")?;
        let mut actions = Vec::new();
        while !self.at_kw("END") {
            let target = self.ident("assignment target")?;
            let rhs = if self.eat(&TokenKind::Assign) {
                self.assignment_rhs(true)?
            } else if self.eat(&TokenKind::Colon) {
                self.expect_kw("in")?;
                AssignRhs::UniformSet(self.expr()?)
            } else {
                return Err(Diagnostic::error(
                    format!("expected `:=` or `:in`, found {}", self.peek().describe()),
                    self.span(),
                ));
            };
            actions.push(Assignment { target, rhs });
        }
        self.expect_kw("END")?;
        if actions.is_empty() {
            return Err(Diagnostic::error(
                format!("event `{}` has no assignments", name.name),
                name.span,
            ));
        }
        Ok(Event { name, weight, params, guard, actions })
    }
}

/// Parses all top-level units (contexts and machines) of one source file.
pub fn parse_units(source: &str, file: FileId) -> Result<Vec<Unit>, Diagnostic> {
    let tokens = tokenize(source, file)?;
    let mut parser = Parser { tokens, pos: 0 };
    let mut units = Vec::new();
    loop {
        if parser.peek() == &TokenKind::Eof {
            break;
        }
        if parser.at_kw("CONTEXT") {
            units.push(Unit::Context(parser.context()?));
        } else if parser.at_kw("MACHINE") {
            units.push(Unit::Machine(parser.machine()?));
        } else {
            return Err(Diagnostic::error(
                format!("expected CONTEXT or MACHINE, found {}", parser.peek().describe()),
                parser.span(),
            ));
        }
    }
    if units.is_empty() {
        return Err(Diagnostic::error(
            "expected CONTEXT or MACHINE",
            SourceSpan::new(file, 1, 1, 0),
        ));
    }
    Ok(units)
}

/// Combines parsed units into one model: exactly one machine, seeing exactly
/// one of the parsed contexts.
pub fn link_units(units: Vec<Unit>) -> Result<Model, Vec<Diagnostic>> {
    let mut contexts = Vec::new();
    let mut machines = Vec::new();
    for u in units {
        match u {
            Unit::Context(c) => contexts.push(c),
            Unit::Machine(m) => machines.push(m),
        }
    }
    let mut errors = Vec::new();
    if machines.len() != 1 {
        let span = machines
            .get(1)
            .map(|m| m.name.span)
            .unwrap_or(SourceSpan::new(FileId::MAIN, 1, 1, 0));
        errors.push(Diagnostic::error(
            format!("expected exactly one machine, found {}", machines.len()),
            span,
        ));
        return Err(errors);
    }
    let machine = machines.pop().unwrap();
    let seen = machine.sees.name.clone();
    let context = match contexts.iter().position(|c| c.name.name == seen) {
        Some(i) => contexts.swap_remove(i),
        None => {
            errors.push(Diagnostic::error(
                format!("machine `{}` sees unknown context `{seen}`", machine.name.name),
                machine.sees.span,
            ));
            return Err(errors);
        }
    };
    Ok(Model { context, machine })
}

/// Parses a combined source file into a model.
pub fn parse_model(source: &str) -> Result<Model, Vec<Diagnostic>> {
    let units = parse_units(source, FileId::MAIN).map_err(|d| vec![d])?;
    link_units(units)
}

/// Parses a standalone expression (used for ad-hoc queries).
pub fn parse_expression(source: &str, file: FileId) -> Result<Expr, Diagnostic> {
    let tokens = tokenize(source, file)?;
    let mut parser = Parser { tokens, pos: 0 };
    let expr = parser.expr()?;
    if parser.peek() != &TokenKind::Eof {
        return Err(Diagnostic::error(
            format!("unexpected {} after expression", parser.peek().describe()),
            parser.span(),
        ));
    }
    Ok(expr)
}
