//! Model loading: reads one or more `.peb` files (a machine plus the context
//! it sees, combined or split across files), parses, links, checks, and
//! resolves query strings against PROPERTIES or as ad-hoc expressions.

use peb_core::ast::{Expr, Model, Unit};
use peb_core::check::check_model_with_queries;
use peb_core::diag::{Diagnostic, FileId};
use peb_core::ir::{CExpr, CompiledModel};
use peb_core::parse::{link_units, parse_expression, parse_units};
use peb_core::query::{infer_query_kind, Query, QueryKind};
use std::path::{Path, PathBuf};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum LoadError {
    #[error("cannot read `{path}`: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{}", render_all(.diagnostics, .files))]
    Diagnostics { diagnostics: Vec<Diagnostic>, files: Vec<PathBuf> },
    #[error("{0}")]
    Query(String),
}

fn render_all(diags: &[Diagnostic], files: &[PathBuf]) -> String {
    diags
        .iter()
        .map(|d| render_diagnostic(d, files))
        .collect::<Vec<_>>()
        .join("\n")
}

pub fn render_diagnostic(d: &Diagnostic, files: &[PathBuf]) -> String {
    let path = files
        .get(d.span.file.0 as usize)
        .map(|p| p.display().to_string())
        .unwrap_or_else(|| "<query>".to_string());
    format!("{path}:{}:{}: {}: {}", d.span.line, d.span.col, d.severity, d.message)
}

/// A loaded, checked model together with its sources.
pub struct Loaded {
    pub model: CompiledModel,
    pub ast: Model,
    pub warnings: Vec<Diagnostic>,
    pub files: Vec<PathBuf>,
}

/// File id used for ad-hoc query expressions in diagnostics.
pub const QUERY_FILE: FileId = FileId(u16::MAX);

/// Loads and checks a model; `queries` are resolved as property names first
/// and parsed as expressions otherwise. Returns the compiled query
/// expressions in input order.
pub fn load(paths: &[PathBuf], queries: &[&str]) -> Result<(Loaded, Vec<CExpr>), LoadError> {
    let mut units: Vec<Unit> = Vec::new();
    for (i, path) in paths.iter().enumerate() {
        let text = std::fs::read_to_string(path)
            .map_err(|source| LoadError::Io { path: path.clone(), source })?;
        let parsed = parse_units(&text, FileId(i as u16)).map_err(|d| LoadError::Diagnostics {
            diagnostics: vec![d],
            files: paths.to_vec(),
        })?;
        units.extend(parsed);
    }
    let ast = link_units(units).map_err(|diagnostics| LoadError::Diagnostics {
        diagnostics,
        files: paths.to_vec(),
    })?;

    // property names resolve to their declared expression; anything else
    // must parse as a standalone expression
    enum Resolved {
        Property(String),
        AdHoc(usize),
    }
    let mut adhoc: Vec<Expr> = Vec::new();
    let mut resolved: Vec<Resolved> = Vec::new();
    for q in queries {
        if ast.machine.properties.iter().any(|(name, _)| name.name == *q) {
            resolved.push(Resolved::Property((*q).to_string()));
        } else {
            let expr = parse_expression(q, QUERY_FILE).map_err(|d| {
                LoadError::Query(format!("query `{q}`: {}: {}", d.span, d.message))
            })?;
            resolved.push(Resolved::AdHoc(adhoc.len()));
            adhoc.push(expr);
        }
    }

    let outcome = check_model_with_queries(&ast, &adhoc).map_err(|diagnostics| {
        LoadError::Diagnostics { diagnostics, files: paths.to_vec() }
    })?;
    let compiled_queries = resolved
        .into_iter()
        .map(|r| match r {
            Resolved::Property(name) => outcome.model.property(&name).unwrap().clone(),
            Resolved::AdHoc(i) => outcome.queries[i].clone(),
        })
        .collect();
    Ok((
        Loaded {
            model: outcome.model,
            ast,
            warnings: outcome.warnings,
            files: paths.to_vec(),
        },
        compiled_queries,
    ))
}

/// Turns a compiled query expression into a [`Query`], inferring probability
/// vs expectation from the expression's kind. `within` switches to bounded
/// reachability and requires a boolean expression.
pub fn build_query(
    model: &CompiledModel,
    expr: CExpr,
    raw: &str,
    within: Option<u64>,
) -> Result<Query, LoadError> {
    let kind = infer_query_kind(model, &expr);
    match (within, kind) {
        (Some(k), Some(QueryKind::Boolean)) => Ok(Query::ProbReachWithin(expr, k)),
        (Some(_), _) => Err(LoadError::Query(format!(
            "query `{raw}`: --within needs a boolean predicate"
        ))),
        (None, Some(QueryKind::Boolean)) => Ok(Query::ProbAtEnd(expr)),
        (None, Some(QueryKind::Numeric)) => Ok(Query::ExpectedAtEnd(expr)),
        (None, None) => Err(LoadError::Query(format!(
            "query `{raw}`: cannot infer whether this is a probability or an expectation; use a boolean or integer expression"
        ))),
    }
}

/// Convenience for tests: load a model plus one query from in-repo paths.
pub fn load_one<P: AsRef<Path>>(
    path: P,
    query: &str,
) -> Result<(Loaded, CExpr), LoadError> {
    let (loaded, mut qs) = load(&[path.as_ref().to_path_buf()], &[query])?;
    Ok((loaded, qs.pop().unwrap()))
}
