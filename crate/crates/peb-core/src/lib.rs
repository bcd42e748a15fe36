//! Core semantics for probabilistic Event-B machines.
//!
//! The crate is organised as a pipeline:
//!
//! * [`parse`] turns `.peb` source text into a surface [`ast::Model`];
//! * [`check`] resolves identifiers, runs the well-formedness checks
//!   (including the two DTMC obligations) and compiles the model into the
//!   slot-indexed [`ir::CompiledModel`];
//! * [`eval`] evaluates compiled set/arithmetic/boolean expressions;
//! * [`semantics`] implements the probabilistic labelled transition system:
//!   enabledness, parameter valuations and the exact-rational transition
//!   distribution of a state;
//! * [`sim`] runs seeded Monte-Carlo executions;
//! * [`exact`] enumerates the reachable DTMC and answers queries exactly;
//! * [`query`] defines the quantitative queries shared by simulation-based
//!   and exact analysis.
//!
//! The crate is `no_std` (with `alloc`); everything that needs an operating
//! system (files, threads, confidence-interval statistics, the CLI) lives in
//! the companion `pebc` crate.

#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod ast;
pub mod check;
pub mod diag;
pub mod eval;
pub mod exact;
pub mod ir;
pub mod lex;
pub mod parse;
pub mod pretty;
pub mod query;
pub mod semantics;
pub mod sim;
pub mod value;

pub use num_bigint::BigInt;
pub use num_rational::BigRational;
