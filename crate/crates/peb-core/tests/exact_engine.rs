//! Exact DTMC enumeration and query oracles.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{ToPrimitive, Zero};
use peb_core::check::{check_model, check_model_with_queries};
use peb_core::diag::FileId;
use peb_core::exact::*;
use peb_core::ir::{CompiledModel, EventId};
use peb_core::parse::{parse_expression, parse_model};
use peb_core::query::{run_query, Query};
use peb_core::semantics::MachineState;
use peb_core::sim::RunConfig;
use peb_core::value::Value;

const GEAR: &str = include_str!("../../../models/gear.peb");
const P2P11: &str = include_str!("../../../models/p2p_n1_k1.peb");
const P2P22: &str = include_str!("../../../models/p2p_n2_k2.peb");

fn compile(src: &str) -> CompiledModel {
    check_model(&parse_model(src).unwrap()).unwrap()
}

fn compile_query(src: &str, expr: &str) -> (CompiledModel, peb_core::ir::CExpr) {
    let model = parse_model(src).unwrap();
    let parsed = parse_expression(expr, FileId::MAIN).unwrap();
    let out = check_model_with_queries(&model, &[parsed]).unwrap();
    (out.model, out.queries.into_iter().next().unwrap())
}

fn ratio(n: i64, d: i64) -> BigRational {
    BigRational::new(BigInt::from(n), BigInt::from(d))
}

/// Independent hand enumeration of the one-client one-block chain, with the
/// transmission counter abstracted away:
///
/// ```text
/// s0 = {0 |-> emp}           --sent 1-->            s1
/// s1 = {0 |-> downloading}   --receive 1/2-->       s2
///                            --fail 3/10 (keep)-->  s1
///                            --fail 1/5 (revert)--> s0
/// s2 = {0 |-> ok}            deadlock
/// ```
#[test]
fn p2p_one_block_chain_matches_the_hand_enumeration() {
    let model = compile(P2P11);
    let accs = accumulators(&model);
    assert_eq!(accs.len(), 1, "n is the only accumulator");
    let n_var = accs[0].var;
    assert_eq!(model.var_names[n_var as usize], "n");

    let dtmc = build_dtmc_abstracting(&model, &[n_var], 1_000, None).unwrap();
    let sym = |s: &str| Value::Sym(model.symbols.resolve(s).unwrap());
    let file = |state: &str| {
        let pair = Value::Pair(
            Value::Int(0).as_scalar().unwrap(),
            sym(state).as_scalar().unwrap(),
        );
        peb_core::value::canonical_set(vec![pair]).unwrap()
    };
    let file_var = model.var_id("file").unwrap() as usize;
    let mk = |state: &str| {
        let mut vals = model.initial.clone();
        vals[file_var] = file(state);
        MachineState::new(vals)
    };
    assert_eq!(dtmc.states, vec![mk("emp"), mk("downloading"), mk("ok")]);
    assert_eq!(dtmc.deadlock, vec![false, false, true]);

    let sent = 0 as EventId;
    let receive = 1 as EventId;
    let fail = 2 as EventId;
    assert_eq!(dtmc.transitions[0], vec![(sent, 1, ratio(1, 1))]);
    assert_eq!(
        dtmc.transitions[1],
        vec![(receive, 2, ratio(1, 2)), (fail, 0, ratio(1, 5)), (fail, 1, ratio(3, 10))]
    );
    assert_eq!(dtmc.transitions[2], vec![]);
}

#[test]
fn p2p_one_block_expected_transmissions_is_seven_fifths() {
    // first-step analysis on the chain above gives E[sent firings] = 7/5
    let (model, n) = compile_query(P2P11, "n");
    let q = Query::ExpectedAtEnd(n);
    let analysis = exact_query(&model, &q, &ExactOptions::default()).unwrap();
    assert_eq!(analysis.value, ratio(7, 5));
    assert_eq!(analysis.abstracted, vec!["n".to_string()]);
}

#[test]
fn p2p_one_block_exact_agrees_with_forward_simulation() {
    let (model, n) = compile_query(P2P11, "n");
    let q = Query::ExpectedAtEnd(n);
    let exact = exact_query(&model, &q, &ExactOptions::default())
        .unwrap()
        .value
        .to_f64()
        .unwrap();
    let runs = 1_000_000u64;
    let mut sum = 0.0;
    let mut sumsq = 0.0;
    for i in 0..runs {
        let seed = peb_core::sim::derive_run_seed(2024, i);
        let out = run_query(&model, &RunConfig::new(seed, 100_000), &q).unwrap();
        sum += out.value;
        sumsq += out.value * out.value;
    }
    let mean = sum / runs as f64;
    let var = (sumsq - runs as f64 * mean * mean) / (runs as f64 - 1.0);
    let se = (var / runs as f64).sqrt();
    assert!(
        (mean - exact).abs() <= 3.0 * se,
        "simulation mean {mean} vs exact {exact} (3 se = {})",
        3.0 * se
    );
}

#[test]
fn gear_door_open_probability_at_end_is_exactly_zero() {
    let (model, door_open) = compile_query(GEAR, "door = open");
    let q = Query::ProbAtEnd(door_open);
    let analysis = exact_query(&model, &q, &ExactOptions::default()).unwrap();
    assert!(analysis.value.is_zero());
}

#[test]
fn gear_retracted_probability_is_near_half() {
    let (model, retracted) = compile_query(GEAR, "gear = retracted");
    let q = Query::ProbAtEnd(retracted);
    let analysis = exact_query(&model, &q, &ExactOptions::default()).unwrap();
    let p = analysis.value.to_f64().unwrap();
    assert!((0.4..0.6).contains(&p), "P(gear=retracted at end) = {p}");
}

#[test]
fn two_state_chain_reaches_its_target_in_one_step() {
    let src = "CONTEXT C END
MACHINE M SEES C
VARIABLES x INVARIANTS x : Nat INITIALISATION x := 0
EVENT advance WHERE x = 0 THEN x := 1 END
END";
    let (model, at_s1) = compile_query(src, "x = 1");
    let q = Query::ProbReachWithin(at_s1, 1);
    let analysis = exact_query(&model, &q, &ExactOptions::default()).unwrap();
    assert_eq!(analysis.value, ratio(1, 1));

    let (model, at_s1) = compile_query(src, "x = 1");
    let q = Query::ProbReachWithin(at_s1, 0);
    let analysis = exact_query(&model, &q, &ExactOptions::default()).unwrap();
    assert!(analysis.value.is_zero());
}

#[test]
fn immediately_blocked_machine_has_one_state_and_no_transitions() {
    let src = "CONTEXT C END
MACHINE M SEES C
VARIABLES x INVARIANTS x : Nat INITIALISATION x := 1
EVENT stuck WHERE x = 0 THEN x := 1 END
END";
    let model = compile(src);
    let dtmc = build_dtmc(&model, 10).unwrap();
    assert_eq!(dtmc.num_states(), 1);
    assert_eq!(dtmc.num_transitions(), 0);
    assert_eq!(dtmc.deadlock, vec![true]);
}

#[test]
fn state_bound_aborts_enumeration() {
    let model = compile(P2P22);
    // the full chain is infinite in n, so any bound must trip
    let err = build_dtmc(&model, 500).unwrap_err();
    assert!(matches!(err, BuildError::StateBound { limit: 500 }));
}

#[test]
fn outgoing_masses_sum_to_one_and_marginalization_preserves_mass() {
    let model = compile(GEAR);
    let dtmc = build_dtmc(&model, 10_000).unwrap();
    for (i, outs) in dtmc.transitions.iter().enumerate() {
        if dtmc.deadlock[i] {
            assert!(outs.is_empty());
            continue;
        }
        let total: BigRational = outs.iter().map(|(_, _, p)| p.clone()).sum();
        assert_eq!(total, ratio(1, 1), "state {i}");
        // marginalizing events loses no mass
        let mut by_target = std::collections::BTreeMap::new();
        for (_, t, p) in outs {
            *by_target.entry(*t).or_insert_with(BigRational::zero) += p;
        }
        let total: BigRational = by_target.values().cloned().sum();
        assert_eq!(total, ratio(1, 1));
    }
}

#[test]
fn gear_chain_is_reasonably_small_and_deterministic() {
    let model = compile(GEAR);
    let a = build_dtmc(&model, 10_000).unwrap();
    let b = build_dtmc(&model, 10_000).unwrap();
    assert_eq!(a.states, b.states);
    assert!(a.num_states() <= 80, "gear should stay small, got {}", a.num_states());
}

#[test]
fn chains_without_absorption_need_a_horizon() {
    let src = "CONTEXT C END
MACHINE M SEES C
VARIABLES x INVARIANTS x : Nat INITIALISATION x := 0
EVENT flip THEN x := 1 - x END
END";
    let (model, q) = compile_query(src, "x = 1");
    let err = exact_query(&model, &Query::ProbAtEnd(q), &ExactOptions::default()).unwrap_err();
    assert!(matches!(err, ExactError::NoAbsorption));

    // with a horizon the transient distribution is well-defined: after 3
    // steps the chain is deterministically at x=1
    let (model, q) = compile_query(src, "x = 1");
    let opts = ExactOptions { horizon: Some(3), ..Default::default() };
    let analysis = exact_query(&model, &Query::ProbAtEnd(q), &opts).unwrap();
    assert_eq!(analysis.value, ratio(1, 1));
}
