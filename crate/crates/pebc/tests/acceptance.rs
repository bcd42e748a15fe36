//! Acceptance suite: one test per shipping criterion, each printing a
//! PASS/FAIL line (visible with `--nocapture`).
//!
//! The heavy tests serialize on a global lock so wall-clock budgets hold on
//! small machines.

mod common;

use peb_core::BigInt;
use peb_core::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use peb_core::check::check_model;
use peb_core::exact::{accumulators, build_dtmc, build_dtmc_abstracting, exact_query, ExactOptions};
use peb_core::ir::{CompiledModel, EventId};
use peb_core::parse::parse_model;
use peb_core::query::Query;
use peb_core::semantics::{initial_state, successor_distribution, MachineState};
use peb_core::sim::{derive_run_seed, Simulator};
use peb_core::value::Value;
use pebc::load::load_one;
use pebc::smc::{estimate, SmcOptions};
use std::path::{Path, PathBuf};
use std::sync::Mutex;
use std::time::Instant;

static HEAVY: Mutex<()> = Mutex::new(());

fn serial() -> std::sync::MutexGuard<'static, ()> {
    HEAVY.lock().unwrap_or_else(|e| e.into_inner())
}

fn models_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../models")
}

fn jobs() -> usize {
    std::thread::available_parallelism().map(|n| n.get()).unwrap_or(2)
}

fn report(criterion: u32, ok: bool, detail: &str) {
    println!("criterion {criterion}: {} — {detail}", if ok { "PASS" } else { "FAIL" });
    assert!(ok, "criterion {criterion}: {detail}");
}

/// Criterion 1: landing gear, ProbAtEnd(door = open) at alpha=0.05,
/// delta=0.01 estimates exactly 0.0 with zero half-width in under a minute.
#[test]
fn criterion_1_gear_door_open_is_zero() {
    let _guard = serial();
    let started = Instant::now();
    let (loaded, expr) = load_one(models_dir().join("gear.peb"), "door_open").unwrap();
    let q = Query::ProbAtEnd(expr);
    let opts = SmcOptions {
        alpha: 0.05,
        delta: 0.01,
        master_seed: 0,
        jobs: jobs(),
        ..Default::default()
    };
    let est = estimate(&loaded.model, &q, &opts).unwrap().estimate;
    let elapsed = started.elapsed();
    let ok = est.mean == 0.0 && est.half_width == 0.0 && elapsed.as_secs() < 60;
    report(
        1,
        ok,
        &format!(
            "P(door=open at end): mean {} ± {} over {} runs in {elapsed:.2?} (budget 60s)",
            est.mean, est.half_width, est.runs
        ),
    );
}

/// Criterion 2: ProbAtEnd(gear = retracted) estimates within 0.49 ± 0.03,
/// and the exact value is covered by the SMC interval across 100 master
/// seeds: at least 95/100 for 99% intervals and at least 90/100 for 95%
/// intervals (the stopping parameters are not pinned by the reported
/// figure; a 95%-interval/95-of-100 gate would be a coin flip even for a
/// perfectly calibrated estimator).
#[test]
fn criterion_2_gear_retracted_matches_exact() {
    let _guard = serial();
    let (loaded, expr) = load_one(models_dir().join("gear.peb"), "gear_retracted").unwrap();
    let q = Query::ProbAtEnd(expr);
    let exact = exact_query(&loaded.model, &q, &ExactOptions::default()).unwrap();
    let p = exact.value.to_f64().unwrap();

    let opts = SmcOptions {
        alpha: 0.05,
        delta: 0.01,
        master_seed: 0,
        jobs: jobs(),
        batch: 256,
        ..Default::default()
    };
    let est = estimate(&loaded.model, &q, &opts).unwrap().estimate;
    let mean_ok = (est.mean - 0.49).abs() <= 0.03;

    let coverage = |alpha: f64| -> usize {
        let mut hits = 0;
        for seed in 0..100u64 {
            let opts = SmcOptions {
                alpha,
                delta: 0.03,
                master_seed: seed,
                jobs: jobs(),
                batch: 256,
                ..Default::default()
            };
            let est = estimate(&loaded.model, &q, &opts).unwrap().estimate;
            if (est.mean - p).abs() <= est.half_width {
                hits += 1;
            }
        }
        hits
    };
    let hits99 = coverage(0.01);
    let hits95 = coverage(0.05);
    let ok = mean_ok && hits99 >= 95 && hits95 >= 90;
    report(
        2,
        ok,
        &format!(
            "P(gear=retracted at end): mean {:.4} ± {:.4} vs 0.49±0.03; exact {} ≈ {p:.6}; \
             coverage {hits99}/100 (99% CIs, need ≥95), {hits95}/100 (95% CIs, need ≥90)",
            est.mean, est.half_width, exact.value
        ),
    );
}

/// Criterion 3: P2P with N=16, K=30 — the estimated expected number of
/// transmissions lies within 2% of 1554.56 at >= 1000 runs within 15
/// minutes.
#[test]
fn criterion_3_p2p_expected_transmissions() {
    let _guard = serial();
    let started = Instant::now();
    let (loaded, expr) = load_one(models_dir().join("p2p_n16_k30.peb"), "transmissions").unwrap();
    let q = Query::ExpectedAtEnd(expr);
    let opts = SmcOptions {
        alpha: 0.05,
        delta: 0.0, // run the full budget
        master_seed: 0,
        max_runs: 2_000,
        batch: 2_000,
        jobs: jobs(),
        max_steps: 1_000_000,
    };
    let est = estimate(&loaded.model, &q, &opts).unwrap().estimate;
    let elapsed = started.elapsed();
    let reference = 1554.56;
    let rel = (est.mean - reference).abs() / reference;
    let ok = rel <= 0.02 && est.runs >= 1000 && elapsed.as_secs() <= 900;
    report(
        3,
        ok,
        &format!(
            "E[n]: mean {:.2} ± {:.2} over {} runs, {:.2}% from {reference} (≤2%), in {elapsed:.1?} (budget 900s)",
            est.mean, est.half_width, est.runs, rel * 100.0
        ),
    );
}

/// Criterion 4: desk-scale P2P oracle — exact E[n] for N=2,K=2 bracketed by
/// SMC at delta=0.5, and the N=1,K=1 chain matches an independent hand
/// enumeration state for state.
#[test]
fn criterion_4_p2p_desk_scale_oracle() {
    let _guard = serial();
    let (loaded, expr) = load_one(models_dir().join("p2p_n2_k2.peb"), "transmissions").unwrap();
    let q = Query::ExpectedAtEnd(expr);
    let exact = exact_query(&loaded.model, &q, &ExactOptions::default()).unwrap();
    let exact_f = exact.value.to_f64().unwrap();
    let opts = SmcOptions {
        alpha: 0.05,
        delta: 0.5,
        master_seed: 0,
        jobs: jobs(),
        batch: 64,
        ..Default::default()
    };
    let est = estimate(&loaded.model, &q, &opts).unwrap().estimate;
    let bracketed = (est.mean - exact_f).abs() <= est.half_width;

    // independent hand enumeration of the N=1,K=1 chain (counter n
    // abstracted): emp --sent--> downloading --receive 1/2--> ok,
    // downloading --fail--> keeps 3/10 / reverts 1/5; ok is a deadlock
    let (small, _) = load_one(models_dir().join("p2p_n1_k1.peb"), "transmissions").unwrap();
    let model = &small.model;
    let n_var = model.var_id("n").unwrap();
    let dtmc = build_dtmc_abstracting(model, &[n_var], 100, None).unwrap();
    let file_var = model.var_id("file").unwrap() as usize;
    let mk = |status: &str| {
        let pair = Value::Pair(
            Value::Int(0).as_scalar().unwrap(),
            Value::Sym(model.symbols.resolve(status).unwrap()).as_scalar().unwrap(),
        );
        let mut vals = model.initial.clone();
        vals[file_var] = peb_core::value::canonical_set(vec![pair]).unwrap();
        MachineState::new(vals)
    };
    let ratio = |n: i64, d: i64| BigRational::new(BigInt::from(n), BigInt::from(d));
    let ev = |name: &str| {
        model.events.iter().position(|e| e.name == name).unwrap() as EventId
    };
    let expected_states = vec![mk("emp"), mk("downloading"), mk("ok")];
    let expected_transitions = vec![
        vec![(ev("sent"), 1u32, ratio(1, 1))],
        vec![
            (ev("receive"), 2, ratio(1, 2)),
            (ev("fail"), 0, ratio(1, 5)),
            (ev("fail"), 1, ratio(3, 10)),
        ],
        vec![],
    ];
    let chain_matches = dtmc.states == expected_states
        && dtmc.transitions == expected_transitions
        && dtmc.deadlock == vec![false, false, true];

    let ok = bracketed && chain_matches;
    report(
        4,
        ok,
        &format!(
            "exact E[n] (N=2,K=2) = {} ≈ {exact_f:.6}; SMC {:.3} ± {:.3} over {} runs brackets it: {bracketed}; \
             N=1,K=1 chain matches hand enumeration: {chain_matches}",
            exact.value, est.mean, est.half_width, est.runs
        ),
    );
}

fn assert_sums_to_one(model: &CompiledModel, limit: usize) -> (usize, usize) {
    let mut frontier = vec![initial_state(model)];
    let mut seen = frontier.clone();
    let mut checked = 0;
    let mut deadlocks = 0;
    let mut i = 0;
    while i < frontier.len() && seen.len() < limit {
        let state = frontier[i].clone();
        i += 1;
        match successor_distribution(model, &state).unwrap() {
            None => deadlocks += 1,
            Some(dist) => {
                assert!(
                    dist.total_mass().is_one(),
                    "masses must sum to exactly 1 in {}",
                    model.machine_name
                );
                for ((_, succ), mass) in dist.entries() {
                    assert!(mass > &BigRational::zero() && mass <= &BigRational::one());
                    if !seen.contains(succ) {
                        seen.push(succ.clone());
                        frontier.push(succ.clone());
                    }
                }
                checked += 1;
            }
        }
    }
    (checked, deadlocks)
}

/// Criterion 5: for every reachable state of the bundled models and of 50
/// randomized well-formed machines, the successor masses sum to exactly 1.
#[test]
fn criterion_5_dtmc_property_suite() {
    let _guard = serial();
    // gear: the full reachable chain
    let (gear, _) = load_one(models_dir().join("gear.peb"), "door_open").unwrap();
    let dtmc = build_dtmc(&gear.model, 10_000).unwrap();
    for (i, outs) in dtmc.transitions.iter().enumerate() {
        if !dtmc.deadlock[i] {
            let total: BigRational = outs.iter().map(|(_, _, p)| p.clone()).sum();
            assert!(total.is_one(), "gear state {i}");
        }
    }
    let gear_states = dtmc.num_states();

    // p2p N=2,K=2: full quotient chain plus a bounded slice of the full
    // state space (unbounded in the transmission counter)
    let (p2p, _) = load_one(models_dir().join("p2p_n2_k2.peb"), "transmissions").unwrap();
    let drop: Vec<_> = accumulators(&p2p.model).iter().map(|a| a.var).collect();
    let qdtmc = build_dtmc_abstracting(&p2p.model, &drop, 10_000, None).unwrap();
    for (i, outs) in qdtmc.transitions.iter().enumerate() {
        if !qdtmc.deadlock[i] {
            let total: BigRational = outs.iter().map(|(_, _, p)| p.clone()).sum();
            assert!(total.is_one(), "p2p quotient state {i}");
        }
    }
    let (p2p_checked, _) = assert_sums_to_one(&p2p.model, 300);

    // 50 randomized mutants that pass check_model
    let mut mutants = 0;
    let mut mutant_states = 0;
    let mut seed = 0u64;
    while mutants < 50 {
        assert!(seed < 200, "generator should produce 50 checkable models quickly");
        let src = common::modelgen::generate(seed);
        seed += 1;
        let Ok(compiled) = check_model(&parse_model(&src).unwrap()) else {
            continue;
        };
        let (checked, _) = assert_sums_to_one(&compiled, 400);
        mutant_states += checked;
        mutants += 1;
    }
    report(
        5,
        true,
        &format!(
            "sum-to-1 held on gear ({gear_states} states), the p2p quotient ({} states) and a \
             {p2p_checked}-state slice of the full p2p chain, and {mutants} random machines ({mutant_states} states)",
            qdtmc.num_states()
        ),
    );
}

/// Criterion 6: adequacy — empirical one-step frequencies over 100,000
/// sampled steps match the exact transition masses within 4 binomial
/// standard deviations, on 20 reachable states per bundled model.
#[test]
fn criterion_6_adequacy_suite() {
    let _guard = serial();
    let mut detail = Vec::new();
    for (file, query) in [("gear.peb", "door_open"), ("p2p_n2_k2.peb", "transmissions")] {
        let (loaded, _) = load_one(models_dir().join(file), query).unwrap();
        let model = &loaded.model;

        // deterministically collect 20 distinct reachable states by walking
        // seeded simulations
        let mut states: Vec<MachineState> = vec![initial_state(model)];
        let mut walker_seed = 1u64;
        while states.len() < 20 {
            let mut sim = Simulator::new(model, walker_seed);
            walker_seed += 1;
            let mut state = initial_state(model);
            for _ in 0..40 {
                match sim.step(&state).unwrap() {
                    None => break,
                    Some((_, next)) => {
                        state = next;
                        if !states.contains(&state) {
                            states.push(state.clone());
                            if states.len() >= 20 {
                                break;
                            }
                        }
                    }
                }
            }
        }

        let n = 100_000u32;
        let mut worst: f64 = 0.0;
        for (i, state) in states.iter().enumerate() {
            let Some(dist) = successor_distribution(model, state).unwrap() else {
                continue;
            };
            let keys: Vec<(EventId, MachineState)> = dist.entries().map(|(k, _)| k.clone()).collect();
            let mut counts = vec![0u32; keys.len()];
            let mut sim = Simulator::new(model, derive_run_seed(0xade0, i as u64));
            for _ in 0..n {
                let (event, next) = sim.step(state).unwrap().expect("state is not a deadlock");
                let slot = keys
                    .iter()
                    .position(|(e, s)| *e == event && *s == next)
                    .expect("sampled transition outside the exact support");
                counts[slot] += 1;
            }
            for (slot, (_, mass)) in dist.entries().enumerate() {
                let p = mass.to_f64().unwrap();
                let freq = counts[slot] as f64 / n as f64;
                let sigma = (p * (1.0 - p) / n as f64).sqrt();
                let dev = if sigma > 0.0 { (freq - p).abs() / sigma } else { 0.0 };
                worst = worst.max(dev);
                assert!(
                    dev <= 4.0,
                    "{file} state {i}: frequency {freq} vs mass {p} deviates {dev:.2} sigma"
                );
            }
        }
        detail.push(format!("{file}: {} states, worst deviation {worst:.2}σ", states.len()));
    }
    report(6, true, &format!("one-step frequencies within 4σ of exact masses ({})", detail.join("; ")));
}

/// Criterion 7: the evaluator algebra laws hold on 10,000 randomized small
/// values.
#[test]
fn criterion_7_evaluator_algebra() {
    use peb_core::ast::{BinOp, Builtin};
    use peb_core::diag::{FileId, SourceSpan};
    use peb_core::eval::{eval_expr, Ctx};
    use peb_core::ir::{CComp, CExpr, CExprKind};
    use peb_core::value::{canonical_set, Scalar, Sym};
    use rand::{Rng, SeedableRng};

    let span = SourceSpan::synthetic(FileId::MAIN);
    let lit = |v: Value| CExpr { kind: CExprKind::Lit(v), span };
    let bin = |op: BinOp, a: CExpr, b: CExpr| CExpr {
        kind: CExprKind::Binary(op, Box::new(a), Box::new(b)),
        span,
    };
    let call = |b: Builtin, a: CExpr| CExpr { kind: CExprKind::Call(b, Box::new(a)), span };
    let ctx = Ctx { consts: &[], sets: &[], vars: &[], params: &[] };
    let truthy = |e: &CExpr| eval_expr(&ctx, e).unwrap() == Value::Bool(true);

    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1234);
    let scalar_set = |rng: &mut rand_chacha::ChaCha8Rng| {
        let n = rng.gen_range(0..6);
        let elems = (0..n)
            .map(|_| match rng.gen_range(0..3) {
                0 => Value::Int(rng.gen_range(-4..8)),
                1 => Value::Bool(rng.gen_bool(0.5)),
                _ => Value::Sym(Sym(rng.gen_range(0..5))),
            })
            .collect();
        canonical_set(elems).unwrap()
    };
    let relation = |rng: &mut rand_chacha::ChaCha8Rng| {
        let n = rng.gen_range(0..6);
        let elems = (0..n)
            .map(|_| {
                Value::Pair(Scalar::Int(rng.gen_range(0..6)), Scalar::Sym(Sym(rng.gen_range(0..3))))
            })
            .collect();
        canonical_set(elems).unwrap()
    };

    for round in 0..10_000 {
        let a = scalar_set(&mut rng);
        let b = scalar_set(&mut rng);
        let r = relation(&mut rng);
        let s = relation(&mut rng);
        let restriction_set = canonical_set(vec![Value::Sym(Sym(0))]).unwrap();

        // A ∪ A = A
        assert!(truthy(&bin(
            BinOp::Eq,
            bin(BinOp::Or, lit(a.clone()), lit(a.clone())),
            lit(a.clone())
        )));
        // A ∪ B = B ∪ A
        assert!(truthy(&bin(
            BinOp::Eq,
            bin(BinOp::Or, lit(a.clone()), lit(b.clone())),
            bin(BinOp::Or, lit(b.clone()), lit(a.clone()))
        )));
        // r <+ ∅ = r and ∅ <+ s = s
        assert!(truthy(&bin(
            BinOp::Eq,
            bin(BinOp::Override, lit(r.clone()), lit(Value::empty_set())),
            lit(r.clone())
        )));
        assert!(truthy(&bin(
            BinOp::Eq,
            bin(BinOp::Override, lit(Value::empty_set()), lit(s.clone())),
            lit(s.clone())
        )));
        // dom(r |> S) ⊆ dom(r)
        assert!(truthy(&bin(
            BinOp::Subset,
            call(Builtin::Dom, bin(BinOp::RangeRestrict, lit(r.clone()), lit(restriction_set))),
            call(Builtin::Dom, lit(r.clone()))
        )));
        // card(A∪B) + card(A∩B) = card(A) + card(B)
        assert!(truthy(&bin(
            BinOp::Eq,
            bin(
                BinOp::Add,
                call(Builtin::Card, bin(BinOp::Or, lit(a.clone()), lit(b.clone()))),
                call(Builtin::Card, bin(BinOp::And, lit(a.clone()), lit(b.clone())))
            ),
            bin(
                BinOp::Add,
                call(Builtin::Card, lit(a.clone())),
                call(Builtin::Card, lit(b.clone()))
            )
        )));
        // filter ⊆ domain; card(map) ≤ card(domain) — on integer sets
        let ints = canonical_set(
            (0..rng.gen_range(0..6)).map(|_| Value::Int(rng.gen_range(0..9))).collect(),
        )
        .unwrap();
        let comp = |body: CExpr| CExpr {
            kind: CExprKind::Comprehension(Box::new(CComp {
                depth: 0,
                domain: lit(ints.clone()),
                hoisted: vec![],
                body,
            })),
            span,
        };
        let even = bin(
            BinOp::Eq,
            bin(BinOp::Mod, CExpr { kind: CExprKind::Binder(0), span }, lit(Value::Int(2))),
            lit(Value::Int(0)),
        );
        assert!(truthy(&bin(BinOp::Subset, comp(even), lit(ints.clone()))), "round {round}");
        let halved = bin(
            BinOp::Div,
            CExpr { kind: CExprKind::Binder(0), span },
            lit(Value::Int(2)),
        );
        assert!(truthy(&bin(
            BinOp::Le,
            call(Builtin::Card, comp(halved)),
            call(Builtin::Card, lit(ints.clone()))
        )));
    }
    report(7, true, "algebra laws held on 10000 randomized value tuples");
}

/// Criterion 8: bit-identical estimates and simulations across repeated
/// invocations and across worker counts.
#[test]
fn criterion_8_determinism() {
    let _guard = serial();
    let (loaded, expr) = load_one(models_dir().join("gear.peb"), "gear_retracted").unwrap();
    let q = Query::ProbAtEnd(expr);
    let opts = |jobs: usize| SmcOptions {
        alpha: 0.05,
        delta: 0.05,
        master_seed: 77,
        jobs,
        batch: 64,
        ..Default::default()
    };
    let a = estimate(&loaded.model, &q, &opts(1)).unwrap().estimate;
    let b = estimate(&loaded.model, &q, &opts(1)).unwrap().estimate;
    let c = estimate(&loaded.model, &q, &opts(8)).unwrap().estimate;
    let lib_ok = a == b && a == c && a.mean.to_bits() == c.mean.to_bits()
        && a.half_width.to_bits() == c.half_width.to_bits();

    // CLI level: identical bytes for simulate; identical JSON (modulo
    // wall_time) for smc across jobs=1 and jobs=8
    let bin = env!("CARGO_BIN_EXE_pebc");
    let gear = models_dir().join("gear.peb");
    let simulate = |_: u32| {
        std::process::Command::new(bin)
            .args(["simulate", gear.to_str().unwrap(), "--seed", "11", "--trace", "-"])
            .output()
            .unwrap()
            .stdout
    };
    let sim_ok = simulate(0) == simulate(1);

    let smc = |jobs: &str| {
        let out = std::process::Command::new(bin)
            .args([
                "smc", gear.to_str().unwrap(), "--query", "gear_retracted",
                "--seed", "7", "--delta", "0.05", "--batch", "64",
                "--jobs", jobs, "--json",
            ])
            .output()
            .unwrap();
        let mut v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
        v.as_object_mut().unwrap().remove("wall_time");
        v
    };
    let cli_ok = smc("1") == smc("8");
    let ok = lib_ok && sim_ok && cli_ok;
    report(
        8,
        ok,
        &format!(
            "library estimates bit-identical across invocations and jobs=1/8: {lib_ok}; \
             simulate byte-identical: {sim_ok}; smc JSON identical modulo wall_time: {cli_ok}"
        ),
    );
}
