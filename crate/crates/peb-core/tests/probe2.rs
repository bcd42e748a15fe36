use peb_core::check::check_model_with_queries;
use peb_core::diag::FileId;
use peb_core::parse::{parse_expression, parse_model};
use peb_core::query::{run_query, Query};
use peb_core::sim::{derive_run_seed, RunConfig};
use std::sync::atomic::{AtomicU64, Ordering};

#[test]
#[ignore]
fn probe_p2p_mean() {
    let p2p = parse_model(include_str!("../../../models/p2p_n16_k30.peb")).unwrap();
    let n = parse_expression("n", FileId::MAIN).unwrap();
    let out = check_model_with_queries(&p2p, &[n]).unwrap();
    let model = &out.model;
    let q = Query::ExpectedAtEnd(out.queries[0].clone());
    let runs = 1400u64;
    let jobs = std::thread::available_parallelism().map(|n| n.get()).unwrap_or(4);
    let next = AtomicU64::new(0);
    let sum = std::sync::Mutex::new((0.0f64, 0.0f64));
    std::thread::scope(|s| {
        for _ in 0..jobs {
            s.spawn(|| {
                loop {
                    let i = next.fetch_add(1, Ordering::Relaxed);
                    if i >= runs { break; }
                    let r = run_query(model, &RunConfig::new(derive_run_seed(8, i), 1_000_000), &q).unwrap();
                    let mut g = sum.lock().unwrap();
                    g.0 += r.value; g.1 += r.value * r.value;
                }
            });
        }
    });
    let (s, s2) = *sum.lock().unwrap();
    let mean = s / runs as f64;
    let sd = ((s2 - runs as f64 * mean * mean) / (runs as f64 - 1.0)).sqrt();
    println!("p2p16x30 over {} runs: mean n = {:.2} sd {:.2} se {:.2} (jobs={})", runs, mean, sd, sd / (runs as f64).sqrt(), jobs);
}
