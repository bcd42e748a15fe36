//! Explicit-state exports: PRISM-style `.tra`/`.sta` files, Graphviz dumps,
//! and line-delimited JSON trace records.

use peb_core::exact::Dtmc;
use peb_core::ir::CompiledModel;
use peb_core::semantics::MachineState;
use peb_core::sim::Trace;
use peb_core::value::Value;
use num_traits::ToPrimitive;
use serde_json::{json, Map};
use std::io::{self, Write};

/// One line per transition: `src dst prob event`.
pub fn write_tra(model: &CompiledModel, dtmc: &Dtmc, w: &mut impl Write) -> io::Result<()> {
    for (src, outs) in dtmc.transitions.iter().enumerate() {
        for (event, dst, p) in outs {
            writeln!(
                w,
                "{src} {dst} {} {}",
                p.to_f64().unwrap_or(f64::NAN),
                model.event_name(*event)
            )?;
        }
    }
    Ok(())
}

/// One line per state: `index var=value ...` (values render without spaces).
pub fn write_sta(model: &CompiledModel, dtmc: &Dtmc, w: &mut impl Write) -> io::Result<()> {
    for (i, state) in dtmc.states.iter().enumerate() {
        write!(w, "{i}")?;
        for (v, value) in model.var_names.iter().zip(state.values()) {
            write!(w, " {v}={}", value.display(&model.symbols))?;
        }
        if dtmc.deadlock[i] {
            write!(w, " deadlock")?;
        }
        writeln!(w)?;
    }
    Ok(())
}

/// Graphviz digraph with `event:prob` edge labels.
pub fn write_dot(model: &CompiledModel, dtmc: &Dtmc, w: &mut impl Write) -> io::Result<()> {
    writeln!(w, "digraph {} {{", model.machine_name)?;
    writeln!(w, "  rankdir=LR;")?;
    for (i, state) in dtmc.states.iter().enumerate() {
        let label: Vec<String> = model
            .var_names
            .iter()
            .zip(state.values())
            .map(|(v, value)| format!("{v}={}", value.display(&model.symbols)))
            .collect();
        let shape = if dtmc.deadlock[i] { "doublecircle" } else { "ellipse" };
        writeln!(w, "  s{i} [shape={shape},label=\"s{i}\\n{}\"];", label.join("\\n"))?;
    }
    for (src, outs) in dtmc.transitions.iter().enumerate() {
        for (event, dst, p) in outs {
            writeln!(
                w,
                "  s{src} -> s{dst} [label=\"{}:{}\"];",
                model.event_name(*event),
                p.to_f64().unwrap_or(f64::NAN)
            )?;
        }
    }
    writeln!(w, "}}")
}

/// JSON rendering of a value: integers and booleans map to themselves,
/// symbols to strings, pairs to two-element arrays, sets to arrays.
pub fn value_json(model: &CompiledModel, v: &Value) -> serde_json::Value {
    match v {
        Value::Int(i) => json!(i),
        Value::Bool(b) => json!(b),
        Value::Sym(s) => json!(model.symbols.name(*s)),
        Value::Pair(a, b) => {
            json!([value_json(model, &Value::from(*a)), value_json(model, &Value::from(*b))])
        }
        Value::Set(elems) => {
            serde_json::Value::Array(elems.iter().map(|e| value_json(model, e)).collect())
        }
    }
}

pub fn state_json(model: &CompiledModel, state: &MachineState) -> serde_json::Value {
    let mut map = Map::new();
    for (name, value) in model.var_names.iter().zip(state.values()) {
        map.insert(name.clone(), value_json(model, value));
    }
    serde_json::Value::Object(map)
}

/// Writes a trace as line-delimited JSON records `{step, event, state}`,
/// starting with the initial state as step 0 (event null).
pub fn write_trace_jsonl(model: &CompiledModel, trace: &Trace, w: &mut impl Write) -> io::Result<()> {
    let head = json!({
        "step": 0,
        "event": serde_json::Value::Null,
        "state": state_json(model, &trace.initial),
    });
    writeln!(w, "{head}")?;
    for (step, event, state) in &trace.steps {
        let rec = json!({
            "step": step,
            "event": model.event_name(*event),
            "state": state_json(model, state),
        });
        writeln!(w, "{rec}")?;
    }
    Ok(())
}

/// Gnuplot-compatible histogram: `# value count` header comment then one
/// `center count` line per bin.
pub fn write_histogram(samples: &[f64], bins: usize, w: &mut impl Write) -> io::Result<()> {
    writeln!(w, "# value count")?;
    if samples.is_empty() {
        return Ok(());
    }
    let min = samples.iter().cloned().fold(f64::INFINITY, f64::min);
    let max = samples.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if min == max {
        return writeln!(w, "{min} {}", samples.len());
    }
    let bins = bins.max(1);
    let width = (max - min) / bins as f64;
    let mut counts = vec![0u64; bins];
    for s in samples {
        let i = (((s - min) / width) as usize).min(bins - 1);
        counts[i] += 1;
    }
    for (i, c) in counts.iter().enumerate() {
        writeln!(w, "{} {c}", min + (i as f64 + 0.5) * width)?;
    }
    Ok(())
}
