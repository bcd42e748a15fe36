//! Validates every JSON document the CLI emits against the published schema
//! (`schema/pebc-output.schema.json`).
//!
//! The validator covers the structural subset the schema uses: `type`,
//! `required`, `properties`, `items`, `enum`, `oneOf`, `$ref` into `$defs`,
//! and boolean `additionalProperties`. Numeric bounds are asserted directly
//! where they matter.

use serde_json::Value;
use std::path::{Path, PathBuf};
use std::process::Command;

fn schema() -> Value {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("schema/pebc-output.schema.json");
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn resolve<'a>(root: &'a Value, node: &'a Value) -> &'a Value {
    if let Some(r) = node.get("$ref").and_then(Value::as_str) {
        let name = r.strip_prefix("#/$defs/").expect("local ref");
        return &root["$defs"][name];
    }
    node
}

fn type_matches(ty: &str, v: &Value) -> bool {
    match ty {
        "object" => v.is_object(),
        "array" => v.is_array(),
        "string" => v.is_string(),
        "integer" => v.is_i64() || v.is_u64(),
        "number" => v.is_number(),
        "boolean" => v.is_boolean(),
        "null" => v.is_null(),
        _ => false,
    }
}

fn validate(root: &Value, node: &Value, v: &Value, at: &str) -> Result<(), String> {
    let node = resolve(root, node);
    if let Some(one_of) = node.get("oneOf").and_then(Value::as_array) {
        if !one_of.iter().any(|n| validate(root, n, v, at).is_ok()) {
            return Err(format!("{at}: matches no oneOf branch"));
        }
        return Ok(());
    }
    if let Some(options) = node.get("enum").and_then(Value::as_array) {
        if !options.contains(v) {
            return Err(format!("{at}: {v} not in enum {options:?}"));
        }
    }
    match node.get("type") {
        Some(Value::String(ty)) => {
            if !type_matches(ty, v) {
                return Err(format!("{at}: expected {ty}, got {v}"));
            }
        }
        Some(Value::Array(tys)) => {
            if !tys.iter().filter_map(Value::as_str).any(|ty| type_matches(ty, v)) {
                return Err(format!("{at}: expected one of {tys:?}, got {v}"));
            }
        }
        _ => {}
    }
    if let Some(required) = node.get("required").and_then(Value::as_array) {
        for key in required.iter().filter_map(Value::as_str) {
            if v.get(key).is_none() {
                return Err(format!("{at}: missing required `{key}`"));
            }
        }
    }
    if let (Some(obj), Some(props)) = (v.as_object(), node.get("properties").and_then(Value::as_object)) {
        for (key, sub) in props {
            if let Some(value) = obj.get(key) {
                validate(root, sub, value, &format!("{at}.{key}"))?;
            }
        }
        match node.get("additionalProperties") {
            Some(Value::Bool(false)) => {
                for key in obj.keys() {
                    if !props.contains_key(key) {
                        return Err(format!("{at}: unexpected property `{key}`"));
                    }
                }
            }
            Some(sub) if sub.is_object() => {
                for (key, value) in obj {
                    if !props.contains_key(key) {
                        validate(root, sub, value, &format!("{at}.{key}"))?;
                    }
                }
            }
            _ => {}
        }
    } else if let (Some(obj), Some(sub)) = (v.as_object(), node.get("additionalProperties")) {
        if sub.is_object() {
            for (key, value) in obj {
                validate(root, sub, value, &format!("{at}.{key}"))?;
            }
        }
    }
    if let (Some(arr), Some(items)) = (v.as_array(), node.get("items")) {
        for (i, item) in arr.iter().enumerate() {
            validate(root, items, item, &format!("{at}[{i}]"))?;
        }
    }
    Ok(())
}

fn pebc(args: &[&str]) -> (Option<i32>, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_pebc")).args(args).output().unwrap();
    (out.status.code(), String::from_utf8_lossy(&out.stdout).into_owned())
}

fn model(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../models").join(name)
}

fn check(def: &str, v: &Value) {
    let root = schema();
    let node = root["$defs"][def].clone();
    validate(&root, &node, v, def).unwrap_or_else(|e| panic!("{e}\n{v:#}"));
}

#[test]
fn estimate_output_validates() {
    let gear = model("gear.peb");
    let (code, out) = pebc(&[
        "smc", gear.to_str().unwrap(), "--query", "door_open",
        "--seed", "1", "--batch", "8", "--max-runs", "16", "--json",
    ]);
    assert_eq!(code, Some(0));
    let v: Value = serde_json::from_str(&out).unwrap();
    check("estimate", &v);
    assert!(v["half_width"].as_f64().unwrap() >= 0.0);
    assert!(v["runs"].as_u64().unwrap() >= 2);
}

#[test]
fn exact_output_validates() {
    let p2p = model("p2p_n1_k1.peb");
    let (code, out) = pebc(&["exact", p2p.to_str().unwrap(), "--query", "transmissions", "--json"]);
    assert_eq!(code, Some(0));
    let v: Value = serde_json::from_str(&out).unwrap();
    check("exact", &v);
}

#[test]
fn simulate_and_trace_outputs_validate() {
    let gear = model("gear.peb");
    let dir = tempfile::tempdir().unwrap();
    let trace_path = dir.path().join("trace.jsonl");
    let (code, out) = pebc(&[
        "simulate", gear.to_str().unwrap(), "--seed", "9",
        "--trace", trace_path.to_str().unwrap(), "--json",
    ]);
    assert_eq!(code, Some(0));
    let v: Value = serde_json::from_str(&out).unwrap();
    check("simulate", &v);
    for line in std::fs::read_to_string(trace_path).unwrap().lines() {
        let rec: Value = serde_json::from_str(line).unwrap();
        check("traceRecord", &rec);
    }
}

#[test]
fn check_and_error_outputs_validate() {
    let gear = model("gear.peb");
    let (code, out) = pebc(&["check", gear.to_str().unwrap(), "--json"]);
    assert_eq!(code, Some(0));
    check("check", &serde_json::from_str(&out).unwrap());

    let (code, out) = pebc(&[
        "exact", model("p2p_n1_k1.peb").to_str().unwrap(),
        "--query", "n = 0", "--max-states", "50", "--json",
    ]);
    assert_eq!(code, Some(4));
    check("error", &serde_json::from_str(&out).unwrap());
}

#[test]
fn export_output_validates() {
    let gear = model("gear.peb");
    let dir = tempfile::tempdir().unwrap();
    let prefix = dir.path().join("out");
    let (code, out) = pebc(&[
        "export", gear.to_str().unwrap(), "--format", "tra",
        "--out", prefix.to_str().unwrap(), "--json",
    ]);
    assert_eq!(code, Some(0));
    check("export", &serde_json::from_str(&out).unwrap());
}
