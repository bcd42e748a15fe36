//! Round-trip property on randomly generated models: parsing the
//! pretty-printed form reproduces the model, and printing is a fixed point.

mod common;

use peb_core::check::check_model;
use peb_core::parse::parse_model;
use peb_core::pretty::model_to_string;

#[test]
fn generated_models_roundtrip_and_check() {
    let mut checked = 0;
    for seed in 0..80u64 {
        let src = common::modelgen::generate(seed);
        let m1 = parse_model(&src).unwrap_or_else(|e| panic!("seed {seed}: {e:?}\n{src}"));
        let text = model_to_string(&m1);
        let m2 = parse_model(&text)
            .unwrap_or_else(|e| panic!("seed {seed}: reparse failed {e:?}\n{text}"));
        assert_eq!(m1, m2, "seed {seed} round-trip mismatch\n{src}\n----\n{text}");
        assert_eq!(text, model_to_string(&m2), "printing must be a fixed point");
        if check_model(&m1).is_ok() {
            checked += 1;
        }
    }
    assert!(checked >= 75, "almost all generated models should check, got {checked}/80");
}
