//! Seeded generator of small random machines that pass `check_model`.
//!
//! Generated models keep weights positive, integer states bounded, and all
//! assignments kind-correct, so exploration never hits runtime errors; they
//! exercise parameters, guards, comprehensions, relations, and all four
//! assignment forms.

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

#[derive(Clone, Copy, PartialEq)]
enum VarKind {
    Int,
    Sym,
    SetInt,
    Rel,
}

struct Gen {
    rng: StdRng,
    elems: Vec<String>,
    vars: Vec<(&'static str, VarKind)>,
    has_const: bool,
}

impl Gen {
    fn pick<'a, T>(&mut self, xs: &'a [T]) -> &'a T {
        &xs[self.rng.gen_range(0..xs.len())]
    }

    fn elem(&mut self) -> String {
        let i = self.rng.gen_range(0..self.elems.len());
        self.elems[i].clone()
    }

    fn weight(&mut self) -> String {
        let mut options = vec!["1".to_string(), "2".to_string(), "3".to_string()];
        if self.vars.iter().any(|(_, k)| *k == VarKind::SetInt) {
            options.push("1 + card(xset)".to_string());
        }
        if self.has_const {
            options.push("c0".to_string());
        }
        self.pick(&options).clone()
    }

    fn param_domain(&mut self) -> (String, VarKind) {
        let mut options = vec![
            ("SA".to_string(), VarKind::Sym),
            ("0 .. 2".to_string(), VarKind::Int),
            ("{ x . 0 .. 3 | (x mod 2) = 0 }".to_string(), VarKind::Int),
        ];
        if self.vars.iter().any(|(_, k)| *k == VarKind::SetInt) {
            options.push(("xset".to_string(), VarKind::Int));
        }
        if self.vars.iter().any(|(_, k)| *k == VarKind::Rel) {
            options.push(("dom(xrel)".to_string(), VarKind::Int));
        }
        self.pick(&options).clone()
    }

    fn guard(&mut self, params: &[(String, VarKind)]) -> String {
        let mut options = vec!["true".to_string()];
        if self.vars.iter().any(|(_, k)| *k == VarKind::Int) {
            options.push("xi <= 2".to_string());
            options.push("xi < 4".to_string());
        }
        if self.vars.iter().any(|(_, k)| *k == VarKind::Sym) {
            let e = self.elem();
            options.push(format!("xs = {e}"));
        }
        if self.vars.iter().any(|(_, k)| *k == VarKind::SetInt) {
            options.push("card(xset) <= 4".to_string());
        }
        for (p, k) in params {
            match k {
                VarKind::Int => options.push(format!("({p} mod 2) = 0")),
                VarKind::Sym => {
                    let e = self.elem();
                    options.push(format!("{p} = {e}"));
                }
                _ => {}
            }
        }
        let a = self.pick(&options).clone();
        if self.rng.gen_bool(0.3) && options.len() > 1 {
            let b = self.pick(&options).clone();
            let op = if self.rng.gen_bool(0.5) { "/\\" } else { "\\/" };
            format!("({a}) {op} ({b})")
        } else {
            a
        }
    }

    fn action(&mut self, target: &str, kind: VarKind, params: &[(String, VarKind)]) -> String {
        let int_param = params.iter().find(|(_, k)| *k == VarKind::Int).map(|(p, _)| p.clone());
        let sym_param = params.iter().find(|(_, k)| *k == VarKind::Sym).map(|(p, _)| p.clone());
        match kind {
            VarKind::Int => {
                let mut options = vec![
                    format!("{target} := ({target} + 1) mod 4"),
                    format!("{target} :in 0 .. 3"),
                    format!("{target} := {{0, {target} + 1}}"),
                    format!("{target} := {{ 0 @ 0.5, 1 @ 0.25, 2 @ 0.25 }}"),
                ];
                if let Some(p) = int_param {
                    options.push(format!("{target} := {p}"));
                    options.push(format!("{target} := {{ {p} @ 0.5, 0 @ 0.5 }}"));
                }
                self.pick(&options).clone()
            }
            VarKind::Sym => {
                let (e0, e1) = (self.elem(), self.elem());
                let mut options = vec![
                    format!("{target} :in SA"),
                    format!("{target} := {e0}"),
                ];
                if e0 != e1 {
                    options.push(format!("{target} := {{ {e0} @ 0.7, {e1} @ 0.3 }}"));
                    options.push(format!("{target} := {{{e0}, {e1}}}"));
                }
                if let Some(p) = sym_param {
                    options.push(format!("{target} := {p}"));
                }
                self.pick(&options).clone()
            }
            VarKind::SetInt => {
                let mut options = vec![
                    format!("{target} := {target} \\/ {{ 1 }}"),
                    format!("{target} := {target} - {{ 0 }}"),
                    format!("{target} := ({target} \\/ {{ 0 }}) /\\ (0 .. 3)"),
                    format!("{target} := {{ x . {target} | (x + 1) mod 5 }}"),
                ];
                if let Some(p) = int_param {
                    options.push(format!("{target} := {target} \\/ {{ {p} }}"));
                }
                self.pick(&options).clone()
            }
            VarKind::Rel => {
                let e = self.elem();
                let options = vec![
                    format!("{target} := {target} <+ {{ 0 |-> {e} }}"),
                    format!("{target} := {{ 1 }} <<| {target}"),
                    format!("{target} := {target} |> {{ {e} }}"),
                    format!("{target} := {target} \\/ {{ 1 |-> {e} }}"),
                ];
                self.pick(&options).clone()
            }
        }
    }
}

/// Generates one random well-formed model source.
pub fn generate(seed: u64) -> String {
    let mut rng = StdRng::seed_from_u64(seed);
    let n_elems = rng.gen_range(2..=3usize);
    let elems: Vec<String> = (0..n_elems).map(|i| format!("el{i}")).collect();
    let has_const = rng.gen_bool(0.5);
    let all_kinds = [VarKind::Int, VarKind::Sym, VarKind::SetInt, VarKind::Rel];
    let mut vars: Vec<(&'static str, VarKind)> = Vec::new();
    for kind in all_kinds {
        let name = match kind {
            VarKind::Int => "xi",
            VarKind::Sym => "xs",
            VarKind::SetInt => "xset",
            VarKind::Rel => "xrel",
        };
        if rng.gen_bool(0.55) {
            vars.push((name, kind));
        }
    }
    if vars.is_empty() {
        vars.push(("xi", VarKind::Int));
    }
    let mut g = Gen { rng, elems: elems.clone(), vars: vars.clone(), has_const };

    let mut src = String::new();
    src.push_str("CONTEXT CTX\n  SETS\n    SA : { ");
    src.push_str(&elems.join(", "));
    src.push_str(" }\n");
    if has_const {
        let v = g.rng.gen_range(1..=3);
        src.push_str(&format!("  CONSTANTS\n    c0 : Nat := {v}\n"));
    }
    src.push_str("END\nMACHINE RANDOM SEES CTX\n  VARIABLES");
    for (name, _) in &vars {
        src.push_str(&format!(" {name}"));
    }
    src.push_str("\n  INVARIANTS\n");
    for (name, kind) in &vars {
        let ty = match kind {
            VarKind::Int => "Nat",
            VarKind::Sym => "SA",
            VarKind::SetInt => "POW(Nat)",
            VarKind::Rel => "POW(Nat * SA)",
        };
        src.push_str(&format!("    {name} : {ty}\n"));
    }
    src.push_str("  INITIALISATION\n");
    for (name, kind) in &vars {
        let init = match kind {
            VarKind::Int => "0".to_string(),
            VarKind::Sym => elems[0].clone(),
            VarKind::SetInt => "0 .. 1".to_string(),
            VarKind::Rel => format!("(0 .. 1) * {{ {} }}", elems[0]),
        };
        src.push_str(&format!("    {name} := {init}\n"));
    }
    let n_events = g.rng.gen_range(2..=4usize);
    for ev in 0..n_events {
        let weight = g.weight();
        let n_params = g.rng.gen_range(0..=2usize);
        let params: Vec<(String, VarKind)> =
            (0..n_params).map(|i| (format!("p{i}"), VarKind::Int)).collect();
        let params: Vec<(String, VarKind)> = params
            .into_iter()
            .map(|(name, _)| {
                let (domain, kind) = g.param_domain();
                (format!("{name} :in {domain}"), kind)
            })
            .map(|(decl, kind)| (decl, kind))
            .collect();
        let param_decls: Vec<String> = params.iter().map(|(d, _)| d.clone()).collect();
        let param_kinds: Vec<(String, VarKind)> = param_decls
            .iter()
            .zip(params.iter())
            .enumerate()
            .map(|(i, (_, (_, k)))| (format!("p{i}"), *k))
            .collect();
        let guard = g.guard(&param_kinds);
        let n_actions = g.rng.gen_range(1..=vars.len().min(2));
        let mut targets = vars.clone();
        let mut actions = Vec::new();
        for _ in 0..n_actions {
            let i = g.rng.gen_range(0..targets.len());
            let (name, kind) = targets.swap_remove(i);
            actions.push(g.action(name, kind, &param_kinds));
        }
        src.push_str(&format!("\n  EVENT ev{ev}\n    WEIGHT {weight}\n"));
        if !param_decls.is_empty() {
            src.push_str(&format!("    ANY {}\n", param_decls.join(" ")));
        }
        src.push_str(&format!("    WHERE {guard}\n    THEN\n"));
        for a in &actions {
            src.push_str(&format!("      {a}\n"));
        }
        src.push_str("  END\n");
    }
    src.push_str("END\n");
    src
}
