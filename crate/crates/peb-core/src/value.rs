//! Canonical runtime values with a strict total order.
//!
//! Sets are represented as sorted, duplicate-free vectors, so two sets are
//! equal exactly when their representations are structurally equal. The
//! total order ranks kinds as `Sym < Bool < Int < Pair < Set` and compares
//! within a kind as documented on [`compare_values`]. Set payloads sit
//! behind an `Arc` so that states and traces can be cloned cheaply.

use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec::Vec;
use core::cmp::Ordering;
use core::fmt;

/// Interned identifier for a symbolic constant (a deferred-set element or a
/// string literal). Ids are assigned in byte-lexicographic order of the
/// underlying strings, so comparing ids compares names.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Sym(pub u32);

/// The interning table behind [`Sym`]. All symbols of a model are known
/// statically (set elements and string literals), so the table is built once
/// at compile time and never grows.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SymTable {
    names: Vec<String>,
}

impl SymTable {
    /// Builds a table from the complete set of symbol names. Duplicates are
    /// collapsed; ids follow byte-lexicographic order.
    pub fn new(mut names: Vec<String>) -> Self {
        names.sort();
        names.dedup();
        SymTable { names }
    }

    pub fn resolve(&self, name: &str) -> Option<Sym> {
        self.names.binary_search_by(|n| n.as_str().cmp(name)).ok().map(|i| Sym(i as u32))
    }

    pub fn name(&self, sym: Sym) -> &str {
        &self.names[sym.0 as usize]
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }
}

/// A scalar value. The variant order fixes the cross-kind comparison rank
/// (`Sym < Bool < Int`), matching [`Value`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Scalar {
    Sym(Sym),
    Bool(bool),
    Int(i64),
}

impl From<Scalar> for Value {
    fn from(s: Scalar) -> Value {
        match s {
            Scalar::Sym(x) => Value::Sym(x),
            Scalar::Bool(b) => Value::Bool(b),
            Scalar::Int(i) => Value::Int(i),
        }
    }
}

/// A runtime value: an integer, boolean, symbol, pair of scalars, or a
/// canonically sorted finite set.
///
/// Invariants (enforced by [`canonical_set`] and the evaluator):
/// * `Set` elements are strictly increasing under the value order;
/// * a set holds either only scalars or only pairs, never a mixture and
///   never nested sets;
/// * pair components are scalars (guaranteed by construction).
///
/// The derived `Ord` is the value order: variants rank
/// `Sym < Bool < Int < Pair < Set`; symbols compare byte-lexicographically
/// through their interned ids, pairs lexicographically on
/// `(first, second)`, and sets lexicographically on their element
/// sequences (a strict prefix sorts first).
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Value {
    Sym(Sym),
    Bool(bool),
    Int(i64),
    Pair(Scalar, Scalar),
    Set(Arc<Vec<Value>>),
}

/// The element-kind classification used by the set invariant.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ElemKind {
    Scalar,
    Pair,
    Set,
}

impl Value {
    pub fn set_from_sorted(elems: Vec<Value>) -> Value {
        debug_assert!(elems.windows(2).all(|w| w[0] < w[1]));
        Value::Set(Arc::new(elems))
    }

    pub fn empty_set() -> Value {
        Value::Set(Arc::new(Vec::new()))
    }

    pub fn elem_kind(&self) -> ElemKind {
        match self {
            Value::Sym(_) | Value::Bool(_) | Value::Int(_) => ElemKind::Scalar,
            Value::Pair(..) => ElemKind::Pair,
            Value::Set(_) => ElemKind::Set,
        }
    }

    pub fn as_int(&self) -> Option<i64> {
        match self {
            Value::Int(i) => Some(*i),
            _ => None,
        }
    }

    pub fn as_bool(&self) -> Option<bool> {
        match self {
            Value::Bool(b) => Some(*b),
            _ => None,
        }
    }

    pub fn as_sym(&self) -> Option<Sym> {
        match self {
            Value::Sym(x) => Some(*x),
            _ => None,
        }
    }

    pub fn as_scalar(&self) -> Option<Scalar> {
        match self {
            Value::Sym(x) => Some(Scalar::Sym(*x)),
            Value::Bool(b) => Some(Scalar::Bool(*b)),
            Value::Int(i) => Some(Scalar::Int(*i)),
            _ => None,
        }
    }

    pub fn as_set(&self) -> Option<&[Value]> {
        match self {
            Value::Set(v) => Some(v),
            _ => None,
        }
    }

    /// Takes ownership of a set payload, reusing the allocation when this
    /// value holds the only reference.
    pub fn into_set_vec(self) -> Option<Vec<Value>> {
        match self {
            Value::Set(arc) => Some(Arc::try_unwrap(arc).unwrap_or_else(|a| (*a).clone())),
            _ => None,
        }
    }

    /// Membership test on a canonical set payload.
    pub fn set_contains(elems: &[Value], v: &Value) -> bool {
        elems.binary_search(v).is_ok()
    }

    pub fn display<'a>(&'a self, table: &'a SymTable) -> DisplayValue<'a> {
        DisplayValue { value: self, table }
    }
}

/// The strict total order on values.
///
/// Cross-kind rank: `Sym < Bool < Int < Pair < Set`. Within kinds: symbols by
/// byte-lexicographic name order, `false < true`, integers numerically, pairs
/// lexicographically on `(first, second)`, sets lexicographically on their
/// element sequences.
pub fn compare_values(a: &Value, b: &Value) -> Ordering {
    a.cmp(b)
}

/// Why a sequence of elements cannot form a set value.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SetKindError {
    /// Scalar and pair elements mixed in one set.
    MixedKinds,
    /// A set occurred as an element (only one nesting level is supported).
    NestedSet,
}

impl fmt::Display for SetKindError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SetKindError::MixedKinds => f.write_str("set mixes scalar and pair elements"),
            SetKindError::NestedSet => f.write_str("sets cannot contain other sets"),
        }
    }
}

impl core::error::Error for SetKindError {}

/// Builds the canonical set value from arbitrary elements: sorts, removes
/// duplicates, and checks kind homogeneity. Idempotent and
/// permutation-invariant on its input.
pub fn canonical_set(mut elems: Vec<Value>) -> Result<Value, SetKindError> {
    let mut kind = None;
    for e in &elems {
        let k = e.elem_kind();
        if k == ElemKind::Set {
            return Err(SetKindError::NestedSet);
        }
        match kind {
            None => kind = Some(k),
            Some(prev) if prev != k => return Err(SetKindError::MixedKinds),
            _ => {}
        }
    }
    elems.sort_unstable();
    elems.dedup();
    Ok(Value::Set(Arc::new(elems)))
}

pub struct DisplayValue<'a> {
    value: &'a Value,
    table: &'a SymTable,
}

impl fmt::Display for DisplayValue<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fn scalar(f: &mut fmt::Formatter<'_>, s: &Scalar, t: &SymTable) -> fmt::Result {
            match s {
                Scalar::Sym(x) => f.write_str(t.name(*x)),
                Scalar::Bool(b) => write!(f, "{b}"),
                Scalar::Int(i) => write!(f, "{i}"),
            }
        }
        match self.value {
            Value::Sym(x) => f.write_str(self.table.name(*x)),
            Value::Bool(b) => write!(f, "{b}"),
            Value::Int(i) => write!(f, "{i}"),
            Value::Pair(a, b) => {
                scalar(f, a, self.table)?;
                f.write_str("|->")?;
                scalar(f, b, self.table)
            }
            Value::Set(elems) => {
                f.write_str("{")?;
                for (i, e) in elems.iter().enumerate() {
                    if i > 0 {
                        f.write_str(",")?;
                    }
                    write!(f, "{}", e.display(self.table))?;
                }
                f.write_str("}")
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use proptest::prelude::*;

    fn table() -> SymTable {
        SymTable::new(vec![
            "open".into(),
            "close".into(),
            "up".into(),
            "down".into(),
            "emp".into(),
            "ok".into(),
        ])
    }

    fn sym(t: &SymTable, n: &str) -> Value {
        Value::Sym(t.resolve(n).unwrap())
    }

    #[test]
    fn cross_kind_rank() {
        let t = table();
        // strings precede booleans, booleans precede numbers
        assert_eq!(compare_values(&sym(&t, "open"), &Value::Bool(false)), Ordering::Less);
        assert_eq!(compare_values(&Value::Bool(true), &Value::Int(0)), Ordering::Less);
        assert_eq!(compare_values(&Value::Int(3), &Value::Int(3)), Ordering::Equal);
        let pair = Value::Pair(Scalar::Int(1), Scalar::Int(2));
        assert_eq!(compare_values(&Value::Int(i64::MAX), &pair), Ordering::Less);
        assert_eq!(compare_values(&pair, &Value::empty_set()), Ordering::Less);
    }

    #[test]
    fn sym_order_is_lexicographic() {
        let t = table();
        assert_eq!(compare_values(&sym(&t, "down"), &sym(&t, "up")), Ordering::Less);
        assert_eq!(compare_values(&sym(&t, "close"), &sym(&t, "open")), Ordering::Less);
    }

    #[test]
    fn canonical_set_sorts_and_dedupes() {
        let s = canonical_set(vec![Value::Int(2), Value::Int(1), Value::Int(2)]).unwrap();
        assert_eq!(s.as_set().unwrap(), &[Value::Int(1), Value::Int(2)]);

        let empty = canonical_set(vec![]).unwrap();
        assert_eq!(empty.as_set().unwrap(), &[] as &[Value]);

        let t = table();
        let s = canonical_set(vec![sym(&t, "up"), sym(&t, "down")]).unwrap();
        assert_eq!(s.as_set().unwrap(), &[sym(&t, "down"), sym(&t, "up")]);
    }

    #[test]
    fn canonical_set_rejects_mixed_kinds() {
        let err = canonical_set(vec![Value::Int(1), Value::Pair(Scalar::Int(1), Scalar::Int(2))]);
        assert_eq!(err.unwrap_err(), SetKindError::MixedKinds);
        let err = canonical_set(vec![Value::empty_set()]);
        assert_eq!(err.unwrap_err(), SetKindError::NestedSet);
    }

    fn scalar_strategy() -> impl Strategy<Value = Value> {
        prop_oneof![
            (0u32..6).prop_map(|i| Value::Sym(Sym(i))),
            any::<bool>().prop_map(Value::Bool),
            (-20i64..20).prop_map(Value::Int),
        ]
    }

    fn value_strategy() -> impl Strategy<Value = Value> {
        prop_oneof![
            scalar_strategy(),
            (scalar_strategy(), scalar_strategy()).prop_map(|(a, b)| {
                Value::Pair(a.as_scalar().unwrap(), b.as_scalar().unwrap())
            }),
            proptest::collection::vec(scalar_strategy(), 0..5)
                .prop_map(|v| canonical_set(v).unwrap()),
        ]
    }

    proptest! {
        #[test]
        fn order_is_strict_and_total(a in value_strategy(), b in value_strategy(), c in value_strategy()) {
            // exactly one of <, =, > holds pairwise
            let ab = compare_values(&a, &b);
            prop_assert_eq!(ab, compare_values(&b, &a).reverse());
            prop_assert_eq!(ab == Ordering::Equal, a == b);
            // transitivity
            if compare_values(&a, &b) != Ordering::Greater
                && compare_values(&b, &c) != Ordering::Greater
            {
                prop_assert_ne!(compare_values(&a, &c), Ordering::Greater);
            }
        }

        #[test]
        fn canonical_set_is_idempotent_and_permutation_invariant(
            mut elems in proptest::collection::vec(scalar_strategy(), 0..8),
            seed in any::<u64>(),
        ) {
            let once = canonical_set(elems.clone()).unwrap();
            let twice = canonical_set(once.as_set().unwrap().to_vec()).unwrap();
            prop_assert_eq!(&once, &twice);

            // deterministic shuffle from the seed
            let n = elems.len();
            let mut s = seed;
            for i in (1..n).rev() {
                s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                elems.swap(i, (s >> 33) as usize % (i + 1));
            }
            let shuffled = canonical_set(elems).unwrap();
            prop_assert_eq!(once, shuffled);
        }
    }
}
