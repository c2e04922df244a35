//! Symbolic tableau operations against dense state vectors and signed-group
//! enumeration, for up to 4 qubits and 4 phase symbols.

mod common;

use common::*;
use qsym::expr::{BoolExpr, FreshGen, Symbol, Valuation};
use qsym::pauli::PauliString;
use qsym::tableau::{MeasKind, SymTableau};

fn report(t: &Tally) {
    assert!(t.checks > 0);
    assert!(t.ok(), "{} of {} checks failed:\n{}", t.failures.len(), t.checks, t.failures.join("\n"));
}

fn gens(list: &[(&str, BoolExpr)]) -> SymTableau {
    let g: Vec<(PauliString, BoolExpr)> = list.iter().map(|(p, e)| (p.parse().unwrap(), e.clone())).collect();
    SymTableau::from_generators(&g).unwrap()
}

#[test]
fn dense_vector_convention() {
    // |+> is fixed by X, |-> by -X; Y eigenstate has amplitudes (1, i)
    let plus = state_vector(&[("X".parse().unwrap(), false)]);
    assert!((plus[0].re - plus[1].re).abs() < 1e-12);
    let y = state_vector(&[("Y".parse().unwrap(), false)]);
    assert!((y[1] / y[0] - num_complex::Complex64::i()).norm() < 1e-12);
}

#[test]
fn measurement_outcomes_match_dense() {
    let mut t = Tally::default();
    oracle_measurement(11, 400, &mut t);
    report(&t);
}

#[test]
fn canonical_form_preserves_group() {
    let mut t = Tally::default();
    oracle_canonical(12, 400, &mut t);
    report(&t);
}

#[test]
fn equality_formula_matches_dense() {
    let mut t = Tally::default();
    oracle_equality(13, 400, &mut t);
    report(&t);
}

#[test]
fn bitflip_syndrome_measurement() {
    let (s, e1, e2, e3) = (BoolExpr::var("s"), BoolExpr::var("e1"), BoolExpr::var("e2"), BoolExpr::var("e3"));
    let mut t = gens(&[
        ("ZII", BoolExpr::xor(s, e1.clone())),
        ("IZI", BoolExpr::xor(e1.clone(), e2.clone())),
        ("ZZZ", BoolExpr::xor(e2.clone(), e3)),
    ]);
    let before = t.clone();
    let r = t.measure(1, &mut FreshGen::new());
    assert_eq!(r.kind, MeasKind::Deterministic);
    let syms: Vec<Symbol> = ["s", "e1", "e2", "e3"].iter().map(|n| Symbol::new(n)).collect();
    for v in all_valuations(&syms) {
        assert_eq!(r.outcome.eval(&v).unwrap(), BoolExpr::xor(e1.clone(), e2.clone()).eval(&v).unwrap());
    }
    assert!(t == before);
}

#[test]
fn canonical_examples_by_group_enumeration() {
    let a = BoolExpr::var("a");
    let t1 = gens(&[("ZI", a.clone()), ("ZZ", BoolExpr::constant(false))]);
    let t2 = gens(&[("IZ", a.clone()), ("ZZ", BoolExpr::constant(false))]);
    let c1 = t1.canonical_form();
    let c2 = t2.canonical_form();
    let rows = |c: &SymTableau| c.stabilizers().into_iter().map(|(p, _)| p.to_string()).collect::<Vec<_>>();
    assert_eq!(rows(&c1), ["ZI", "IZ"]);
    assert_eq!(rows(&c2), ["ZI", "IZ"]);
    for bit in [false, true] {
        let mut v = Valuation::new();
        v.set_bit(Symbol::new("a"), bit);
        let want: Vec<(String, bool)> = vec![("ZI".into(), bit), ("IZ".into(), bit)];
        for c in [&c1, &c2] {
            let got: Vec<(String, bool)> =
                c.instantiate(&v).unwrap().stabilizers().into_iter().map(|(p, s)| (p.to_string(), s)).collect();
            assert_eq!(got, want);
            assert_eq!(signed_group(&c.instantiate(&v).unwrap().stabilizers()), signed_group(&t1.instantiate(&v).unwrap().stabilizers()));
        }
    }
    let f = t1.equality_formula(&t2).unwrap();
    for v in all_valuations(&[Symbol::new("a")]) {
        assert!(f.eval(&v).unwrap());
    }
}
