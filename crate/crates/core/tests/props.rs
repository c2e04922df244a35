mod common;

use common::*;
use num_complex::Complex64 as C;
use proptest::prelude::*;
use qsym::expr::{BoolExpr, Formula, FreshGen, XorSum};
use qsym::pauli::{conj_clifford, Gate, Pauli, PauliString};
use qsym::smt::parse_formula;
use qsym::tableau::MeasKind;
use rand::Rng;

fn pauli_string() -> impl Strategy<Value = PauliString> {
    (1usize..=3).prop_flat_map(|n| prop::collection::vec(0u8..4, n)).prop_map(|v| {
        let mut p = PauliString::identity(v.len());
        for (q, c) in v.into_iter().enumerate() {
            p.set(q, [Pauli::I, Pauli::X, Pauli::Y, Pauli::Z][c as usize]);
        }
        p
    })
}

fn pair() -> impl Strategy<Value = (PauliString, PauliString)> {
    (1usize..=3).prop_flat_map(|n| {
        let one = prop::collection::vec(0u8..4, n);
        (one.clone(), one)
    })
    .prop_map(|(a, b)| {
        let mk = |v: Vec<u8>| {
            let mut p = PauliString::identity(v.len());
            for (q, c) in v.into_iter().enumerate() {
                p.set(q, [Pauli::I, Pauli::X, Pauli::Y, Pauli::Z][c as usize]);
            }
            p
        };
        (mk(a), mk(b))
    })
}

/// Dense matrix of `P` as a function on basis columns.
fn matrix(p: &PauliString) -> Vec<Vec<C>> {
    let dim = 1 << p.num_qubits();
    (0..dim)
        .map(|j| {
            let mut e = vec![C::new(0.0, 0.0); dim];
            e[j] = C::new(1.0, 0.0);
            apply_pauli(p, false, &e)
        })
        .collect()
}

fn close(a: &[Vec<C>], b: &[Vec<C>]) -> bool {
    a.iter().zip(b).all(|(x, y)| x.iter().zip(y).all(|(u, v)| (u - v).norm() < 1e-9))
}

/// Applies a Clifford gate to a dense vector.
fn apply_gate(g: Gate, t: &[usize], psi: &[C]) -> Vec<C> {
    let s2 = std::f64::consts::FRAC_1_SQRT_2;
    let mut out = vec![C::new(0.0, 0.0); psi.len()];
    for (j, a) in psi.iter().enumerate() {
        let b = |q: usize| j >> q & 1 == 1;
        match g {
            Gate::H => {
                let q = t[0];
                out[j & !(1 << q)] += a * s2;
                out[j | 1 << q] += a * if b(q) { -s2 } else { s2 };
            }
            Gate::S => out[j] += if b(t[0]) { a * C::i() } else { *a },
            Gate::Cnot => out[if b(t[0]) { j ^ 1 << t[1] } else { j }] += a,
            _ => unreachable!(),
        }
    }
    out
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn product_phase_matches_dense((a, b) in pair()) {
        let (c, k) = a.mul_raw(&b).unwrap();
        let ma = matrix(&a);
        // column j of A·B is A applied to column j of B
        let prod: Vec<Vec<C>> = matrix(&b).iter().map(|col| {
            let mut out = vec![C::new(0.0, 0.0); col.len()];
            for (i, x) in col.iter().enumerate() {
                for (r, y) in ma[i].iter().enumerate() {
                    out[r] += x * y;
                }
            }
            out
        }).collect();
        let phase = C::i().powu(k as u32);
        let want: Vec<Vec<C>> = matrix(&c).into_iter().map(|col| col.into_iter().map(|x| x * phase).collect()).collect();
        prop_assert!(close(&prod, &want));
    }

    #[test]
    fn commutation_is_symmetric_and_matches_dense((a, b) in pair()) {
        let ab = a.commutes(&b).unwrap();
        prop_assert_eq!(ab, b.commutes(&a).unwrap());
        let (_, k1) = a.mul_raw(&b).unwrap();
        let (_, k2) = b.mul_raw(&a).unwrap();
        prop_assert_eq!(ab, k1 == k2);
    }

    #[test]
    fn clifford_conjugation_matches_dense(p in pauli_string(), g in 0usize..3, seed in any::<u64>()) {
        let n = p.num_qubits();
        let mut r = rng(seed);
        let (gate, targets) = match g {
            0 => (Gate::H, vec![r.gen_range(0..n)]),
            1 => (Gate::S, vec![r.gen_range(0..n)]),
            _ if n >= 2 => {
                let a = r.gen_range(0..n);
                (Gate::Cnot, vec![a, (a + 1 + r.gen_range(0..n - 1)) % n])
            }
            _ => (Gate::H, vec![0]),
        };
        let (q, neg) = conj_clifford(gate, &targets, &p).unwrap();
        // U P U† |psi> == ±Q |psi> on every basis state
        for j in 0..1usize << n {
            let mut e = vec![C::new(0.0, 0.0); 1 << n];
            e[j] = C::new(1.0, 0.0);
            let mut udag = e.clone();
            for _ in 0..match gate { Gate::S => 3, _ => 1 } {
                udag = apply_gate(gate, &targets, &udag);
            }
            let lhs = apply_gate(gate, &targets, &apply_pauli(&p, false, &udag));
            let rhs = apply_pauli(&q, neg, &e);
            prop_assert!(lhs.iter().zip(&rhs).all(|(x, y)| (x - y).norm() < 1e-9));
        }
    }

    #[test]
    fn xor_sum_and_simplify_preserve_meaning(seed in any::<u64>(), m in 1usize..5) {
        let mut r = rng(seed);
        let syms = symbols(m);
        let mut e = random_guard(&mut r, &syms);
        for _ in 0..r.gen_range(0..4) {
            let f = random_guard(&mut r, &syms);
            e = match r.gen_range(0..3) { 0 => BoolExpr::xor(e, f), 1 => BoolExpr::and(e, f), _ => BoolExpr::or(BoolExpr::not(e), f) };
        }
        let xs = XorSum::from_expr(&e);
        let simp = e.simplify();
        let f = Formula::atom(e.clone());
        let back = parse_formula(&f.to_smt(), &f.declarations()).unwrap();
        for v in all_valuations(&syms) {
            let want = e.eval(&v).unwrap();
            prop_assert_eq!(xs.eval(&v).unwrap(), want);
            prop_assert_eq!(xs.to_expr().eval(&v).unwrap(), want);
            prop_assert_eq!(simp.eval(&v).unwrap(), want);
            prop_assert_eq!(back.eval(&v).unwrap(), want);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    /// Every symbolic operation commutes with instantiation.
    #[test]
    fn operations_commute_with_instantiation(seed in any::<u64>()) {
        let mut r = rng(seed);
        let n = r.gen_range(1..=16);
        let syms = symbols(r.gen_range(0..=4));
        let depth = r.gen_range(0..20);
        let mut t = random_sym_tableau(&mut r, n, &syms, depth);
        let vals = all_valuations(&syms);
        let v = vals[r.gen_range(0..vals.len())].clone();
        let mut c = t.instantiate(&v).unwrap();
        let mut v = v;
        let mut gen = FreshGen::new();
        syms.iter().for_each(|s| gen.reserve(*s));
        for _ in 0..10 {
            match r.gen_range(0..3) {
                0 => {
                    let (g, qs) = random_gate(&mut r, n);
                    t.apply_clifford(g, &qs).unwrap();
                    c.apply(g, &qs).unwrap();
                }
                1 if !syms.is_empty() => {
                    let tau = [Pauli::X, Pauli::Y, Pauli::Z][r.gen_range(0..3)];
                    let g = random_guard(&mut r, &syms);
                    let q = r.gen_range(0..n);
                    t.apply_sym_pauli(tau, &g, q).unwrap();
                    if g.eval(&v).unwrap() {
                        c.apply(tau.gate(), &[q]).unwrap();
                    }
                }
                _ => {
                    let q = r.gen_range(0..n);
                    let res = t.measure(q, &mut gen);
                    let coin: bool = r.gen();
                    let (bit, random) = c.measure_bit(q, || coin);
                    prop_assert_eq!(random, res.kind == MeasKind::Random);
                    if let (MeasKind::Random, BoolExpr::Var(s)) = (res.kind, &res.outcome) {
                        v.set_bit(*s, coin);
                    }
                    prop_assert_eq!(res.outcome.eval(&v).unwrap(), bit);
                }
            }
            prop_assert!(t.check_invariants().is_ok());
            prop_assert_eq!(t.instantiate(&v).unwrap().canonical_stabilizers(), c.canonical_stabilizers());
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn guarded_pauli_is_an_involution(seed in any::<u64>()) {
        let mut r = rng(seed);
        let n = r.gen_range(1..=8);
        let syms = symbols(r.gen_range(1..=4));
        let t = random_sym_tableau(&mut r, n, &syms, 10);
        let mut u = t.clone();
        let tau = [Pauli::X, Pauli::Y, Pauli::Z][r.gen_range(0..3)];
        let g = random_guard(&mut r, &syms);
        let q = r.gen_range(0..n);
        u.apply_sym_pauli(tau, &g, q).unwrap();
        u.apply_sym_pauli(tau, &g, q).unwrap();
        for v in all_valuations(&syms) {
            prop_assert_eq!(u.instantiate(&v).unwrap(), t.instantiate(&v).unwrap());
        }
    }

    #[test]
    fn deterministic_outcome_rows_multiply_to_z(seed in any::<u64>()) {
        let mut r = rng(seed);
        let n = r.gen_range(1..=8);
        let syms = symbols(r.gen_range(0..=3));
        let t = random_sym_tableau(&mut r, n, &syms, 15);
        for q in (0..n).filter(|&q| t.is_deterministic(q)) {
            let (sign, rows) = t.deterministic_outcome(q);
            let mut acc = PauliString::identity(n);
            let mut k = 0u8;
            for &i in &rows {
                let (p, dk) = acc.mul_raw(&t.stabilizer(i).0).unwrap();
                acc = p;
                k = (k + dk) % 4;
            }
            prop_assert_eq!(&acc, &PauliString::single(n, q, Pauli::Z));
            for v in all_valuations(&syms) {
                let phases = rows.iter().fold(k == 2, |b, &i| b ^ t.stabilizer(i).1.eval(&v).unwrap());
                prop_assert_eq!(phases, sign.eval(&v).unwrap());
            }
        }
    }

    #[test]
    fn equality_is_reflexive_and_symmetric(seed in any::<u64>()) {
        let mut r = rng(seed);
        let n = r.gen_range(1..=6);
        let syms = symbols(r.gen_range(0..=4));
        let a = random_sym_tableau(&mut r, n, &syms, 12);
        let b = random_sym_tableau(&mut r, n, &syms, 12);
        let refl = a.equality_formula(&a).unwrap();
        let ab = a.equality_formula(&b).unwrap();
        let ba = b.equality_formula(&a).unwrap();
        for v in all_valuations(&syms) {
            prop_assert!(refl.eval(&v).unwrap());
            prop_assert_eq!(ab.eval(&v).unwrap(), ba.eval(&v).unwrap());
            let same = a.instantiate(&v).unwrap().same_state(&b.instantiate(&v).unwrap());
            prop_assert_eq!(ab.eval(&v).unwrap(), same);
        }
    }

    #[test]
    fn instantiation_keeps_pauli_rows(seed in any::<u64>()) {
        let mut r = rng(seed);
        let n = r.gen_range(1..=8);
        let syms = symbols(r.gen_range(0..=4));
        let t = random_sym_tableau(&mut r, n, &syms, 12);
        for v in all_valuations(&syms) {
            let c = t.instantiate(&v).unwrap();
            for i in 0..n {
                prop_assert_eq!(&c.stabilizer(i).0, &t.stabilizer(i).0);
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn sampling_is_a_function_of_the_seed(n in 2usize..24, circuit in any::<u64>(), seed in any::<u64>(), shots in 1usize..300) {
        let p = qsym::sampler::gen_layered_random_circuit(n, circuit);
        let s = qsym::sampler::compile_sampler(&p).unwrap();
        let fixed = qsym::expr::Valuation::default();
        let a = s.sample(shots, seed, &fixed, 1).unwrap();
        let b = s.sample(shots, seed, &fixed, 3).unwrap();
        prop_assert_eq!(a.shots, shots);
        prop_assert!(a == b);
    }
}
