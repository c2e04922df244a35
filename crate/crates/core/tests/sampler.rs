mod common;

use std::collections::BTreeMap;

use qsym::expr::{BoolExpr, Symbol, Valuation};
use qsym::program::parse;
use qsym::sampler::{compile_sampler, empirical_tv, gen_layered_random_circuit, monte_carlo, SampleMatrix, Sampler};

const BITFLIP: &str = include_str!("../../../programs/bitflip3_errors.qp");

fn bits(e: &BoolExpr, syms: &[Symbol]) -> Vec<bool> {
    common::all_valuations(syms).iter().map(|v| e.eval(v).unwrap()).collect()
}

#[test]
fn bitflip_measurements_are_error_parities() {
    let p = parse(BITFLIP).unwrap();
    let s = compile_sampler(&p).unwrap();
    assert_eq!(s.names, ["m1", "m2"]);
    assert!(s.random.is_empty());
    let es: Vec<Symbol> = ["e_1", "e_2", "e_3"].iter().map(|n| Symbol::new(n)).collect();
    assert_eq!(s.fixed, es);
    let (e1, e2, e3) = (BoolExpr::var("e_1"), BoolExpr::var("e_2"), BoolExpr::var("e_3"));
    assert_eq!(bits(&s.exprs[0], &es), bits(&BoolExpr::xor(e1, e2.clone()), &es));
    assert_eq!(bits(&s.exprs[1], &es), bits(&BoolExpr::xor(e2, e3), &es));

    let mut v = Valuation::new();
    for (s, b) in es.iter().zip([false, true, false]) {
        v.set_bit(*s, b);
    }
    let m = s.sample(100, 3, &v, 1).unwrap();
    assert_eq!((m.ones(0), m.ones(1)), (100, 100));
    assert!(s.sample(10, 3, &Valuation::new(), 1).is_err());
}

#[test]
fn plus_state_mean_is_half() {
    let s = compile_sampler(&parse("qubits 1; H q1; measure q1 -> c;").unwrap()).unwrap();
    assert_eq!(s.random.len(), 1);
    let m = s.sample(10_000, 5, &Valuation::new(), 1).unwrap();
    let mean = m.ones(0) as f64 / 1e4;
    assert!((0.48..=0.52).contains(&mean), "{mean}");
}

#[test]
fn ghz_columns_agree_and_fresh_qubits_read_zero() {
    let s = compile_sampler(&parse(include_str!("../../../programs/ghz4.qp")).unwrap()).unwrap();
    let m = s.sample(1000, 9, &Valuation::new(), 2).unwrap();
    for c in 1..4 {
        assert_eq!(m.column(c), m.column(0));
    }
    let s = compile_sampler(&parse("qubits 2; H q1; measure q2 -> z;").unwrap()).unwrap();
    assert_eq!(s.exprs[0], BoolExpr::Const(false));
    assert_eq!(s.sample(500, 1, &Valuation::new(), 1).unwrap().ones(0), 0);
}

#[test]
fn branching_programs_are_rejected() {
    let p = parse("qubits 2; H q1; measure q1 -> a; if (a == 1) { H q2; } else { S q2; }").unwrap();
    assert!(compile_sampler(&p).is_err());
}

#[test]
fn deterministic_measurements_use_no_random_symbols() {
    for seed in 0..5 {
        let p = gen_layered_random_circuit(12, seed);
        let s = compile_sampler(&p).unwrap();
        let t = &qsym::engine::explore(
            &p,
            qsym::tableau::SymTableau::zero_state(12),
            &qsym::engine::Externals::new(),
            &Default::default(),
        )
        .unwrap()[0];
        for (m, e) in t.measurements.iter().zip(&s.exprs) {
            if m.kind == qsym::tableau::MeasKind::Deterministic {
                // only random symbols drawn before this measurement may appear
                assert!(e.symbols().iter().all(|x| s.random.contains(x)));
            } else {
                assert!(matches!(e, BoolExpr::Var(_)));
            }
        }
    }
}

/// Exact joint distribution of all columns by enumerating the random symbols.
fn exact(s: &Sampler) -> BTreeMap<Vec<bool>, f64> {
    assert!(s.random.len() <= 16 && s.fixed.is_empty());
    let mut out = BTreeMap::new();
    let w = 1.0 / (1u64 << s.random.len()) as f64;
    for v in common::all_valuations(&s.random) {
        let row: Vec<bool> = s.exprs.iter().map(|e| e.eval(&v).unwrap()).collect();
        *out.entry(row).or_insert(0.0) += w;
    }
    out
}

fn tv_to_exact(m: &SampleMatrix, dist: &BTreeMap<Vec<bool>, f64>) -> f64 {
    let mut hist: BTreeMap<Vec<bool>, f64> = BTreeMap::new();
    for shot in 0..m.shots {
        let row: Vec<bool> = (0..m.cols).map(|c| m.get(shot, c)).collect();
        *hist.entry(row).or_insert(0.0) += 1.0 / m.shots as f64;
    }
    let keys: std::collections::BTreeSet<&Vec<bool>> = hist.keys().chain(dist.keys()).collect();
    keys.into_iter().map(|k| (hist.get(k).unwrap_or(&0.0) - dist.get(k).unwrap_or(&0.0)).abs()).sum::<f64>() / 2.0
}

#[test]
fn small_circuits_match_exact_and_monte_carlo() {
    let mut checked = 0;
    for (n, seed) in [(2, 1), (3, 2), (4, 3), (5, 4), (6, 5)] {
        let p = gen_layered_random_circuit(n, seed);
        let s = compile_sampler(&p).unwrap();
        if s.random.len() > 10 {
            continue;
        }
        let dist = exact(&s);
        let a = s.sample(100_000, seed, &Valuation::new(), 1).unwrap();
        let b = monte_carlo(&p, 100_000, seed, &Valuation::new(), 1).unwrap();
        assert_eq!(a.cols, b.cols);
        let ta = tv_to_exact(&a, &dist);
        let tb = tv_to_exact(&b, &dist);
        assert!(ta <= 0.05 && tb <= 0.05, "n={n}: sampler {ta}, monte carlo {tb}");
        // monte carlo never produces a row of probability 0
        for shot in 0..b.shots {
            let row: Vec<bool> = (0..b.cols).map(|c| b.get(shot, c)).collect();
            assert!(dist.contains_key(&row), "n={n}: impossible outcome {row:?}");
        }
        checked += 1;
    }
    assert!(checked >= 3, "only {checked} circuits small enough to enumerate");
}

#[test]
fn ten_qubit_windows_match_monte_carlo() {
    for seed in 0..3 {
        let p = gen_layered_random_circuit(10, 100 + seed);
        let s = compile_sampler(&p).unwrap();
        let a = s.sample(100_000, seed, &Valuation::new(), 2).unwrap();
        let b = monte_carlo(&p, 100_000, seed, &Valuation::new(), 2).unwrap();
        for start in 0..a.cols.saturating_sub(5) {
            let cols: Vec<usize> = (start..start + 6).collect();
            let tv = empirical_tv(&a, &b, &cols);
            assert!(tv <= 0.05, "seed {seed}, columns {cols:?}: {tv}");
        }
    }
}

#[test]
fn sampling_is_reproducible_and_job_independent() {
    let p = gen_layered_random_circuit(30, 4);
    let s = compile_sampler(&p).unwrap();
    let a = s.sample(5000, 77, &Valuation::new(), 1).unwrap();
    assert_eq!(a, s.sample(5000, 77, &Valuation::new(), 3).unwrap());
    assert_ne!(a, s.sample(5000, 78, &Valuation::new(), 1).unwrap());
    assert_eq!(a.to_text().lines().count(), 5000);
}
