#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use num_complex::Complex64 as C;
use qsym::concrete::ConcreteTableau;
use qsym::engine::{concrete_run, explore, path_valuation, CVal, ConcreteStore, ExploreOptions, Externals, HostResolver, RngChooser, Terminal};
use qsym::expr::{BoolExpr, FreshGen, Symbol, Valuation};
use qsym::pauli::{Gate, Pauli, PauliString};
use qsym::program::{Expr, Program, Stmt};
use qsym::tableau::{MeasKind, SymTableau};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

// ---------------------------------------------------------------- dense ---

/// `P|psi>` for a Pauli string with sign bit; qubit `q` is bit `q` of the
/// basis index.
pub fn apply_pauli(p: &PauliString, neg: bool, psi: &[C]) -> Vec<C> {
    let n = p.num_qubits();
    let (mut xm, mut zm, mut ys) = (0usize, 0usize, 0u32);
    for q in 0..n {
        match p.get(q) {
            Pauli::I => {}
            Pauli::X => xm |= 1 << q,
            Pauli::Z => zm |= 1 << q,
            Pauli::Y => {
                xm |= 1 << q;
                zm |= 1 << q;
                ys += 1;
            }
        }
    }
    // Y = iXZ
    let base = C::i().powu(ys) * if neg { -1.0 } else { 1.0 };
    let mut out = vec![C::new(0.0, 0.0); psi.len()];
    for (j, a) in psi.iter().enumerate() {
        let sign = if (j & zm).count_ones() % 2 == 1 { -1.0 } else { 1.0 };
        out[j ^ xm] += base * sign * a;
    }
    out
}

fn norm(psi: &[C]) -> f64 {
    psi.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
}

/// The unique state fixed by every signed generator.
pub fn state_vector(gens: &[(PauliString, bool)]) -> Vec<C> {
    let n = gens[0].0.num_qubits();
    let dim = 1 << n;
    for k in 0..dim {
        let mut psi = vec![C::new(0.0, 0.0); dim];
        psi[k] = C::new(1.0, 0.0);
        for (p, s) in gens {
            let pp = apply_pauli(p, *s, &psi);
            psi = psi.iter().zip(&pp).map(|(a, b)| (a + b) * 0.5).collect();
        }
        let nn = norm(&psi);
        if nn > 1e-6 {
            return psi.into_iter().map(|a| a / nn).collect();
        }
    }
    panic!("generators fix no state");
}

pub fn fidelity(a: &[C], b: &[C]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum::<C>().norm_sqr()
}

pub fn prob_zero(psi: &[C], q: usize) -> f64 {
    psi.iter().enumerate().filter(|(j, _)| j >> q & 1 == 0).map(|(_, a)| a.norm_sqr()).sum()
}

/// Post-measurement state for outcome `b` on qubit `q`, normalized.
pub fn project(psi: &[C], q: usize, b: bool) -> Vec<C> {
    let out: Vec<C> =
        psi.iter().enumerate().map(|(j, a)| if (j >> q & 1 == 1) == b { *a } else { C::new(0.0, 0.0) }).collect();
    let nn = norm(&out);
    out.into_iter().map(|a| a / nn).collect()
}

// ------------------------------------------------------ group oracle ---

/// Single-qubit product `a·b = i^k c`, from the Pauli multiplication table.
fn mul1(a: char, b: char) -> (char, u8) {
    match (a, b) {
        ('I', p) | (p, 'I') => (p, 0),
        (p, q) if p == q => ('I', 0),
        ('X', 'Y') => ('Z', 1),
        ('Y', 'Z') => ('X', 1),
        ('Z', 'X') => ('Y', 1),
        ('Y', 'X') => ('Z', 3),
        ('Z', 'Y') => ('X', 3),
        ('X', 'Z') => ('Y', 3),
        _ => unreachable!(),
    }
}

/// Every element of the signed group generated by `gens`, as `(string, sign)`.
pub fn signed_group(gens: &[(PauliString, bool)]) -> BTreeSet<(String, bool)> {
    let n = gens[0].0.num_qubits();
    let mut out = BTreeSet::new();
    for mask in 0u32..1 << gens.len() {
        let mut cur: Vec<char> = vec!['I'; n];
        let mut k = 0u8;
        for (i, (p, s)) in gens.iter().enumerate() {
            if mask >> i & 1 == 1 {
                let chars: Vec<char> = p.to_string().chars().collect();
                for q in 0..n {
                    let (c, d) = mul1(cur[q], chars[q]);
                    cur[q] = c;
                    k = (k + d) % 4;
                }
                if *s {
                    k = (k + 2) % 4;
                }
            }
        }
        assert!(k % 2 == 0, "non-Hermitian product: generators do not commute");
        out.insert((cur.into_iter().collect(), k == 2));
    }
    out
}

// ----------------------------------------------- random symbolic state ---

pub fn symbols(m: usize) -> Vec<Symbol> {
    (0..m).map(|i| Symbol::new(&format!("a{i}"))).collect()
}

/// All `2^m` assignments to `syms`.
pub fn all_valuations(syms: &[Symbol]) -> Vec<Valuation> {
    (0u32..1 << syms.len())
        .map(|bits| {
            let mut v = Valuation::new();
            for (i, s) in syms.iter().enumerate() {
                v.set_bit(*s, bits >> i & 1 == 1);
            }
            v
        })
        .collect()
}

pub fn random_guard(r: &mut impl Rng, syms: &[Symbol]) -> BoolExpr {
    let pick = |r: &mut dyn rand::RngCore| BoolExpr::Var(syms[r.gen_range(0..syms.len())]);
    match r.gen_range(0..5) {
        0 | 1 => pick(r),
        2 => BoolExpr::and(pick(r), pick(r)),
        3 => BoolExpr::xor(pick(r), pick(r)),
        _ => BoolExpr::not(BoolExpr::or(pick(r), pick(r))),
    }
}

fn random_phase(r: &mut impl Rng, syms: &[Symbol]) -> BoolExpr {
    let mut items = vec![BoolExpr::constant(r.gen())];
    for s in syms {
        if r.gen_bool(0.4) {
            items.push(BoolExpr::Var(*s));
        }
    }
    BoolExpr::xor_all(items)
}

pub fn random_gate(r: &mut impl Rng, n: usize) -> (Gate, Vec<usize>) {
    let singles = [Gate::H, Gate::S, Gate::X, Gate::Y, Gate::Z];
    if n >= 2 && r.gen_bool(0.3) {
        let mut qs: Vec<usize> = (0..n).collect();
        qs.shuffle(r);
        (Gate::Cnot, vec![qs[0], qs[1]])
    } else {
        (*singles.choose(r).unwrap(), vec![r.gen_range(0..n)])
    }
}

/// `Z_q` generators with random symbolic phases, then `depth` random
/// Cliffords and guarded Paulis.
pub fn random_sym_tableau(r: &mut impl Rng, n: usize, syms: &[Symbol], depth: usize) -> SymTableau {
    let gens: Vec<(PauliString, BoolExpr)> =
        (0..n).map(|q| (PauliString::single(n, q, Pauli::Z), random_phase(r, syms))).collect();
    let mut t = SymTableau::from_generators(&gens).unwrap();
    for _ in 0..depth {
        if !syms.is_empty() && r.gen_bool(0.25) {
            let tau = *[Pauli::X, Pauli::Y, Pauli::Z].choose(r).unwrap();
            t.apply_sym_pauli(tau, &random_guard(r, syms), r.gen_range(0..n)).unwrap();
        } else {
            let (g, qs) = random_gate(r, n);
            t.apply_clifford(g, &qs).unwrap();
        }
    }
    t
}

/// Same state as `t`, described by randomly recombined generators.
pub fn recombined(r: &mut impl Rng, t: &SymTableau) -> SymTableau {
    let n = t.num_qubits();
    let mut gens = t.stabilizers();
    for _ in 0..2 * n {
        let (i, j) = (r.gen_range(0..n), r.gen_range(0..n));
        if i == j {
            continue;
        }
        let (p, k) = gens[i].0.mul_raw(&gens[j].0).unwrap();
        let ph = BoolExpr::xor_all([gens[i].1.clone(), gens[j].1.clone(), BoolExpr::constant(k == 2)]);
        gens[i] = (p, ph);
    }
    gens.shuffle(r);
    SymTableau::from_generators(&gens).unwrap()
}

// ------------------------------------------------------ oracle suites ---

#[derive(Debug, Default)]
pub struct Tally {
    pub checks: usize,
    pub failures: Vec<String>,
}

impl Tally {
    pub fn check(&mut self, ok: bool, what: impl FnOnce() -> String) {
        self.checks += 1;
        if !ok && self.failures.len() < 20 {
            self.failures.push(what());
        }
    }

    pub fn ok(&self) -> bool {
        self.failures.is_empty()
    }
}

fn concrete_vec(t: &ConcreteTableau) -> Vec<C> {
    state_vector(&t.stabilizers())
}

/// Measurement outcomes of random symbolic states against dense vectors.
pub fn oracle_measurement(seed: u64, cases: usize, tally: &mut Tally) {
    let mut r = rng(seed);
    for case in 0..cases {
        let n = r.gen_range(1..=4);
        let syms = symbols(r.gen_range(0..=4));
        let t = random_sym_tableau(&mut r, n, &syms, 12);
        let q = r.gen_range(0..n);
        let mut after = t.clone();
        let mut gen = FreshGen::new();
        for s in &syms {
            gen.reserve(*s);
        }
        let res = after.measure(q, &mut gen);
        for v in all_valuations(&syms) {
            let psi = concrete_vec(&t.instantiate(&v).unwrap());
            let p0 = prob_zero(&psi, q);
            match res.kind {
                MeasKind::Deterministic => {
                    let b = res.outcome.eval(&v).unwrap();
                    let p = if b { 1.0 - p0 } else { p0 };
                    tally.check((p - 1.0).abs() < 1e-9, || format!("case {case}: deterministic {b} has prob {p}"));
                    let post = concrete_vec(&after.instantiate(&v).unwrap());
                    tally.check(fidelity(&post, &psi) > 1.0 - 1e-9, || format!("case {case}: state changed"));
                }
                MeasKind::Random => {
                    tally.check((p0 - 0.5).abs() < 1e-9, || format!("case {case}: random outcome has p0={p0}"));
                    let BoolExpr::Var(s) = res.outcome else { panic!("random outcome is not a symbol") };
                    for b in [false, true] {
                        let mut vb = v.clone();
                        vb.set_bit(s, b);
                        let post = concrete_vec(&after.instantiate(&vb).unwrap());
                        let want = project(&psi, q, b);
                        tally.check(fidelity(&post, &want) > 1.0 - 1e-9, || {
                            format!("case {case}: post-measurement state for outcome {b}")
                        });
                    }
                }
            }
        }
    }
}

/// `canonical_form` preserves the signed group and is in echelon form.
pub fn oracle_canonical(seed: u64, cases: usize, tally: &mut Tally) {
    let mut r = rng(seed);
    for case in 0..cases {
        let n = r.gen_range(1..=4);
        let syms = symbols(r.gen_range(0..=4));
        let t = random_sym_tableau(&mut r, n, &syms, 12);
        let c = t.canonical_form();
        tally.check(c.check_invariants().is_ok(), || format!("case {case}: invariants"));
        tally.check(c.canonical_form() == c, || format!("case {case}: not a fixed point"));
        let rows: Vec<PauliString> = c.stabilizers().into_iter().map(|(p, _)| p).collect();
        tally.check(echelon(&rows), || format!("case {case}: not in echelon form"));
        for v in all_valuations(&syms) {
            let a = signed_group(&t.instantiate(&v).unwrap().stabilizers());
            let b = signed_group(&c.instantiate(&v).unwrap().stabilizers());
            tally.check(a == b, || format!("case {case}: group changed"));
        }
    }
}

/// Pivots increase (X columns before Z columns) and each pivot column has a
/// single row with that bit set.
pub fn echelon(rows: &[PauliString]) -> bool {
    let n = rows.len();
    let bit = |p: &PauliString, col: usize| if col < n { p.x_bit(col) } else { p.z_bit(col - n) };
    let mut last = None;
    for (i, p) in rows.iter().enumerate() {
        let Some(piv) = (0..2 * n).find(|&c| bit(p, c)) else { return false };
        if last.is_some_and(|l| piv <= l) {
            return false;
        }
        if rows.iter().enumerate().any(|(j, o)| j != i && bit(o, piv)) {
            return false;
        }
        last = Some(piv);
    }
    true
}

/// `equality_formula` against dense-vector equality.
pub fn oracle_equality(seed: u64, cases: usize, tally: &mut Tally) {
    let mut r = rng(seed);
    for case in 0..cases {
        let n = r.gen_range(1..=4);
        let syms = symbols(r.gen_range(0..=4));
        let a = random_sym_tableau(&mut r, n, &syms, 12);
        let b = match r.gen_range(0..4) {
            0 => recombined(&mut r, &a),
            1 if !syms.is_empty() => {
                let mut b = recombined(&mut r, &a);
                let tau = *[Pauli::X, Pauli::Y, Pauli::Z].choose(&mut r).unwrap();
                b.apply_sym_pauli(tau, &random_guard(&mut r, &syms), r.gen_range(0..n)).unwrap();
                b
            }
            2 => {
                let mut b = a.clone();
                let (g, qs) = random_gate(&mut r, n);
                b.apply_clifford(g, &qs).unwrap();
                b
            }
            _ => random_sym_tableau(&mut r, n, &syms, 12),
        };
        let f = a.equality_formula(&b).unwrap();
        let g = b.equality_formula(&a).unwrap();
        for v in all_valuations(&syms) {
            let same = fidelity(&concrete_vec(&a.instantiate(&v).unwrap()), &concrete_vec(&b.instantiate(&v).unwrap()))
                > 1.0 - 1e-9;
            tally.check(f.eval(&v).unwrap() == same, || format!("case {case}: formula says {}, dense says {same}", !same));
            tally.check(g.eval(&v).unwrap() == same, || format!("case {case}: asymmetric"));
        }
    }
}

// ------------------------------------------------ random programs ---

/// Random program over `n` qubits with at most `len` top-level statements,
/// reading only variables that are bound on every path.
pub fn random_program(r: &mut impl Rng, n: usize, len: usize) -> Program {
    let inputs: Vec<String> = (0..r.gen_range(0..=2)).map(|i| format!("in{i}")).collect();
    let mut vars = inputs.clone();
    let mut fresh = 0usize;
    let mut body = Vec::new();
    while body.iter().map(Stmt::size).sum::<usize>() < len {
        let s = random_stmt(r, n, &mut vars, &mut fresh, true);
        body.push(s);
    }
    Program::new(n, body).with_inputs(inputs)
}

fn random_expr(r: &mut impl Rng, vars: &[String]) -> Expr {
    let v = |r: &mut dyn rand::RngCore| Expr::var(vars[r.gen_range(0..vars.len())].clone());
    match r.gen_range(0..6) {
        0 | 1 => v(r),
        2 => Expr::Eq(Box::new(v(r)), Box::new(Expr::Const(r.gen_range(0..2)))),
        3 => Expr::Xor(Box::new(v(r)), Box::new(v(r))),
        4 => Expr::And(Box::new(v(r)), Box::new(v(r))),
        _ => Expr::Not(Box::new(Expr::Or(Box::new(v(r)), Box::new(v(r))))),
    }
}

fn random_stmt(r: &mut impl Rng, n: usize, vars: &mut Vec<String>, fresh: &mut usize, top: bool) -> Stmt {
    let roll = r.gen_range(0..100);
    if roll < 40 || (vars.is_empty() && roll >= 60) {
        let (g, qs) = random_gate(r, n);
        return Stmt::Unitary { gate: g, qubits: qs };
    }
    if roll < 60 {
        *fresh += 1;
        let var = format!("m{fresh}");
        vars.push(var.clone());
        return Stmt::measure(r.gen_range(0..n), var);
    }
    if roll < 72 {
        let pauli = *[Pauli::X, Pauli::Y, Pauli::Z].choose(r).unwrap();
        return Stmt::sym_pauli(pauli, random_expr(r, vars), r.gen_range(0..n));
    }
    if roll < 80 {
        *fresh += 1;
        let var = format!("x{fresh}");
        let expr = random_expr(r, vars);
        vars.push(var.clone());
        return Stmt::Assign { var, expr };
    }
    if !top {
        let (g, qs) = random_gate(r, n);
        return Stmt::Unitary { gate: g, qubits: qs };
    }
    let cond = random_expr(r, vars);
    if roll < 88 {
        // single Pauli, liftable
        let pauli = *[Gate::X, Gate::Y, Gate::Z].choose(r).unwrap();
        return Stmt::If { cond, then_branch: vec![Stmt::gate(pauli, &[r.gen_range(0..n)])], else_branch: vec![] };
    }
    // both branches bind the same new variable
    *fresh += 1;
    let shared = format!("b{fresh}");
    let mut branches = Vec::new();
    for _ in 0..2 {
        let mut local = vars.clone();
        let mut f = *fresh * 1000;
        let mut b: Vec<Stmt> = (0..r.gen_range(0..3)).map(|_| random_stmt(r, n, &mut local, &mut f, false)).collect();
        b.push(Stmt::measure(r.gen_range(0..n), shared.clone()));
        branches.push(b);
    }
    let else_branch = branches.pop().unwrap();
    let then_branch = branches.pop().unwrap();
    vars.push(shared);
    Stmt::If { cond, then_branch, else_branch }
}

/// Runs `p` concretely and checks the matching symbolic terminal. Returns
/// `None` when everything agrees.
pub fn co_execute(p: &Program, terminals: &[Terminal], r: &mut impl Rng) -> Option<String> {
    let inputs: ConcreteStore = p.inputs.iter().map(|v| (v.clone(), CVal::Bit(r.gen()))).collect();
    let mut chooser = RngChooser(rng(r.gen()));
    let run = match concrete_run(p, &inputs, ConcreteTableau::zero_state(p.num_qubits), &mut chooser, &mut HostResolver, &Externals::new()) {
        Ok(run) => run,
        Err(e) => return Some(format!("concrete run failed: {e}")),
    };
    let matching: Vec<(&Terminal, Valuation)> = terminals
        .iter()
        .filter(|t| t.probs.len() == run.random_count)
        .map(|t| (t, path_valuation(t, &inputs, &run)))
        .filter(|(t, v)| t.pc.eval(v).unwrap_or(false))
        .collect();
    if matching.len() != 1 {
        return Some(format!("{} terminals match the concrete run", matching.len()));
    }
    let (t, v) = &matching[0];
    for (name, cv) in &run.store {
        let Some(sv) = t.store.get(name) else { return Some(format!("`{name}` missing from symbolic store")) };
        match sv.eval(v) {
            Ok(x) if x.as_u64() == cv.as_u64() => {}
            other => return Some(format!("`{name}`: symbolic {other:?}, concrete {cv:?}")),
        }
    }
    if t.store.len() != run.store.len() {
        return Some("store domains differ".into());
    }
    let st = match t.state.instantiate(v) {
        Ok(s) => s,
        Err(e) => return Some(format!("instantiate: {e}")),
    };
    if !st.same_state(&run.state) {
        return Some(format!("final states differ:\n{st:?}\nvs\n{:?}", run.state));
    }
    if t.probability() != run.probability() {
        return Some(format!("probability {} vs {}", t.probability(), run.probability()));
    }
    let outcomes: Vec<Option<bool>> = t.measurements.iter().map(|m| m.outcome.eval(v).ok()).collect();
    let concrete: Vec<Option<bool>> = run.measurements.iter().map(|m| Some(m.value)).collect();
    if outcomes != concrete {
        return Some("measurement records differ".into());
    }
    None
}

/// Sum of path probabilities over the terminals consistent with `inputs`,
/// by enumerating the random symbols of each. `None` when too many symbols.
pub fn total_probability(terminals: &[Terminal], inputs: &BTreeMap<String, bool>) -> Option<f64> {
    let mut total = 0.0;
    for t in terminals {
        if t.probs.len() > 12 {
            return None;
        }
        let mut hits = 0u32;
        for bits in 0u32..1 << t.probs.len() {
            let mut v = Valuation::new();
            for (k, b) in inputs {
                v.set_bit(Symbol::new(k), *b);
            }
            for (i, s) in t.probs.iter().enumerate() {
                v.set_bit(*s, bits >> i & 1 == 1);
            }
            if t.pc.eval(&v).ok()? {
                hits += 1;
            }
        }
        total += hits as f64 * t.probability();
    }
    Some(total)
}

/// Soundness co-execution over `programs` random programs.
pub fn soundness_suite(seed: u64, programs: usize, runs_per_program: usize, tally: &mut Tally) {
    let mut r = rng(seed);
    for i in 0..programs {
        let n = r.gen_range(1..=12);
        let len = r.gen_range(1..=40);
        let p = random_program(&mut r, n, len);
        for lift in [true, false] {
            let opts = ExploreOptions { lift_pauli_conditionals: lift, ..ExploreOptions::default() };
            let terminals = match explore(&p, SymTableau::zero_state(n), &Externals::new(), &opts) {
                Ok(t) => t,
                Err(e) => {
                    tally.check(false, || format!("program {i}: explore failed: {e}\n{p}"));
                    continue;
                }
            };
            for _ in 0..runs_per_program {
                let res = co_execute(&p, &terminals, &mut r);
                tally.check(res.is_none(), || format!("program {i} (lift={lift}): {}\n{p}", res.unwrap()));
            }
            let inputs: BTreeMap<String, bool> = p.inputs.iter().map(|v| (v.clone(), r.gen())).collect();
            if let Some(total) = total_probability(&terminals, &inputs) {
                tally.check((total - 1.0).abs() < 1e-9, || format!("program {i}: path probabilities sum to {total}\n{p}"));
            }
        }
    }
}
