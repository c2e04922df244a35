//! Code families, decoder programs and the decoder verification driver.
//!
//! Decoders call an external decoding function whose only contract is its
//! condition: the returned correction reproduces the measured syndrome and
//! has weight at most the decoder's bound. Error symbols are `e_j` for X
//! errors and `ez_j` for Z errors (1-based).

pub mod gf2;
mod tanner;
mod verify;

use serde::Serialize;
use thiserror::Error;

use crate::engine::{CVal, ExternalFn, Externals, SymValue};
use crate::expr::{BoolExpr, Formula};
use crate::pauli::{Gate, Pauli, PauliString};
use crate::program::{Expr, Program, Stmt};

use gf2::{BitMatrix, RowBasis};

pub use tanner::{hamming_7_4, simplex_7_3, tanner, TannerParts};
pub use verify::{
    initial_state, replay, verify_decoder, with_errors, BasisKind, Counterexample, ReplayReport, StageTiming, Verdict, VerifyError,
    VerifyOptions, VerifyReport,
};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CodeError {
    #[error("invalid parameter: {0}")]
    Parameter(String),
    #[error("code invariant violated: {0}")]
    Invariant(String),
}

/// A stabilizer code: checks (possibly dependent) and paired logicals.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CodeSpec {
    pub name: String,
    pub n: usize,
    pub k: usize,
    pub x_checks: Vec<PauliString>,
    pub z_checks: Vec<PauliString>,
    pub logical_z: Vec<PauliString>,
    pub logical_x: Vec<PauliString>,
}

fn anticommute(a: &PauliString, b: &PauliString) -> bool {
    !a.commutes(b).expect("same length")
}

impl CodeSpec {
    pub fn checks(&self) -> impl Iterator<Item = &PauliString> {
        self.x_checks.iter().chain(&self.z_checks)
    }

    /// A maximal independent subset of the checks, X checks first.
    pub fn independent_checks(&self) -> Vec<PauliString> {
        let mut basis = RowBasis::new();
        self.checks().filter(|c| basis.insert(&symplectic_vector(c))).cloned().collect()
    }

    pub fn check_invariants(&self) -> Result<(), CodeError> {
        let bad = |m: String| Err(CodeError::Invariant(m));
        let all: Vec<&PauliString> = self.checks().collect();
        if all.iter().chain(&self.logical_z.iter().collect::<Vec<_>>()).any(|p| p.num_qubits() != self.n) {
            return bad("operator length differs from n".into());
        }
        for (i, a) in all.iter().enumerate() {
            for b in &all[i + 1..] {
                if anticommute(a, b) {
                    return bad(format!("checks {a} and {b} anticommute"));
                }
            }
        }
        if self.logical_z.len() != self.k || self.logical_x.len() != self.k {
            return bad(format!("expected {} logical pairs", self.k));
        }
        for (i, z) in self.logical_z.iter().enumerate() {
            for (j, x) in self.logical_x.iter().enumerate() {
                if anticommute(z, x) != (i == j) {
                    return bad(format!("logical Z{} and X{} have the wrong commutation", i + 1, j + 1));
                }
            }
            for (j, z2) in self.logical_z.iter().enumerate().skip(i + 1) {
                if anticommute(z, z2) || anticommute(&self.logical_x[i], &self.logical_x[j]) {
                    return bad("logical operators of the same type anticommute".into());
                }
            }
            for c in &all {
                if anticommute(z, c) || anticommute(&self.logical_x[i], c) {
                    return bad(format!("logical {} anticommutes with check {c}", i + 1));
                }
            }
        }
        let rank = self.independent_checks().len();
        if rank + self.k != self.n {
            return bad(format!("{} independent checks and {} logicals on {} qubits", rank, self.k, self.n));
        }
        Ok(())
    }

    pub fn x_check_matrix(&self) -> BitMatrix {
        support_matrix(self.n, &self.x_checks, true)
    }

    pub fn z_check_matrix(&self) -> BitMatrix {
        support_matrix(self.n, &self.z_checks, false)
    }

    /// JSON export; check matrices as rows of `0`/`1` characters.
    pub fn to_json(&self) -> serde_json::Value {
        #[derive(Serialize)]
        struct Out<'a> {
            name: &'a str,
            n: usize,
            k: usize,
            x_checks: Vec<String>,
            z_checks: Vec<String>,
            logical_z: Vec<String>,
            logical_x: Vec<String>,
        }
        let bits = |ps: &[PauliString], x: bool| -> Vec<String> {
            ps.iter()
                .map(|p| (0..p.num_qubits()).map(|q| {
                    let b = if x { p.x_bit(q) } else { p.z_bit(q) };
                    if b { '1' } else { '0' }
                }).collect())
                .collect()
        };
        let strs = |ps: &[PauliString]| ps.iter().map(|p| p.to_string()).collect();
        serde_json::to_value(Out {
            name: &self.name,
            n: self.n,
            k: self.k,
            x_checks: bits(&self.x_checks, true),
            z_checks: bits(&self.z_checks, false),
            logical_z: strs(&self.logical_z),
            logical_x: strs(&self.logical_x),
        })
        .expect("serializable")
    }
}

fn support_matrix(n: usize, ps: &[PauliString], x: bool) -> BitMatrix {
    let rows = ps.iter().map(|p| if x { p.x_words().to_vec() } else { p.z_words().to_vec() }).collect();
    BitMatrix::from_rows(n, rows)
}

/// `x | z` as one 2n-bit vector whose inner product with another vector's
/// swapped halves is the symplectic form.
fn symplectic_vector(p: &PauliString) -> Vec<u64> {
    let n = p.num_qubits();
    let mut v = vec![0u64; (2 * n).div_ceil(64)];
    for q in 0..n {
        if p.x_bit(q) {
            v[q / 64] |= 1 << (q % 64);
        }
        if p.z_bit(q) {
            let b = n + q;
            v[b / 64] |= 1 << (b % 64);
        }
    }
    v
}

fn css_checks(m: &BitMatrix, p: Pauli) -> Vec<PauliString> {
    (0..m.num_rows()).map(|r| PauliString::from_support(m.num_cols(), &m.support(r), p)).collect()
}

/// Paired logical operators of a CSS code: Z logicals span
/// `ker H_X / rowspace H_Z`, X logicals span `ker H_Z / rowspace H_X`, and
/// the X basis is re-mixed so that `Z̄_i` anticommutes only with `X̄_i`.
pub fn css_logicals(hx: &BitMatrix, hz: &BitMatrix) -> (Vec<PauliString>, Vec<PauliString>) {
    let n = hx.num_cols();
    let pick = |ker: BitMatrix, stabs: &BitMatrix| -> Vec<Vec<u64>> {
        let mut basis = RowBasis::new();
        for r in stabs.rows() {
            basis.insert(r);
        }
        ker.rows().filter(|v| basis.insert(v)).map(<[u64]>::to_vec).collect()
    };
    let zs = pick(hx.kernel(), hz);
    let xs = pick(hz.kernel(), hx);
    assert_eq!(zs.len(), xs.len(), "logical counts differ");
    let k = zs.len();
    let zm = BitMatrix::from_rows(n, zs);
    let xm = BitMatrix::from_rows(n, xs);
    let pairing = zm.mul_transpose(&xm);
    let c = pairing.inverse().expect("logical pairing is non-degenerate");
    // X'_j = sum_l C[l][j] X_l
    let xm2 = c.transpose().mul(&xm);
    let to_paulis = |m: &BitMatrix, p: Pauli| css_checks(m, p);
    debug_assert_eq!(zm.mul_transpose(&xm2), BitMatrix::identity(k));
    (to_paulis(&zm, Pauli::Z), to_paulis(&xm2, Pauli::X))
}

/// `n`-qubit repetition code with checks `Z_j Z_{j+1}` and logicals
/// `Z̄ = Z_1`, `X̄ = X_1⋯X_n`.
pub fn repetition_code(n: usize) -> Result<CodeSpec, CodeError> {
    if n < 3 {
        return Err(CodeError::Parameter(format!("repetition code needs n >= 3, got {n}")));
    }
    let z_checks = (0..n - 1).map(|j| PauliString::from_support(n, &[j, j + 1], Pauli::Z)).collect();
    let all: Vec<usize> = (0..n).collect();
    let code = CodeSpec {
        name: format!("repetition-{n}"),
        n,
        k: 1,
        x_checks: vec![],
        z_checks,
        logical_z: vec![PauliString::single(n, 0, Pauli::Z)],
        logical_x: vec![PauliString::from_support(n, &all, Pauli::X)],
    };
    code.check_invariants()?;
    Ok(code)
}

/// Number of errors a distance-`d` code corrects.
pub fn correctable(d: usize) -> usize {
    d.saturating_sub(1) / 2
}

fn guard_all(vars: impl IntoIterator<Item = String>) -> Expr {
    Expr::Eq(Box::new(Expr::all(vars.into_iter().map(Expr::Var))), Box::new(Expr::Const(1)))
}

/// The repetition decoder: measure every `Z_j Z_{j+1}` (and `Z_n Z_1`) into
/// `s_j`, call `mwpm`, apply `X[r_j == 1] q_j`. With `buggy`, appends
/// `X[r_1*…*r_D == 1] q_1` where `D = ⌊(n−1)/2⌋`.
pub fn repetition(n: usize, buggy: bool) -> Result<(CodeSpec, Program, Externals), CodeError> {
    let code = repetition_code(n)?;
    let bound = correctable(n);
    let mut body = Vec::new();
    for j in 0..n {
        let (a, b) = (j, (j + 1) % n);
        body.push(Stmt::gate(Gate::Cnot, &[a, b]));
        body.push(Stmt::measure(b, format!("s_{}", j + 1)));
        body.push(Stmt::gate(Gate::Cnot, &[a, b]));
    }
    body.push(Stmt::ExtCall {
        outs: (1..=n).map(|j| format!("r_{j}")).collect(),
        func: "mwpm".into(),
        args: (1..=n).map(|j| format!("s_{j}")).collect(),
    });
    for j in 0..n {
        body.push(Stmt::sym_pauli(Pauli::X, Expr::is_one(format!("r_{}", j + 1)), j));
    }
    if buggy {
        body.push(Stmt::sym_pauli(Pauli::X, guard_all((1..=bound.max(1)).map(|j| format!("r_{j}"))), 0));
    }
    let mut ext = Externals::new();
    ext.register(repetition_mwpm(n, bound));
    Ok((code, Program::new(n, body), ext))
}

fn bits_of(vals: &[SymValue]) -> Vec<BoolExpr> {
    vals.iter().map(|v| v.as_bit().expect("bit-valued").clone()).collect()
}

/// Condition: `r_j ⊕ r_{j+1} = s_j` around the cycle and `|r| ≤ bound`.
fn repetition_mwpm(n: usize, bound: usize) -> ExternalFn {
    ExternalFn::new("mwpm", n, vec![1; n], move |i, o| {
        let (s, r) = (bits_of(i), bits_of(o));
        let mut parts: Vec<Formula> = (0..n)
            .map(|j| Formula::atom(BoolExpr::iff(BoolExpr::xor(r[j].clone(), r[(j + 1) % n].clone()), s[j].clone())))
            .collect();
        parts.push(Formula::count_le(&r, bound as u64));
        Formula::and_all(parts)
    })
    .with_concrete(move |i| {
        let s: Vec<bool> = i.iter().map(|v| v.as_u64() == 1).collect();
        let mut r = vec![false; n];
        for j in 0..n - 1 {
            r[j + 1] = r[j] ^ s[j];
        }
        if r.iter().filter(|b| **b).count() * 2 > n {
            r.iter_mut().for_each(|b| *b = !*b);
        }
        r.into_iter().map(CVal::Bit).collect()
    })
}

/// Appends statements measuring the Pauli `check` into `var` without an
/// ancilla: basis-change to Z, fold the parity onto the last support qubit
/// with CNOTs, measure it, and undo.
pub fn measure_check(body: &mut Vec<Stmt>, check: &PauliString, var: &str) {
    let support = check.support();
    let Some((&t, rest)) = support.split_last() else {
        body.push(Stmt::Assign { var: var.into(), expr: Expr::Const(0) });
        return;
    };
    let mut pre = Vec::new();
    let mut post = Vec::new();
    for &q in &support {
        match check.get(q) {
            Pauli::X => {
                pre.push(Stmt::gate(Gate::H, &[q]));
                post.push(Stmt::gate(Gate::H, &[q]));
            }
            Pauli::Y => {
                // S† = S³, then H takes Y to Z
                pre.extend([Gate::S, Gate::S, Gate::S, Gate::H].map(|g| Stmt::gate(g, &[q])));
                post.extend([Gate::H, Gate::S].map(|g| Stmt::gate(g, &[q])));
            }
            _ => {}
        }
    }
    body.extend(pre);
    for &q in rest {
        body.push(Stmt::gate(Gate::Cnot, &[q, t]));
    }
    body.push(Stmt::measure(t, var));
    for &q in rest.iter().rev() {
        body.push(Stmt::gate(Gate::Cnot, &[q, t]));
    }
    body.extend(post);
}

/// Decoder for a CSS code: measure all X checks into `sx_j` and Z checks
/// into `sz_j`, call `decode` for corrections `rx_j`, `rz_j`, and apply
/// them as guarded Paulis. The decoder's condition bounds the X correction
/// weight by `bound_x` and the Z correction weight by `bound_z`. With
/// `buggy`, appends `X[rx_1*…*rx_D == 1] q_1`, `D = max(bound_x, 1)`.
pub fn css_decoder(code: &CodeSpec, bound_x: usize, bound_z: usize, buggy: bool) -> (Program, Externals) {
    let n = code.n;
    let mut body = Vec::new();
    let sx: Vec<String> = (1..=code.x_checks.len()).map(|j| format!("sx_{j}")).collect();
    let sz: Vec<String> = (1..=code.z_checks.len()).map(|j| format!("sz_{j}")).collect();
    for (c, v) in code.x_checks.iter().zip(&sx) {
        measure_check(&mut body, c, v);
    }
    for (c, v) in code.z_checks.iter().zip(&sz) {
        measure_check(&mut body, c, v);
    }
    let rx: Vec<String> = (1..=n).map(|j| format!("rx_{j}")).collect();
    let rz: Vec<String> = (1..=n).map(|j| format!("rz_{j}")).collect();
    body.push(Stmt::ExtCall {
        outs: rx.iter().chain(&rz).cloned().collect(),
        func: "decode".into(),
        args: sx.iter().chain(&sz).cloned().collect(),
    });
    for q in 0..n {
        body.push(Stmt::sym_pauli(Pauli::X, Expr::is_one(rx[q].clone()), q));
        body.push(Stmt::sym_pauli(Pauli::Z, Expr::is_one(rz[q].clone()), q));
    }
    if buggy {
        body.push(Stmt::sym_pauli(Pauli::X, guard_all(rx.iter().take(bound_x.max(1)).cloned()), 0));
    }
    let mut ext = Externals::new();
    ext.register(css_decode_fn(code, bound_x, bound_z));
    (Program::new(n, body), ext)
}

fn css_decode_fn(code: &CodeSpec, bound_x: usize, bound_z: usize) -> ExternalFn {
    let n = code.n;
    let hx: Vec<Vec<usize>> = code.x_checks.iter().map(PauliString::support).collect();
    let hz: Vec<Vec<usize>> = code.z_checks.iter().map(PauliString::support).collect();
    let (mx, mz) = (hx.len(), hz.len());
    let (hx2, hz2) = (hx.clone(), hz.clone());
    ExternalFn::new("decode", mx + mz, vec![1; 2 * n], move |i, o| {
        let (s, r) = (bits_of(i), bits_of(o));
        let (rx, rz) = r.split_at(n);
        let (sx, sz) = s.split_at(mx);
        let mut parts = Vec::with_capacity(mx + mz + 2);
        // X checks see Z errors, Z checks see X errors
        for (row, sj) in hx.iter().zip(sx) {
            parts.push(Formula::atom(BoolExpr::iff(BoolExpr::xor_all(row.iter().map(|&q| rz[q].clone())), sj.clone())));
        }
        for (row, sj) in hz.iter().zip(sz) {
            parts.push(Formula::atom(BoolExpr::iff(BoolExpr::xor_all(row.iter().map(|&q| rx[q].clone())), sj.clone())));
        }
        parts.push(Formula::count_le(rx, bound_x as u64));
        parts.push(Formula::count_le(rz, bound_z as u64));
        Formula::and_all(parts)
    })
    .with_concrete(move |i| {
        let s: Vec<bool> = i.iter().map(|v| v.as_u64() == 1).collect();
        let (sx, sz) = s.split_at(mx);
        let rx = min_weight_correction(n, &hz2, sz, bound_x);
        let rz = min_weight_correction(n, &hx2, sx, bound_z);
        rx.into_iter().chain(rz).map(CVal::Bit).collect()
    })
}

/// Smallest-weight `r` (weight at most `bound`) with `H r = syndrome`, by
/// enumeration; all zeros when none exists.
fn min_weight_correction(n: usize, rows: &[Vec<usize>], syndrome: &[bool], bound: usize) -> Vec<bool> {
    let matches = |r: &[bool]| rows.iter().zip(syndrome).all(|(row, &s)| row.iter().filter(|&&q| r[q]).count() % 2 == s as usize);
    let mut r = vec![false; n];
    for w in 0..=bound.min(n) {
        let mut idx: Vec<usize> = (0..w).collect();
        loop {
            r.iter_mut().for_each(|b| *b = false);
            idx.iter().for_each(|&q| r[q] = true);
            if matches(&r) {
                return r;
            }
            // next combination
            let mut i = w;
            while i > 0 && idx[i - 1] == n - w + i - 1 {
                i -= 1;
            }
            if i == 0 {
                break;
            }
            idx[i - 1] += 1;
            for j in i..w {
                idx[j] = idx[j - 1] + 1;
            }
        }
    }
    vec![false; n]
}

/// Toric code on a `d × d` periodic lattice with `2d²` edge qubits.
///
/// Horizontal edge `(i, j) → (i, j+1)` is qubit `i·d + j`; vertical edge
/// `(i, j) → (i+1, j)` is qubit `d² + i·d + j`. Vertex `(i, j)` gives the X
/// check on its four edges and face `(i, j)` the Z check on its boundary.
pub fn toric_code(d: usize) -> Result<CodeSpec, CodeError> {
    if d < 2 {
        return Err(CodeError::Parameter(format!("toric code needs d >= 2, got {d}")));
    }
    let n = 2 * d * d;
    let h = |i: usize, j: usize| (i % d) * d + (j % d);
    let v = |i: usize, j: usize| d * d + (i % d) * d + (j % d);
    let mut x_checks = Vec::new();
    let mut z_checks = Vec::new();
    for i in 0..d {
        for j in 0..d {
            x_checks.push(PauliString::from_support(n, &[h(i, j), h(i, j + d - 1), v(i, j), v(i + d - 1, j)], Pauli::X));
            z_checks.push(PauliString::from_support(n, &[h(i, j), h(i + 1, j), v(i, j), v(i, j + 1)], Pauli::Z));
        }
    }
    let row: Vec<usize> = (0..d).map(|j| h(0, j)).collect();
    let col: Vec<usize> = (0..d).map(|i| v(i, 0)).collect();
    let hcol: Vec<usize> = (0..d).map(|i| h(i, 0)).collect();
    let vrow: Vec<usize> = (0..d).map(|j| v(0, j)).collect();
    let code = CodeSpec {
        name: format!("toric-{d}"),
        n,
        k: 2,
        x_checks,
        z_checks,
        logical_z: vec![PauliString::from_support(n, &row, Pauli::Z), PauliString::from_support(n, &col, Pauli::Z)],
        logical_x: vec![PauliString::from_support(n, &hcol, Pauli::X), PauliString::from_support(n, &vrow, Pauli::X)],
    };
    code.check_invariants()?;
    Ok(code)
}

/// Toric code with its decoder; corrections are bounded by `⌊(d−1)/2⌋`
/// for each error type.
pub fn toric(d: usize, buggy: bool) -> Result<(CodeSpec, Program, Externals), CodeError> {
    let code = toric_code(d)?;
    let t = correctable(d);
    let (p, ext) = css_decoder(&code, t, t, buggy);
    Ok((code, p, ext))
}

/// Which Pauli the injected errors apply.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ErrorKind {
    X,
    Z,
}

impl ErrorKind {
    pub fn prefix(self) -> &'static str {
        match self {
            ErrorKind::X => "e",
            ErrorKind::Z => "ez",
        }
    }
}

/// `τ[e_j == 1] q_j` for every qubit plus the constraint `Σ e_j ≤ dmax`.
/// Returns the statements, the constraint and the error variable names.
pub fn inject_errors(n: usize, kind: ErrorKind, dmax: usize) -> (Vec<Stmt>, Formula, Vec<String>) {
    let pauli = match kind {
        ErrorKind::X => Pauli::X,
        ErrorKind::Z => Pauli::Z,
    };
    let names: Vec<String> = (1..=n).map(|j| format!("{}_{j}", kind.prefix())).collect();
    let stmts = names.iter().enumerate().map(|(q, v)| Stmt::sym_pauli(pauli, Expr::is_one(v.clone()), q)).collect();
    let vars: Vec<BoolExpr> = names.iter().map(|v| BoolExpr::var(v)).collect();
    (stmts, Formula::count_le(&vars, dmax as u64), names)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn repetition_shapes() {
        assert!(repetition(2, false).is_err());
        let (code, p, _) = repetition(5, true).unwrap();
        assert_eq!(code.z_checks.len(), 4);
        let Some(Stmt::SymPauli { guard, qubit: 0, .. }) = p.body.last() else { panic!() };
        assert_eq!(guard.to_string(), "(r_1 & r_2) == 1");
    }

    #[test]
    fn toric_parameters() {
        let c = toric_code(3).unwrap();
        assert_eq!((c.n, c.x_checks.len(), c.z_checks.len()), (18, 9, 9));
        assert_eq!(c.independent_checks().len(), 16);
        assert_eq!(toric_code(2).unwrap().logical_z[0].weight(), 2);
    }

    #[test]
    fn completion_matches_toric_logical_count() {
        let c = toric_code(3).unwrap();
        let (z, x) = css_logicals(&c.x_check_matrix(), &c.z_check_matrix());
        assert_eq!((z.len(), x.len()), (2, 2));
    }

    #[test]
    fn injected_constraint() {
        let (stmts, f, names) = inject_errors(3, ErrorKind::X, 1);
        assert_eq!(stmts.len(), 3);
        assert_eq!(names, ["e_1", "e_2", "e_3"]);
        assert!(f.to_smt().contains("bvule"));
    }

    #[test]
    fn y_check_measurement_restores_basis() {
        use crate::concrete::ConcreteTableau;
        let check: PauliString = "YY".parse().unwrap();
        let mut body = Vec::new();
        measure_check(&mut body, &check, "m");
        let mut start = ConcreteTableau::zero_state(2);
        start.apply(Gate::H, &[0]).unwrap();
        start.apply(Gate::S, &[1]).unwrap();
        let mut t = start.clone();
        for s in &body {
            if let Stmt::Unitary { gate, qubits } = s {
                t.apply(*gate, qubits).unwrap();
            }
        }
        assert!(t.same_state(&start), "basis change not undone:\n{t:?}");
    }
}
