//! Symbolic stabilizer tableaus.
//!
//! Rows `0..n` are destabilizers and rows `n..2n` stabilizers, as in the
//! improved CHP tableau. Each row carries an exponent of `-1` as an
//! [`XorSum`]. The Pauli bits evolve exactly as in the concrete algorithm;
//! i-powers arising from row products depend only on those bits and are folded
//! into the phase as constants, so symbolic phases never steer control flow.

use std::fmt;

use serde::Serialize;
use thiserror::Error;

use crate::concrete::ConcreteTableau;
use crate::expr::{BoolExpr, ExprError, Formula, FreshGen, Valuation, XorSum};
use crate::pauli::{product_ipower, words_for, Gate, Pauli, PauliError, PauliString};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TableauError {
    #[error("expected {expected} generators, got {got}")]
    WrongCount { expected: usize, got: usize },
    #[error("generator {0} has the wrong qubit count")]
    GeneratorLength(usize),
    #[error("generators {0} and {1} anticommute")]
    NonCommuting(usize, usize),
    #[error("generators are linearly dependent")]
    Dependent,
    #[error("tableaus have different qubit counts: {0} vs {1}")]
    DimensionMismatch(usize, usize),
    #[error(transparent)]
    Pauli(#[from] PauliError),
    #[error(transparent)]
    Expr(#[from] ExprError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum MeasKind {
    Deterministic,
    Random,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MeasResult {
    pub outcome: BoolExpr,
    pub kind: MeasKind,
}

/// Bit storage shared by the symbolic and concrete tableaus: `rows` Pauli
/// strings of `n` qubits, packed row-major.
#[derive(Clone, PartialEq, Eq, Hash)]
pub(crate) struct Rows {
    pub n: usize,
    pub w: usize,
    pub x: Vec<u64>,
    pub z: Vec<u64>,
}

impl Rows {
    pub fn new(n: usize, rows: usize) -> Self {
        let w = words_for(n);
        Rows { n, w, x: vec![0; rows * w], z: vec![0; rows * w] }
    }

    #[inline]
    pub fn xs(&self, r: usize) -> &[u64] {
        &self.x[r * self.w..(r + 1) * self.w]
    }

    #[inline]
    pub fn zs(&self, r: usize) -> &[u64] {
        &self.z[r * self.w..(r + 1) * self.w]
    }

    #[inline]
    pub fn x_bit(&self, r: usize, q: usize) -> bool {
        (self.x[r * self.w + q / 64] >> (q % 64)) & 1 == 1
    }

    #[inline]
    pub fn z_bit(&self, r: usize, q: usize) -> bool {
        (self.z[r * self.w + q / 64] >> (q % 64)) & 1 == 1
    }

    pub fn get(&self, r: usize) -> PauliString {
        PauliString::from_words(self.n, self.xs(r).to_vec(), self.zs(r).to_vec())
    }

    pub fn set(&mut self, r: usize, p: &PauliString) {
        let w = self.w;
        self.x[r * w..(r + 1) * w].copy_from_slice(p.x_words());
        self.z[r * w..(r + 1) * w].copy_from_slice(p.z_words());
    }

    pub fn clear(&mut self, r: usize) {
        let w = self.w;
        self.x[r * w..(r + 1) * w].fill(0);
        self.z[r * w..(r + 1) * w].fill(0);
    }

    pub fn copy_row(&mut self, dst: usize, src: usize) {
        let w = self.w;
        self.x.copy_within(src * w..(src + 1) * w, dst * w);
        self.z.copy_within(src * w..(src + 1) * w, dst * w);
    }

    pub fn swap_rows(&mut self, a: usize, b: usize) {
        if a == b {
            return;
        }
        for k in 0..self.w {
            self.x.swap(a * self.w + k, b * self.w + k);
            self.z.swap(a * self.w + k, b * self.w + k);
        }
    }

    /// Row `h` becomes `row h · row i`; returns the i-power picked up.
    #[inline]
    pub fn mul_into(&mut self, h: usize, i: usize) -> u8 {
        let w = self.w;
        let k = product_ipower(self.xs(h), self.zs(h), self.xs(i), self.zs(i));
        for j in 0..w {
            self.x[h * w + j] ^= self.x[i * w + j];
            self.z[h * w + j] ^= self.z[i * w + j];
        }
        k
    }

    pub fn anticommute(&self, a: usize, b: usize) -> bool {
        let mut acc = 0u64;
        for j in 0..self.w {
            acc ^= (self.x[a * self.w + j] & self.z[b * self.w + j]) ^ (self.z[a * self.w + j] & self.x[b * self.w + j]);
        }
        acc.count_ones() % 2 == 1
    }

    /// Applies a Clifford gate to every row, calling `flip(r)` on rows whose
    /// sign changes.
    pub fn conjugate(&mut self, gate: Gate, targets: &[usize], mut flip: impl FnMut(usize)) {
        let rows = self.x.len() / self.w.max(1);
        let w = self.w;
        let a = targets[0];
        let (wa, ma) = (a / 64, 1u64 << (a % 64));
        match gate {
            Gate::I => {}
            Gate::X | Gate::Y | Gate::Z => {
                for r in 0..rows {
                    let xa = self.x[r * w + wa] & ma != 0;
                    let za = self.z[r * w + wa] & ma != 0;
                    let p = gate.as_pauli().unwrap();
                    if p.anticommutes_with_bits(xa, za) {
                        flip(r);
                    }
                }
            }
            Gate::H => {
                for r in 0..rows {
                    let xi = r * w + wa;
                    let xa = self.x[xi] & ma;
                    let za = self.z[xi] & ma;
                    if xa != 0 && za != 0 {
                        flip(r);
                    }
                    self.x[xi] = (self.x[xi] & !ma) | za;
                    self.z[xi] = (self.z[xi] & !ma) | xa;
                }
            }
            Gate::S => {
                for r in 0..rows {
                    let xi = r * w + wa;
                    let xa = self.x[xi] & ma;
                    if xa != 0 {
                        if self.z[xi] & ma != 0 {
                            flip(r);
                        }
                        self.z[xi] ^= ma;
                    }
                }
            }
            Gate::Cnot => {
                let b = targets[1];
                let (wb, mb) = (b / 64, 1u64 << (b % 64));
                for r in 0..rows {
                    let xa = self.x[r * w + wa] & ma != 0;
                    let za = self.z[r * w + wa] & ma != 0;
                    let xb = self.x[r * w + wb] & mb != 0;
                    let zb = self.z[r * w + wb] & mb != 0;
                    if xa && zb && (xb == za) {
                        flip(r);
                    }
                    if xa {
                        self.x[r * w + wb] ^= mb;
                    }
                    if zb {
                        self.z[r * w + wa] ^= ma;
                    }
                }
            }
        }
    }
}

/// Dense GF(2) row vectors used for the linear algebra in tableau
/// construction.
pub(crate) fn bitrow_get(row: &[u64], i: usize) -> bool {
    (row[i / 64] >> (i % 64)) & 1 == 1
}

pub(crate) fn bitrow_flip(row: &mut [u64], i: usize) {
    row[i / 64] ^= 1 << (i % 64);
}

/// Symbolic stabilizer state on `n` qubits.
#[derive(Clone, PartialEq, Eq)]
pub struct SymTableau {
    rows: Rows,
    phase: Vec<XorSum>,
}

impl SymTableau {
    /// `|0…0⟩`: destabilizers `X_i`, stabilizers `Z_i`, all phases 0.
    pub fn zero_state(n: usize) -> Self {
        let mut rows = Rows::new(n, 2 * n);
        for q in 0..n {
            bitrow_flip(&mut rows.x[q * rows.w..(q + 1) * rows.w], q);
            let r = n + q;
            bitrow_flip(&mut rows.z[r * rows.w..(r + 1) * rows.w], q);
        }
        SymTableau { rows, phase: vec![XorSum::zero(); 2 * n] }
    }

    /// Builds the state stabilized by `(-1)^{f_j} P_j`, completing a set of
    /// destabilizers.
    pub fn from_generators(gens: &[(PauliString, BoolExpr)]) -> Result<Self, TableauError> {
        let n = gens.len();
        let n_qubits = gens.first().map(|g| g.0.num_qubits()).unwrap_or(0);
        if n != n_qubits {
            return Err(TableauError::WrongCount { expected: n_qubits, got: n });
        }
        for (i, (p, _)) in gens.iter().enumerate() {
            if p.num_qubits() != n {
                return Err(TableauError::GeneratorLength(i));
            }
        }
        for i in 0..n {
            for j in i + 1..n {
                if gens[i].0.symplectic(&gens[j].0) {
                    return Err(TableauError::NonCommuting(i, j));
                }
            }
        }
        let stabs: Vec<PauliString> = gens.iter().map(|g| g.0.clone()).collect();
        let destabs = complete_destabilizers(&stabs).ok_or(TableauError::Dependent)?;
        let mut rows = Rows::new(n, 2 * n);
        for i in 0..n {
            rows.set(i, &destabs[i]);
            rows.set(n + i, &stabs[i]);
        }
        let mut phase = vec![XorSum::zero(); n];
        phase.extend(gens.iter().map(|g| XorSum::from_expr(&g.1)));
        Ok(SymTableau { rows, phase })
    }

    pub fn num_qubits(&self) -> usize {
        self.rows.n
    }

    pub fn stabilizer(&self, i: usize) -> (PauliString, BoolExpr) {
        let n = self.rows.n;
        (self.rows.get(n + i), self.phase[n + i].to_expr())
    }

    pub fn destabilizer(&self, i: usize) -> (PauliString, BoolExpr) {
        (self.rows.get(i), self.phase[i].to_expr())
    }

    pub fn stabilizers(&self) -> Vec<(PauliString, BoolExpr)> {
        (0..self.rows.n).map(|i| self.stabilizer(i)).collect()
    }

    pub fn stabilizer_phase(&self, i: usize) -> &XorSum {
        &self.phase[self.rows.n + i]
    }

    pub fn apply_clifford(&mut self, gate: Gate, targets: &[usize]) -> Result<(), TableauError> {
        gate.check_targets(targets, self.rows.n)?;
        let phase = &mut self.phase;
        self.rows.conjugate(gate, targets, |r| phase[r].toggle());
        Ok(())
    }

    /// Applies `tau` on `q` when `guard` holds, without forking: every row
    /// anticommuting with `tau` at `q` picks up `guard` in its phase.
    pub fn apply_sym_pauli(&mut self, tau: Pauli, guard: &BoolExpr, q: usize) -> Result<(), TableauError> {
        if q >= self.rows.n {
            return Err(PauliError::TargetOutOfRange { qubit: q, n: self.rows.n }.into());
        }
        let g = XorSum::from_expr(guard);
        if g.is_const() == Some(false) {
            return Ok(());
        }
        for r in 0..2 * self.rows.n {
            if tau.anticommutes_with_bits(self.rows.x_bit(r, q), self.rows.z_bit(r, q)) {
                self.phase[r].xor_assign(&g);
            }
        }
        Ok(())
    }

    /// Measures `Z_q`. Random outcomes get a fresh symbol from `gen` under the
    /// prefix `m`.
    pub fn measure(&mut self, q: usize, gen: &mut FreshGen) -> MeasResult {
        self.measure_with_prefix(q, gen, "m")
    }

    pub fn measure_with_prefix(&mut self, q: usize, gen: &mut FreshGen, prefix: &str) -> MeasResult {
        let n = self.rows.n;
        assert!(q < n, "qubit {q} out of range for {n} qubits");
        let p = (n..2 * n).find(|&r| self.rows.x_bit(r, q));
        match p {
            None => {
                let (outcome, _) = self.deterministic_outcome(q);
                MeasResult { outcome: outcome.to_expr(), kind: MeasKind::Deterministic }
            }
            Some(p) => {
                let pivot_phase = self.phase[p].clone();
                for r in 0..2 * n {
                    if r != p && r != p - n && self.rows.x_bit(r, q) {
                        let k = self.rows.mul_into(r, p);
                        debug_assert!(k % 2 == 0);
                        self.phase[r].xor_assign(&pivot_phase);
                        self.phase[r].xor_const(k == 2);
                    }
                }
                self.rows.copy_row(p - n, p);
                self.phase[p - n] = pivot_phase;
                self.rows.clear(p);
                bitrow_flip(&mut self.rows.z[p * self.rows.w..(p + 1) * self.rows.w], q);
                let s = gen.fresh(prefix);
                self.phase[p] = XorSum::from_expr(&BoolExpr::Var(s));
                MeasResult { outcome: BoolExpr::Var(s), kind: MeasKind::Random }
            }
        }
    }

    /// For `Z_q` in the stabilizer group: the sign exponent of `Z_q` and the
    /// stabilizer rows whose product gives it.
    pub fn deterministic_outcome(&self, q: usize) -> (XorSum, Vec<usize>) {
        let n = self.rows.n;
        let w = self.rows.w;
        let mut sx = vec![0u64; w];
        let mut sz = vec![0u64; w];
        let mut ipow = 0u8;
        let mut picked = Vec::new();
        for i in 0..n {
            if self.rows.x_bit(i, q) {
                let r = n + i;
                ipow = (ipow + product_ipower(&sx, &sz, self.rows.xs(r), self.rows.zs(r))) % 4;
                for j in 0..w {
                    sx[j] ^= self.rows.x[r * w + j];
                    sz[j] ^= self.rows.z[r * w + j];
                }
                picked.push(r);
            }
        }
        debug_assert!(ipow % 2 == 0);
        let mut out = XorSum::sum(picked.iter().map(|&r| &self.phase[r]));
        out.xor_const(ipow == 2);
        (out, picked.into_iter().map(|r| r - n).collect())
    }

    /// Whether measuring `q` would be deterministic.
    pub fn is_deterministic(&self, q: usize) -> bool {
        let n = self.rows.n;
        !(n..2 * n).any(|r| self.rows.x_bit(r, q))
    }

    pub fn instantiate(&self, v: &Valuation) -> Result<ConcreteTableau, TableauError> {
        let mut bits = Vec::with_capacity(self.phase.len());
        for p in &self.phase {
            bits.push(p.eval(v)?);
        }
        Ok(ConcreteTableau::from_parts(self.rows.clone(), bits))
    }

    /// Substitutes the bound symbols of `v` into every phase.
    pub fn substitute(&self, v: &Valuation) -> SymTableau {
        let phase = self.phase.iter().map(|p| XorSum::from_expr(&p.to_expr().substitute(v))).collect();
        SymTableau { rows: self.rows.clone(), phase }
    }

    fn stab_rowsum(&mut self, h: usize, i: usize) {
        let n = self.rows.n;
        let k = self.rows.mul_into(n + h, n + i);
        debug_assert!(k % 2 == 0);
        let pi = self.phase[n + i].clone();
        self.phase[n + h].xor_assign(&pi);
        self.phase[n + h].xor_const(k == 2);
        // keep the destabilizer pairing: d_i absorbs d_h
        let k = self.rows.mul_into(i, h);
        debug_assert!(k % 2 == 0);
        let ph = self.phase[h].clone();
        self.phase[i].xor_assign(&ph);
        self.phase[i].xor_const(k == 2);
    }

    fn swap_pair(&mut self, a: usize, b: usize) {
        let n = self.rows.n;
        self.rows.swap_rows(a, b);
        self.rows.swap_rows(n + a, n + b);
        self.phase.swap(a, b);
        self.phase.swap(n + a, n + b);
    }

    /// Reduced row-echelon form of the stabilizer rows. Pivot columns run over
    /// the X block (qubit 0 first) and then the Z block.
    pub fn canonical_form(&self) -> SymTableau {
        let mut t = self.clone();
        let n = t.rows.n;
        let mut next = 0;
        for col in 0..2 * n {
            if next == n {
                break;
            }
            let bit = |t: &SymTableau, r: usize| {
                if col < n {
                    t.rows.x_bit(n + r, col)
                } else {
                    t.rows.z_bit(n + r, col - n)
                }
            };
            let Some(piv) = (next..n).find(|&r| bit(&t, r)) else { continue };
            t.swap_pair(next, piv);
            for r in 0..n {
                if r != next && bit(&t, r) {
                    t.stab_rowsum(r, next);
                }
            }
            next += 1;
        }
        t
    }

    /// Formula that holds exactly when both tableaus describe the same state.
    pub fn equality_formula(&self, other: &SymTableau) -> Result<Formula, TableauError> {
        let n = self.rows.n;
        if n != other.rows.n {
            return Err(TableauError::DimensionMismatch(n, other.rows.n));
        }
        let a = self.canonical_form();
        let b = other.canonical_form();
        for i in 0..n {
            if a.rows.xs(n + i) != b.rows.xs(n + i) || a.rows.zs(n + i) != b.rows.zs(n + i) {
                return Ok(Formula::truth(false));
            }
        }
        Ok(Formula::and_all((0..n).map(|i| {
            let mut d = a.phase[n + i].clone();
            d.xor_assign(&b.phase[n + i]);
            d.toggle();
            Formula::atom(d.to_expr())
        })))
    }

    /// Checks the pairing and independence invariants.
    pub fn check_invariants(&self) -> Result<(), String> {
        let n = self.rows.n;
        for a in 0..2 * n {
            for b in a + 1..2 * n {
                let anti = self.rows.anticommute(a, b);
                let expect = a < n && b == a + n;
                if anti != expect {
                    return Err(format!("rows {a} and {b}: anticommute={anti}, expected {expect}"));
                }
            }
        }
        Ok(())
    }

    /// One line per row: `D|S idx ±pauli ; phase`.
    pub fn dump(&self) -> String {
        let n = self.rows.n;
        let mut s = String::new();
        for r in 0..2 * n {
            let (tag, idx) = if r < n { ('D', r) } else { ('S', r - n) };
            let sign = if self.phase[r].is_const() == Some(true) { '-' } else { '+' };
            s.push_str(&format!("{tag} {idx} {sign}{} ; {}\n", self.rows.get(r), self.phase[r].to_expr()));
        }
        s
    }

    pub fn stabilizer_rows_json(&self) -> Vec<StabilizerRow> {
        self.stabilizers()
            .into_iter()
            .map(|(p, ph)| StabilizerRow { pauli: format!("+{p}"), phase: ph.to_smt() })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct StabilizerRow {
    pub pauli: String,
    pub phase: String,
}

impl fmt::Debug for SymTableau {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.dump())
    }
}

/// Finds destabilizers for independent, pairwise commuting `stabs`: rows
/// `d_i` with `<d_i, s_j> = δ_ij` and pairwise commuting. `None` if the
/// stabilizers are dependent.
pub(crate) fn complete_destabilizers(stabs: &[PauliString]) -> Option<Vec<PauliString>> {
    let n = stabs.len();
    if n == 0 {
        return Some(Vec::new());
    }
    let nq = stabs[0].num_qubits();
    let cols = 2 * nq;
    let wc = words_for(cols);
    let wt = words_for(n);
    // <d, s> = d · (s_z | s_x); row j holds that swapped vector of s_j.
    let mut m: Vec<Vec<u64>> = stabs
        .iter()
        .map(|s| {
            let mut row = vec![0u64; wc];
            for q in 0..nq {
                if s.z_bit(q) {
                    bitrow_flip(&mut row, q);
                }
                if s.x_bit(q) {
                    bitrow_flip(&mut row, nq + q);
                }
            }
            row
        })
        .collect();
    let mut t: Vec<Vec<u64>> = (0..n)
        .map(|j| {
            let mut row = vec![0u64; wt];
            bitrow_flip(&mut row, j);
            row
        })
        .collect();
    let mut pivots = Vec::with_capacity(n);
    let mut next = 0;
    for col in 0..cols {
        if next == n {
            break;
        }
        let Some(piv) = (next..n).find(|&r| bitrow_get(&m[r], col)) else { continue };
        m.swap(next, piv);
        t.swap(next, piv);
        for r in 0..n {
            if r != next && bitrow_get(&m[r], col) {
                let (src_m, src_t) = (m[next].clone(), t[next].clone());
                for (a, b) in m[r].iter_mut().zip(&src_m) {
                    *a ^= b;
                }
                for (a, b) in t[r].iter_mut().zip(&src_t) {
                    *a ^= b;
                }
            }
        }
        pivots.push(col);
        next += 1;
    }
    if next < n {
        return None;
    }
    let mut destabs: Vec<PauliString> = (0..n).map(|_| PauliString::identity(nq)).collect();
    for (k, &col) in pivots.iter().enumerate() {
        for (i, d) in destabs.iter_mut().enumerate() {
            if bitrow_get(&t[k], i) {
                if col < nq {
                    let q = col;
                    let p = d.get(q);
                    d.set(q, Pauli::from_bits(true, p.bits().1));
                } else {
                    let q = col - nq;
                    let p = d.get(q);
                    d.set(q, Pauli::from_bits(p.bits().0, true));
                }
            }
        }
    }
    for i in 0..n {
        for j in i + 1..n {
            if destabs[i].symplectic(&destabs[j]) {
                let (fixed, _) = destabs[j].mul_raw(&stabs[i]).expect("same length");
                destabs[j] = fixed;
            }
        }
    }
    Some(destabs)
}
