//! Concrete stabilizer tableau (CHP) with a sign bit per row.
//!
//! Signs are stored as 64-bit words so that up to 64 independent shots of a
//! branch-free circuit can share one Pauli-bit evolution: bit `k` of a sign
//! word belongs to lane `k`. Single-shot users read lane 0.

use crate::pauli::{product_ipower, Gate, PauliError, PauliString, PhasedPauli};
use crate::tableau::Rows;

#[derive(Clone, PartialEq, Eq)]
pub struct ConcreteTableau {
    rows: Rows,
    sign: Vec<u64>,
}

fn lanes(b: bool) -> u64 {
    if b {
        u64::MAX
    } else {
        0
    }
}

impl ConcreteTableau {
    pub(crate) fn from_parts(rows: Rows, bits: Vec<bool>) -> Self {
        ConcreteTableau { rows, sign: bits.into_iter().map(lanes).collect() }
    }

    pub fn zero_state(n: usize) -> Self {
        let mut rows = Rows::new(n, 2 * n);
        for q in 0..n {
            rows.set(q, &PauliString::single(n, q, crate::pauli::Pauli::X));
            rows.set(n + q, &PauliString::single(n, q, crate::pauli::Pauli::Z));
        }
        ConcreteTableau { rows, sign: vec![0; 2 * n] }
    }

    pub fn num_qubits(&self) -> usize {
        self.rows.n
    }

    pub fn stabilizer(&self, i: usize) -> (PauliString, bool) {
        let r = self.rows.n + i;
        (self.rows.get(r), self.sign[r] & 1 == 1)
    }

    pub fn stabilizers(&self) -> Vec<(PauliString, bool)> {
        (0..self.rows.n).map(|i| self.stabilizer(i)).collect()
    }

    /// Sign words of all rows (destabilizers first).
    pub fn sign_lanes(&self) -> &[u64] {
        &self.sign
    }

    pub fn apply(&mut self, gate: Gate, targets: &[usize]) -> Result<(), PauliError> {
        let n = self.rows.n;
        gate.check_targets(targets, n)?;
        if gate == Gate::I {
            return Ok(());
        }
        let w = self.rows.w;
        let a = targets[0];
        let b = if gate.arity() == 2 { targets[1] } else { a };
        let (wa, sa, wb, sb) = (a / 64, a % 64, b / 64, b % 64);
        let rows = self.rows.x.chunks_exact_mut(w).zip(self.rows.z.chunks_exact_mut(w)).zip(self.sign.iter_mut());
        match gate {
            Gate::X | Gate::Y | Gate::Z => {
                let (use_x, use_z) = ((gate != Gate::X) as u64, (gate != Gate::Z) as u64);
                for ((xr, zr), sign) in rows {
                    let f = ((xr[wa] >> sa) & use_x) ^ ((zr[wa] >> sa) & use_z);
                    *sign ^= (f & 1).wrapping_neg();
                }
            }
            Gate::H => {
                for ((xr, zr), sign) in rows {
                    let (xa, za) = ((xr[wa] >> sa) & 1, (zr[wa] >> sa) & 1);
                    xr[wa] ^= (xa ^ za) << sa;
                    zr[wa] ^= (xa ^ za) << sa;
                    *sign ^= (xa & za).wrapping_neg();
                }
            }
            Gate::S => {
                for ((xr, zr), sign) in rows {
                    let (xa, za) = ((xr[wa] >> sa) & 1, (zr[wa] >> sa) & 1);
                    zr[wa] ^= xa << sa;
                    *sign ^= (xa & za).wrapping_neg();
                }
            }
            Gate::Cnot => {
                for ((xr, zr), sign) in rows {
                    let (xa, za) = ((xr[wa] >> sa) & 1, (zr[wa] >> sa) & 1);
                    let (xb, zb) = ((xr[wb] >> sb) & 1, (zr[wb] >> sb) & 1);
                    zr[wa] ^= zb << sa;
                    xr[wb] ^= xa << sb;
                    *sign ^= (xa & zb & !(xb ^ za) & 1).wrapping_neg();
                }
            }
            Gate::I => {}
        }
        Ok(())
    }

    /// Applies a Pauli gate only in the lanes selected by `mask`.
    pub fn apply_pauli_masked(&mut self, gate: Gate, q: usize, mask: u64) -> Result<(), PauliError> {
        let p = gate.as_pauli().ok_or(PauliError::Arity { gate, expected: 1, got: 1 })?;
        gate.check_targets(&[q], self.rows.n)?;
        for r in 0..2 * self.rows.n {
            if p.anticommutes_with_bits(self.rows.x_bit(r, q), self.rows.z_bit(r, q)) {
                self.sign[r] ^= mask;
            }
        }
        Ok(())
    }

    fn rowsum(&mut self, h: usize, i: usize) {
        let k = self.rows.mul_into(h, i);
        debug_assert!(k % 2 == 0, "non-Hermitian row product");
        self.sign[h] ^= self.sign[i] ^ lanes(k == 2);
    }

    /// Measures `Z_q`. For a random outcome `coin()` supplies the outcome
    /// lanes. Returns the outcome lanes and whether the outcome was random.
    pub fn measure(&mut self, q: usize, coin: impl FnOnce() -> u64) -> (u64, bool) {
        let n = self.rows.n;
        assert!(q < n, "qubit {q} out of range for {n} qubits");
        if let Some(p) = (n..2 * n).find(|&r| self.rows.x_bit(r, q)) {
            for r in 0..2 * n {
                if r != p && r != p - n && self.rows.x_bit(r, q) {
                    self.rowsum(r, p);
                }
            }
            self.rows.copy_row(p - n, p);
            self.sign[p - n] = self.sign[p];
            self.rows.set(p, &PauliString::single(n, q, crate::pauli::Pauli::Z));
            let out = coin();
            self.sign[p] = out;
            (out, true)
        } else {
            let w = self.rows.w;
            let mut sx = vec![0u64; w];
            let mut sz = vec![0u64; w];
            let mut k = 0u8;
            let mut out = 0u64;
            for i in 0..n {
                if self.rows.x_bit(i, q) {
                    let r = n + i;
                    k = (k + product_ipower(&sx, &sz, self.rows.xs(r), self.rows.zs(r))) % 4;
                    for j in 0..w {
                        sx[j] ^= self.rows.xs(r)[j];
                        sz[j] ^= self.rows.zs(r)[j];
                    }
                    out ^= self.sign[r];
                }
            }
            (out ^ lanes(k == 2), false)
        }
    }

    /// Single-lane measurement; `coin` is only called for random outcomes.
    pub fn measure_bit(&mut self, q: usize, coin: impl FnOnce() -> bool) -> (bool, bool) {
        let (out, random) = self.measure(q, || lanes(coin()));
        (out & 1 == 1, random)
    }

    /// Whether measuring `q` would be deterministic.
    pub fn is_deterministic(&self, q: usize) -> bool {
        let n = self.rows.n;
        !(n..2 * n).any(|r| self.rows.x_bit(r, q))
    }

    /// Canonical signed generators (lane 0): reduced row-echelon form with X
    /// columns before Z columns.
    pub fn canonical_stabilizers(&self) -> Vec<(PauliString, bool)> {
        let n = self.rows.n;
        let mut gens: Vec<PhasedPauli> =
            self.stabilizers().into_iter().map(|(p, s)| PhasedPauli::new(p, if s { 2 } else { 0 })).collect();
        let mut next = 0;
        for col in 0..2 * n {
            let bit = |p: &PhasedPauli| if col < n { p.pauli.x_bit(col) } else { p.pauli.z_bit(col - n) };
            let Some(piv) = (next..n).find(|&r| bit(&gens[r])) else { continue };
            gens.swap(next, piv);
            for r in 0..n {
                if r != next && bit(&gens[r]) {
                    gens[r] = gens[r].mul(&gens[next]).expect("same length");
                }
            }
            next += 1;
        }
        gens.into_iter()
            .map(|g| {
                debug_assert!(g.is_hermitian());
                (g.pauli, g.k == 2)
            })
            .collect()
    }

    pub fn same_state(&self, other: &ConcreteTableau) -> bool {
        self.rows.n == other.rows.n && self.canonical_stabilizers() == other.canonical_stabilizers()
    }

    /// Copy of the tableau with lane `k` broadcast to every lane.
    pub fn lane(&self, k: usize) -> ConcreteTableau {
        ConcreteTableau { rows: self.rows.clone(), sign: self.sign.iter().map(|s| lanes((s >> k) & 1 == 1)).collect() }
    }
}

impl std::fmt::Debug for ConcreteTableau {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for (p, s) in self.stabilizers() {
            writeln!(f, "{}{}", if s { '-' } else { '+' }, p)?;
        }
        Ok(())
    }
}
