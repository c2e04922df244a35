//! Quantum Tanner codes on the quadripartite left-right Cayley complex of
//! the cyclic group `Z_{k·7^m}` with `A = B = k·7^{m−1}·{0..6}`, local codes
//! the [7,4,3] Hamming code and its [7,3,3] dual.
//!
//! Squares `(g, a, b)` are the qubits, indexed `49g + 7a + b` with `a`, `b`
//! the positions inside `A`, `B`. The vertex sets are ordered
//! `V0 = (G×{00}) ∪ (G×{11})` and `V1 = (G×{01}) ∪ (G×{10})`, each by
//! group element.

use super::gf2::BitMatrix;
use super::{css_checks, css_logicals, CodeError, CodeSpec};
use crate::pauli::Pauli;

const DELTA: usize = 7;

/// Parity-check matrix of the Hamming code; its rows span the simplex code.
pub fn simplex_7_3() -> BitMatrix {
    let rows: Vec<Vec<u8>> = (0..3).map(|r| (1..=7u8).map(|c| (c >> r) & 1).collect()).collect();
    BitMatrix::from_bits(&rows)
}

/// Generator matrix of the [7,4,3] Hamming code.
pub fn hamming_7_4() -> BitMatrix {
    simplex_7_3().kernel()
}

/// Check matrices of a Tanner code instance.
#[derive(Debug, Clone)]
pub struct TannerParts {
    pub group_order: usize,
    pub hx: BitMatrix,
    pub hz: BitMatrix,
}

impl TannerParts {
    pub fn build(m: u32, k: usize) -> Result<Self, CodeError> {
        if m < 1 || k < 1 {
            return Err(CodeError::Parameter(format!("tanner code needs m, k >= 1, got ({m}, {k})")));
        }
        let order = k * 7usize.pow(m);
        let step = k * 7usize.pow(m - 1);
        let inv = |i: usize| (DELTA - i) % DELTA;
        // H_A spans C_A, H_B spans C_B; the perp matrices span the duals
        let (ha, ha_perp) = (hamming_7_4(), simplex_7_3());
        let (hb, hb_perp) = (simplex_7_3(), hamming_7_4());
        let local_x = ha.kron(&hb);
        let local_z = ha_perp.kron(&hb_perp);
        let n = DELTA * DELTA * order;
        let mut hx = BitMatrix::zeros(local_x.num_rows() * 2 * order, n);
        let mut hz = BitMatrix::zeros(local_z.num_rows() * 2 * order, n);
        let ab = |a: usize, b: usize| a * DELTA + b;
        for g in 0..order {
            for a in 0..DELTA {
                for b in 0..DELTA {
                    let q = g * DELTA * DELTA + ab(a, b);
                    let (av, bv) = (a * step, b * step);
                    let v00 = g;
                    let v11 = order + (g + av + bv) % order;
                    let v01 = (g + av) % order;
                    let v10 = order + (g + bv) % order;
                    for r in 0..local_x.num_rows() {
                        if local_x.get(r, ab(a, b)) {
                            hx.flip(r * 2 * order + v00, q);
                        }
                        if local_x.get(r, ab(inv(a), inv(b))) {
                            hx.flip(r * 2 * order + v11, q);
                        }
                    }
                    for r in 0..local_z.num_rows() {
                        if local_z.get(r, ab(inv(a), b)) {
                            hz.flip(r * 2 * order + v01, q);
                        }
                        if local_z.get(r, ab(a, inv(b))) {
                            hz.flip(r * 2 * order + v10, q);
                        }
                    }
                }
            }
        }
        Ok(TannerParts { group_order: order, hx, hz })
    }
}

/// The Tanner code instance `(m, k)` on `k·7^{m+2}` qubits, with logicals
/// from symplectic completion.
pub fn tanner(m: u32, k: usize) -> Result<CodeSpec, CodeError> {
    let parts = TannerParts::build(m, k)?;
    if !parts.hx.mul_transpose(&parts.hz).is_zero() {
        return Err(CodeError::Invariant("H_X H_Z^T != 0".into()));
    }
    let (logical_z, logical_x) = css_logicals(&parts.hx, &parts.hz);
    let n = parts.hx.num_cols();
    Ok(CodeSpec {
        name: format!("tanner-{m}-{k}"),
        n,
        k: logical_z.len(),
        x_checks: css_checks(&parts.hx, Pauli::X),
        z_checks: css_checks(&parts.hz, Pauli::Z),
        logical_z,
        logical_x,
    })
}
