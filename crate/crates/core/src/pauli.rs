//! Bit-packed Pauli strings.
//!
//! Qubit `q` lives at bit `q % 64` of word `q / 64` in both the X and the Z
//! component vectors. A string is a tensor product of I/X/Y/Z with an implicit
//! `+1` sign; signs and i-powers are carried separately by [`PhasedPauli`] or
//! by the phase column of a tableau.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PauliError {
    #[error("length mismatch: {0} vs {1} qubits")]
    LengthMismatch(usize, usize),
    #[error("gate {gate} expects {expected} target(s), got {got}")]
    Arity { gate: Gate, expected: usize, got: usize },
    #[error("target qubit {qubit} out of range for {n} qubits")]
    TargetOutOfRange { qubit: usize, n: usize },
    #[error("repeated target qubit {0}")]
    RepeatedTarget(usize),
    #[error("invalid Pauli character {0:?}")]
    BadChar(char),
}

pub(crate) fn words_for(n: usize) -> usize {
    n.div_ceil(64)
}

/// Single-qubit Pauli operator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Pauli {
    I,
    X,
    Y,
    Z,
}

impl Pauli {
    pub fn from_bits(x: bool, z: bool) -> Self {
        match (x, z) {
            (false, false) => Pauli::I,
            (true, false) => Pauli::X,
            (true, true) => Pauli::Y,
            (false, true) => Pauli::Z,
        }
    }

    pub fn bits(self) -> (bool, bool) {
        match self {
            Pauli::I => (false, false),
            Pauli::X => (true, false),
            Pauli::Y => (true, true),
            Pauli::Z => (false, true),
        }
    }

    pub fn as_char(self) -> char {
        match self {
            Pauli::I => 'I',
            Pauli::X => 'X',
            Pauli::Y => 'Y',
            Pauli::Z => 'Z',
        }
    }

    pub fn from_char(c: char) -> Result<Self, PauliError> {
        match c {
            'I' | '_' => Ok(Pauli::I),
            'X' => Ok(Pauli::X),
            'Y' => Ok(Pauli::Y),
            'Z' => Ok(Pauli::Z),
            other => Err(PauliError::BadChar(other)),
        }
    }

    /// The gate that applies this Pauli.
    pub fn gate(self) -> Gate {
        match self {
            Pauli::I => Gate::I,
            Pauli::X => Gate::X,
            Pauli::Y => Gate::Y,
            Pauli::Z => Gate::Z,
        }
    }

    /// Whether this Pauli anticommutes with the single-qubit Pauli `(x, z)`.
    #[inline]
    pub fn anticommutes_with_bits(self, x: bool, z: bool) -> bool {
        let (px, pz) = self.bits();
        (px & z) ^ (pz & x)
    }
}

/// i-power contribution of multiplying single-qubit Paulis, indexed by
/// `x1 z1 x2 z2` read as a 4-bit number. Entries are exponents mod 4.
const G_TABLE: [u8; 16] = {
    let mut t = [0u8; 16];
    let mut idx = 0;
    while idx < 16 {
        let x1 = (idx >> 3) & 1;
        let z1 = (idx >> 2) & 1;
        let x2 = ((idx >> 1) & 1) as i32;
        let z2 = (idx & 1) as i32;
        let g: i32 = match (x1, z1) {
            (0, 0) => 0,
            (1, 1) => z2 - x2,
            (1, 0) => z2 * (2 * x2 - 1),
            _ => x2 * (1 - 2 * z2),
        };
        t[idx] = g.rem_euclid(4) as u8;
        idx += 1;
    }
    t
};

/// Exponent of `i` picked up when multiplying the single-qubit Pauli
/// `(x1, z1)` by `(x2, z2)`, mod 4.
#[inline]
pub fn g(x1: bool, z1: bool, x2: bool, z2: bool) -> u8 {
    G_TABLE[((x1 as usize) << 3) | ((z1 as usize) << 2) | ((x2 as usize) << 1) | z2 as usize]
}

/// Sum of the per-qubit i-power contributions of `P1 · P2`, mod 4, computed
/// 64 qubits at a time.
#[inline]
pub fn product_ipower(x1: &[u64], z1: &[u64], x2: &[u64], z2: &[u64]) -> u8 {
    let mut plus: u32 = 0;
    let mut minus: u32 = 0;
    for w in 0..x1.len() {
        let (a, b, c, d) = (x1[w], z1[w], x2[w], z2[w]);
        let y1 = a & b;
        let xo = a & !b;
        let zo = !a & b;
        plus += ((y1 & d & !c) | (xo & d & c) | (zo & c & !d)).count_ones();
        minus += ((y1 & c & !d) | (xo & d & !c) | (zo & c & d)).count_ones();
    }
    (plus as i64 - minus as i64).rem_euclid(4) as u8
}

/// An n-qubit Pauli string with implicit `+1` sign.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct PauliString {
    n: usize,
    x: Vec<u64>,
    z: Vec<u64>,
}

impl PauliString {
    pub fn identity(n: usize) -> Self {
        let w = words_for(n);
        PauliString { n, x: vec![0; w], z: vec![0; w] }
    }

    pub fn single(n: usize, q: usize, p: Pauli) -> Self {
        let mut s = Self::identity(n);
        s.set(q, p);
        s
    }

    /// Builds a string with `p` on each listed qubit.
    pub fn from_support(n: usize, qubits: &[usize], p: Pauli) -> Self {
        let mut s = Self::identity(n);
        for &q in qubits {
            s.set(q, p);
        }
        s
    }

    pub(crate) fn from_words(n: usize, x: Vec<u64>, z: Vec<u64>) -> Self {
        debug_assert_eq!(x.len(), words_for(n));
        debug_assert_eq!(z.len(), words_for(n));
        PauliString { n, x, z }
    }

    pub fn num_qubits(&self) -> usize {
        self.n
    }

    pub fn x_words(&self) -> &[u64] {
        &self.x
    }

    pub fn z_words(&self) -> &[u64] {
        &self.z
    }

    #[inline]
    pub fn x_bit(&self, q: usize) -> bool {
        (self.x[q / 64] >> (q % 64)) & 1 == 1
    }

    #[inline]
    pub fn z_bit(&self, q: usize) -> bool {
        (self.z[q / 64] >> (q % 64)) & 1 == 1
    }

    pub fn get(&self, q: usize) -> Pauli {
        Pauli::from_bits(self.x_bit(q), self.z_bit(q))
    }

    pub fn set(&mut self, q: usize, p: Pauli) {
        assert!(q < self.n, "qubit {q} out of range for {} qubits", self.n);
        let (x, z) = p.bits();
        let m = 1u64 << (q % 64);
        let w = q / 64;
        if x {
            self.x[w] |= m;
        } else {
            self.x[w] &= !m;
        }
        if z {
            self.z[w] |= m;
        } else {
            self.z[w] &= !m;
        }
    }

    pub fn is_identity(&self) -> bool {
        self.x.iter().chain(self.z.iter()).all(|&w| w == 0)
    }

    pub fn weight(&self) -> usize {
        self.x.iter().zip(&self.z).map(|(a, b)| (a | b).count_ones() as usize).sum()
    }

    /// Qubits on which the string acts non-trivially.
    pub fn support(&self) -> Vec<usize> {
        (0..self.n).filter(|&q| self.x_bit(q) || self.z_bit(q)).collect()
    }

    pub fn commutes(&self, other: &PauliString) -> Result<bool, PauliError> {
        self.check_len(other)?;
        Ok(!self.symplectic(other))
    }

    /// Symplectic inner product; `true` means the strings anticommute.
    pub(crate) fn symplectic(&self, other: &PauliString) -> bool {
        let mut acc = 0u64;
        for w in 0..self.x.len() {
            acc ^= (self.x[w] & other.z[w]) ^ (self.z[w] & other.x[w]);
        }
        acc.count_ones() % 2 == 1
    }

    fn check_len(&self, other: &PauliString) -> Result<(), PauliError> {
        if self.n != other.n {
            Err(PauliError::LengthMismatch(self.n, other.n))
        } else {
            Ok(())
        }
    }

    /// The Pauli part of `self · other` together with the i-power picked up.
    pub fn mul_raw(&self, other: &PauliString) -> Result<(PauliString, u8), PauliError> {
        self.check_len(other)?;
        let k = product_ipower(&self.x, &self.z, &other.x, &other.z);
        let x = self.x.iter().zip(&other.x).map(|(a, b)| a ^ b).collect();
        let z = self.z.iter().zip(&other.z).map(|(a, b)| a ^ b).collect();
        Ok((PauliString { n: self.n, x, z }, k))
    }
}

impl fmt::Display for PauliString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for q in 0..self.n {
            write!(f, "{}", self.get(q).as_char())?;
        }
        Ok(())
    }
}

impl fmt::Debug for PauliString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "PauliString({self})")
    }
}

impl FromStr for PauliString {
    type Err = PauliError;

    /// Parses `"XZIY"`; qubit 0 is the leftmost character.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let chars: Vec<char> = s.chars().collect();
        let mut p = PauliString::identity(chars.len());
        for (q, c) in chars.into_iter().enumerate() {
            p.set(q, Pauli::from_char(c)?);
        }
        Ok(p)
    }
}

impl Serialize for PauliString {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for PauliString {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// A Pauli string with a global phase `i^k`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct PhasedPauli {
    pub pauli: PauliString,
    pub k: u8,
}

impl PhasedPauli {
    pub fn new(pauli: PauliString, k: u8) -> Self {
        PhasedPauli { pauli, k: k % 4 }
    }

    pub fn is_hermitian(&self) -> bool {
        self.k % 2 == 0
    }

    pub fn mul(&self, other: &PhasedPauli) -> Result<PhasedPauli, PauliError> {
        let (pauli, g) = self.pauli.mul_raw(&other.pauli)?;
        Ok(PhasedPauli { pauli, k: (self.k + other.k + g) % 4 })
    }
}

impl fmt::Display for PhasedPauli {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sign = ["+", "+i", "-", "-i"][self.k as usize % 4];
        write!(f, "{sign}{}", self.pauli)
    }
}

impl FromStr for PhasedPauli {
    type Err = PauliError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (k, rest) = if let Some(r) = s.strip_prefix("+i") {
            (1, r)
        } else if let Some(r) = s.strip_prefix("-i") {
            (3, r)
        } else if let Some(r) = s.strip_prefix('+') {
            (0, r)
        } else if let Some(r) = s.strip_prefix('-') {
            (2, r)
        } else {
            (0, s)
        };
        Ok(PhasedPauli { pauli: rest.parse()?, k })
    }
}

/// Clifford gates understood by the tableaus.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Gate {
    I,
    X,
    Y,
    Z,
    H,
    S,
    Cnot,
}

impl Gate {
    pub fn arity(self) -> usize {
        match self {
            Gate::Cnot => 2,
            _ => 1,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Gate::I => "I",
            Gate::X => "X",
            Gate::Y => "Y",
            Gate::Z => "Z",
            Gate::H => "H",
            Gate::S => "S",
            Gate::Cnot => "CNOT",
        }
    }

    pub fn from_name(s: &str) -> Option<Gate> {
        Some(match s {
            "I" | "id" => Gate::I,
            "X" | "x" => Gate::X,
            "Y" | "y" => Gate::Y,
            "Z" | "z" => Gate::Z,
            "H" | "h" => Gate::H,
            "S" | "s" => Gate::S,
            "CNOT" | "CX" | "cx" => Gate::Cnot,
            _ => return None,
        })
    }

    pub fn as_pauli(self) -> Option<Pauli> {
        match self {
            Gate::I => Some(Pauli::I),
            Gate::X => Some(Pauli::X),
            Gate::Y => Some(Pauli::Y),
            Gate::Z => Some(Pauli::Z),
            _ => None,
        }
    }

    /// Checks arity, range and distinctness of `targets` on `n` qubits.
    pub fn check_targets(self, targets: &[usize], n: usize) -> Result<(), PauliError> {
        if targets.len() != self.arity() {
            return Err(PauliError::Arity { gate: self, expected: self.arity(), got: targets.len() });
        }
        for &q in targets {
            if q >= n {
                return Err(PauliError::TargetOutOfRange { qubit: q, n });
            }
        }
        if targets.len() == 2 && targets[0] == targets[1] {
            return Err(PauliError::RepeatedTarget(targets[0]));
        }
        Ok(())
    }
}

impl fmt::Display for Gate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Conjugation rule for one row, given the row's bits at the target qubits.
/// Returns the new bits and whether the sign flips.
#[inline]
pub(crate) fn conj_bits(gate: Gate, a: (bool, bool), b: (bool, bool)) -> ((bool, bool), (bool, bool), bool) {
    let ((xa, za), (xb, zb)) = (a, b);
    match gate {
        Gate::I => (a, b, false),
        Gate::X => (a, b, za),
        Gate::Z => (a, b, xa),
        Gate::Y => (a, b, xa ^ za),
        Gate::H => ((za, xa), b, xa & za),
        Gate::S => ((xa, za ^ xa), b, xa & za),
        Gate::Cnot => {
            let flip = xa & zb & !(xb ^ za);
            ((xa, za ^ zb), (xb ^ xa, zb), flip)
        }
    }
}

/// Returns `V p V†` for the gate `V` on `targets`, plus the sign flip.
pub fn conj_clifford(gate: Gate, targets: &[usize], p: &PauliString) -> Result<(PauliString, bool), PauliError> {
    gate.check_targets(targets, p.n)?;
    let mut out = p.clone();
    let a = targets[0];
    let bits_a = (p.x_bit(a), p.z_bit(a));
    let (b, bits_b) = if gate.arity() == 2 {
        (targets[1], (p.x_bit(targets[1]), p.z_bit(targets[1])))
    } else {
        (a, (false, false))
    };
    let (na, nb, flip) = conj_bits(gate, bits_a, bits_b);
    out.set(a, Pauli::from_bits(na.0, na.1));
    if gate.arity() == 2 {
        out.set(b, Pauli::from_bits(nb.0, nb.1));
    }
    Ok((out, flip))
}
