//! Dense GF(2) matrices with bit-packed rows.

use std::fmt;

#[derive(Clone, PartialEq, Eq, Hash)]
pub struct BitMatrix {
    cols: usize,
    rows: Vec<Vec<u64>>,
}

fn words(cols: usize) -> usize {
    cols.div_ceil(64)
}

impl BitMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        BitMatrix { cols, rows: vec![vec![0; words(cols)]; rows] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.set(i, i, true);
        }
        m
    }

    pub fn from_rows(cols: usize, rows: Vec<Vec<u64>>) -> Self {
        debug_assert!(rows.iter().all(|r| r.len() == words(cols)));
        BitMatrix { cols, rows }
    }

    /// Builds a matrix from rows of 0/1 values.
    pub fn from_bits(rows: &[Vec<u8>]) -> Self {
        let cols = rows.first().map_or(0, Vec::len);
        let mut m = Self::zeros(rows.len(), cols);
        for (r, row) in rows.iter().enumerate() {
            assert_eq!(row.len(), cols, "ragged rows");
            for (c, &b) in row.iter().enumerate() {
                m.set(r, c, b == 1);
            }
        }
        m
    }

    pub fn num_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn num_cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, r: usize, c: usize) -> bool {
        (self.rows[r][c / 64] >> (c % 64)) & 1 == 1
    }

    pub fn set(&mut self, r: usize, c: usize, v: bool) {
        let m = 1u64 << (c % 64);
        if v {
            self.rows[r][c / 64] |= m;
        } else {
            self.rows[r][c / 64] &= !m;
        }
    }

    pub fn flip(&mut self, r: usize, c: usize) {
        self.rows[r][c / 64] ^= 1u64 << (c % 64);
    }

    pub fn row(&self, r: usize) -> &[u64] {
        &self.rows[r]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[u64]> {
        self.rows.iter().map(Vec::as_slice)
    }

    pub fn push_row(&mut self, row: Vec<u64>) {
        assert_eq!(row.len(), words(self.cols));
        self.rows.push(row);
    }

    /// Column indices of the ones in row `r`.
    pub fn support(&self, r: usize) -> Vec<usize> {
        (0..self.cols).filter(|&c| self.get(r, c)).collect()
    }

    pub fn row_weight(&self, r: usize) -> usize {
        self.rows[r].iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn transpose(&self) -> BitMatrix {
        let mut t = BitMatrix::zeros(self.cols, self.rows.len());
        for r in 0..self.rows.len() {
            for c in 0..self.cols {
                if self.get(r, c) {
                    t.set(c, r, true);
                }
            }
        }
        t
    }

    /// `self · other` over GF(2).
    pub fn mul(&self, other: &BitMatrix) -> BitMatrix {
        assert_eq!(self.cols, other.rows.len(), "dimension mismatch");
        let mut out = BitMatrix::zeros(self.rows.len(), other.cols);
        for (r, row) in self.rows.iter().enumerate() {
            for k in 0..self.cols {
                if (row[k / 64] >> (k % 64)) & 1 == 1 {
                    for (o, x) in out.rows[r].iter_mut().zip(&other.rows[k]) {
                        *o ^= x;
                    }
                }
            }
        }
        out
    }

    /// `self · otherᵀ`: inner products of rows.
    pub fn mul_transpose(&self, other: &BitMatrix) -> BitMatrix {
        assert_eq!(self.cols, other.cols, "dimension mismatch");
        let mut out = BitMatrix::zeros(self.rows.len(), other.rows.len());
        for (i, a) in self.rows.iter().enumerate() {
            for (j, b) in other.rows.iter().enumerate() {
                if dot(a, b) {
                    out.set(i, j, true);
                }
            }
        }
        out
    }

    pub fn is_zero(&self) -> bool {
        self.rows.iter().all(|r| r.iter().all(|&w| w == 0))
    }

    /// Kronecker product.
    pub fn kron(&self, other: &BitMatrix) -> BitMatrix {
        let mut out = BitMatrix::zeros(self.rows.len() * other.rows.len(), self.cols * other.cols);
        for i in 0..self.rows.len() {
            for j in 0..self.cols {
                if !self.get(i, j) {
                    continue;
                }
                for k in 0..other.rows.len() {
                    for l in 0..other.cols {
                        if other.get(k, l) {
                            out.set(i * other.rows.len() + k, j * other.cols + l, true);
                        }
                    }
                }
            }
        }
        out
    }

    /// Reduced row-echelon form in place; returns the pivot columns.
    pub fn rref(&mut self) -> Vec<usize> {
        let mut pivots = Vec::new();
        let mut next = 0;
        for c in 0..self.cols {
            let Some(p) = (next..self.rows.len()).find(|&r| self.get(r, c)) else { continue };
            self.rows.swap(next, p);
            let pivot = self.rows[next].clone();
            for r in 0..self.rows.len() {
                if r != next && self.get(r, c) {
                    for (a, b) in self.rows[r].iter_mut().zip(&pivot) {
                        *a ^= b;
                    }
                }
            }
            pivots.push(c);
            next += 1;
            if next == self.rows.len() {
                break;
            }
        }
        pivots
    }

    pub fn rank(&self) -> usize {
        self.clone().rref().len()
    }

    /// Basis of `{v : self · v = 0}`, one vector per row of the result.
    pub fn kernel(&self) -> BitMatrix {
        let mut m = self.clone();
        let pivots = m.rref();
        let is_pivot = {
            let mut v = vec![false; self.cols];
            for &p in &pivots {
                v[p] = true;
            }
            v
        };
        let mut out = BitMatrix::zeros(0, self.cols);
        for free in (0..self.cols).filter(|&c| !is_pivot[c]) {
            let mut v = vec![0u64; words(self.cols)];
            v[free / 64] |= 1 << (free % 64);
            for (r, &p) in pivots.iter().enumerate() {
                if m.get(r, free) {
                    v[p / 64] |= 1 << (p % 64);
                }
            }
            out.push_row(v);
        }
        out
    }

    /// Inverse of a square matrix, if it exists.
    pub fn inverse(&self) -> Option<BitMatrix> {
        let n = self.rows.len();
        assert_eq!(n, self.cols, "inverse of a non-square matrix");
        let mut aug = BitMatrix::zeros(n, 2 * n);
        for r in 0..n {
            for c in 0..n {
                aug.set(r, c, self.get(r, c));
            }
            aug.set(r, n + r, true);
        }
        let pivots = aug.rref();
        if pivots.len() < n || pivots[n - 1] != n - 1 {
            return None;
        }
        let mut inv = BitMatrix::zeros(n, n);
        for r in 0..n {
            for c in 0..n {
                inv.set(r, c, aug.get(r, n + c));
            }
        }
        Some(inv)
    }
}

pub fn dot(a: &[u64], b: &[u64]) -> bool {
    a.iter().zip(b).map(|(x, y)| (x & y).count_ones()).sum::<u32>() % 2 == 1
}

/// Incremental basis used to pick linearly independent vectors greedily.
#[derive(Clone, Default)]
pub struct RowBasis {
    // reduced rows keyed by their leading bit
    rows: Vec<(usize, Vec<u64>)>,
}

impl RowBasis {
    pub fn new() -> Self {
        Self::default()
    }

    fn reduce(&self, v: &mut [u64]) {
        for (lead, row) in &self.rows {
            if (v[lead / 64] >> (lead % 64)) & 1 == 1 {
                for (a, b) in v.iter_mut().zip(row) {
                    *a ^= b;
                }
            }
        }
    }

    /// Adds `v` if it is independent of the basis; returns whether it was.
    pub fn insert(&mut self, v: &[u64]) -> bool {
        let mut v = v.to_vec();
        self.reduce(&mut v);
        let Some(lead) = first_one(&v) else { return false };
        for (_, row) in self.rows.iter_mut() {
            if (row[lead / 64] >> (lead % 64)) & 1 == 1 {
                for (a, b) in row.iter_mut().zip(&v) {
                    *a ^= b;
                }
            }
        }
        self.rows.push((lead, v));
        true
    }

    pub fn contains(&self, v: &[u64]) -> bool {
        let mut v = v.to_vec();
        self.reduce(&mut v);
        first_one(&v).is_none()
    }

    pub fn rank(&self) -> usize {
        self.rows.len()
    }
}

fn first_one(v: &[u64]) -> Option<usize> {
    v.iter().enumerate().find(|(_, w)| **w != 0).map(|(i, w)| i * 64 + w.trailing_zeros() as usize)
}

impl fmt::Debug for BitMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for r in 0..self.rows.len() {
            let s: String = (0..self.cols).map(|c| if self.get(r, c) { '1' } else { '0' }).collect();
            writeln!(f, "{s}")?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kernel_and_rank() {
        let m = BitMatrix::from_bits(&[vec![1, 1, 0, 0], vec![0, 1, 1, 0], vec![1, 0, 1, 0]]);
        assert_eq!(m.rank(), 2);
        let k = m.kernel();
        assert_eq!(k.num_rows(), 2);
        assert!(m.mul_transpose(&k).is_zero());
    }

    #[test]
    fn inverse_round_trip() {
        let m = BitMatrix::from_bits(&[vec![1, 1, 0], vec![0, 1, 1], vec![0, 0, 1]]);
        let inv = m.inverse().unwrap();
        assert_eq!(m.mul(&inv), BitMatrix::identity(3));
        assert!(BitMatrix::from_bits(&[vec![1, 1], vec![1, 1]]).inverse().is_none());
    }

    #[test]
    fn greedy_basis() {
        let mut b = RowBasis::new();
        assert!(b.insert(&[0b011]));
        assert!(b.insert(&[0b110]));
        assert!(!b.insert(&[0b101]));
        assert!(b.contains(&[0b101]));
        assert!(!b.contains(&[0b100]));
        assert_eq!(b.rank(), 2);
    }
}
