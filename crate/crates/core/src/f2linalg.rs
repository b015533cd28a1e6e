//! Dense linear algebra over GF(2).
//!
//! Matrices are stored row-major with 64 entries per machine word. Every
//! mutating operation keeps the bits past `cols` in the last word of a row
//! cleared, so whole-word comparisons and XORs are always valid.

use std::fmt;

use rand::Rng;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

const WORD: usize = 64;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum F2Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("matrix is singular")]
    Singular,
    #[error("linear system is inconsistent")]
    Inconsistent,
    #[error("matrix must be square, got {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },
    #[error("commutator factorization needs n >= 3, got n = {0}")]
    TooSmall(usize),
    #[error("commutator factorization gave up after {0} attempts")]
    CommutatorFailed(usize),
    #[error("invalid matrix literal: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, F2Error>;

/// A dense binary matrix.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct F2Matrix {
    rows: usize,
    cols: usize,
    stride: usize,
    words: Vec<u64>,
}

#[inline]
fn stride_for(cols: usize) -> usize {
    cols.div_ceil(WORD)
}

impl F2Matrix {
    /// All-zero `rows x cols` matrix. Zero-sized dimensions are allowed for
    /// intermediate values; the public constructors used by the circuit IR
    /// reject them.
    pub fn zeros(rows: usize, cols: usize) -> Self {
        let stride = stride_for(cols);
        F2Matrix {
            rows,
            cols,
            stride,
            words: vec![0; rows * stride],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.set(i, i, true);
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> bool) -> Self {
        let mut m = Self::zeros(rows, cols);
        for i in 0..rows {
            for j in 0..cols {
                if f(i, j) {
                    m.set(i, j, true);
                }
            }
        }
        m
    }

    /// Builds a matrix from 0/1 rows. All rows must have the same length.
    pub fn from_rows<R: AsRef<[u8]>>(rows: &[R]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut m = Self::zeros(rows.len(), cols);
        for (i, r) in rows.iter().enumerate() {
            let r = r.as_ref();
            if r.len() != cols {
                return Err(F2Error::DimensionMismatch(format!(
                    "row {i} has {} entries, expected {cols}",
                    r.len()
                )));
            }
            for (j, &b) in r.iter().enumerate() {
                match b {
                    0 => {}
                    1 => m.set(i, j, true),
                    _ => return Err(F2Error::Parse(format!("entry ({i},{j}) = {b}"))),
                }
            }
        }
        Ok(m)
    }

    /// Random matrix with independent uniform entries.
    pub fn random<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> Self {
        let mut m = Self::zeros(rows, cols);
        for w in m.words.iter_mut() {
            *w = rng.gen();
        }
        m.clear_tails();
        m
    }

    /// Uniformly random element of GL(n), by rejection sampling.
    pub fn random_invertible<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Self {
        assert!(n >= 1, "GL(0) is not supported");
        loop {
            let m = Self::random(n, n, rng);
            if m.rank() == n {
                return m;
            }
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> bool {
        debug_assert!(i < self.rows && j < self.cols);
        (self.words[i * self.stride + j / WORD] >> (j % WORD)) & 1 == 1
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: bool) {
        debug_assert!(i < self.rows && j < self.cols);
        let w = &mut self.words[i * self.stride + j / WORD];
        let mask = 1u64 << (j % WORD);
        if v {
            *w |= mask;
        } else {
            *w &= !mask;
        }
    }

    #[inline]
    pub fn toggle(&mut self, i: usize, j: usize) {
        self.words[i * self.stride + j / WORD] ^= 1u64 << (j % WORD);
    }

    #[inline]
    pub fn row_words(&self, i: usize) -> &[u64] {
        &self.words[i * self.stride..(i + 1) * self.stride]
    }

    pub fn row_bits(&self, i: usize) -> Vec<bool> {
        (0..self.cols).map(|j| self.get(i, j)).collect()
    }

    pub fn col_bits(&self, j: usize) -> Vec<bool> {
        (0..self.rows).map(|i| self.get(i, j)).collect()
    }

    pub fn set_row_bits(&mut self, i: usize, bits: &[bool]) {
        assert_eq!(bits.len(), self.cols);
        for (j, &b) in bits.iter().enumerate() {
            self.set(i, j, b);
        }
    }

    pub fn set_col_bits(&mut self, j: usize, bits: &[bool]) {
        assert_eq!(bits.len(), self.rows);
        for (i, &b) in bits.iter().enumerate() {
            self.set(i, j, b);
        }
    }

    pub fn row_is_zero(&self, i: usize) -> bool {
        self.row_words(i).iter().all(|&w| w == 0)
    }

    pub fn is_zero(&self) -> bool {
        self.words.iter().all(|&w| w == 0)
    }

    pub fn is_identity(&self) -> bool {
        self.is_square() && *self == Self::identity(self.rows)
    }

    pub fn is_symmetric(&self) -> bool {
        self.is_square() && *self == self.transpose()
    }

    pub fn count_ones(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    /// `row[dst] ^= row[src]`.
    #[inline]
    pub fn xor_row_into(&mut self, src: usize, dst: usize) {
        debug_assert_ne!(src, dst);
        let s = self.stride;
        let (a, b) = (src * s, dst * s);
        for k in 0..s {
            let v = self.words[a + k];
            self.words[b + k] ^= v;
        }
    }

    pub fn swap_rows(&mut self, a: usize, b: usize) {
        if a == b {
            return;
        }
        for k in 0..self.stride {
            self.words.swap(a * self.stride + k, b * self.stride + k);
        }
    }

    /// `col[dst] ^= col[src]`.
    pub fn xor_col_into(&mut self, src: usize, dst: usize) {
        for i in 0..self.rows {
            if self.get(i, src) {
                self.toggle(i, dst);
            }
        }
    }

    pub fn swap_cols(&mut self, a: usize, b: usize) {
        if a == b {
            return;
        }
        for i in 0..self.rows {
            let (x, y) = (self.get(i, a), self.get(i, b));
            self.set(i, a, y);
            self.set(i, b, x);
        }
    }

    fn clear_tails(&mut self) {
        let rem = self.cols % WORD;
        if rem == 0 || self.stride == 0 {
            return;
        }
        let mask = (1u64 << rem) - 1;
        for i in 0..self.rows {
            self.words[i * self.stride + self.stride - 1] &= mask;
        }
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                if self.get(i, j) {
                    t.set(j, i, true);
                }
            }
        }
        t
    }

    /// Matrix product over GF(2).
    pub fn mul(&self, other: &Self) -> Result<Self> {
        if self.cols != other.rows {
            return Err(F2Error::DimensionMismatch(format!(
                "{}x{} times {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut out = Self::zeros(self.rows, other.cols);
        let s = other.stride;
        for i in 0..self.rows {
            let dst = i * s;
            for k in 0..self.cols {
                if self.get(i, k) {
                    let src = k * s;
                    for w in 0..s {
                        out.words[dst + w] ^= other.words[src + w];
                    }
                }
            }
        }
        Ok(out)
    }

    /// Entrywise sum (XOR).
    pub fn add(&self, other: &Self) -> Result<Self> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(F2Error::DimensionMismatch(format!(
                "{}x{} plus {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut out = self.clone();
        for (a, b) in out.words.iter_mut().zip(&other.words) {
            *a ^= b;
        }
        Ok(out)
    }

    /// Matrix-vector product `self * v`.
    pub fn mul_vec(&self, v: &[bool]) -> Vec<bool> {
        assert_eq!(v.len(), self.cols, "vector length");
        (0..self.rows)
            .map(|i| {
                (0..self.cols).fold(false, |acc, j| acc ^ (self.get(i, j) & v[j]))
            })
            .collect()
    }

    /// Copies the block `[r0, r0+rows) x [c0, c0+cols)`.
    pub fn submatrix(&self, r0: usize, c0: usize, rows: usize, cols: usize) -> Self {
        Self::from_fn(rows, cols, |i, j| self.get(r0 + i, c0 + j))
    }

    /// Selects the given rows and columns, in order.
    pub fn select(&self, rows: &[usize], cols: &[usize]) -> Self {
        Self::from_fn(rows.len(), cols.len(), |i, j| self.get(rows[i], cols[j]))
    }

    pub fn set_block(&mut self, r0: usize, c0: usize, block: &Self) {
        for i in 0..block.rows {
            for j in 0..block.cols {
                self.set(r0 + i, c0 + j, block.get(i, j));
            }
        }
    }

    /// Block-diagonal matrix with the given square blocks.
    pub fn block_diag(blocks: &[&Self]) -> Self {
        let n: usize = blocks.iter().map(|b| b.rows).sum();
        let m: usize = blocks.iter().map(|b| b.cols).sum();
        let mut out = Self::zeros(n, m);
        let (mut r, mut c) = (0, 0);
        for b in blocks {
            out.set_block(r, c, b);
            r += b.rows;
            c += b.cols;
        }
        out
    }

    /// Reduces `self` to reduced row echelon form in place and returns the
    /// pivot column of each nonzero row. Pivot rows are always the
    /// lowest-index candidates.
    fn rref_in_place(&mut self, ncols: usize) -> Vec<usize> {
        let mut pivots = Vec::new();
        let mut r = 0;
        for c in 0..ncols {
            if r == self.rows {
                break;
            }
            let Some(p) = (r..self.rows).find(|&i| self.get(i, c)) else {
                continue;
            };
            self.swap_rows(p, r);
            for i in 0..self.rows {
                if i != r && self.get(i, c) {
                    self.xor_row_into(r, i);
                }
            }
            pivots.push(c);
            r += 1;
        }
        pivots
    }

    /// Pivot columns of the reduced row echelon form, in increasing order.
    pub fn pivot_columns(&self) -> Vec<usize> {
        let mut m = self.clone();
        m.rref_in_place(self.cols)
    }

    pub fn rank(&self) -> usize {
        let mut m = self.clone();
        let mut rank = 0;
        for c in 0..m.cols {
            if rank == m.rows {
                break;
            }
            let Some(p) = (rank..m.rows).find(|&i| m.get(i, c)) else {
                continue;
            };
            m.swap_rows(p, rank);
            for i in rank + 1..m.rows {
                if m.get(i, c) {
                    m.xor_row_into(rank, i);
                }
            }
            rank += 1;
        }
        rank
    }

    pub fn is_invertible(&self) -> bool {
        self.is_square() && self.rank() == self.rows
    }

    pub fn inverse(&self) -> Result<Self> {
        if !self.is_square() {
            return Err(F2Error::NotSquare {
                rows: self.rows,
                cols: self.cols,
            });
        }
        let n = self.rows;
        let mut aug = Self::zeros(n, 2 * n);
        for i in 0..n {
            for j in 0..n {
                if self.get(i, j) {
                    aug.set(i, j, true);
                }
            }
            aug.set(i, n + i, true);
        }
        let pivots = aug.rref_in_place(n);
        if pivots.len() < n {
            return Err(F2Error::Singular);
        }
        Ok(aug.submatrix(0, n, n, n))
    }

    /// Some `x` with `self * x = rhs`.
    pub fn solve_linear(&self, rhs: &[bool]) -> Result<Vec<bool>> {
        if rhs.len() != self.rows {
            return Err(F2Error::DimensionMismatch(format!(
                "{} equations but rhs has {} entries",
                self.rows,
                rhs.len()
            )));
        }
        let mut aug = Self::zeros(self.rows, self.cols + 1);
        for i in 0..self.rows {
            for j in 0..self.cols {
                if self.get(i, j) {
                    aug.set(i, j, true);
                }
            }
            aug.set(i, self.cols, rhs[i]);
        }
        let pivots = aug.rref_in_place(self.cols);
        // A row with zero coefficients and a set rhs bit.
        for i in pivots.len()..self.rows {
            if aug.get(i, self.cols) {
                return Err(F2Error::Inconsistent);
            }
        }
        let mut x = vec![false; self.cols];
        for (r, &c) in pivots.iter().enumerate() {
            x[c] = aug.get(r, self.cols);
        }
        Ok(x)
    }

    /// Basis of the right null space `{x : self * x = 0}`.
    pub fn kernel_basis(&self) -> Vec<Vec<bool>> {
        let mut m = self.clone();
        let pivots = m.rref_in_place(self.cols);
        let mut is_pivot = vec![false; self.cols];
        for &c in &pivots {
            is_pivot[c] = true;
        }
        let mut basis = Vec::new();
        for f in (0..self.cols).filter(|&c| !is_pivot[c]) {
            let mut v = vec![false; self.cols];
            v[f] = true;
            for (r, &c) in pivots.iter().enumerate() {
                v[c] = m.get(r, f);
            }
            basis.push(v);
        }
        basis
    }

    /// Characteristic polynomial, coefficients in ascending degree
    /// (length `n + 1`, leading coefficient set).
    pub fn charpoly(&self) -> Result<Vec<bool>> {
        if !self.is_square() {
            return Err(F2Error::NotSquare {
                rows: self.rows,
                cols: self.cols,
            });
        }
        let n = self.rows;
        let mut h = self.clone();
        // Similarity reduction to upper Hessenberg form.
        for j in 0..n.saturating_sub(2) {
            let Some(p) = (j + 1..n).find(|&i| h.get(i, j)) else {
                continue;
            };
            if p != j + 1 {
                h.swap_rows(p, j + 1);
                h.swap_cols(p, j + 1);
            }
            for r in j + 2..n {
                if h.get(r, j) {
                    h.xor_row_into(j + 1, r);
                    h.xor_col_into(r, j + 1);
                }
            }
        }
        // p_m = (x + h_mm) p_{m-1} + sum_{i<m} h_im (prod_{k=i+1..m} h_{k,k-1}) p_{i-1}
        let mut polys: Vec<Vec<bool>> = vec![vec![true]];
        for m in 0..n {
            let prev = &polys[m];
            let mut next = vec![false; m + 2];
            for (d, &c) in prev.iter().enumerate() {
                next[d + 1] ^= c;
                next[d] ^= c & h.get(m, m);
            }
            let mut sub = true;
            for i in (0..m).rev() {
                sub &= h.get(i + 1, i);
                if !sub {
                    break;
                }
                if h.get(i, m) {
                    for (d, &c) in polys[i].iter().enumerate() {
                        next[d] ^= c;
                    }
                }
            }
            polys.push(next);
        }
        Ok(polys.pop().unwrap())
    }

    /// Row `i` as a lowercase hex string, most significant digit first, where
    /// bit `j` of the value is entry `(i, j)`.
    pub fn row_hex(&self, i: usize) -> String {
        let digits = self.cols.div_ceil(4).max(1);
        let mut s = String::with_capacity(digits);
        for d in (0..digits).rev() {
            let mut v = 0u8;
            for b in 0..4 {
                let j = d * 4 + b;
                if j < self.cols && self.get(i, j) {
                    v |= 1 << b;
                }
            }
            s.push(char::from_digit(v as u32, 16).unwrap());
        }
        s
    }

    /// Inverse of [`F2Matrix::row_hex`] for a whole matrix.
    pub fn from_hex_rows<S: AsRef<str>>(rows: &[S], cols: usize) -> Result<Self> {
        let mut m = Self::zeros(rows.len(), cols);
        for (i, r) in rows.iter().enumerate() {
            let r = r.as_ref();
            if r.is_empty() {
                return Err(F2Error::Parse(format!("row {i} is empty")));
            }
            for (k, ch) in r.chars().rev().enumerate() {
                let v = ch
                    .to_digit(16)
                    .ok_or_else(|| F2Error::Parse(format!("bad hex digit {ch:?} in row {i}")))?;
                for b in 0..4 {
                    if (v >> b) & 1 == 1 {
                        let j = k * 4 + b;
                        if j >= cols {
                            return Err(F2Error::Parse(format!(
                                "row {i} sets column {j} beyond width {cols}"
                            )));
                        }
                        m.set(i, j, true);
                    }
                }
            }
        }
        Ok(m)
    }
}

impl fmt::Debug for F2Matrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "F2Matrix {}x{} [", self.rows, self.cols)?;
        for i in 0..self.rows {
            let row: String = (0..self.cols)
                .map(|j| if self.get(i, j) { '1' } else { '0' })
                .collect();
            writeln!(f, "  {row}")?;
        }
        write!(f, "]")
    }
}

#[derive(Serialize, Deserialize)]
struct F2MatrixRepr {
    rows: usize,
    cols: usize,
    hex: Vec<String>,
}

impl Serialize for F2Matrix {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        F2MatrixRepr {
            rows: self.rows,
            cols: self.cols,
            hex: (0..self.rows).map(|i| self.row_hex(i)).collect(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for F2Matrix {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let r = F2MatrixRepr::deserialize(d)?;
        if r.hex.len() != r.rows {
            return Err(serde::de::Error::custom("row count does not match hex rows"));
        }
        F2Matrix::from_hex_rows(&r.hex, r.cols).map_err(serde::de::Error::custom)
    }
}

/// Number of companion-form attempts (each with a fresh random conjugation)
/// before `commutator_decompose` reports failure.
pub const COMMUTATOR_ATTEMPTS: usize = 256;

/// Factors `a` as the group commutator `d^-1 b^-1 d b`.
///
/// The search picks `d` among companion matrices `C(c) = S + c e_{n-1}^T`
/// (`S` the down-shift) with `det(x - C(c)) = det(x - C(c) a)`. Because
/// `C(c) a` is a rank-one update of `S a` that is linear in `c`, both
/// characteristic polynomials are affine in `c` and the condition is a linear
/// system. When `C(c) a` is also cyclic it is similar to `C(c)`; a Krylov basis
/// of a cyclic vector gives `b` with `b (C a) b^-1 = C`, hence
/// `d^-1 b^-1 d b = a`. A random conjugation of `a` is applied between
/// attempts. Every returned pair is verified by recomposition.
pub fn commutator_decompose<R: Rng + ?Sized>(
    a: &F2Matrix,
    rng: &mut R,
) -> Result<(F2Matrix, F2Matrix)> {
    if !a.is_square() {
        return Err(F2Error::NotSquare {
            rows: a.rows,
            cols: a.cols,
        });
    }
    let n = a.rows;
    if n < 3 {
        return Err(F2Error::TooSmall(n));
    }
    if !a.is_invertible() {
        return Err(F2Error::Singular);
    }
    if a.is_identity() {
        return Ok((F2Matrix::identity(n), F2Matrix::identity(n)));
    }
    for attempt in 0..COMMUTATOR_ATTEMPTS {
        let (p, p_inv) = if attempt == 0 {
            (F2Matrix::identity(n), F2Matrix::identity(n))
        } else {
            let p = F2Matrix::random_invertible(n, rng);
            let p_inv = p.inverse()?;
            (p, p_inv)
        };
        let conj = p_inv.mul(a)?.mul(&p)?;
        if let Some((b, d)) = companion_attempt(&conj, rng)? {
            let b = p.mul(&b)?.mul(&p_inv)?;
            let d = p.mul(&d)?.mul(&p_inv)?;
            if recompose_commutator(&b, &d)? == *a {
                return Ok((b, d));
            }
        }
    }
    Err(F2Error::CommutatorFailed(COMMUTATOR_ATTEMPTS))
}

/// `d^-1 b^-1 d b`.
pub fn recompose_commutator(b: &F2Matrix, d: &F2Matrix) -> Result<F2Matrix> {
    let b_inv = b.inverse()?;
    let d_inv = d.inverse()?;
    d_inv.mul(&b_inv)?.mul(d)?.mul(b)
}

fn companion(c: &[bool]) -> F2Matrix {
    let n = c.len();
    let mut m = F2Matrix::zeros(n, n);
    for i in 0..n - 1 {
        m.set(i + 1, i, true);
    }
    m.set_col_bits(n - 1, c);
    m
}

fn companion_attempt<R: Rng + ?Sized>(
    a: &F2Matrix,
    rng: &mut R,
) -> Result<Option<(F2Matrix, F2Matrix)>> {
    let n = a.rows;
    let shift_a = companion(&vec![false; n]).mul(a)?;
    let last_row = a.row_bits(n - 1);
    let g0 = shift_a.charpoly()?;

    // Unknowns c_0..c_{n-1}; equation j matches the x^j coefficient, plus
    // c_0 = 1 so that the companion matrix is invertible.
    let mut coeff = F2Matrix::zeros(n + 1, n);
    let mut rhs = vec![false; n + 1];
    for i in 0..n {
        let mut upd = shift_a.clone();
        for (j, &bit) in last_row.iter().enumerate() {
            if bit {
                upd.toggle(i, j);
            }
        }
        let gi = upd.charpoly()?;
        for j in 0..n {
            let delta = gi[j] ^ g0[j];
            coeff.set(j, i, delta ^ (i == j));
        }
    }
    for j in 0..n {
        rhs[j] = g0[j];
    }
    coeff.set(n, 0, true);
    rhs[n] = true;

    let particular = match coeff.solve_linear(&rhs) {
        Ok(x) => x,
        Err(F2Error::Inconsistent) => return Ok(None),
        Err(e) => return Err(e),
    };
    let kernel = coeff.kernel_basis();

    for _ in 0..8 {
        let mut c = particular.clone();
        for v in &kernel {
            if rng.gen::<bool>() {
                for (x, &y) in c.iter_mut().zip(v) {
                    *x ^= y;
                }
            }
        }
        let d = companion(&c);
        let m = d.mul(a)?;
        for _ in 0..16 {
            let v: Vec<bool> = (0..n).map(|_| rng.gen()).collect();
            let mut krylov = F2Matrix::zeros(n, n);
            let mut cur = v;
            for j in 0..n {
                krylov.set_col_bits(j, &cur);
                cur = m.mul_vec(&cur);
            }
            if let Ok(b) = krylov.inverse() {
                return Ok(Some((b, d)));
            }
        }
    }
    Ok(None)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    /// Independent triple-loop reference product.
    fn naive_mul(a: &F2Matrix, b: &F2Matrix) -> F2Matrix {
        F2Matrix::from_fn(a.rows(), b.cols(), |i, j| {
            (0..a.cols()).filter(|&k| a.get(i, k) && b.get(k, j)).count() % 2 == 1
        })
    }

    /// Row space size by enumerating all row combinations.
    fn brute_rank(a: &F2Matrix) -> usize {
        let mut seen = std::collections::HashSet::new();
        for mask in 0u32..(1 << a.rows()) {
            let v: Vec<bool> = (0..a.cols())
                .map(|j| {
                    (0..a.rows())
                        .filter(|&i| mask >> i & 1 == 1 && a.get(i, j))
                        .count()
                        % 2
                        == 1
                })
                .collect();
            seen.insert(v);
        }
        seen.len().trailing_zeros() as usize
    }

    #[test]
    fn identity_times_a() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let a = F2Matrix::random(3, 3, &mut rng);
        assert_eq!(F2Matrix::identity(3).mul(&a).unwrap(), a);
    }

    #[test]
    fn transvection_squares_to_identity() {
        let t = F2Matrix::from_rows(&[[1, 1], [0, 1]]).unwrap();
        assert_eq!(t.mul(&t).unwrap(), F2Matrix::identity(2));
    }

    #[test]
    fn mul_matches_naive() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for (r, k, c) in [(6, 6, 6), (3, 70, 5), (65, 65, 130)] {
            let a = F2Matrix::random(r, k, &mut rng);
            let b = F2Matrix::random(k, c, &mut rng);
            assert_eq!(a.mul(&b).unwrap(), naive_mul(&a, &b));
        }
    }

    #[test]
    fn mul_dimension_mismatch() {
        let a = F2Matrix::zeros(2, 3);
        assert!(matches!(a.mul(&a), Err(F2Error::DimensionMismatch(_))));
    }

    #[test]
    fn inverse_small_cases() {
        assert_eq!(
            F2Matrix::identity(5).inverse().unwrap(),
            F2Matrix::identity(5)
        );
        let swap = F2Matrix::from_rows(&[[0, 1], [1, 0]]).unwrap();
        assert_eq!(swap.inverse().unwrap(), swap);
        let sing = F2Matrix::from_rows(&[[1, 1], [1, 1]]).unwrap();
        assert_eq!(sing.inverse(), Err(F2Error::Singular));
    }

    #[test]
    fn inverse_exhaustive_up_to_3() {
        for n in 1..=3usize {
            for mask in 0u32..(1 << (n * n)) {
                let a = F2Matrix::from_fn(n, n, |i, j| mask >> (i * n + j) & 1 == 1);
                match a.inverse() {
                    Ok(b) => {
                        assert_eq!(a.rank(), n);
                        assert!(a.mul(&b).unwrap().is_identity());
                        assert!(b.mul(&a).unwrap().is_identity());
                    }
                    Err(F2Error::Singular) => assert!(a.rank() < n),
                    Err(e) => panic!("{e}"),
                }
            }
        }
    }

    #[test]
    fn rank_cases() {
        assert_eq!(F2Matrix::zeros(3, 3).rank(), 0);
        assert_eq!(F2Matrix::identity(4).rank(), 4);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let mut a = F2Matrix::random(5, 5, &mut rng);
            let r0 = a.row_bits(0);
            a.set_row_bits(3, &r0);
            let r = a.rank();
            assert!(r <= 4);
            assert_eq!(r, brute_rank(&a));
        }
    }

    #[test]
    fn solve_cases() {
        let b = vec![true, false, true];
        assert_eq!(F2Matrix::identity(3).solve_linear(&b).unwrap(), b);
        assert_eq!(
            F2Matrix::zeros(3, 3).solve_linear(&b),
            Err(F2Error::Inconsistent)
        );
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..100 {
            let a = F2Matrix::random(8, 10, &mut rng);
            let x0: Vec<bool> = (0..10).map(|_| rng.gen()).collect();
            let rhs = a.mul_vec(&x0);
            let x = a.solve_linear(&rhs).unwrap();
            assert_eq!(a.mul_vec(&x), rhs);
        }
    }

    #[test]
    fn kernel_vectors_are_in_kernel() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..50 {
            let a = F2Matrix::random(6, 9, &mut rng);
            let k = a.kernel_basis();
            assert_eq!(k.len(), 9 - a.rank());
            for v in k {
                assert!(a.mul_vec(&v).iter().all(|&b| !b));
            }
        }
    }

    #[test]
    fn random_invertible_gl1_and_gl2() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        assert_eq!(
            F2Matrix::random_invertible(1, &mut rng),
            F2Matrix::identity(1)
        );
        // GL(2, 2) by brute force over all 16 matrices.
        let gl2: std::collections::HashSet<F2Matrix> = (0u32..16)
            .map(|m| F2Matrix::from_fn(2, 2, |i, j| m >> (2 * i + j) & 1 == 1))
            .filter(|m| m.rank() == 2)
            .collect();
        assert_eq!(gl2.len(), 6);
        let drawn: std::collections::HashSet<F2Matrix> = (0..500)
            .map(|_| F2Matrix::random_invertible(2, &mut rng))
            .collect();
        assert_eq!(drawn, gl2);
        for _ in 0..1000 {
            assert_eq!(F2Matrix::random_invertible(6, &mut rng).rank(), 6);
        }
    }

    #[test]
    fn random_invertible_is_seeded() {
        let a = F2Matrix::random_invertible(9, &mut ChaCha8Rng::seed_from_u64(7));
        let b = F2Matrix::random_invertible(9, &mut ChaCha8Rng::seed_from_u64(7));
        assert_eq!(a, b);
    }

    #[test]
    fn charpoly_of_companion() {
        // Companion matrix of x^4 + x + 1.
        let c = companion(&[true, true, false, false]);
        assert_eq!(c.charpoly().unwrap(), vec![true, true, false, false, true]);
        assert_eq!(
            F2Matrix::identity(3).charpoly().unwrap(),
            // (x + 1)^3 = x^3 + x^2 + x + 1
            vec![true, true, true, true]
        );
    }

    #[test]
    fn charpoly_is_similarity_invariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for n in [1, 2, 5, 17, 70] {
            let a = F2Matrix::random(n, n, &mut rng);
            let p = F2Matrix::random_invertible(n, &mut rng);
            let conj = p.inverse().unwrap().mul(&a).unwrap().mul(&p).unwrap();
            assert_eq!(a.charpoly().unwrap(), conj.charpoly().unwrap());
        }
    }

    #[test]
    fn commutator_identity_and_small() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let (b, d) = commutator_decompose(&F2Matrix::identity(4), &mut rng).unwrap();
        assert!(b.is_identity() && d.is_identity());
        for _ in 0..50 {
            let a = F2Matrix::random_invertible(3, &mut rng);
            let (b, d) = commutator_decompose(&a, &mut rng).unwrap();
            assert_eq!(recompose_commutator(&b, &d).unwrap(), a);
        }
        assert_eq!(
            commutator_decompose(&F2Matrix::identity(2), &mut rng),
            Err(F2Error::TooSmall(2))
        );
    }

    #[test]
    fn commutator_every_element_of_gl3() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        for mask in 0u32..512 {
            let a = F2Matrix::from_fn(3, 3, |i, j| mask >> (3 * i + j) & 1 == 1);
            if !a.is_invertible() {
                continue;
            }
            let (b, d) = commutator_decompose(&a, &mut rng).unwrap();
            assert_eq!(recompose_commutator(&b, &d).unwrap(), a);
        }
    }

    #[test]
    fn commutator_n64() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let a = F2Matrix::random_invertible(64, &mut rng);
        let (b, d) = commutator_decompose(&a, &mut rng).unwrap();
        assert_eq!(recompose_commutator(&b, &d).unwrap(), a);
    }

    #[test]
    fn hex_rows_roundtrip() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let a = F2Matrix::random(4, 67, &mut rng);
        let hex: Vec<String> = (0..4).map(|i| a.row_hex(i)).collect();
        assert_eq!(F2Matrix::from_hex_rows(&hex, 67).unwrap(), a);
        assert!(F2Matrix::from_hex_rows(&["f"], 3).is_err());
    }
}
