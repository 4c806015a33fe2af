//! Dense linear algebra, activations, a seeded RNG, and finite differencing.
//!
//! Everything in here is deliberately plain: row-major `f64` matrices, no
//! SIMD, no blocking. The models this crate trains are small enough that
//! clarity and bit-for-bit reproducibility across platforms matter more
//! than throughput, and a hand-rolled xoshiro generator keeps the random
//! streams identical everywhere regardless of platform or dependency
//! versions.

use crate::error::{Error, Result};

/// Row-major dense matrix of `f64`.
#[derive(Clone, Debug, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Matrix {
        Matrix { rows, cols, data: vec![0.0; rows * cols] }
    }

    /// Matrix with every entry drawn uniformly from `[-scale, scale]`,
    /// filled in row-major order so the draw sequence is reproducible.
    pub fn uniform(rows: usize, cols: usize, scale: f64, rng: &mut Rng) -> Matrix {
        let mut m = Matrix::zeros(rows, cols);
        for v in m.data.iter_mut() {
            *v = rng.uniform(-scale, scale);
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        debug_assert!(i < self.rows && j < self.cols);
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        debug_assert!(i < self.rows && j < self.cols);
        self.data[i * self.cols + j] = v;
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    /// `self * x`.
    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        self.block_matvec(0, self.rows, x)
    }

    /// `rows[row0 .. row0+nrows] * x` — a contiguous block of rows applied
    /// to `x`. Used for per-class slices of class-grouped output matrices.
    pub fn block_matvec(&self, row0: usize, nrows: usize, x: &[f64]) -> Vec<f64> {
        assert_eq!(
            x.len(),
            self.cols,
            "matvec: vector length {} does not match {} columns",
            x.len(),
            self.cols
        );
        assert!(row0 + nrows <= self.rows, "matvec: row block out of range");
        let mut out = vec![0.0; nrows];
        for (k, o) in out.iter_mut().enumerate() {
            *o = dot(self.row(row0 + k), x);
        }
        out
    }

    /// `self^T * x`.
    pub fn matvec_t(&self, x: &[f64]) -> Vec<f64> {
        self.block_matvec_t(0, self.rows, x)
    }

    /// `rows[row0 .. row0+len]^T * x`, i.e. `sum_k x[k] * row(row0 + k)`.
    pub fn block_matvec_t(&self, row0: usize, len: usize, x: &[f64]) -> Vec<f64> {
        assert_eq!(
            x.len(),
            len,
            "matvec_t: vector length {} does not match {} block rows",
            x.len(),
            len
        );
        assert!(row0 + len <= self.rows, "matvec_t: row block out of range");
        let mut out = vec![0.0; self.cols];
        for (k, &xk) in x.iter().enumerate() {
            let row = self.row(row0 + k);
            for (o, &r) in out.iter_mut().zip(row) {
                *o += xk * r;
            }
        }
        out
    }

    /// `self += u * v^T`, with `u` landing on the row block starting at `row0`.
    pub fn add_outer(&mut self, row0: usize, u: &[f64], v: &[f64]) {
        assert_eq!(v.len(), self.cols, "add_outer: column mismatch");
        assert!(row0 + u.len() <= self.rows, "add_outer: row block out of range");
        for (k, &uk) in u.iter().enumerate() {
            let off = (row0 + k) * self.cols;
            for (j, &vj) in v.iter().enumerate() {
                self.data[off + j] += uk * vj;
            }
        }
    }

    /// Column `j` as a fresh vector.
    pub fn col(&self, j: usize) -> Vec<f64> {
        assert!(j < self.cols, "col out of range");
        (0..self.rows).map(|i| self.get(i, j)).collect()
    }

    /// `self[:, j] += x`.
    pub fn add_to_col(&mut self, j: usize, x: &[f64]) {
        assert_eq!(x.len(), self.rows, "add_to_col: row mismatch");
        assert!(j < self.cols, "add_to_col: column out of range");
        for (i, &xi) in x.iter().enumerate() {
            self.data[i * self.cols + j] += xi;
        }
    }

    /// `self += c * other`.
    pub fn add_scaled(&mut self, other: &Matrix, c: f64) {
        assert_eq!(self.rows, other.rows, "add_scaled: shape mismatch");
        assert_eq!(self.cols, other.cols, "add_scaled: shape mismatch");
        for (a, &b) in self.data.iter_mut().zip(&other.data) {
            *a += c * b;
        }
    }

    /// Clamp every entry into `[-limit, limit]`.
    pub fn clamp(&mut self, limit: f64) {
        for v in self.data.iter_mut() {
            *v = v.clamp(-limit, limit);
        }
    }
}

/// Dot product; lengths must agree.
#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len(), "dot: length mismatch");
    a.iter().zip(b).map(|(&x, &y)| x * y).sum()
}

/// `dst += c * src`.
pub fn add_scaled_vec(dst: &mut [f64], src: &[f64], c: f64) {
    assert_eq!(dst.len(), src.len(), "add_scaled_vec: length mismatch");
    for (d, &s) in dst.iter_mut().zip(src) {
        *d += c * s;
    }
}

/// Logistic sigmoid.
#[inline]
pub fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Numerically stable softmax: subtracts the maximum logit before
/// exponentiating, so uniform huge inputs do not overflow.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    assert!(!logits.is_empty(), "softmax of an empty slice");
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut out: Vec<f64> = logits.iter().map(|&z| (z - max).exp()).collect();
    let sum: f64 = out.iter().sum();
    for p in out.iter_mut() {
        *p /= sum;
    }
    out
}

/// Central-difference gradient of `f` at `theta`.
///
/// Each coordinate is probed at `theta[i] += eps` and `theta[i] -= eps`;
/// if `f` comes back non-finite at either probe the offending coordinate
/// is reported instead of silently producing NaN gradients.
pub fn finite_diff_grad<F>(mut f: F, theta: &[f64], eps: f64) -> Result<Vec<f64>>
where
    F: FnMut(&[f64]) -> f64,
{
    let mut probe = theta.to_vec();
    let mut grad = vec![0.0; theta.len()];
    for i in 0..theta.len() {
        let orig = probe[i];
        probe[i] = orig + eps;
        let up = f(&probe);
        probe[i] = orig - eps;
        let down = f(&probe);
        probe[i] = orig;
        if !up.is_finite() || !down.is_finite() {
            return Err(Error::NonFiniteObjective { coordinate: i });
        }
        grad[i] = (up - down) / (2.0 * eps);
    }
    Ok(grad)
}

/// xoshiro256** seeded through splitmix64.
///
/// The generator is written out by hand so that identical seeds produce
/// identical streams on every platform this crate compiles on, with no
/// dependency whose algorithm could drift between versions.
#[derive(Clone, Debug)]
pub struct Rng {
    s: [u64; 4],
}

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

impl Rng {
    pub fn new(seed: u64) -> Rng {
        let mut st = seed;
        let s = [
            splitmix64(&mut st),
            splitmix64(&mut st),
            splitmix64(&mut st),
            splitmix64(&mut st),
        ];
        Rng { s }
    }

    pub fn next_u64(&mut self) -> u64 {
        let result = self.s[1].wrapping_mul(5).rotate_left(7).wrapping_mul(9);
        let t = self.s[1] << 17;
        self.s[2] ^= self.s[0];
        self.s[3] ^= self.s[1];
        self.s[1] ^= self.s[2];
        self.s[0] ^= self.s[3];
        self.s[2] ^= t;
        self.s[3] = self.s[3].rotate_left(45);
        result
    }

    /// Uniform draw from `[0, 1)` with 53 bits of precision.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform draw from `[lo, hi)`.
    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.next_f64()
    }

    /// Uniform draw from `0..n`; `n` must be positive.
    pub fn below(&mut self, n: usize) -> usize {
        assert!(n > 0, "below: empty range");
        (self.next_u64() % n as u64) as usize
    }

    /// Fisher-Yates shuffle.
    pub fn shuffle<T>(&mut self, xs: &mut [T]) {
        for i in (1..xs.len()).rev() {
            let j = self.below(i + 1);
            xs.swap(i, j);
        }
    }
}
