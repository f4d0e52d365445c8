//! Dense-matrix substrate and seeded RNG used by every other module.
//!
//! Feature batches follow the channels-first convention: a `D x N` matrix
//! holds `N` points of `D` channels each, one channel per (contiguous) row.
//!
//! All reductions run in a fixed left-to-right order over the contracted
//! dimension. The `parallel` feature distributes work over independent
//! output rows only, so parallel and sequential builds produce bit-identical
//! results.

use crate::error::{Error, Result};
use rand::{Rng as _, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Row-major dense matrix of 64-bit floats.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn filled(rows: usize, cols: usize, value: f64) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![value; rows * cols],
        }
    }

    /// Build from a row-major buffer. Errors when the buffer length does not
    /// match `rows * cols`.
    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::ShapeMismatch {
                op: "Matrix::from_vec",
                expected: format!("{} values ({rows}x{cols})", rows * cols),
                got: format!("{} values", data.len()),
            });
        }
        Ok(Matrix { rows, cols, data })
    }

    /// Build from nested row slices; rows must all have equal length.
    pub fn from_rows(rows: &[&[f64]]) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, |row| row.len());
        let mut data = Vec::with_capacity(r * c);
        for row in rows {
            if row.len() != c {
                return Err(Error::ShapeMismatch {
                    op: "Matrix::from_rows",
                    expected: format!("row of length {c}"),
                    got: format!("row of length {}", row.len()),
                });
            }
            data.extend_from_slice(row);
        }
        Ok(Matrix { rows: r, cols: c, data })
    }

    /// Column-vector constructor (`len x 1`).
    pub fn column(values: &[f64]) -> Self {
        Matrix {
            rows: values.len(),
            cols: 1,
            data: values.to_vec(),
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        debug_assert!(r < self.rows && c < self.cols);
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, value: f64) {
        debug_assert!(r < self.rows && c < self.cols);
        self.data[r * self.cols + c] = value;
    }

    #[inline]
    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    /// Copy of column `c` (strided read).
    pub fn col(&self, c: usize) -> Vec<f64> {
        (0..self.rows).map(|r| self.get(r, c)).collect()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn transpose(&self) -> Matrix {
        let mut out = Matrix::zeros(self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                out.set(c, r, self.get(r, c));
            }
        }
        out
    }

    /// Elementwise map into a new matrix.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Matrix {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&x| f(x)).collect(),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    /// Elementwise `self += other`; shapes must match.
    pub fn add_assign(&mut self, other: &Matrix) {
        assert_eq!(self.shape(), other.shape(), "add_assign shape mismatch");
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
    }

    /// Largest absolute entry difference; shapes must match.
    pub fn max_abs_diff(&self, other: &Matrix) -> f64 {
        assert_eq!(self.shape(), other.shape(), "max_abs_diff shape mismatch");
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// Matrix product with fixed left-to-right accumulation over the shared
/// dimension. Parallel builds split over output rows; each entry is still
/// accumulated in the same order, so results match the sequential path
/// bit for bit.
pub fn matmul(a: &Matrix, b: &Matrix) -> Result<Matrix> {
    check_matmul_shapes(a, b)?;
    let mut out = Matrix::zeros(a.rows, b.cols);
    #[cfg(feature = "parallel")]
    {
        let cols = b.cols;
        out.data
            .par_chunks_mut(cols)
            .enumerate()
            .for_each(|(i, out_row)| matmul_row(a, b, i, out_row));
    }
    #[cfg(not(feature = "parallel"))]
    {
        let cols = b.cols;
        out.data
            .chunks_mut(cols)
            .enumerate()
            .for_each(|(i, out_row)| matmul_row(a, b, i, out_row));
    }
    Ok(out)
}

/// Sequential matrix product kept unconditionally compiled so benches can
/// compare it against the default (possibly parallel) entry point.
pub fn matmul_seq(a: &Matrix, b: &Matrix) -> Result<Matrix> {
    check_matmul_shapes(a, b)?;
    let mut out = Matrix::zeros(a.rows, b.cols);
    let cols = b.cols;
    out.data
        .chunks_mut(cols)
        .enumerate()
        .for_each(|(i, out_row)| matmul_row(a, b, i, out_row));
    Ok(out)
}

fn check_matmul_shapes(a: &Matrix, b: &Matrix) -> Result<()> {
    if a.cols != b.rows {
        return Err(Error::DimMismatch {
            op: "matmul",
            left_rows: a.rows,
            left_cols: a.cols,
            right_rows: b.rows,
            right_cols: b.cols,
        });
    }
    Ok(())
}

#[inline]
fn matmul_row(a: &Matrix, b: &Matrix, i: usize, out_row: &mut [f64]) {
    let a_row = a.row(i);
    for (p, &a_ip) in a_row.iter().enumerate() {
        let b_row = b.row(p);
        for (o, &b_pj) in out_row.iter_mut().zip(b_row) {
            *o += a_ip * b_pj;
        }
    }
}

/// Per-channel mean and biased variance of a `D x N` feature batch
/// (divide by N, not N-1).
pub fn colwise_mean_var(x: &Matrix) -> Result<(Vec<f64>, Vec<f64>)> {
    if x.cols == 0 {
        return Err(Error::EmptyBatch {
            op: "colwise_mean_var",
        });
    }
    let d = x.rows;
    let mut mean = vec![0.0; d];
    let mut var = vec![0.0; d];
    let job = |((m, v), row): ((&mut f64, &mut f64), &[f64])| {
        let n = row.len() as f64;
        let mut sum = 0.0;
        for &value in row {
            sum += value;
        }
        let mu = sum / n;
        let mut sq = 0.0;
        for &value in row {
            let dev = value - mu;
            sq += dev * dev;
        }
        *m = mu;
        *v = sq / n;
    };
    #[cfg(feature = "parallel")]
    mean.par_iter_mut()
        .zip(var.par_iter_mut())
        .zip(x.data.par_chunks(x.cols))
        .for_each(job);
    #[cfg(not(feature = "parallel"))]
    mean.iter_mut()
        .zip(var.iter_mut())
        .zip(x.data.chunks(x.cols))
        .for_each(job);
    Ok((mean, var))
}

/// Sequential twin of [`colwise_mean_var`] for bench comparison.
pub fn colwise_mean_var_seq(x: &Matrix) -> Result<(Vec<f64>, Vec<f64>)> {
    if x.cols == 0 {
        return Err(Error::EmptyBatch {
            op: "colwise_mean_var",
        });
    }
    let d = x.rows;
    let mut mean = vec![0.0; d];
    let mut var = vec![0.0; d];
    for ch in 0..d {
        let row = x.row(ch);
        let n = row.len() as f64;
        let mut sum = 0.0;
        for &value in row {
            sum += value;
        }
        let mu = sum / n;
        let mut sq = 0.0;
        for &value in row {
            let dev = value - mu;
            sq += dev * dev;
        }
        mean[ch] = mu;
        var[ch] = sq / n;
    }
    Ok((mean, var))
}

/// Apply `f` to every row of `m`, in parallel when the `parallel` feature is
/// on. Rows are disjoint, so execution order is unobservable as long as `f`
/// touches only its own row.
pub fn for_each_row_mut(m: &mut Matrix, f: impl Fn(usize, &mut [f64]) + Sync + Send) {
    let cols = m.cols();
    if cols == 0 {
        return;
    }
    #[cfg(feature = "parallel")]
    m.as_mut_slice()
        .par_chunks_mut(cols)
        .enumerate()
        .for_each(|(r, row)| f(r, row));
    #[cfg(not(feature = "parallel"))]
    m.as_mut_slice()
        .chunks_mut(cols)
        .enumerate()
        .for_each(|(r, row)| f(r, row));
}

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h = FNV_OFFSET;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(FNV_PRIME);
    }
    h
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

/// Deterministic, splittable random stream.
///
/// Substreams are derived from the creation seed and a string label, not from
/// the parent's stream position, so `split` never perturbs the parent and the
/// same `(seed, label)` pair always names the same stream.
#[derive(Debug, Clone)]
pub struct Rng {
    seed: u64,
    inner: ChaCha8Rng,
}

impl Rng {
    pub fn new(seed: u64) -> Self {
        Rng {
            seed,
            inner: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Independent substream named by `label`.
    pub fn split(&self, label: &str) -> Rng {
        let child = splitmix64(self.seed ^ splitmix64(fnv1a64(label.as_bytes())));
        Rng::new(child)
    }

    /// Uniform in [0, 1).
    pub fn uniform(&mut self) -> f64 {
        self.inner.random::<f64>()
    }

    /// Uniform in [lo, hi).
    pub fn uniform_in(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }

    /// Standard normal draw.
    pub fn normal(&mut self) -> f64 {
        StandardNormal.sample(&mut self.inner)
    }

    /// Uniform index in [0, n).
    pub fn index(&mut self, n: usize) -> usize {
        debug_assert!(n > 0);
        self.inner.random_range(0..n)
    }

    /// In-place Fisher-Yates shuffle.
    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.index(i + 1);
            items.swap(i, j);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    // Compensated (Neumaier) summation; reference accumulator for oracles.
    fn neumaier_sum(values: impl Iterator<Item = f64>) -> f64 {
        let mut sum = 0.0;
        let mut comp = 0.0;
        for v in values {
            let t = sum + v;
            if sum.abs() >= v.abs() {
                comp += (sum - t) + v;
            } else {
                comp += (v - t) + sum;
            }
            sum = t;
        }
        sum + comp
    }

    fn matmul_oracle(a: &Matrix, b: &Matrix) -> Matrix {
        let mut out = Matrix::zeros(a.rows(), b.cols());
        for i in 0..a.rows() {
            for j in 0..b.cols() {
                let entry = neumaier_sum((0..a.cols()).map(|p| a.get(i, p) * b.get(p, j)));
                out.set(i, j, entry);
            }
        }
        out
    }

    fn random_matrix(rng: &mut Rng, rows: usize, cols: usize) -> Matrix {
        let data = (0..rows * cols).map(|_| rng.normal()).collect();
        Matrix::from_vec(rows, cols, data).unwrap()
    }

    #[test]
    fn matmul_identity() {
        let eye = Matrix::from_rows(&[&[1.0, 0.0], &[0.0, 1.0]]).unwrap();
        let m = Matrix::from_rows(&[&[3.0, -1.5], &[2.25, 7.0]]).unwrap();
        let prod = matmul(&eye, &m).unwrap();
        assert_eq!(prod, m);
    }

    #[test]
    fn matmul_hand_checked() {
        let a = Matrix::from_rows(&[&[1.0, 2.0], &[3.0, 4.0]]).unwrap();
        let b = Matrix::from_rows(&[&[0.0], &[1.0]]).unwrap();
        let prod = matmul(&a, &b).unwrap();
        assert_eq!(prod.as_slice(), &[2.0, 4.0]);
    }

    #[test]
    fn matmul_matches_extended_precision_oracle() {
        let mut rng = Rng::new(11);
        let a = random_matrix(&mut rng, 5, 7);
        let b = random_matrix(&mut rng, 7, 3);
        let got = matmul(&a, &b).unwrap();
        let want = matmul_oracle(&a, &b);
        for i in 0..5 {
            for j in 0..3 {
                let g = got.get(i, j);
                let w = want.get(i, j);
                assert!(
                    (g - w).abs() <= 1e-12 * w.abs().max(1.0),
                    "entry ({i},{j}): {g} vs {w}"
                );
            }
        }
    }

    #[test]
    fn matmul_shape_error_names_both_shapes() {
        let a = Matrix::zeros(2, 3);
        let b = Matrix::zeros(4, 2);
        let err = matmul(&a, &b).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("2x3") && msg.contains("4x2"), "{msg}");
    }

    #[test]
    fn matmul_associativity_exact_on_small_integers() {
        let mut rng = Rng::new(5);
        for _ in 0..20 {
            let gen = |rng: &mut Rng, r: usize, c: usize| {
                let data = (0..r * c).map(|_| (rng.index(7) as f64) - 3.0).collect();
                Matrix::from_vec(r, c, data).unwrap()
            };
            let a = gen(&mut rng, 3, 4);
            let b = gen(&mut rng, 4, 2);
            let c = gen(&mut rng, 2, 5);
            let left = matmul(&matmul(&a, &b).unwrap(), &c).unwrap();
            let right = matmul(&a, &matmul(&b, &c).unwrap()).unwrap();
            assert_eq!(left, right);
        }
    }

    #[test]
    fn matmul_parallel_and_sequential_agree_bitwise() {
        let mut rng = Rng::new(3);
        let a = random_matrix(&mut rng, 17, 29);
        let b = random_matrix(&mut rng, 29, 13);
        assert_eq!(matmul(&a, &b).unwrap(), matmul_seq(&a, &b).unwrap());
    }

    #[test]
    fn mean_var_constant_column() {
        let x = Matrix::filled(3, 10, 4.25);
        let (mean, var) = colwise_mean_var(&x).unwrap();
        for ch in 0..3 {
            assert_eq!(mean[ch], 4.25);
            assert_eq!(var[ch], 0.0);
        }
    }

    #[test]
    fn mean_var_hand_arithmetic() {
        let x = Matrix::from_rows(&[&[1.0, 3.0]]).unwrap();
        let (mean, var) = colwise_mean_var(&x).unwrap();
        assert_eq!(mean[0], 2.0);
        assert_eq!(var[0], 1.0);
    }

    #[test]
    fn mean_var_matches_two_pass_oracle() {
        let mut rng = Rng::new(42);
        let x = random_matrix(&mut rng, 4, 100);
        let (mean, var) = colwise_mean_var(&x).unwrap();
        for ch in 0..4 {
            let row = x.row(ch);
            let mu = neumaier_sum(row.iter().copied()) / 100.0;
            let v = neumaier_sum(row.iter().map(|&x| (x - mu) * (x - mu))) / 100.0;
            assert!((mean[ch] - mu).abs() <= 1e-12 * mu.abs().max(1.0));
            assert!((var[ch] - v).abs() <= 1e-12 * v.abs().max(1.0));
        }
    }

    #[test]
    fn mean_var_empty_batch_errors() {
        let x = Matrix::zeros(3, 0);
        assert!(matches!(
            colwise_mean_var(&x),
            Err(Error::EmptyBatch { .. })
        ));
    }

    #[test]
    fn mean_var_shift_invariance() {
        let mut rng = Rng::new(9);
        let x = random_matrix(&mut rng, 3, 50);
        let shifted = x.map(|v| v + 17.5);
        let (mean, var) = colwise_mean_var(&x).unwrap();
        let (mean_s, var_s) = colwise_mean_var(&shifted).unwrap();
        for ch in 0..3 {
            assert!((mean_s[ch] - mean[ch] - 17.5).abs() < 1e-10);
            assert!((var_s[ch] - var[ch]).abs() < 1e-10);
        }
    }

    #[test]
    fn rng_same_seed_same_stream() {
        let mut a = Rng::new(123);
        let mut b = Rng::new(123);
        for _ in 0..100 {
            assert_eq!(a.uniform().to_bits(), b.uniform().to_bits());
            assert_eq!(a.normal().to_bits(), b.normal().to_bits());
        }
    }

    #[test]
    fn rng_split_is_stable_and_independent_of_parent_state() {
        let mut parent = Rng::new(7);
        let before = parent.split("child");
        let _ = parent.uniform();
        let after = parent.split("child");
        assert_eq!(before.seed(), after.seed());
        assert_ne!(parent.split("a").seed(), parent.split("b").seed());
    }

    #[test]
    fn rng_shuffle_reproducible() {
        let mut a = Rng::new(99);
        let mut b = Rng::new(99);
        let mut xs: Vec<usize> = (0..50).collect();
        let mut ys: Vec<usize> = (0..50).collect();
        a.shuffle(&mut xs);
        b.shuffle(&mut ys);
        assert_eq!(xs, ys);
    }
}
