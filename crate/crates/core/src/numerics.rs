//! Dense complex linear algebra.
//!
//! Matrices are stored column-major, so [`vectorize`] is the column-stacking
//! map `vec(ρ)` and the superoperator of `ρ ↦ AρB†` is `conj(B) ⊗ A`.

use std::ops::{Index, IndexMut};

use num_complex::Complex64;

use crate::error::{mismatch, Error, Result};

pub type C64 = Complex64;

pub(crate) const ZERO: C64 = C64::new(0.0, 0.0);
pub(crate) const ONE: C64 = C64::new(1.0, 0.0);

/// Relative pivot threshold below which a matrix is treated as singular.
pub const SINGULAR_PIVOT_TOLERANCE: f64 = 1e-13;

/// Dense complex matrix in column-major layout.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexMatrix {
    rows: usize,
    cols: usize,
    data: Vec<C64>,
}

impl ComplexMatrix {
    /// Builds a matrix from column-major entries, rejecting NaN and infinities.
    pub fn new(rows: usize, cols: usize, data: Vec<C64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(mismatch(
                format!("{} entries", rows * cols),
                format!("{} entries", data.len()),
            ));
        }
        if let Some(pos) = data.iter().position(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::NonFinite {
                row: pos % rows.max(1),
                col: pos / rows.max(1),
            });
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![ZERO; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = ONE;
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> C64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for j in 0..cols {
            for i in 0..rows {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    /// Row-major literal constructor, mostly for small fixed matrices.
    pub fn from_rows(rows: &[Vec<C64>]) -> Result<Self> {
        let nrows = rows.len();
        let ncols = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().find(|r| r.len() != ncols) {
            return Err(mismatch(format!("{ncols} columns"), format!("{} columns", bad.len())));
        }
        let m = Self::from_fn(nrows, ncols, |i, j| rows[i][j]);
        Self::new(nrows, ncols, m.data)
    }

    /// Real diagonal matrix.
    pub fn diagonal(values: &[f64]) -> Self {
        let mut m = Self::zeros(values.len(), values.len());
        for (i, v) in values.iter().enumerate() {
            m[(i, i)] = C64::new(*v, 0.0);
        }
        m
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

    /// Column-major entries.
    pub fn data(&self) -> &[C64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<C64> {
        self.data
    }

    pub fn column(&self, j: usize) -> &[C64] {
        &self.data[j * self.rows..(j + 1) * self.rows]
    }

    pub fn matmul(&self, other: &ComplexMatrix) -> Result<ComplexMatrix> {
        if self.cols != other.rows {
            return Err(mismatch(
                format!("{} rows on the right operand", self.cols),
                format!("{}x{}", other.rows, other.cols),
            ));
        }
        let mut out = ComplexMatrix::zeros(self.rows, other.cols);
        for j in 0..other.cols {
            let out_col = &mut out.data[j * self.rows..(j + 1) * self.rows];
            for (k, &b) in other.column(j).iter().enumerate() {
                // Walk operators are mostly zeros.
                if b == ZERO {
                    continue;
                }
                for (o, &a) in out_col.iter_mut().zip(self.column(k)) {
                    *o += a * b;
                }
            }
        }
        Ok(out)
    }

    pub fn matvec(&self, v: &[C64]) -> Result<Vec<C64>> {
        if v.len() != self.cols {
            return Err(mismatch(
                format!("vector of length {}", self.cols),
                format!("length {}", v.len()),
            ));
        }
        let mut out = vec![ZERO; self.rows];
        for (j, &x) in v.iter().enumerate() {
            if x == ZERO {
                continue;
            }
            for (o, &a) in out.iter_mut().zip(self.column(j)) {
                *o += a * x;
            }
        }
        Ok(out)
    }

    pub fn adjoint(&self) -> ComplexMatrix {
        ComplexMatrix::from_fn(self.cols, self.rows, |i, j| self[(j, i)].conj())
    }

    pub fn conj(&self) -> ComplexMatrix {
        ComplexMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|z| z.conj()).collect(),
        }
    }

    pub fn scale(&self, s: C64) -> ComplexMatrix {
        ComplexMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|z| z * s).collect(),
        }
    }

    pub fn scale_real(&self, s: f64) -> ComplexMatrix {
        self.scale(C64::new(s, 0.0))
    }

    pub fn add(&self, other: &ComplexMatrix) -> Result<ComplexMatrix> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &ComplexMatrix) -> Result<ComplexMatrix> {
        self.zip_with(other, |a, b| a - b)
    }

    /// In-place `self += other`.
    pub fn add_assign(&mut self, other: &ComplexMatrix) -> Result<()> {
        self.check_same_shape(other)?;
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
        Ok(())
    }

    fn zip_with(&self, other: &ComplexMatrix, f: impl Fn(C64, C64) -> C64) -> Result<ComplexMatrix> {
        self.check_same_shape(other)?;
        Ok(ComplexMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&other.data).map(|(&a, &b)| f(a, b)).collect(),
        })
    }

    fn check_same_shape(&self, other: &ComplexMatrix) -> Result<()> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(mismatch(
                format!("{}x{}", self.rows, self.cols),
                format!("{}x{}", other.rows, other.cols),
            ));
        }
        Ok(())
    }

    pub fn trace(&self) -> C64 {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).sum()
    }

    /// Largest entry modulus.
    pub fn norm_max(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Induced 1-norm (largest column sum).
    pub fn norm_one(&self) -> f64 {
        (0..self.cols)
            .map(|j| self.column(j).iter().map(|z| z.norm()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    /// Frobenius norm.
    pub fn norm_fro(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Largest entry modulus of `self - other`.
    pub fn max_abs_diff(&self, other: &ComplexMatrix) -> Result<f64> {
        Ok(self.sub(other)?.norm_max())
    }

    /// `max |A - A†|`.
    pub fn hermiticity_residual(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for j in 0..self.cols {
            for i in 0..self.rows.min(self.cols) {
                worst = worst.max((self[(i, j)] - self[(j, i)].conj()).norm());
            }
        }
        worst
    }

    /// `max |A†A - I|`.
    pub fn unitarity_residual(&self) -> f64 {
        match self.adjoint().matmul(self) {
            Ok(g) => g
                .sub(&ComplexMatrix::identity(self.cols))
                .map_or(f64::INFINITY, |d| d.norm_max()),
            Err(_) => f64::INFINITY,
        }
    }

    /// Kronecker product `self ⊗ other`.
    pub fn kron(&self, other: &ComplexMatrix) -> ComplexMatrix {
        let (p, q) = (other.rows, other.cols);
        let mut out = ComplexMatrix::zeros(self.rows * p, self.cols * q);
        self.kron_accumulate(other, &mut out);
        out
    }

    /// `out += self ⊗ other`, skipping zero blocks.
    pub(crate) fn kron_accumulate(&self, other: &ComplexMatrix, out: &mut ComplexMatrix) {
        let (p, q) = (other.rows, other.cols);
        debug_assert_eq!(out.rows, self.rows * p);
        debug_assert_eq!(out.cols, self.cols * q);
        let out_rows = out.rows;
        for j in 0..self.cols {
            for i in 0..self.rows {
                let a = self[(i, j)];
                if a == ZERO {
                    continue;
                }
                for l in 0..q {
                    let col = j * q + l;
                    let dst = &mut out.data[col * out_rows + i * p..col * out_rows + (i + 1) * p];
                    for (d, &b) in dst.iter_mut().zip(other.column(l)) {
                        *d += a * b;
                    }
                }
            }
        }
    }

    /// Lower Cholesky-style positivity test: true when `self + tol·I` admits a
    /// Cholesky factorization. Only meaningful for Hermitian input.
    pub fn is_positive_semidefinite(&self, tol: f64) -> bool {
        if !self.is_square() {
            return false;
        }
        let n = self.rows;
        let mut l = vec![ZERO; n * n];
        for j in 0..n {
            let mut d = self[(j, j)].re + tol;
            for k in 0..j {
                d -= l[j * n + k].norm_sqr();
            }
            if d <= 0.0 {
                return false;
            }
            let djj = d.sqrt();
            l[j * n + j] = C64::new(djj, 0.0);
            for i in (j + 1)..n {
                let mut s = self[(i, j)];
                for k in 0..j {
                    s -= l[i * n + k] * l[j * n + k].conj();
                }
                l[i * n + j] = s / djj;
            }
        }
        true
    }
}

impl Index<(usize, usize)> for ComplexMatrix {
    type Output = C64;

    fn index(&self, (i, j): (usize, usize)) -> &C64 {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[j * self.rows + i]
    }
}

impl IndexMut<(usize, usize)> for ComplexMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut C64 {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[j * self.rows + i]
    }
}

pub fn matmul(a: &ComplexMatrix, b: &ComplexMatrix) -> Result<ComplexMatrix> {
    a.matmul(b)
}

pub fn kron(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    a.kron(b)
}

/// Column-stacking vectorization.
pub fn vectorize(rho: &ComplexMatrix) -> Result<Vec<C64>> {
    if !rho.is_square() {
        return Err(Error::NotSquare {
            rows: rho.rows,
            cols: rho.cols,
        });
    }
    Ok(rho.data.clone())
}

/// Inverse of [`vectorize`].
pub fn devectorize(v: &[C64], dim: usize) -> Result<ComplexMatrix> {
    if v.len() != dim * dim {
        return Err(mismatch(
            format!("{} entries", dim * dim),
            format!("{} entries", v.len()),
        ));
    }
    ComplexMatrix::new(dim, dim, v.to_vec())
}

/// Trace of the matrix whose column-stacked form is `v`.
pub fn vec_trace(v: &[C64], dim: usize) -> C64 {
    (0..dim).map(|i| v[i * dim + i]).sum()
}

pub fn norm_inf(v: &[C64]) -> f64 {
    v.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// LU factorization with partial pivoting, `P·A = L·U`.
#[derive(Debug, Clone)]
pub struct LuFactorization {
    factors: ComplexMatrix,
    /// Row swapped with row `k` at elimination step `k`.
    pivots: Vec<usize>,
    condition_estimate: f64,
}

impl LuFactorization {
    pub fn factor(a: &ComplexMatrix) -> Result<Self> {
        if !a.is_square() {
            return Err(Error::NotSquare {
                rows: a.rows,
                cols: a.cols,
            });
        }
        let n = a.rows;
        let anorm = a.norm_one();
        let threshold = SINGULAR_PIVOT_TOLERANCE * anorm;
        let mut lu = a.clone();
        let mut pivots = Vec::with_capacity(n);

        for k in 0..n {
            let col = &lu.data[k * n..(k + 1) * n];
            let (piv, pivot_abs) = col[k..]
                .iter()
                .enumerate()
                .map(|(i, z)| (i + k, z.norm()))
                .fold((k, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
            if !(pivot_abs >= threshold) || pivot_abs == 0.0 {
                return Err(Error::SingularMatrix {
                    column: k,
                    pivot: pivot_abs,
                });
            }
            pivots.push(piv);
            if piv != k {
                for j in 0..n {
                    lu.data.swap(j * n + k, j * n + piv);
                }
            }
            let inv = ONE / lu.data[k * n + k];
            for z in &mut lu.data[k * n + k + 1..(k + 1) * n] {
                *z *= inv;
            }
            let (head, tail) = lu.data.split_at_mut((k + 1) * n);
            let pivot_col = &head[k * n..];
            eliminate(tail, pivot_col, k, n);
        }

        let mut out = Self {
            factors: lu,
            pivots,
            condition_estimate: f64::NAN,
        };
        out.condition_estimate = anorm * out.inverse_norm_one_estimate();
        Ok(out)
    }

    pub fn dim(&self) -> usize {
        self.factors.rows
    }

    pub fn factors(&self) -> &ComplexMatrix {
        &self.factors
    }

    pub fn pivots(&self) -> &[usize] {
        &self.pivots
    }

    /// Estimated 1-norm condition number.
    pub fn condition_estimate(&self) -> f64 {
        self.condition_estimate
    }

    /// Solves `A x = b`.
    pub fn solve(&self, b: &[C64]) -> Result<Vec<C64>> {
        let n = self.dim();
        if b.len() != n {
            return Err(mismatch(
                format!("right-hand side of length {n}"),
                format!("length {}", b.len()),
            ));
        }
        let mut x = b.to_vec();
        for (k, &p) in self.pivots.iter().enumerate() {
            x.swap(k, p);
        }
        let f = &self.factors.data;
        for k in 0..n {
            let xk = x[k];
            if xk == ZERO {
                continue;
            }
            for (xi, l) in x[k + 1..].iter_mut().zip(&f[k * n + k + 1..(k + 1) * n]) {
                *xi -= l * xk;
            }
        }
        for k in (0..n).rev() {
            x[k] /= f[k * n + k];
            let xk = x[k];
            if xk == ZERO {
                continue;
            }
            for (xi, u) in x[..k].iter_mut().zip(&f[k * n..k * n + k]) {
                *xi -= u * xk;
            }
        }
        Ok(x)
    }

    /// Solves `A† y = c`.
    pub fn solve_adjoint(&self, c: &[C64]) -> Result<Vec<C64>> {
        let n = self.dim();
        if c.len() != n {
            return Err(mismatch(
                format!("right-hand side of length {n}"),
                format!("length {}", c.len()),
            ));
        }
        let f = &self.factors.data;
        let mut y = c.to_vec();
        // U† w = c
        for k in 0..n {
            let s: C64 = f[k * n..k * n + k].iter().zip(&y[..k]).map(|(u, w)| u.conj() * w).sum();
            y[k] = (y[k] - s) / f[k * n + k].conj();
        }
        // L† v = w
        for k in (0..n).rev() {
            let s: C64 = f[k * n + k + 1..(k + 1) * n]
                .iter()
                .zip(&y[k + 1..])
                .map(|(l, v)| l.conj() * v)
                .sum();
            y[k] -= s;
        }
        for (k, &p) in self.pivots.iter().enumerate().rev() {
            y.swap(k, p);
        }
        Ok(y)
    }

    /// Hager–Higham estimate of `‖A⁻¹‖₁`.
    fn inverse_norm_one_estimate(&self) -> f64 {
        let n = self.dim();
        if n == 0 {
            return 0.0;
        }
        let mut x = vec![C64::new(1.0 / n as f64, 0.0); n];
        let mut estimate = 0.0;
        let mut last_index = usize::MAX;
        for iteration in 0..5 {
            let Ok(y) = self.solve(&x) else { return f64::INFINITY };
            let new_estimate: f64 = y.iter().map(|z| z.norm()).sum();
            if iteration > 0 && new_estimate <= estimate {
                break;
            }
            estimate = new_estimate;
            let signs: Vec<C64> = y
                .iter()
                .map(|z| if z.norm() > 0.0 { z / z.norm() } else { ONE })
                .collect();
            let Ok(z) = self.solve_adjoint(&signs) else {
                return f64::INFINITY;
            };
            let (j, zmax) = z
                .iter()
                .enumerate()
                .map(|(i, v)| (i, v.norm()))
                .fold((0, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
            let ztx: f64 = z.iter().zip(&x).map(|(a, b)| (a.conj() * b).re).sum();
            if iteration > 0 && (zmax <= ztx || j == last_index) {
                break;
            }
            last_index = j;
            x = vec![ZERO; n];
            x[j] = ONE;
        }
        // Higham's alternating-sign safeguard.
        let alt: Vec<C64> = (0..n)
            .map(|i| {
                let sign = if i % 2 == 0 { 1.0 } else { -1.0 };
                let denom = (n.max(2) - 1) as f64;
                C64::new(sign * (1.0 + i as f64 / denom), 0.0)
            })
            .collect();
        if let Ok(y) = self.solve(&alt) {
            let alt_est = 2.0 * y.iter().map(|z| z.norm()).sum::<f64>() / (3.0 * n as f64);
            estimate = estimate.max(alt_est);
        }
        estimate
    }
}

#[cfg(feature = "parallel")]
fn eliminate(trailing: &mut [C64], pivot_col: &[C64], k: usize, n: usize) {
    use rayon::prelude::*;
    // Threading pays off only on the larger superoperator systems.
    if n >= 256 && trailing.len() >= 64 * n {
        trailing
            .par_chunks_mut(n)
            .for_each(|col| update_column(col, pivot_col, k, n));
    } else {
        trailing
            .chunks_mut(n)
            .for_each(|col| update_column(col, pivot_col, k, n));
    }
}

#[cfg(not(feature = "parallel"))]
fn eliminate(trailing: &mut [C64], pivot_col: &[C64], k: usize, n: usize) {
    trailing
        .chunks_mut(n)
        .for_each(|col| update_column(col, pivot_col, k, n));
}

#[inline]
fn update_column(col: &mut [C64], pivot_col: &[C64], k: usize, n: usize) {
    let akj = col[k];
    if akj == ZERO {
        return;
    }
    for (c, l) in col[k + 1..n].iter_mut().zip(&pivot_col[k + 1..n]) {
        *c -= l * akj;
    }
}

/// Solves `a x = b` with a fresh LU factorization.
pub fn lu_solve(a: &ComplexMatrix, b: &[C64]) -> Result<Vec<C64>> {
    if !a.is_square() {
        return Err(Error::NotSquare {
            rows: a.rows,
            cols: a.cols,
        });
    }
    if b.len() != a.rows {
        return Err(mismatch(
            format!("right-hand side of length {}", a.rows),
            format!("length {}", b.len()),
        ));
    }
    LuFactorization::factor(a)?.solve(b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn random_matrix(rng: &mut impl Rng, rows: usize, cols: usize) -> ComplexMatrix {
        ComplexMatrix::from_fn(rows, cols, |_, _| c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
    }

    fn coin() -> ComplexMatrix {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        ComplexMatrix::from_rows(&[vec![c(h, 0.0), c(-h, 0.0)], vec![c(h, 0.0), c(h, 0.0)]]).unwrap()
    }

    #[test]
    fn new_rejects_bad_length_and_nan() {
        assert!(matches!(
            ComplexMatrix::new(2, 2, vec![ONE; 3]),
            Err(Error::DimensionMismatch { .. })
        ));
        let mut data = vec![ONE; 4];
        data[3] = c(f64::NAN, 0.0);
        assert_eq!(ComplexMatrix::new(2, 2, data), Err(Error::NonFinite { row: 1, col: 1 }));
        let mut data = vec![ONE; 4];
        data[2] = c(0.0, f64::INFINITY);
        assert_eq!(ComplexMatrix::new(2, 2, data), Err(Error::NonFinite { row: 0, col: 1 }));
    }

    #[test]
    fn matmul_small_cases() {
        let i2 = ComplexMatrix::identity(2);
        assert_eq!(i2.matmul(&i2).unwrap(), i2);
        let x = ComplexMatrix::from_rows(&[vec![ZERO, ONE], vec![ONE, ZERO]]).unwrap();
        assert_eq!(x.matmul(&x).unwrap(), i2);
        let cc = coin().matmul(&coin().adjoint()).unwrap();
        assert!(cc.max_abs_diff(&i2).unwrap() < 1e-15);
    }

    #[test]
    fn matmul_dimension_mismatch() {
        let a = ComplexMatrix::zeros(2, 3);
        assert!(matches!(a.matmul(&a), Err(Error::DimensionMismatch { .. })));
        assert!(matches!(a.matvec(&[ONE; 2]), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn lu_solve_identity_and_scalar() {
        let b = vec![c(1.0, 2.0), c(-3.0, 0.5), c(0.0, 0.0)];
        assert_eq!(lu_solve(&ComplexMatrix::identity(3), &b).unwrap(), b);
        let two = ComplexMatrix::identity(4).scale_real(2.0);
        let x = lu_solve(&two, &[ONE; 4]).unwrap();
        assert!(x.iter().all(|z| (z - c(0.5, 0.0)).norm() < 1e-15));
    }

    #[test]
    fn lu_recovers_planted_solution() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut a = random_matrix(&mut rng, 20, 20);
        for i in 0..20 {
            a[(i, i)] += c(5.0, 0.0);
        }
        let x_star: Vec<C64> = (0..20)
            .map(|_| c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
            .collect();
        let b = a.matvec(&x_star).unwrap();
        let x = lu_solve(&a, &b).unwrap();
        let err = x.iter().zip(&x_star).map(|(p, q)| (p - q).norm()).fold(0.0, f64::max);
        assert!(err < 1e-9, "error {err}");
    }

    #[test]
    fn lu_errors() {
        let singular = ComplexMatrix::from_rows(&[vec![ONE, ONE], vec![ONE, ONE]]).unwrap();
        assert!(matches!(
            lu_solve(&singular, &[ONE, ONE]),
            Err(Error::SingularMatrix { .. })
        ));
        assert!(matches!(
            lu_solve(&ComplexMatrix::zeros(2, 3), &[ONE, ONE]),
            Err(Error::NotSquare { .. })
        ));
        assert!(matches!(
            lu_solve(&ComplexMatrix::identity(2), &[ONE]),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn adjoint_solve_matches_explicit_adjoint() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut a = random_matrix(&mut rng, 12, 12);
        for i in 0..12 {
            a[(i, i)] += c(3.0, 0.0);
        }
        let c_vec: Vec<C64> = (0..12).map(|i| c(i as f64, 1.0)).collect();
        let via_adjoint = LuFactorization::factor(&a).unwrap().solve_adjoint(&c_vec).unwrap();
        let direct = lu_solve(&a.adjoint(), &c_vec).unwrap();
        let err = via_adjoint
            .iter()
            .zip(&direct)
            .map(|(p, q)| (p - q).norm())
            .fold(0.0, f64::max);
        assert!(err < 1e-12);
    }

    #[test]
    fn condition_estimate_is_exact_for_diagonal() {
        let d = ComplexMatrix::diagonal(&[1.0, 10.0, 0.01, 2.0]);
        let lu = LuFactorization::factor(&d).unwrap();
        assert!((lu.condition_estimate() - 1000.0).abs() < 1e-9);
    }

    #[test]
    fn vectorize_identity_column_stacking() {
        assert_eq!(
            vectorize(&ComplexMatrix::identity(2)).unwrap(),
            vec![ONE, ZERO, ZERO, ONE]
        );
        let m = ComplexMatrix::from_rows(&[vec![ONE, c(2.0, 0.0)], vec![c(3.0, 0.0), c(4.0, 0.0)]]).unwrap();
        assert_eq!(vectorize(&m).unwrap(), vec![ONE, c(3.0, 0.0), c(2.0, 0.0), c(4.0, 0.0)]);
        assert!(matches!(
            vectorize(&ComplexMatrix::zeros(2, 3)),
            Err(Error::NotSquare { .. })
        ));
        assert!(matches!(
            devectorize(&[ONE; 5], 2),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn hermitian_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = random_matrix(&mut rng, 6, 6);
        let h = a.add(&a.adjoint()).unwrap();
        let back = devectorize(&vectorize(&h).unwrap(), 6).unwrap();
        assert_eq!(back, h);
    }

    /// Triple product computed by explicit index sums, independent of matmul.
    fn triple_product(a: &ComplexMatrix, rho: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
        let n = a.rows();
        ComplexMatrix::from_fn(n, n, |i, j| {
            let mut s = ZERO;
            for k in 0..n {
                for l in 0..n {
                    s += a[(i, k)] * rho[(k, l)] * b[(j, l)].conj();
                }
            }
            s
        })
    }

    #[test]
    fn kronecker_superoperator_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..10 {
            let a = random_matrix(&mut rng, 3, 3);
            let b = random_matrix(&mut rng, 3, 3);
            let rho = random_matrix(&mut rng, 3, 3);
            let sup = b.conj().kron(&a);
            let lhs = devectorize(&sup.matvec(&vectorize(&rho).unwrap()).unwrap(), 3).unwrap();
            let rhs = triple_product(&a, &rho, &b);
            assert!(lhs.max_abs_diff(&rhs).unwrap() < 1e-12);
        }
    }

    #[test]
    fn psd_check() {
        assert!(ComplexMatrix::diagonal(&[1.0, 0.0, 0.5]).is_positive_semidefinite(1e-12));
        assert!(!ComplexMatrix::diagonal(&[1.0, -0.1]).is_positive_semidefinite(1e-12));
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let v = [c(h, 0.0), c(0.0, h)];
        let pure = ComplexMatrix::from_fn(2, 2, |i, j| v[i] * v[j].conj());
        assert!(pure.is_positive_semidefinite(1e-12));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn matmul_is_associative(seed in any::<u64>(), n in 1usize..8) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let a = random_matrix(&mut rng, n, n);
            let b = random_matrix(&mut rng, n, n);
            let c3 = random_matrix(&mut rng, n, n);
            let left = a.matmul(&b).unwrap().matmul(&c3).unwrap();
            let right = a.matmul(&b.matmul(&c3).unwrap()).unwrap();
            let scale = left.norm_max().max(1.0);
            prop_assert!(left.max_abs_diff(&right).unwrap() <= 1e-10 * scale);
        }

        #[test]
        fn lu_residual_is_small(seed in any::<u64>(), n in 1usize..60) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut a = random_matrix(&mut rng, n, n);
            for i in 0..n {
                a[(i, i)] += c(n as f64, 0.0);
            }
            let b: Vec<C64> = (0..n).map(|_| c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect();
            let x = lu_solve(&a, &b).unwrap();
            let ax = a.matvec(&x).unwrap();
            let resid = ax.iter().zip(&b).map(|(p, q)| (p - q).norm()).fold(0.0, f64::max);
            prop_assert!(resid <= 1e-9 * norm_inf(&b));
        }
    }
}
