//! Small dense real matrices used for level-2 tensors, covariances and
//! diffusion coefficients.

use std::fmt;
use std::ops::{Add, AddAssign, Index, IndexMut, Mul, Neg, Sub, SubAssign};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Row-major dense matrix. Serialized as a list of rows.
#[derive(Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<f64>>", into = "Vec<Vec<f64>>")]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim, dim);
        for i in 0..dim {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    pub fn from_row_major(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::Dimension(format!("{} entries for a {rows}x{cols} matrix", data.len())));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_rows(rows: &[&[f64]]) -> Result<Self> {
        let nrows = rows.len();
        let ncols = rows.first().map_or(0, |r| r.len());
        let mut data = Vec::with_capacity(nrows * ncols);
        for r in rows {
            if r.len() != ncols {
                return Err(Error::Dimension("ragged matrix rows".into()));
            }
            data.extend_from_slice(r);
        }
        Ok(Self { rows: nrows, cols: ncols, data })
    }

    /// `a ⊗ b`, i.e. the matrix with entries `a_i b_j`.
    pub fn outer(a: &[f64], b: &[f64]) -> Self {
        Self::from_fn(a.len(), b.len(), |i, j| a[i] * b[j])
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

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    /// `½(M + Mᵀ)`.
    pub fn symmetric_part(&self) -> Self {
        debug_assert!(self.is_square());
        Self::from_fn(self.rows, self.cols, |i, j| 0.5 * (self[(i, j)] + self[(j, i)]))
    }

    /// `½(M − Mᵀ)`; the diagonal is exactly zero.
    pub fn antisymmetric_part(&self) -> Self {
        debug_assert!(self.is_square());
        Self::from_fn(self.rows, self.cols, |i, j| if i == j { 0.0 } else { 0.5 * (self[(i, j)] - self[(j, i)]) })
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0_f64, |m, x| m.max(x.abs()))
    }

    pub fn trace(&self) -> f64 {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).sum()
    }

    pub fn scale(&self, s: f64) -> Self {
        Self { rows: self.rows, cols: self.cols, data: self.data.iter().map(|x| x * s).collect() }
    }

    pub fn matmul(&self, other: &Self) -> Self {
        assert_eq!(self.cols, other.rows, "matmul shape mismatch");
        Self::from_fn(self.rows, other.cols, |i, j| (0..self.cols).map(|k| self[(i, k)] * other[(k, j)]).sum())
    }

    pub fn mul_vec(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(self.cols, v.len(), "mul_vec shape mismatch");
        (0..self.rows).map(|i| self.row(i).iter().zip(v).map(|(a, b)| a * b).sum()).collect()
    }

    /// `self += s · (a ⊗ b)`.
    pub fn add_outer_scaled(&mut self, a: &[f64], b: &[f64], s: f64) {
        debug_assert_eq!(a.len(), self.rows);
        debug_assert_eq!(b.len(), self.cols);
        for (i, ai) in a.iter().enumerate() {
            let row = &mut self.data[i * self.cols..(i + 1) * self.cols];
            for (r, bj) in row.iter_mut().zip(b) {
                *r += s * ai * bj;
            }
        }
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        self.is_square() && (0..self.rows).all(|i| (0..i).all(|j| (self[(i, j)] - self[(j, i)]).abs() <= tol))
    }

    /// Eigenvalues of a symmetric matrix (Jacobi rotations), ascending.
    pub fn symmetric_eigenvalues(&self) -> Vec<f64> {
        let (vals, _) = self.symmetric_eigen();
        vals
    }

    /// Eigen-decomposition of a symmetric matrix by cyclic Jacobi sweeps.
    /// Returns ascending eigenvalues and the matrix whose columns are the
    /// matching orthonormal eigenvectors.
    pub fn symmetric_eigen(&self) -> (Vec<f64>, Matrix) {
        assert!(self.is_square());
        let n = self.rows;
        let mut a = self.symmetric_part();
        let mut v = Matrix::identity(n);
        for _sweep in 0..64 {
            let off: f64 = (0..n)
                .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
                .map(|(i, j)| a[(i, j)] * a[(i, j)])
                .sum();
            if off <= 1e-30 * (1.0 + a.frobenius_norm().powi(2)) {
                break;
            }
            for p in 0..n {
                for q in (p + 1)..n {
                    let apq = a[(p, q)];
                    if apq == 0.0 {
                        continue;
                    }
                    let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * apq);
                    let t =
                        if theta == 0.0 { 1.0 } else { theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt()) };
                    let c = 1.0 / (t * t + 1.0).sqrt();
                    let s = t * c;
                    for k in 0..n {
                        let akp = a[(k, p)];
                        let akq = a[(k, q)];
                        a[(k, p)] = c * akp - s * akq;
                        a[(k, q)] = s * akp + c * akq;
                    }
                    for k in 0..n {
                        let apk = a[(p, k)];
                        let aqk = a[(q, k)];
                        a[(p, k)] = c * apk - s * aqk;
                        a[(q, k)] = s * apk + c * aqk;
                    }
                    for k in 0..n {
                        let vkp = v[(k, p)];
                        let vkq = v[(k, q)];
                        v[(k, p)] = c * vkp - s * vkq;
                        v[(k, q)] = s * vkp + c * vkq;
                    }
                }
            }
        }
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&i, &j| a[(i, i)].total_cmp(&a[(j, j)]));
        let vals = order.iter().map(|&i| a[(i, i)]).collect();
        let vecs = Matrix::from_fn(n, n, |r, c| v[(r, order[c])]);
        (vals, vecs)
    }

    /// Symmetric positive semi-definite square root. Fails if the symmetric
    /// part has an eigenvalue below `-tol`.
    pub fn psd_sqrt(&self, tol: f64) -> Result<Matrix> {
        let n = self.rows;
        if n == 1 {
            let x = self[(0, 0)];
            if x < -tol {
                return Err(Error::NotPositiveDefinite { min_eigenvalue: x });
            }
            return Ok(Matrix::from_fn(1, 1, |_, _| x.max(0.0).sqrt()));
        }
        if n == 2 {
            return sqrt_2x2(&self.symmetric_part(), tol);
        }
        let (vals, vecs) = self.symmetric_eigen();
        if vals[0] < -tol {
            return Err(Error::NotPositiveDefinite { min_eigenvalue: vals[0] });
        }
        Ok(Matrix::from_fn(n, n, |i, j| (0..n).map(|k| vecs[(i, k)] * vals[k].max(0.0).sqrt() * vecs[(j, k)]).sum()))
    }

    /// Lower-triangular Cholesky factor of a symmetric positive
    /// semi-definite matrix; zero pivots give zero columns.
    pub fn cholesky(&self) -> Result<Matrix> {
        let n = self.rows;
        let mut l = Matrix::zeros(n, n);
        for j in 0..n {
            let mut d = self[(j, j)];
            for k in 0..j {
                d -= l[(j, k)] * l[(j, k)];
            }
            if d < -1e-12 * (1.0 + self.max_abs()) {
                return Err(Error::NotPositiveDefinite { min_eigenvalue: d });
            }
            let djj = d.max(0.0).sqrt();
            l[(j, j)] = djj;
            for i in (j + 1)..n {
                let mut s = self[(i, j)];
                for k in 0..j {
                    s -= l[(i, k)] * l[(j, k)];
                }
                l[(i, j)] = if djj > 0.0 { s / djj } else { 0.0 };
            }
        }
        Ok(l)
    }

    /// Inverse of a 2x2 matrix.
    pub fn inverse_2x2(&self) -> Result<Matrix> {
        if self.rows != 2 || self.cols != 2 {
            return Err(Error::Dimension("inverse_2x2 needs a 2x2 matrix".into()));
        }
        let det = self[(0, 0)] * self[(1, 1)] - self[(0, 1)] * self[(1, 0)];
        if det == 0.0 {
            return Err(Error::Singular("2x2 matrix".into()));
        }
        Ok(Matrix::from_fn(2, 2, |i, j| {
            let v = match (i, j) {
                (0, 0) => self[(1, 1)],
                (1, 1) => self[(0, 0)],
                (0, 1) => -self[(0, 1)],
                _ => -self[(1, 0)],
            };
            v / det
        }))
    }
}

fn sqrt_2x2(s: &Matrix, tol: f64) -> Result<Matrix> {
    // Closed form: sqrt(S) = (S + sqrt(det) I) / sqrt(tr + 2 sqrt(det)).
    let (a, b, d) = (s[(0, 0)], s[(0, 1)], s[(1, 1)]);
    let tr = a + d;
    let det = a * d - b * b;
    let disc = ((a - d) * 0.5).hypot(b);
    let min_eig = 0.5 * tr - disc;
    if min_eig < -tol {
        return Err(Error::NotPositiveDefinite { min_eigenvalue: min_eig });
    }
    let sdet = det.max(0.0).sqrt();
    let denom = (tr + 2.0 * sdet).max(0.0).sqrt();
    if denom == 0.0 {
        return Ok(Matrix::zeros(2, 2));
    }
    Matrix::from_row_major(2, 2, vec![(a + sdet) / denom, b / denom, b / denom, (d + sdet) / denom])
}

impl Index<(usize, usize)> for Matrix {
    type Output = f64;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for Matrix {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.cols + j]
    }
}

macro_rules! elementwise {
    ($trait:ident, $method:ident, $op:tt, $assign_trait:ident, $assign_method:ident) => {
        impl $trait<&Matrix> for &Matrix {
            type Output = Matrix;
            fn $method(self, rhs: &Matrix) -> Matrix {
                assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols), "shape mismatch");
                Matrix {
                    rows: self.rows,
                    cols: self.cols,
                    data: self.data.iter().zip(&rhs.data).map(|(a, b)| a $op b).collect(),
                }
            }
        }
        impl $trait<Matrix> for Matrix {
            type Output = Matrix;
            fn $method(self, rhs: Matrix) -> Matrix {
                &self $op &rhs
            }
        }
        impl $trait<&Matrix> for Matrix {
            type Output = Matrix;
            fn $method(self, rhs: &Matrix) -> Matrix {
                &self $op rhs
            }
        }
        impl $assign_trait<&Matrix> for Matrix {
            fn $assign_method(&mut self, rhs: &Matrix) {
                assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols), "shape mismatch");
                for (a, b) in self.data.iter_mut().zip(&rhs.data) {
                    *a = *a $op *b;
                }
            }
        }
    };
}

elementwise!(Add, add, +, AddAssign, add_assign);
elementwise!(Sub, sub, -, SubAssign, sub_assign);

impl Mul<f64> for &Matrix {
    type Output = Matrix;
    fn mul(self, s: f64) -> Matrix {
        self.scale(s)
    }
}

impl Mul<f64> for Matrix {
    type Output = Matrix;
    fn mul(self, s: f64) -> Matrix {
        self.scale(s)
    }
}

impl Neg for Matrix {
    type Output = Matrix;
    fn neg(self) -> Matrix {
        self.scale(-1.0)
    }
}

impl fmt::Debug for Matrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries((0..self.rows).map(|i| self.row(i))).finish()
    }
}

impl fmt::Display for Matrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[")?;
        for i in 0..self.rows {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "[")?;
            for (j, x) in self.row(i).iter().enumerate() {
                if j > 0 {
                    write!(f, ", ")?;
                }
                write!(f, "{x:.6}")?;
            }
            write!(f, "]")?;
        }
        write!(f, "]")
    }
}

impl TryFrom<Vec<Vec<f64>>> for Matrix {
    type Error = Error;
    fn try_from(rows: Vec<Vec<f64>>) -> Result<Self> {
        let refs: Vec<&[f64]> = rows.iter().map(Vec::as_slice).collect();
        Matrix::from_rows(&refs)
    }
}

impl From<Matrix> for Vec<Vec<f64>> {
    fn from(m: Matrix) -> Self {
        (0..m.rows).map(|i| m.row(i).to_vec()).collect()
    }
}

/// Kahan–Babuška (Neumaier) compensated accumulator.
#[derive(Clone, Copy, Debug, Default)]
pub struct CompensatedSum {
    sum: f64,
    comp: f64,
}

impl CompensatedSum {
    #[inline]
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    #[inline]
    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

/// Entrywise compensated accumulation of a matrix-valued running sum.
#[derive(Clone, Debug)]
pub struct CompensatedMatrix {
    rows: usize,
    cols: usize,
    acc: Vec<CompensatedSum>,
}

impl CompensatedMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, acc: vec![CompensatedSum::default(); rows * cols] }
    }

    #[inline]
    pub fn add_outer_scaled(&mut self, a: &[f64], b: &[f64], s: f64) {
        for (i, ai) in a.iter().enumerate() {
            for (j, bj) in b.iter().enumerate() {
                self.acc[i * self.cols + j].add(s * ai * bj);
            }
        }
    }

    /// Appends the current entries, row-major, to `out`.
    #[inline]
    pub fn extend_into(&self, out: &mut Vec<f64>) {
        out.extend(self.acc.iter().map(CompensatedSum::value));
    }

    pub fn value(&self) -> Matrix {
        Matrix { rows: self.rows, cols: self.cols, data: self.acc.iter().map(CompensatedSum::value).collect() }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sym_plus_antisym_recovers_matrix() {
        let m = Matrix::from_rows(&[&[1.0, 2.0, -3.0], &[0.5, 4.0, 7.0], &[9.0, -1.0, 2.0]]).unwrap();
        let back = m.symmetric_part() + m.antisymmetric_part();
        assert!((&back - &m).max_abs() < 1e-15);
        let a = m.antisymmetric_part();
        assert!((0..3).all(|i| a[(i, i)] == 0.0));
    }

    #[test]
    fn sqrt_matches_square() {
        let m = Matrix::from_rows(&[&[2.0, 0.3], &[0.3, 1.0]]).unwrap();
        let r = m.psd_sqrt(0.0).unwrap();
        assert!((&r.matmul(&r) - &m).max_abs() < 1e-14);
        let m3 = Matrix::from_rows(&[&[2.0, 0.3, 0.1], &[0.3, 1.0, 0.2], &[0.1, 0.2, 3.0]]).unwrap();
        let r3 = m3.psd_sqrt(0.0).unwrap();
        assert!((&r3.matmul(&r3) - &m3).max_abs() < 1e-12);
    }

    #[test]
    fn sqrt_rejects_indefinite() {
        let m = Matrix::from_rows(&[&[1.0, 2.0], &[2.0, 1.0]]).unwrap();
        assert!(matches!(m.psd_sqrt(1e-12), Err(Error::NotPositiveDefinite { .. })));
    }

    #[test]
    fn jacobi_eigenvalues() {
        let m = Matrix::from_rows(&[&[2.0, 1.0, 0.0], &[1.0, 2.0, 0.0], &[0.0, 0.0, 5.0]]).unwrap();
        let ev = m.symmetric_eigenvalues();
        for (a, b) in ev.iter().zip([1.0, 3.0, 5.0]) {
            assert!((a - b).abs() < 1e-12, "{ev:?}");
        }
    }

    #[test]
    fn cholesky_reconstructs() {
        let m = Matrix::from_rows(&[&[4.0, 1.0], &[1.0, 3.0]]).unwrap();
        let l = m.cholesky().unwrap();
        assert!((&l.matmul(&l.transpose()) - &m).max_abs() < 1e-14);
    }

    #[test]
    fn serde_as_rows() {
        let m = Matrix::from_rows(&[&[0.0, -1.0], &[1.0, 0.0]]).unwrap();
        let s = serde_json::to_string(&m).unwrap();
        assert_eq!(s, "[[0.0,-1.0],[1.0,0.0]]");
        let back: Matrix = serde_json::from_str(&s).unwrap();
        assert_eq!(back, m);
        assert!(serde_json::from_str::<Matrix>("[[1.0],[1.0,2.0]]").is_err());
    }

    #[test]
    fn compensated_sum_beats_naive() {
        let mut c = CompensatedSum::default();
        c.add(1.0);
        for _ in 0..10 {
            c.add(1e-16);
        }
        c.add(-1.0);
        assert!((c.value() - 1e-15).abs() < 1e-30);
    }
}
