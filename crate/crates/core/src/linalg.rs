//! Small dense linear algebra: enough for 2x2 to ~10x10 normal equations and
//! covariance matrices.

use std::ops::{Index, IndexMut};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative pivot floor used by [`DenseMatrix::cholesky`]. A matrix is
/// treated as positive definite iff every pivot exceeds this fraction of the
/// largest diagonal entry. The regression constraint uses the same rule.
pub const PIVOT_TOLERANCE: f64 = 1e-12;

const SYMMETRY_TOLERANCE: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(into = "Vec<Vec<f64>>", try_from = "Vec<Vec<f64>>")]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::param("matrix dimensions must be positive"));
        }
        if data.len() != rows * cols {
            return Err(Error::Dimension {
                expected: rows * cols,
                got: data.len(),
            });
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn diagonal(diag: &[f64]) -> Self {
        let mut m = Self::zeros(diag.len(), diag.len());
        for (i, &d) in diag.iter().enumerate() {
            m[(i, i)] = d;
        }
        m
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map(|row| row.as_ref().len()).unwrap_or(0);
        let mut data = Vec::with_capacity(r * c);
        for row in rows {
            let row = row.as_ref();
            if row.len() != c {
                return Err(Error::Dimension {
                    expected: c,
                    got: row.len(),
                });
            }
            data.extend_from_slice(row);
        }
        Self::new(r, c, data)
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

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.rows).map(|i| self.row(i).to_vec()).collect()
    }

    pub fn diag(&self) -> Vec<f64> {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).collect()
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    pub fn matmul(&self, other: &DenseMatrix) -> Result<DenseMatrix> {
        if self.cols != other.rows {
            return Err(Error::Dimension {
                expected: self.cols,
                got: other.rows,
            });
        }
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == 0.0 {
                    continue;
                }
                for j in 0..other.cols {
                    out[(i, j)] += a * other[(k, j)];
                }
            }
        }
        Ok(out)
    }

    pub fn matvec(&self, v: &[f64]) -> Result<Vec<f64>> {
        if v.len() != self.cols {
            return Err(Error::Dimension {
                expected: self.cols,
                got: v.len(),
            });
        }
        Ok((0..self.rows)
            .map(|i| self.row(i).iter().zip(v).map(|(a, b)| a * b).sum())
            .collect())
    }

    pub fn scaled(&self, s: f64) -> DenseMatrix {
        DenseMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|x| x * s).collect(),
        }
    }

    pub fn add(&self, other: &DenseMatrix) -> Result<DenseMatrix> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(Error::Dimension {
                expected: self.rows * self.cols,
                got: other.rows * other.cols,
            });
        }
        Ok(DenseMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect(),
        })
    }

    pub fn sub(&self, other: &DenseMatrix) -> Result<DenseMatrix> {
        self.add(&other.scaled(-1.0))
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    pub fn max_abs_diag(&self) -> f64 {
        self.diag().iter().fold(0.0_f64, |m, d| m.max(d.abs()))
    }

    pub fn is_symmetric(&self) -> bool {
        if !self.is_square() {
            return false;
        }
        let scale = self.data.iter().fold(0.0_f64, |m, x| m.max(x.abs())).max(1e-300);
        for i in 0..self.rows {
            for j in 0..i {
                if (self[(i, j)] - self[(j, i)]).abs() > SYMMETRY_TOLERANCE * scale {
                    return false;
                }
            }
        }
        true
    }

    /// Lower-triangular `L` with `L * L^T = self`.
    ///
    /// Fails with [`Error::NotPositiveDefinite`] as soon as a pivot drops to
    /// `PIVOT_TOLERANCE * max diagonal` or below. Only the lower triangle is
    /// read after the symmetry check.
    pub fn cholesky(&self) -> Result<DenseMatrix> {
        if !self.is_square() {
            return Err(Error::Dimension {
                expected: self.rows,
                got: self.cols,
            });
        }
        if !self.is_symmetric() {
            return Err(Error::NotSymmetric);
        }
        let n = self.rows;
        let floor = PIVOT_TOLERANCE * self.max_abs_diag();
        let mut l = DenseMatrix::zeros(n, n);
        for j in 0..n {
            let mut d = self[(j, j)];
            for k in 0..j {
                d -= l[(j, k)] * l[(j, k)];
            }
            if !(d > floor) || !d.is_finite() {
                return Err(Error::NotPositiveDefinite);
            }
            let ljj = d.sqrt();
            l[(j, j)] = ljj;
            for i in (j + 1)..n {
                let mut s = self[(i, j)];
                for k in 0..j {
                    s -= l[(i, k)] * l[(j, k)];
                }
                l[(i, j)] = s / ljj;
            }
        }
        Ok(l)
    }

    pub fn is_positive_definite(&self) -> bool {
        self.cholesky().is_ok()
    }

    /// Solve `self * x = rhs` for symmetric positive definite `self`.
    pub fn solve_spd(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        if rhs.len() != self.rows {
            return Err(Error::Dimension {
                expected: self.rows,
                got: rhs.len(),
            });
        }
        let l = self.cholesky()?;
        Ok(cholesky_solve(&l, rhs))
    }

    pub fn inverse_spd(&self) -> Result<DenseMatrix> {
        let l = self.cholesky()?;
        let n = self.rows;
        let mut inv = DenseMatrix::zeros(n, n);
        let mut e = vec![0.0; n];
        for j in 0..n {
            e.iter_mut().for_each(|x| *x = 0.0);
            e[j] = 1.0;
            let col = cholesky_solve(&l, &e);
            for i in 0..n {
                inv[(i, j)] = col[i];
            }
        }
        inv.symmetrize();
        Ok(inv)
    }

    /// Replace the matrix by `(A + A^T) / 2`.
    pub fn symmetrize(&mut self) {
        for i in 0..self.rows {
            for j in 0..i {
                let v = 0.5 * (self[(i, j)] + self[(j, i)]);
                self[(i, j)] = v;
                self[(j, i)] = v;
            }
        }
    }

    /// Eigen-decomposition of a symmetric matrix by cyclic Jacobi rotations.
    /// Returns eigenvalues and a matrix whose columns are the eigenvectors.
    pub fn symmetric_eigen(&self) -> Result<(Vec<f64>, DenseMatrix)> {
        if !self.is_symmetric() {
            return Err(Error::NotSymmetric);
        }
        let n = self.rows;
        let mut a = self.clone();
        let mut v = DenseMatrix::identity(n);
        for _sweep in 0..100 {
            let off: f64 = (0..n)
                .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
                .map(|(i, j)| a[(i, j)] * a[(i, j)])
                .sum();
            if off < 1e-30 * (1.0 + a.frobenius_norm().powi(2)) {
                break;
            }
            for p in 0..n {
                for q in (p + 1)..n {
                    let apq = a[(p, q)];
                    if apq.abs() < 1e-300 {
                        continue;
                    }
                    let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * apq);
                    let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                    let t = if theta == 0.0 { 1.0 } else { t };
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
        Ok((a.diag(), v))
    }
}

/// Solve `L L^T x = b` given the lower Cholesky factor.
pub fn cholesky_solve(l: &DenseMatrix, b: &[f64]) -> Vec<f64> {
    let n = l.rows();
    let mut y = b.to_vec();
    for i in 0..n {
        let mut s = y[i];
        for k in 0..i {
            s -= l[(i, k)] * y[k];
        }
        y[i] = s / l[(i, i)];
    }
    for i in (0..n).rev() {
        let mut s = y[i];
        for k in (i + 1)..n {
            s -= l[(k, i)] * y[k];
        }
        y[i] = s / l[(i, i)];
    }
    y
}

impl Index<(usize, usize)> for DenseMatrix {
    type Output = f64;

    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for DenseMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.cols + j]
    }
}

impl From<DenseMatrix> for Vec<Vec<f64>> {
    fn from(m: DenseMatrix) -> Self {
        m.to_rows()
    }
}

impl TryFrom<Vec<Vec<f64>>> for DenseMatrix {
    type Error = Error;

    fn try_from(rows: Vec<Vec<f64>>) -> Result<Self> {
        DenseMatrix::from_rows(&rows)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RngHandle;
    use proptest::prelude::*;
    use rand::Rng;

    fn rel_frob(a: &DenseMatrix, b: &DenseMatrix) -> f64 {
        a.sub(b).unwrap().frobenius_norm() / b.frobenius_norm()
    }

    #[test]
    fn cholesky_identity() {
        let i3 = DenseMatrix::identity(3);
        assert_eq!(i3.cholesky().unwrap(), i3);
    }

    #[test]
    fn cholesky_two_by_two() {
        let m = DenseMatrix::from_rows(&[[4.0, 2.0], [2.0, 3.0]]).unwrap();
        let l = m.cholesky().unwrap();
        let expect = DenseMatrix::from_rows(&[[2.0, 0.0], [1.0, 2f64.sqrt()]]).unwrap();
        assert!(rel_frob(&l, &expect) < 1e-15);
        let back = l.matmul(&l.transpose()).unwrap();
        assert!(rel_frob(&back, &m) < 1e-10);
    }

    #[test]
    fn cholesky_rejects_indefinite() {
        let m = DenseMatrix::from_rows(&[[1.0, 2.0], [2.0, 1.0]]).unwrap();
        assert!(matches!(m.cholesky(), Err(Error::NotPositiveDefinite)));
    }

    #[test]
    fn cholesky_rejects_asymmetric() {
        let m = DenseMatrix::from_rows(&[[2.0, 1.0], [0.0, 2.0]]).unwrap();
        assert!(matches!(m.cholesky(), Err(Error::NotSymmetric)));
    }

    #[test]
    fn solve_identity_and_diagonal() {
        let b = [3.0, -1.0, 2.5];
        assert_eq!(DenseMatrix::identity(3).solve_spd(&b).unwrap(), b.to_vec());
        let d = DenseMatrix::from_rows(&[[2.0, 0.0], [0.0, 4.0]]).unwrap();
        let x = d.solve_spd(&[2.0, 8.0]).unwrap();
        assert!((x[0] - 1.0).abs() < 1e-15 && (x[1] - 2.0).abs() < 1e-15);
    }

    #[test]
    fn solve_random_spd_recovers_known_solution() {
        let mut rng = RngHandle::new(42, 0);
        for _ in 0..20 {
            let a = DenseMatrix::new(5, 5, (0..25).map(|_| rng.random::<f64>() - 0.5).collect())
                .unwrap();
            let m = a
                .matmul(&a.transpose())
                .unwrap()
                .add(&DenseMatrix::identity(5).scaled(0.1))
                .unwrap();
            let x: Vec<f64> = (0..5).map(|_| rng.random::<f64>() * 4.0 - 2.0).collect();
            let rhs = m.matvec(&x).unwrap();
            let got = m.solve_spd(&rhs).unwrap();
            for (g, e) in got.iter().zip(&x) {
                assert!((g - e).abs() < 1e-8);
            }
            let resid: f64 = m
                .matvec(&got)
                .unwrap()
                .iter()
                .zip(&rhs)
                .map(|(a, b)| (a - b).powi(2))
                .sum::<f64>()
                .sqrt();
            let norm: f64 = rhs.iter().map(|v| v * v).sum::<f64>().sqrt();
            assert!(resid <= 1e-8 * norm);
        }
    }

    #[test]
    fn inverse_times_matrix_is_identity() {
        let m = DenseMatrix::from_rows(&[[4.0, 1.0, 0.5], [1.0, 3.0, 0.2], [0.5, 0.2, 2.0]]).unwrap();
        let prod = m.matmul(&m.inverse_spd().unwrap()).unwrap();
        assert!(rel_frob(&prod, &DenseMatrix::identity(3)) < 1e-13);
    }

    #[test]
    fn jacobi_eigen_reconstructs() {
        let m = DenseMatrix::from_rows(&[[2.0, 1.0, 0.0], [1.0, 2.0, 1.0], [0.0, 1.0, 2.0]]).unwrap();
        let (vals, vecs) = m.symmetric_eigen().unwrap();
        let back = vecs
            .matmul(&DenseMatrix::diagonal(&vals))
            .unwrap()
            .matmul(&vecs.transpose())
            .unwrap();
        assert!(rel_frob(&back, &m) < 1e-12);
        let mut sorted = vals.clone();
        sorted.sort_by(f64::total_cmp);
        let expect = [2.0 - 2f64.sqrt(), 2.0, 2.0 + 2f64.sqrt()];
        for (a, b) in sorted.iter().zip(expect) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn serde_as_nested_rows() {
        let m = DenseMatrix::from_rows(&[[1.0, 2.0], [3.0, 4.0]]).unwrap();
        let s = serde_json::to_string(&m).unwrap();
        assert_eq!(s, "[[1.0,2.0],[3.0,4.0]]");
        let back: DenseMatrix = serde_json::from_str(&s).unwrap();
        assert_eq!(back, m);
    }

    proptest! {
        #[test]
        fn cholesky_inverts_llt(entries in proptest::collection::vec(-3.0f64..3.0, 10),
                                diag in proptest::collection::vec(0.1f64..3.0, 4)) {
            let mut l = DenseMatrix::zeros(4, 4);
            let mut it = entries.into_iter();
            for i in 0..4 {
                l[(i, i)] = diag[i];
                for j in 0..i {
                    l[(i, j)] = it.next().unwrap();
                }
            }
            let m = l.matmul(&l.transpose()).unwrap();
            let back = m.cholesky().unwrap();
            prop_assert!(back.sub(&l).unwrap().frobenius_norm() <= 1e-10 * l.frobenius_norm().max(1.0));
        }
    }
}
