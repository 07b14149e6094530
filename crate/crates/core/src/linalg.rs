//! Small dense linear algebra: row-major matrices and symmetric
//! positive-definite solves for normal equations.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Dense row-major matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Scalar> Matrix<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![T::zero(); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = T::one();
        }
        m
    }

    /// Builds a matrix from row-major data. Panics if the length does not match.
    pub fn from_vec(rows: usize, cols: usize, data: Vec<T>) -> Self {
        assert_eq!(data.len(), rows * cols, "matrix data length mismatch");
        Self { rows, cols, data }
    }

    /// Builds a matrix from equal-length rows. Panics on ragged input.
    pub fn from_rows<R: AsRef<[T]>>(rows: &[R]) -> Self {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            let r = r.as_ref();
            assert_eq!(r.len(), cols, "ragged rows");
            data.extend_from_slice(r);
        }
        Self {
            rows: rows.len(),
            cols,
            data,
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> impl Iterator<Item = T> + '_ {
        (0..self.rows).map(move |i| self.data[i * self.cols + j])
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    /// Returns the sub-matrix made of the given rows, in order.
    pub fn select_rows(&self, idx: &[usize]) -> Self {
        let mut data = Vec::with_capacity(idx.len() * self.cols);
        for &i in idx {
            data.extend_from_slice(self.row(i));
        }
        Self {
            rows: idx.len(),
            cols: self.cols,
            data,
        }
    }

    pub fn mul_vec(&self, v: &[T]) -> Vec<T> {
        assert_eq!(v.len(), self.cols);
        (0..self.rows).map(|i| dot(self.row(i), v)).collect()
    }

    /// `Aᵀ v`.
    pub fn t_mul_vec(&self, v: &[T]) -> Vec<T> {
        assert_eq!(v.len(), self.rows);
        let mut out = vec![T::zero(); self.cols];
        for (i, &vi) in v.iter().enumerate() {
            for (o, &a) in out.iter_mut().zip(self.row(i)) {
                *o = *o + a * vi;
            }
        }
        out
    }

    pub fn mul(&self, other: &Matrix<T>) -> Matrix<T> {
        assert_eq!(self.cols, other.rows);
        let mut out = Matrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                for j in 0..other.cols {
                    out[(i, j)] = out[(i, j)] + a * other[(k, j)];
                }
            }
        }
        out
    }

    /// `AᵀA`.
    pub fn gram(&self) -> Matrix<T> {
        self.weighted_gram(None)
    }

    /// `Aᵀ diag(w) A`; only the upper triangle is accumulated, then mirrored.
    pub fn weighted_gram(&self, weights: Option<&[T]>) -> Matrix<T> {
        let k = self.cols;
        let mut g = Matrix::zeros(k, k);
        for i in 0..self.rows {
            let r = self.row(i);
            let w = weights.map_or(T::one(), |w| w[i]);
            for a in 0..k {
                let ra = r[a] * w;
                if ra == T::zero() {
                    continue;
                }
                let grow = &mut g.data[a * k..(a + 1) * k];
                for b in a..k {
                    grow[b] = grow[b] + ra * r[b];
                }
            }
        }
        for a in 0..k {
            for b in 0..a {
                g.data[a * k + b] = g.data[b * k + a];
            }
        }
        g
    }

    pub fn diagonal(&self) -> Vec<T> {
        (0..self.rows.min(self.cols))
            .map(|i| self[(i, i)])
            .collect()
    }
}

impl<T> std::ops::Index<(usize, usize)> for Matrix<T> {
    type Output = T;
    fn index(&self, (i, j): (usize, usize)) -> &T {
        &self.data[i * self.cols + j]
    }
}

impl<T> std::ops::IndexMut<(usize, usize)> for Matrix<T> {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut T {
        &mut self.data[i * self.cols + j]
    }
}

pub fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).fold(T::zero(), |acc, (&x, &y)| acc + x * y)
}

/// Cholesky factor of a symmetric positive-definite matrix, computed after
/// symmetric diagonal scaling (`D^{-1/2} A D^{-1/2}`) so that columns with very
/// different magnitudes do not spoil the factorization.
#[derive(Debug, Clone)]
pub struct Cholesky<T> {
    lower: Matrix<T>,
    scale: Vec<T>,
}

impl<T: Scalar> Cholesky<T> {
    pub fn factor(a: &Matrix<T>) -> Result<Self> {
        let n = a.rows();
        if n != a.cols() {
            return Err(Error::Singular {
                context: "cholesky",
            });
        }
        let mut scale = Vec::with_capacity(n);
        for i in 0..n {
            let d = a[(i, i)];
            if !(d > T::zero()) || !d.is_finite() {
                return Err(Error::Singular {
                    context: "cholesky",
                });
            }
            scale.push(d.sqrt());
        }
        let mut l = Matrix::zeros(n, n);
        // Pivots below this fraction of the scaled diagonal (which is 1) are
        // treated as numerical rank deficiency.
        let floor = T::epsilon() * T::from_count(n.max(1)) * T::of(16.0);
        for j in 0..n {
            let mut d = a[(j, j)] / (scale[j] * scale[j]);
            for k in 0..j {
                d = d - l[(j, k)] * l[(j, k)];
            }
            if !(d > floor) {
                return Err(Error::Singular {
                    context: "cholesky",
                });
            }
            let d = d.sqrt();
            l[(j, j)] = d;
            for i in (j + 1)..n {
                let mut s = a[(i, j)] / (scale[i] * scale[j]);
                for k in 0..j {
                    s = s - l[(i, k)] * l[(j, k)];
                }
                l[(i, j)] = s / d;
            }
        }
        Ok(Self { lower: l, scale })
    }

    pub fn dim(&self) -> usize {
        self.scale.len()
    }

    pub fn solve(&self, b: &[T]) -> Vec<T> {
        let n = self.dim();
        assert_eq!(b.len(), n);
        let l = &self.lower;
        let mut y: Vec<T> = b.iter().zip(&self.scale).map(|(&v, &s)| v / s).collect();
        for i in 0..n {
            let mut s = y[i];
            for k in 0..i {
                s = s - l[(i, k)] * y[k];
            }
            y[i] = s / l[(i, i)];
        }
        for i in (0..n).rev() {
            let mut s = y[i];
            for k in (i + 1)..n {
                s = s - l[(k, i)] * y[k];
            }
            y[i] = s / l[(i, i)];
        }
        y.iter().zip(&self.scale).map(|(&v, &s)| v / s).collect()
    }

    pub fn inverse(&self) -> Matrix<T> {
        let n = self.dim();
        let mut inv = Matrix::zeros(n, n);
        let mut e = vec![T::zero(); n];
        for j in 0..n {
            e.iter_mut().for_each(|v| *v = T::zero());
            e[j] = T::one();
            let col = self.solve(&e);
            for (i, v) in col.into_iter().enumerate() {
                inv[(i, j)] = v;
            }
        }
        inv
    }
}

/// Solves `A x = b` for symmetric positive-definite `A`.
pub fn solve_spd<T: Scalar>(a: &Matrix<T>, b: &[T]) -> Result<Vec<T>> {
    Ok(Cholesky::factor(a)?.solve(b))
}

/// Solves `A x = b`, falling back to `A + λ·max(diag)·I` with a tiny ridge
/// when `A` is numerically singular. Returns the solution and whether the
/// ridge was needed.
pub fn solve_spd_jittered<T: Scalar>(a: &Matrix<T>, b: &[T], ridge: T) -> Result<(Vec<T>, bool)> {
    match Cholesky::factor(a) {
        Ok(c) => Ok((c.solve(b), false)),
        Err(_) => {
            let max_diag = a
                .diagonal()
                .into_iter()
                .fold(T::zero(), |m, d| if d > m { d } else { m });
            let bump = ridge
                * if max_diag > T::zero() {
                    max_diag
                } else {
                    T::one()
                };
            let mut jittered = a.clone();
            for i in 0..a.rows() {
                jittered[(i, i)] = jittered[(i, i)] + bump;
            }
            Ok((Cholesky::factor(&jittered)?.solve(b), true))
        }
    }
}
