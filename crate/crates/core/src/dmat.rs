//! Matrices whose entries are d-vectors, and the contraction operator `H`.

use crate::error::{Error, Result};
use nalgebra::DMatrix;

#[derive(Debug, Clone, PartialEq)]
pub struct DMat {
    rows: usize,
    cols: usize,
    dim: usize,
    data: Vec<f64>,
}

impl DMat {
    pub fn zeros(rows: usize, cols: usize, dim: usize) -> Self {
        Self { rows, cols, dim, data: vec![0.0; rows * cols * dim] }
    }

    pub fn from_fn(rows: usize, cols: usize, dim: usize, mut f: impl FnMut(usize, usize) -> Vec<f64>) -> Self {
        let mut m = Self::zeros(rows, cols, dim);
        for i in 0..rows {
            for j in 0..cols {
                let v = f(i, j);
                assert_eq!(v.len(), dim, "entry ({i},{j}) has wrong dimension");
                m.get_mut(i, j).copy_from_slice(&v);
            }
        }
        m
    }

    /// Column d-matrix from a list of vectors.
    pub fn column(vectors: &[Vec<f64>]) -> Result<Self> {
        let dim = vectors.first().map_or(0, |v| v.len());
        if vectors.iter().any(|v| v.len() != dim) {
            return Err(Error::ShapeMismatch("vectors of mixed dimension".into()));
        }
        Ok(Self::from_fn(vectors.len(), 1, dim, |i, _| vectors[i].clone()))
    }

    pub fn rows(&self) -> usize {
        self.rows
    }
    pub fn cols(&self) -> usize {
        self.cols
    }
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, i: usize, j: usize) -> &[f64] {
        let o = (i * self.cols + j) * self.dim;
        &self.data[o..o + self.dim]
    }

    pub fn get_mut(&mut self, i: usize, j: usize) -> &mut [f64] {
        let o = (i * self.cols + j) * self.dim;
        &mut self.data[o..o + self.dim]
    }

    pub fn scale(&self, lambda: f64) -> Self {
        Self { data: self.data.iter().map(|v| v * lambda).collect(), ..self.clone() }
    }

    pub fn add(&self, other: &DMat) -> Result<Self> {
        if (self.rows, self.cols, self.dim) != (other.rows, other.cols, other.dim) {
            return Err(Error::ShapeMismatch(format!(
                "{}x{}x{} + {}x{}x{}",
                self.rows, self.cols, self.dim, other.rows, other.cols, other.dim
            )));
        }
        Ok(Self { data: self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect(), ..self.clone() })
    }

    pub fn sub(&self, other: &DMat) -> Result<Self> {
        self.add(&other.scale(-1.0))
    }

    /// (A Q)_ij = sum_k a_ik q_kj
    pub fn matmul(&self, q: &DMatrix<f64>) -> Result<Self> {
        if q.nrows() != self.cols {
            return Err(Error::ShapeMismatch(format!(
                "d-matrix with {} columns times {}x{} matrix",
                self.cols,
                q.nrows(),
                q.ncols()
            )));
        }
        let mut out = Self::zeros(self.rows, q.ncols(), self.dim);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.get(i, k).to_vec();
                for j in 0..q.ncols() {
                    let qkj = q[(k, j)];
                    if qkj != 0.0 {
                        for (o, av) in out.get_mut(i, j).iter_mut().zip(&a) {
                            *o += av * qkj;
                        }
                    }
                }
            }
        }
        Ok(out)
    }

    /// H(A, V)_ij = a_ij . v_i, with V an m x 1 d-matrix.
    pub fn op_h(&self, v: &DMat) -> Result<DMatrix<f64>> {
        if v.rows != self.rows || v.cols != 1 || v.dim != self.dim {
            return Err(Error::ShapeMismatch(format!(
                "H of a {}x{} d-matrix against {}x{} vectors (dims {} / {})",
                self.rows, self.cols, v.rows, v.cols, self.dim, v.dim
            )));
        }
        Ok(DMatrix::from_fn(self.rows, self.cols, |i, j| dot(self.get(i, j), v.get(i, 0))))
    }

    /// det H(A, V) with v_i replaced by the canonical vector e_eta, which is the
    /// partial derivative of det H(A, V) with respect to v_{i,eta}.
    pub fn det_h_partial(&self, v: &DMat, i: usize, eta: usize) -> Result<f64> {
        if self.rows != self.cols {
            return Err(Error::ShapeMismatch("H must be square".into()));
        }
        if i >= self.rows {
            return Err(Error::IndexOutOfRange { index: i, size: self.rows });
        }
        if eta >= self.dim {
            return Err(Error::IndexOutOfRange { index: eta, size: self.dim });
        }
        let mut w = v.clone();
        let vi = w.get_mut(i, 0);
        vi.fill(0.0);
        vi[eta] = 1.0;
        Ok(self.op_h(&w)?.determinant())
    }

    pub fn remove_row(&self, r: usize) -> Self {
        let keep: Vec<usize> = (0..self.rows).filter(|&i| i != r).collect();
        Self::from_fn(keep.len(), self.cols, self.dim, |i, j| self.get(keep[i], j).to_vec())
    }

    pub fn remove_col(&self, c: usize) -> Self {
        let keep: Vec<usize> = (0..self.cols).filter(|&j| j != c).collect();
        Self::from_fn(self.rows, keep.len(), self.dim, |i, j| self.get(i, keep[j]).to_vec())
    }

    /// Keeps the listed rows and columns, in the given order.
    pub fn select(&self, rows: &[usize], cols: &[usize]) -> Self {
        Self::from_fn(rows.len(), cols.len(), self.dim, |i, j| self.get(rows[i], cols[j]).to_vec())
    }

    pub fn max_norm(&self) -> f64 {
        self.data.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scale_add_matmul_basics() {
        let a = DMat::from_fn(2, 3, 2, |i, j| vec![i as f64 + 1.0, j as f64 - 1.0]);
        assert_eq!(a.scale(0.0).max_norm(), 0.0);
        assert_eq!(a.matmul(&DMatrix::identity(3, 3)).unwrap(), a);
        let one = DMat::from_fn(1, 1, 2, |_, _| vec![1.0, 2.0]);
        let r = one.matmul(&DMatrix::from_element(1, 1, 3.0)).unwrap();
        assert_eq!(r.get(0, 0), &[3.0, 6.0]);
        assert!(a.matmul(&DMatrix::identity(2, 2)).is_err());
        assert!(a.add(&one).is_err());
        assert_eq!(a.add(&a).unwrap(), a.scale(2.0));
    }

    #[test]
    fn op_h_examples() {
        let a = DMat::from_fn(1, 1, 2, |_, _| vec![1.0, 0.0]);
        let v = DMat::column(&[vec![0.0, 1.0]]).unwrap();
        assert_eq!(a.op_h(&v).unwrap()[(0, 0)], 0.0);

        let a = DMat::from_fn(2, 2, 2, |i, j| vec![(i * 2 + j) as f64, 10.0 + (i + j) as f64]);
        let v = DMat::column(&[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
        let h = a.op_h(&v).unwrap();
        assert_eq!(h[(0, 0)], a.get(0, 0)[1]);
        assert_eq!(h[(0, 1)], a.get(0, 1)[1]);
        assert_eq!(h[(1, 0)], a.get(1, 0)[0]);
        assert_eq!(h[(1, 1)], a.get(1, 1)[0]);
        assert!(a.op_h(&DMat::column(&[vec![1.0, 0.0]]).unwrap()).is_err());
    }

    #[test]
    fn det_partial_one_by_one() {
        let a = DMat::from_fn(1, 1, 2, |_, _| vec![3.0, -5.0]);
        let v = DMat::column(&[vec![0.6, 0.8]]).unwrap();
        assert_eq!(a.det_h_partial(&v, 0, 0).unwrap(), 3.0);
        assert_eq!(a.det_h_partial(&v, 0, 1).unwrap(), -5.0);
        assert!(a.det_h_partial(&v, 1, 0).is_err());
        assert!(a.det_h_partial(&v, 0, 2).is_err());
    }

    #[test]
    fn remove_and_select() {
        let a = DMat::from_fn(3, 3, 2, |i, j| vec![i as f64, j as f64]);
        let b = a.remove_row(1).remove_col(0);
        assert_eq!((b.rows(), b.cols()), (2, 2));
        assert_eq!(b.get(1, 0), &[2.0, 1.0]);
        let c = a.select(&[2, 0], &[1]);
        assert_eq!(c.get(0, 0), &[2.0, 1.0]);
        assert_eq!(c.get(1, 0), &[0.0, 1.0]);
    }
}
