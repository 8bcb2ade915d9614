use std::fmt;

use crate::error::{Error, Result};

/// Dense row-major matrix of `f64`. Vectors are `1 x n` rows or `n x 1` columns.
#[derive(Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl fmt::Debug for Matrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "Matrix {}x{} [", self.rows, self.cols)?;
        for r in 0..self.rows {
            writeln!(f, "  {:?}", self.row(r))?;
        }
        write!(f, "]")
    }
}

impl Matrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::Shape(format!(
                "matrix dimensions must be positive, got {rows}x{cols}"
            )));
        }
        if rows * cols != data.len() {
            return Err(Error::Shape(format!(
                "{rows}x{cols} matrix needs {} entries, got {}",
                rows * cols,
                data.len()
            )));
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!("non-finite matrix entry at {i}")));
        }
        Ok(Matrix { rows, cols, data })
    }

    /// Builds without checking finiteness. Shape must still be consistent.
    pub(crate) fn from_raw(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        debug_assert_eq!(rows * cols, data.len());
        Matrix { rows, cols, data }
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix::from_raw(rows, cols, vec![0.0; rows * cols])
    }

    pub fn filled(rows: usize, cols: usize, value: f64) -> Self {
        Matrix::from_raw(rows, cols, vec![value; rows * cols])
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    pub fn scalar(value: f64) -> Self {
        Matrix::from_raw(1, 1, vec![value])
    }

    pub fn row_vector(values: Vec<f64>) -> Self {
        let n = values.len();
        Matrix::from_raw(1, n, values)
    }

    pub fn column_vector(values: Vec<f64>) -> Self {
        let n = values.len();
        Matrix::from_raw(n, 1, values)
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                data.push(f(r, c));
            }
        }
        Matrix::from_raw(rows, cols, data)
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

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    /// Value of a `1 x 1` matrix.
    pub fn as_scalar(&self) -> Option<f64> {
        (self.data.len() == 1).then(|| self.data[0])
    }

    pub fn select_rows(&self, idx: &[usize]) -> Matrix {
        let mut data = Vec::with_capacity(idx.len() * self.cols);
        for &i in idx {
            data.extend_from_slice(self.row(i));
        }
        Matrix::from_raw(idx.len(), self.cols, data)
    }

    pub fn transpose(&self) -> Matrix {
        let mut out = Matrix::zeros(self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                out.data[c * self.rows + r] = self.data[r * self.cols + c];
            }
        }
        out
    }

    pub fn matmul(&self, rhs: &Matrix) -> Result<Matrix> {
        if self.cols != rhs.rows {
            return Err(Error::Shape(format!(
                "matmul {}x{} by {}x{}",
                self.rows, self.cols, rhs.rows, rhs.cols
            )));
        }
        let (n, m) = (self.rows, rhs.cols);
        let mut out = vec![0.0; n * m];
        for i in 0..n {
            let orow = &mut out[i * m..(i + 1) * m];
            for (k, &a) in self.row(i).iter().enumerate() {
                if a == 0.0 {
                    continue;
                }
                for (o, &b) in orow.iter_mut().zip(rhs.row(k)) {
                    *o += a * b;
                }
            }
        }
        Ok(Matrix::from_raw(n, m, out))
    }

    /// `self^T * rhs` without materializing the transpose.
    pub fn t_matmul(&self, rhs: &Matrix) -> Result<Matrix> {
        if self.rows != rhs.rows {
            return Err(Error::Shape(format!(
                "transposed matmul ({}x{})^T by {}x{}",
                self.rows, self.cols, rhs.rows, rhs.cols
            )));
        }
        let (n, m) = (self.cols, rhs.cols);
        let mut out = vec![0.0; n * m];
        for k in 0..self.rows {
            let brow = rhs.row(k);
            for (i, &a) in self.row(k).iter().enumerate() {
                if a == 0.0 {
                    continue;
                }
                for (o, &b) in out[i * m..(i + 1) * m].iter_mut().zip(brow) {
                    *o += a * b;
                }
            }
        }
        Ok(Matrix::from_raw(n, m, out))
    }

    /// `self * rhs^T` without materializing the transpose.
    pub fn matmul_t(&self, rhs: &Matrix) -> Result<Matrix> {
        if self.cols != rhs.cols {
            return Err(Error::Shape(format!(
                "matmul {}x{} by ({}x{})^T",
                self.rows, self.cols, rhs.rows, rhs.cols
            )));
        }
        let (n, m) = (self.rows, rhs.rows);
        let mut out = Vec::with_capacity(n * m);
        for i in 0..n {
            let a = self.row(i);
            for j in 0..m {
                out.push(a.iter().zip(rhs.row(j)).map(|(x, y)| x * y).sum());
            }
        }
        Ok(Matrix::from_raw(n, m, out))
    }

    fn check_same_shape(&self, rhs: &Matrix, what: &str) -> Result<()> {
        if self.shape() != rhs.shape() {
            return Err(Error::Shape(format!(
                "{what} {}x{} with {}x{}",
                self.rows, self.cols, rhs.rows, rhs.cols
            )));
        }
        Ok(())
    }

    pub fn add(&self, rhs: &Matrix) -> Result<Matrix> {
        self.check_same_shape(rhs, "add")?;
        Ok(self.zip_map(rhs, |a, b| a + b))
    }

    pub fn sub(&self, rhs: &Matrix) -> Result<Matrix> {
        self.check_same_shape(rhs, "sub")?;
        Ok(self.zip_map(rhs, |a, b| a - b))
    }

    pub fn hadamard(&self, rhs: &Matrix) -> Result<Matrix> {
        self.check_same_shape(rhs, "hadamard")?;
        Ok(self.zip_map(rhs, |a, b| a * b))
    }

    pub fn scale(&self, s: f64) -> Matrix {
        self.map(|v| v * s)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Matrix {
        Matrix::from_raw(self.rows, self.cols, self.data.iter().map(|&v| f(v)).collect())
    }

    pub(crate) fn zip_map(&self, rhs: &Matrix, f: impl Fn(f64, f64) -> f64) -> Matrix {
        Matrix::from_raw(
            self.rows,
            self.cols,
            self.data.iter().zip(&rhs.data).map(|(&a, &b)| f(a, b)).collect(),
        )
    }

    pub(crate) fn add_assign(&mut self, rhs: &Matrix) {
        debug_assert_eq!(self.shape(), rhs.shape());
        for (a, b) in self.data.iter_mut().zip(&rhs.data) {
            *a += b;
        }
    }

    pub fn sum(&self) -> f64 {
        self.data.iter().sum()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn max_abs_diff(&self, rhs: &Matrix) -> f64 {
        assert_eq!(self.shape(), rhs.shape());
        self.data
            .iter()
            .zip(&rhs.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// Orthonormalizes the columns in place with modified Gram-Schmidt.
    /// Fails if the columns are numerically dependent.
    pub fn orthonormalize_columns(&mut self) -> Result<()> {
        let (n, m) = self.shape();
        for j in 0..m {
            for p in 0..j {
                let dot: f64 = (0..n).map(|i| self.get(i, j) * self.get(i, p)).sum();
                for i in 0..n {
                    let v = self.get(i, j) - dot * self.get(i, p);
                    self.set(i, j, v);
                }
            }
            let norm = (0..n).map(|i| self.get(i, j).powi(2)).sum::<f64>().sqrt();
            if norm < 1e-10 {
                return Err(Error::InvalidInput(format!("column {j} is linearly dependent")));
            }
            for i in 0..n {
                let v = self.get(i, j) / norm;
                self.set(i, j, v);
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_product() {
        let x = Matrix::new(3, 2, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap();
        assert_eq!(Matrix::identity(3).matmul(&x).unwrap(), x);
    }

    #[test]
    fn one_by_one() {
        let p = Matrix::scalar(2.0).matmul(&Matrix::scalar(3.0)).unwrap();
        assert_eq!(p.as_scalar(), Some(6.0));
    }

    #[test]
    fn shape_errors() {
        let a = Matrix::zeros(2, 3);
        assert!(matches!(a.matmul(&Matrix::zeros(2, 3)), Err(Error::Shape(_))));
        assert!(matches!(a.add(&Matrix::zeros(3, 2)), Err(Error::Shape(_))));
        assert!(matches!(Matrix::new(2, 2, vec![1.0]), Err(Error::Shape(_))));
        assert!(matches!(Matrix::new(0, 2, vec![]), Err(Error::Shape(_))));
    }

    #[test]
    fn transposed_products_agree() {
        let a = Matrix::from_fn(4, 3, |r, c| (r * 3 + c) as f64 * 0.5 - 2.0);
        let b = Matrix::from_fn(4, 5, |r, c| ((r + 2 * c) as f64).sin());
        let want = a.transpose().matmul(&b).unwrap();
        assert!(a.t_matmul(&b).unwrap().max_abs_diff(&want) < 1e-14);
        let c = Matrix::from_fn(5, 3, |r, c| ((r * c) as f64).cos());
        let want = a.matmul(&c.transpose()).unwrap();
        assert!(a.matmul_t(&c).unwrap().max_abs_diff(&want) < 1e-14);
    }

    #[test]
    fn gram_schmidt_gives_orthonormal_columns() {
        let mut m = Matrix::from_fn(5, 5, |r, c| ((r * 7 + c * 3) as f64).sin() + (r == c) as u8 as f64);
        m.orthonormalize_columns().unwrap();
        let g = m.t_matmul(&m).unwrap();
        assert!(g.max_abs_diff(&Matrix::identity(5)) < 1e-12);
    }
}
