//! Dense complex matrices sized for register stages.
//!
//! Row-major and hand-rolled: stage validation needs construction, product,
//! conjugate transpose and entrywise deviation checks, nothing more. Shapes
//! stay at register dimensions (2^r for small r), so an external linear
//! algebra crate would be dead weight here.

use alloc::vec;
use alloc::vec::Vec;
use core::ops::{Index, IndexMut};

use crate::Complex64;

#[derive(Debug, Clone, PartialEq)]
pub struct CMat {
    rows: usize,
    cols: usize,
    data: Vec<Complex64>,
}

impl CMat {
    pub fn zeros(rows: usize, cols: usize) -> CMat {
        assert!(rows > 0 && cols > 0, "matrix must be non-empty");
        CMat { rows, cols, data: vec![Complex64::new(0.0, 0.0); rows * cols] }
    }

    pub fn identity(n: usize) -> CMat {
        let mut m = CMat::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = Complex64::new(1.0, 0.0);
        }
        m
    }

    /// Builds from row vectors; `None` when empty or ragged.
    pub fn from_rows(rows: &[Vec<Complex64>]) -> Option<CMat> {
        let nrows = rows.len();
        let ncols = rows.first()?.len();
        if ncols == 0 || rows.iter().any(|r| r.len() != ncols) {
            return None;
        }
        let mut data = Vec::with_capacity(nrows * ncols);
        for row in rows {
            data.extend_from_slice(row);
        }
        Some(CMat { rows: nrows, cols: ncols, data })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn mul(&self, rhs: &CMat) -> CMat {
        assert_eq!(self.cols, rhs.rows, "matrix product shape mismatch");
        let mut out = CMat::zeros(self.rows, rhs.cols);
        for i in 0..self.rows {
            for j in 0..rhs.cols {
                // k ascending: accumulation order is part of the
                // determinism contract.
                let mut acc = Complex64::new(0.0, 0.0);
                for k in 0..self.cols {
                    let a = self[(i, k)];
                    if a != Complex64::new(0.0, 0.0) {
                        acc += a * rhs[(k, j)];
                    }
                }
                out[(i, j)] = acc;
            }
        }
        out
    }

    /// Conjugate transpose.
    pub fn dagger(&self) -> CMat {
        let mut out = CMat::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out[(j, i)] = self[(i, j)].conj();
            }
        }
        out
    }

    /// Largest entrywise modulus of `self - I`; the matrix must be square.
    pub fn max_deviation_from_identity(&self) -> f64 {
        assert_eq!(self.rows, self.cols, "identity deviation needs a square matrix");
        let mut worst = 0.0f64;
        for i in 0..self.rows {
            for j in 0..self.cols {
                let target = if i == j { Complex64::new(1.0, 0.0) } else { Complex64::new(0.0, 0.0) };
                let dev = (self[(i, j)] - target).norm();
                if dev > worst {
                    worst = dev;
                }
            }
        }
        worst
    }

    /// Largest entrywise modulus of `self - other`.
    pub fn max_deviation_from(&self, other: &CMat) -> f64 {
        assert!(self.rows == other.rows && self.cols == other.cols, "shape mismatch");
        let mut worst = 0.0f64;
        for (a, b) in self.data.iter().zip(other.data.iter()) {
            let dev = (a - b).norm();
            if dev > worst {
                worst = dev;
            }
        }
        worst
    }
}

impl Index<(usize, usize)> for CMat {
    type Output = Complex64;

    fn index(&self, (r, c): (usize, usize)) -> &Complex64 {
        assert!(r < self.rows && c < self.cols, "matrix index out of bounds");
        &self.data[r * self.cols + c]
    }
}

impl IndexMut<(usize, usize)> for CMat {
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut Complex64 {
        assert!(r < self.rows && c < self.cols, "matrix index out of bounds");
        &mut self.data[r * self.cols + c]
    }
}
