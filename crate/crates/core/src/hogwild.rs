//! Shared parameter storage for lock-free parallel SGD.
//!
//! Values are `f64` bit patterns in `AtomicU64` cells accessed with relaxed
//! ordering: concurrent updates to the same row may be lost, never torn.

use std::sync::atomic::{AtomicU64, Ordering};

use crate::matrix::Matrix;

pub(crate) struct AtomicMatrix {
    rows: usize,
    cols: usize,
    cells: Vec<AtomicU64>,
}

impl AtomicMatrix {
    pub fn from_matrix(m: &Matrix) -> Self {
        Self {
            rows: m.rows(),
            cols: m.cols(),
            cells: m.as_slice().iter().map(|v| AtomicU64::new(v.to_bits())).collect(),
        }
    }

    pub fn into_matrix(self) -> Matrix {
        let data = self.cells.into_iter().map(|c| f64::from_bits(c.into_inner())).collect();
        Matrix::from_vec(self.rows, self.cols, data)
    }

    #[inline]
    pub fn load_row(&self, row: usize, out: &mut [f64]) {
        let base = row * self.cols;
        for (k, o) in out.iter_mut().enumerate() {
            *o = f64::from_bits(self.cells[base + k].load(Ordering::Relaxed));
        }
    }

    #[inline]
    pub fn store_row(&self, row: usize, values: &[f64]) {
        let base = row * self.cols;
        for (k, v) in values.iter().enumerate() {
            self.cells[base + k].store(v.to_bits(), Ordering::Relaxed);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trips_values() {
        let m = Matrix::from_rows(&[vec![1.5, -2.0], vec![0.0, f64::MIN_POSITIVE]]);
        let a = AtomicMatrix::from_matrix(&m);
        let mut row = [0.0; 2];
        a.load_row(1, &mut row);
        assert_eq!(row, [0.0, f64::MIN_POSITIVE]);
        a.store_row(0, &[3.0, 4.0]);
        assert_eq!(a.into_matrix().row(0), &[3.0, 4.0]);
    }
}
