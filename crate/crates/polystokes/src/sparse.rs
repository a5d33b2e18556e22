//! Minimal compressed-sparse-row matrices with deterministic assembly.
//!
//! Triplets are accumulated in scatter order and summed after a stable sort
//! by (row, col), so duplicate summation order is independent of how the
//! caller interleaves contributions and assembled matrices are reproducible
//! bit for bit.

/// Coordinate-format accumulator.
#[derive(Clone, Debug, Default)]
pub struct CooMatrix {
    pub nrows: usize,
    pub ncols: usize,
    pub entries: Vec<(usize, usize, f64)>,
}

impl CooMatrix {
    pub fn new(nrows: usize, ncols: usize) -> Self {
        CooMatrix { nrows, ncols, entries: Vec::new() }
    }

    pub fn push(&mut self, row: usize, col: usize, value: f64) {
        debug_assert!(row < self.nrows && col < self.ncols);
        if value != 0.0 {
            self.entries.push((row, col, value));
        }
    }

    pub fn to_csr(&self) -> CsrMatrix {
        CsrMatrix::from_triplets(self.nrows, self.ncols, self.entries.clone())
    }
}

/// Compressed sparse row matrix.
#[derive(Clone, Debug)]
pub struct CsrMatrix {
    pub nrows: usize,
    pub ncols: usize,
    pub row_ptr: Vec<usize>,
    pub col_idx: Vec<usize>,
    pub values: Vec<f64>,
}

impl CsrMatrix {
    pub fn from_triplets(
        nrows: usize,
        ncols: usize,
        mut entries: Vec<(usize, usize, f64)>,
    ) -> Self {
        // Stable sort keeps push order within each (row, col) group, so
        // duplicate accumulation order is the scatter order.
        entries.sort_by_key(|&(r, c, _)| (r, c));
        let mut row_ptr = vec![0usize; nrows + 1];
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        let mut i = 0;
        for r in 0..nrows {
            while i < entries.len() && entries[i].0 == r {
                let c = entries[i].1;
                let mut acc = 0.0;
                while i < entries.len() && entries[i].0 == r && entries[i].1 == c {
                    acc += entries[i].2;
                    i += 1;
                }
                col_idx.push(c);
                values.push(acc);
            }
            row_ptr[r + 1] = col_idx.len();
        }
        CsrMatrix { nrows, ncols, row_ptr, col_idx, values }
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// y = A x.
    pub fn mul_vec(&self, x: &[f64], y: &mut [f64]) {
        debug_assert_eq!(x.len(), self.ncols);
        debug_assert_eq!(y.len(), self.nrows);
        for r in 0..self.nrows {
            let mut acc = 0.0;
            for i in self.row_ptr[r]..self.row_ptr[r + 1] {
                acc += self.values[i] * x[self.col_idx[i]];
            }
            y[r] = acc;
        }
    }

    /// y = A^T x (fixed scatter order over rows; deterministic).
    pub fn mul_transpose_vec(&self, x: &[f64], y: &mut [f64]) {
        debug_assert_eq!(x.len(), self.nrows);
        debug_assert_eq!(y.len(), self.ncols);
        y.iter_mut().for_each(|v| *v = 0.0);
        for r in 0..self.nrows {
            let xr = x[r];
            if xr == 0.0 {
                continue;
            }
            for i in self.row_ptr[r]..self.row_ptr[r + 1] {
                y[self.col_idx[i]] += self.values[i] * xr;
            }
        }
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        for i in self.row_ptr[r]..self.row_ptr[r + 1] {
            if self.col_idx[i] == c {
                return self.values[i];
            }
        }
        0.0
    }

    /// Row-major dense copy (test/oracle use on small systems).
    pub fn to_dense(&self) -> nalgebra::DMatrix<f64> {
        let mut m = nalgebra::DMatrix::zeros(self.nrows, self.ncols);
        for r in 0..self.nrows {
            for i in self.row_ptr[r]..self.row_ptr[r + 1] {
                m[(r, self.col_idx[i])] = self.values[i];
            }
        }
        m
    }

    /// Writes `row col value` lines in coordinate text format.
    pub fn write_coo(&self, path: &std::path::Path) -> std::io::Result<()> {
        use std::io::Write;
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        writeln!(f, "# {} {} {}", self.nrows, self.ncols, self.nnz())?;
        for r in 0..self.nrows {
            for i in self.row_ptr[r]..self.row_ptr[r + 1] {
                writeln!(f, "{} {} {}", r, self.col_idx[i], self.values[i])?;
            }
        }
        Ok(())
    }
}
