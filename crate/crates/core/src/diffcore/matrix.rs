use super::DiffError;
use serde::{Deserialize, Serialize};

/// Row-major dense matrix of finite doubles.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self, DiffError> {
        if data.len() != rows * cols {
            return Err(DiffError::ShapeMismatch {
                context: "DenseMatrix::new",
                expected: format!("{} entries ({rows}x{cols})", rows * cols),
                got: format!("{}", data.len()),
            });
        }
        if !data.iter().all(|x| x.is_finite()) {
            return Err(DiffError::NonFinite {
                context: "DenseMatrix::new",
            });
        }
        Ok(DenseMatrix { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        DenseMatrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    pub fn matvec(&self, x: &[f64]) -> Result<Vec<f64>, DiffError> {
        if x.len() != self.cols {
            return Err(DiffError::ShapeMismatch {
                context: "DenseMatrix::matvec",
                expected: format!("vector of length {}", self.cols),
                got: format!("{}", x.len()),
            });
        }
        let mut out = vec![0.0; self.rows];
        for r in 0..self.rows {
            let row = &self.data[r * self.cols..(r + 1) * self.cols];
            out[r] = row.iter().zip(x).map(|(w, v)| w * v).sum();
        }
        Ok(out)
    }
}

/// `W x + b`.
pub fn affine(w: &DenseMatrix, x: &[f64], b: &[f64]) -> Result<Vec<f64>, DiffError> {
    if b.len() != w.rows() {
        return Err(DiffError::ShapeMismatch {
            context: "affine bias",
            expected: format!("vector of length {}", w.rows()),
            got: format!("{}", b.len()),
        });
    }
    let mut out = w.matvec(x)?;
    for (o, bi) in out.iter_mut().zip(b) {
        *o += bi;
    }
    Ok(out)
}
