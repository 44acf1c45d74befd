//! Minimal row-major f64 matrix used by the fusion kernel.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tensor2D {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Tensor2D {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Tensor2D { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Tensor2D { rows, cols, data }
    }

    pub fn from_rows(rows: Vec<Vec<f64>>) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, |x| x.len());
        let mut data = Vec::with_capacity(r * c);
        for row in rows {
            assert_eq!(row.len(), c);
            data.extend(row);
        }
        Tensor2D { rows: r, cols: c, data }
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn at_mut(&mut self, i: usize, j: usize) -> &mut f64 {
        &mut self.data[i * self.cols + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    /// A [m,k] * B [k,n] -> [m,n]
    pub fn matmul(&self, other: &Tensor2D) -> Tensor2D {
        assert_eq!(self.cols, other.rows, "matmul shape mismatch");
        let mut out = Tensor2D::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.at(i, k);
                if a == 0.0 {
                    continue;
                }
                let orow = &other.data[k * other.cols..(k + 1) * other.cols];
                let dst = &mut out.data[i * other.cols..(i + 1) * other.cols];
                for (d, &b) in dst.iter_mut().zip(orow) {
                    *d += a * b;
                }
            }
        }
        out
    }

    /// A [m,k] * B^T where B is [n,k] -> [m,n]
    pub fn matmul_nt(&self, other: &Tensor2D) -> Tensor2D {
        assert_eq!(self.cols, other.cols, "matmul_nt shape mismatch");
        let mut out = Tensor2D::zeros(self.rows, other.rows);
        for i in 0..self.rows {
            for j in 0..other.rows {
                let mut acc = 0.0;
                for k in 0..self.cols {
                    acc += self.at(i, k) * other.at(j, k);
                }
                *out.at_mut(i, j) = acc;
            }
        }
        out
    }

    /// A^T * B where A is [k,m], B is [k,n] -> [m,n]
    pub fn matmul_tn(&self, other: &Tensor2D) -> Tensor2D {
        assert_eq!(self.rows, other.rows, "matmul_tn shape mismatch");
        let mut out = Tensor2D::zeros(self.cols, other.cols);
        for k in 0..self.rows {
            for i in 0..self.cols {
                let a = self.at(k, i);
                if a == 0.0 {
                    continue;
                }
                for j in 0..other.cols {
                    *out.at_mut(i, j) += a * other.at(k, j);
                }
            }
        }
        out
    }

    pub fn add(&self, other: &Tensor2D) -> Tensor2D {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a + b)
            .collect();
        Tensor2D { rows: self.rows, cols: self.cols, data }
    }

    pub fn add_assign(&mut self, other: &Tensor2D) {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
    }

    pub fn scale(&self, s: f64) -> Tensor2D {
        Tensor2D {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|v| v * s).collect(),
        }
    }

    /// Vertical concatenation.
    pub fn vstack(&self, other: &Tensor2D) -> Tensor2D {
        assert_eq!(self.cols, other.cols);
        let mut data = self.data.clone();
        data.extend_from_slice(&other.data);
        Tensor2D { rows: self.rows + other.rows, cols: self.cols, data }
    }

    pub fn slice_rows(&self, start: usize, end: usize) -> Tensor2D {
        Tensor2D {
            rows: end - start,
            cols: self.cols,
            data: self.data[start * self.cols..end * self.cols].to_vec(),
        }
    }

    /// Column block [c0, c1).
    pub fn slice_cols(&self, c0: usize, c1: usize) -> Tensor2D {
        let mut out = Tensor2D::zeros(self.rows, c1 - c0);
        for i in 0..self.rows {
            out.data[i * (c1 - c0)..(i + 1) * (c1 - c0)]
                .copy_from_slice(&self.data[i * self.cols + c0..i * self.cols + c1]);
        }
        out
    }

    /// Writes `block` into columns [c0, ...) of self.
    pub fn set_cols(&mut self, c0: usize, block: &Tensor2D) {
        assert_eq!(self.rows, block.rows);
        for i in 0..self.rows {
            self.data[i * self.cols + c0..i * self.cols + c0 + block.cols]
                .copy_from_slice(block.row(i));
        }
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

/// Row-wise softmax. Each output row sums to 1.
pub fn softmax_rows(z: &Tensor2D) -> Tensor2D {
    let mut out = Tensor2D::zeros(z.rows, z.cols);
    for i in 0..z.rows {
        let row = z.row(i);
        let m = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for (j, &v) in row.iter().enumerate() {
            let e = (v - m).exp();
            *out.at_mut(i, j) = e;
            sum += e;
        }
        for j in 0..z.cols {
            *out.at_mut(i, j) /= sum;
        }
    }
    out
}

/// Backward through row-wise softmax: given S = softmax(Z) and dL/dS,
/// returns dL/dZ = S .* (dS - rowsum(dS .* S)).
pub fn softmax_rows_backward(s: &Tensor2D, ds: &Tensor2D) -> Tensor2D {
    let mut out = Tensor2D::zeros(s.rows, s.cols);
    for i in 0..s.rows {
        let mut dot = 0.0;
        for j in 0..s.cols {
            dot += ds.at(i, j) * s.at(i, j);
        }
        for j in 0..s.cols {
            *out.at_mut(i, j) = s.at(i, j) * (ds.at(i, j) - dot);
        }
    }
    out
}
