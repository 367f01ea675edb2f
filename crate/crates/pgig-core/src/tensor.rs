//! Dense 64-bit float tensors of rank 1 or 2, row-major.
//!
//! Tensors are immutable values after construction and safe to share across
//! threads. Construction rejects non-finite values; arithmetic that can
//! overflow reports an error instead of silently propagating NaN/Inf.
//!
//! Reductions (`sum`, `mean`, `variance`) use a fixed summation order:
//! elements are accumulated in ascending value order (total order over f64)
//! with compensated summation and one final rounding. This makes reductions
//! invariant under any permutation of the data, bit for bit, and means of
//! constant data exact.

use crate::compensated::Dd;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl Tensor {
    /// Builds a tensor, validating shape/data agreement and finiteness.
    pub fn new(shape: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        let expected: usize = shape.iter().product();
        if expected != data.len() {
            return Err(Error::Dimension {
                context: "tensor construction",
                expected: shape.clone(),
                found: vec![data.len()],
            });
        }
        if shape.is_empty() || shape.len() > 2 {
            return Err(Error::Argument(format!(
                "tensor rank must be 1 or 2, got {}",
                shape.len()
            )));
        }
        let t = Tensor { shape, data };
        t.ensure_finite("tensor construction")?;
        Ok(t)
    }

    /// Rank-1 tensor from values.
    pub fn vector(data: Vec<f64>) -> Result<Self> {
        let n = data.len();
        Tensor::new(vec![n], data)
    }

    /// Rank-2 tensor from row-major values.
    pub fn matrix(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        Tensor::new(vec![rows, cols], data)
    }

    pub fn zeros(shape: Vec<usize>) -> Self {
        let n = shape.iter().product();
        Tensor {
            shape,
            data: vec![0.0; n],
        }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn rank(&self) -> usize {
        self.shape.len()
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// Row count for rank-2 tensors, length for rank-1.
    pub fn rows(&self) -> usize {
        self.shape[0]
    }

    /// Column count for rank-2 tensors.
    pub fn cols(&self) -> usize {
        self.shape[self.shape.len() - 1]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn get(&self, i: usize) -> f64 {
        self.data[i]
    }

    /// Row-major access for rank-2 tensors.
    pub fn get2(&self, row: usize, col: usize) -> f64 {
        debug_assert_eq!(self.rank(), 2);
        self.data[row * self.cols() + col]
    }

    pub(crate) fn ensure_finite(&self, context: &str) -> Result<()> {
        match self.data.iter().position(|v| !v.is_finite()) {
            None => Ok(()),
            Some(i) => Err(Error::Numeric(format!(
                "non-finite value {} at flat index {i} in {context}",
                self.data[i]
            ))),
        }
    }

    fn require_same_shape(&self, other: &Tensor, context: &'static str) -> Result<()> {
        if self.shape != other.shape {
            return Err(Error::Dimension {
                context,
                expected: self.shape.clone(),
                found: other.shape.clone(),
            });
        }
        Ok(())
    }

    pub fn add(&self, other: &Tensor) -> Result<Tensor> {
        self.require_same_shape(other, "tensor add")?;
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a + b)
            .collect();
        let t = Tensor {
            shape: self.shape.clone(),
            data,
        };
        t.ensure_finite("tensor add")?;
        Ok(t)
    }

    pub fn sub(&self, other: &Tensor) -> Result<Tensor> {
        self.require_same_shape(other, "tensor sub")?;
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a - b)
            .collect();
        let t = Tensor {
            shape: self.shape.clone(),
            data,
        };
        t.ensure_finite("tensor sub")?;
        Ok(t)
    }

    /// Elementwise product.
    pub fn hadamard(&self, other: &Tensor) -> Result<Tensor> {
        self.require_same_shape(other, "tensor hadamard")?;
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a * b)
            .collect();
        let t = Tensor {
            shape: self.shape.clone(),
            data,
        };
        t.ensure_finite("tensor hadamard")?;
        Ok(t)
    }

    pub fn scale(&self, factor: f64) -> Result<Tensor> {
        let data = self.data.iter().map(|a| a * factor).collect();
        let t = Tensor {
            shape: self.shape.clone(),
            data,
        };
        t.ensure_finite("tensor scale")?;
        Ok(t)
    }

    /// Sum in ascending value order (see module docs).
    pub fn sum(&self) -> f64 {
        ordered_sum(&self.data).value()
    }

    /// Mean in ascending value order; 0 for empty tensors, exact for
    /// constant data.
    pub fn mean(&self) -> f64 {
        if self.data.is_empty() {
            return 0.0;
        }
        ordered_sum(&self.data)
            .div_scalar(self.data.len() as f64)
            .value()
    }

    /// Unbiased sample variance (n-1 normalization), ascending value order
    /// in both passes; 0 for fewer than two elements.
    pub fn variance(&self) -> f64 {
        let n = self.data.len();
        if n < 2 {
            return 0.0;
        }
        let mean = self.mean();
        let deviations: Vec<f64> = self.data.iter().map(|v| (v - mean) * (v - mean)).collect();
        ordered_sum(&deviations)
            .div_scalar((n - 1) as f64)
            .value()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |acc, v| acc.max(v.abs()))
    }
}

/// Accumulates values in ascending order under `f64::total_cmp`, so the
/// result is bit-identical for any permutation of the input.
fn ordered_sum(values: &[f64]) -> Dd {
    let mut sorted: Vec<f64> = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut acc = Dd::ZERO;
    for v in sorted {
        acc = acc.add(v);
    }
    acc
}

/// Matrix-vector product `w x` for rank-2 `w` (out x in) and rank-1 `x`.
///
/// Each output element accumulates in column index order, one rounding per
/// multiply and add, matching a plain textbook evaluation.
pub fn matvec(w: &Tensor, x: &Tensor) -> Result<Tensor> {
    if w.rank() != 2 || x.rank() != 1 || w.cols() != x.len() {
        return Err(Error::Dimension {
            context: "matvec",
            expected: w.shape.clone(),
            found: x.shape.clone(),
        });
    }
    let (rows, cols) = (w.rows(), w.cols());
    let mut out = vec![0.0; rows];
    for (r, slot) in out.iter_mut().enumerate() {
        let row = &w.data[r * cols..(r + 1) * cols];
        let mut acc = 0.0;
        for (wv, xv) in row.iter().zip(x.data()) {
            acc += wv * xv;
        }
        *slot = acc;
    }
    let t = Tensor {
        shape: vec![rows],
        data: out,
    };
    t.ensure_finite("matvec")?;
    Ok(t)
}

/// Transposed product `w^T g`: propagates an out-dimension vector back to
/// the in-dimension, accumulating in row index order.
pub fn matvec_transposed(w: &Tensor, g: &Tensor) -> Result<Tensor> {
    if w.rank() != 2 || g.rank() != 1 || w.rows() != g.len() {
        return Err(Error::Dimension {
            context: "matvec_transposed",
            expected: w.shape.clone(),
            found: g.shape.clone(),
        });
    }
    let (rows, cols) = (w.rows(), w.cols());
    let mut out = vec![0.0; cols];
    for r in 0..rows {
        let gv = g.get(r);
        let row = &w.data[r * cols..(r + 1) * cols];
        for (c, wv) in row.iter().enumerate() {
            out[c] += wv * gv;
        }
    }
    let t = Tensor {
        shape: vec![cols],
        data: out,
    };
    t.ensure_finite("matvec_transposed")?;
    Ok(t)
}

/// Dot product of two rank-1 tensors, index order.
pub fn dot(a: &Tensor, b: &Tensor) -> Result<f64> {
    if a.rank() != 1 || b.rank() != 1 || a.len() != b.len() {
        return Err(Error::Dimension {
            context: "dot",
            expected: a.shape.clone(),
            found: b.shape.clone(),
        });
    }
    let mut acc = 0.0;
    for (av, bv) in a.data().iter().zip(b.data()) {
        acc += av * bv;
    }
    Ok(acc)
}
