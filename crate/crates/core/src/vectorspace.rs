//! Dense and sparse vectors over `f64`.
//!
//! Every reduction walks coordinates in ascending index order, so single
//! threaded results are reproducible bit for bit.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A dense vector with finite entries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct DenseVector {
    entries: Vec<f64>,
}

/// A sparse vector stored as `(index, value)` pairs with 1-based indices.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseVector {
    indices: Vec<usize>,
    values: Vec<f64>,
    dimension: usize,
}

/// Which vector norm to compute.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Norm {
    Two,
    One,
    Inf,
}

impl DenseVector {
    pub fn new(entries: Vec<f64>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::InvalidVector("dimension must be positive".into()));
        }
        if let Some(pos) = entries.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidVector(format!(
                "entry {pos} is not finite ({})",
                entries[pos]
            )));
        }
        Ok(Self { entries })
    }

    /// All-zero vector. Panics if `dimension == 0`.
    pub fn zeros(dimension: usize) -> Self {
        assert!(dimension > 0, "dimension must be positive");
        Self {
            entries: vec![0.0; dimension],
        }
    }

    pub fn filled(dimension: usize, value: f64) -> Self {
        assert!(dimension > 0, "dimension must be positive");
        Self {
            entries: vec![value; dimension],
        }
    }

    /// The `k`-th standard basis vector (0-based `k`).
    pub fn basis(dimension: usize, k: usize) -> Self {
        let mut v = Self::zeros(dimension);
        v.entries[k] = 1.0;
        v
    }

    // Internal constructor for arithmetic results; the caller guarantees
    // nonempty input. Finiteness is checked where it matters (the divergence
    // guard in the optimizers).
    pub(crate) fn from_raw(entries: Vec<f64>) -> Self {
        debug_assert!(!entries.is_empty());
        Self { entries }
    }

    pub fn dim(&self) -> usize {
        self.entries.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.entries
    }

    pub(crate) fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.entries
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.entries
    }

    pub fn get(&self, k: usize) -> f64 {
        self.entries[k]
    }

    pub fn is_finite(&self) -> bool {
        self.entries.iter().all(|v| v.is_finite())
    }

    pub fn norm(&self, which: Norm) -> f64 {
        norm(self, which)
    }

    pub fn scaled(&self, alpha: f64) -> Self {
        Self::from_raw(self.entries.iter().map(|v| alpha * v).collect())
    }

    pub(crate) fn scale_in_place(&mut self, alpha: f64) {
        self.entries.iter_mut().for_each(|v| *v *= alpha);
    }

    /// `self += alpha * x` without allocating.
    pub(crate) fn add_scaled<V: Operand + ?Sized>(&mut self, alpha: f64, x: &V) {
        x.add_scaled_into(alpha, &mut self.entries);
    }

    /// Convex combination `a * x + (1 - a) * y`.
    pub(crate) fn mix(a: f64, x: &DenseVector, y: &DenseVector) -> DenseVector {
        debug_assert_eq!(x.dim(), y.dim());
        let b = 1.0 - a;
        Self::from_raw(
            x.entries
                .iter()
                .zip(&y.entries)
                .map(|(xi, yi)| a * xi + b * yi)
                .collect(),
        )
    }

    /// Largest absolute coordinate difference.
    pub fn max_abs_diff(&self, other: &DenseVector) -> f64 {
        self.entries
            .iter()
            .zip(&other.entries)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    pub fn sum(&self) -> f64 {
        self.entries.iter().sum()
    }
}

impl TryFrom<Vec<f64>> for DenseVector {
    type Error = Error;

    fn try_from(v: Vec<f64>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<DenseVector> for Vec<f64> {
    fn from(v: DenseVector) -> Self {
        v.entries
    }
}

impl SparseVector {
    /// Builds a sparse vector from 1-based `(index, value)` pairs.
    ///
    /// Indices must be strictly increasing and no larger than `dimension`;
    /// values must be finite and nonzero.
    pub fn new(pairs: Vec<(usize, f64)>, dimension: usize) -> Result<Self> {
        if dimension == 0 {
            return Err(Error::InvalidVector("dimension must be positive".into()));
        }
        let mut prev = 0usize;
        for &(idx, val) in &pairs {
            if idx == 0 {
                return Err(Error::InvalidVector("indices are 1-based".into()));
            }
            if idx <= prev {
                return Err(Error::InvalidVector(format!(
                    "indices must be strictly increasing ({prev} then {idx})"
                )));
            }
            if idx > dimension {
                return Err(Error::InvalidVector(format!(
                    "index {idx} exceeds dimension {dimension}"
                )));
            }
            if !val.is_finite() || val == 0.0 {
                return Err(Error::InvalidVector(format!(
                    "value at index {idx} must be finite and nonzero ({val})"
                )));
            }
            prev = idx;
        }
        let (indices, values) = pairs.into_iter().unzip();
        Ok(Self {
            indices,
            values,
            dimension,
        })
    }

    pub fn empty(dimension: usize) -> Result<Self> {
        Self::new(Vec::new(), dimension)
    }

    /// Drops zero entries of a dense vector.
    pub fn from_dense(v: &DenseVector) -> Self {
        let (indices, values) = v
            .as_slice()
            .iter()
            .enumerate()
            .filter(|(_, x)| **x != 0.0)
            .map(|(k, x)| (k + 1, *x))
            .unzip();
        Self {
            indices,
            values,
            dimension: v.dim(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dimension
    }

    pub fn nnz(&self) -> usize {
        self.indices.len()
    }

    /// 1-based indices.
    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.indices
            .iter()
            .copied()
            .zip(self.values.iter().copied())
    }

    pub fn to_dense(&self) -> DenseVector {
        let mut out = DenseVector::zeros(self.dimension);
        self.add_scaled_into(1.0, out.as_mut_slice());
        out
    }

    /// Same pairs, larger ambient dimension.
    pub fn with_dimension(&self, dimension: usize) -> Result<Self> {
        Self::new(self.iter().collect(), dimension)
    }

    pub fn scaled(&self, alpha: f64) -> Result<Self> {
        Self::new(
            self.iter().map(|(k, v)| (k, alpha * v)).collect(),
            self.dimension,
        )
    }

    pub fn norm_sq(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum()
    }
}

/// Anything that can play the left-hand side of `dot` and the `x` of `axpy`.
pub trait Operand {
    fn dim(&self) -> usize;

    /// Inner product with a dense slice of equal length; no dimension check.
    fn dot_unchecked(&self, y: &[f64]) -> f64;

    /// `y += alpha * self`; no dimension check.
    fn add_scaled_into(&self, alpha: f64, y: &mut [f64]);
}

impl Operand for DenseVector {
    fn dim(&self) -> usize {
        self.entries.len()
    }

    fn dot_unchecked(&self, y: &[f64]) -> f64 {
        let mut acc = 0.0;
        for (a, b) in self.entries.iter().zip(y) {
            acc += a * b;
        }
        acc
    }

    fn add_scaled_into(&self, alpha: f64, y: &mut [f64]) {
        for (yi, xi) in y.iter_mut().zip(&self.entries) {
            *yi += alpha * xi;
        }
    }
}

impl Operand for SparseVector {
    fn dim(&self) -> usize {
        self.dimension
    }

    fn dot_unchecked(&self, y: &[f64]) -> f64 {
        let mut acc = 0.0;
        for (k, v) in self.iter() {
            acc += v * y[k - 1];
        }
        acc
    }

    fn add_scaled_into(&self, alpha: f64, y: &mut [f64]) {
        for (k, v) in self.iter() {
            y[k - 1] += alpha * v;
        }
    }
}

fn check_dims(expected: usize, found: usize) -> Result<()> {
    if expected != found {
        return Err(Error::DimensionMismatch { expected, found });
    }
    Ok(())
}

/// Inner product, summed in ascending index order.
pub fn dot<A: Operand + ?Sized>(a: &A, b: &DenseVector) -> Result<f64> {
    check_dims(b.dim(), a.dim())?;
    Ok(a.dot_unchecked(b.as_slice()))
}

/// Returns `y + alpha * x`; `y` is left untouched.
pub fn axpy<X: Operand + ?Sized>(alpha: f64, x: &X, y: &DenseVector) -> Result<DenseVector> {
    check_dims(y.dim(), x.dim())?;
    let mut out = y.clone();
    x.add_scaled_into(alpha, out.as_mut_slice());
    Ok(out)
}

pub fn norm(x: &DenseVector, which: Norm) -> f64 {
    let s = x.as_slice();
    match which {
        Norm::Two => s.iter().map(|v| v * v).sum::<f64>().sqrt(),
        Norm::One => s.iter().map(|v| v.abs()).sum(),
        Norm::Inf => s.iter().map(|v| v.abs()).fold(0.0, f64::max),
    }
}
