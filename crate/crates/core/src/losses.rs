//! Smooth non-negative convex losses over linear predictors.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataio::Example;
use crate::error::{Error, Result};
use crate::vectorspace::{DenseVector, Operand};

/// Supported scalar losses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossKind {
    /// `0.5 - m` for `m <= 0`, `0.5 (1 - m)^2` on `(0, 1]`, `0` beyond, where `m = y w.x`.
    SmoothedHinge,
    /// `0.5 (w.x - y)^2`.
    Squared,
}

/// A loss together with its smoothness constant `H`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossModel {
    pub kind: LossKind,
    smoothness: f64,
}

/// How per-example contributions of a mini-batch are combined.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Reduction {
    /// Fixed binary tree over the batch; bit-identical for any thread count.
    Deterministic,
    /// Work-stealing fold/reduce; grouping depends on scheduling.
    Fast,
}

/// A contiguous block of `b` examples.
#[derive(Debug, Clone, Copy)]
pub struct MiniBatch<'a> {
    examples: &'a [Example],
}

impl<'a> MiniBatch<'a> {
    pub fn new(examples: &'a [Example]) -> Result<Self> {
        if examples.is_empty() {
            return Err(Error::Empty("mini-batch".into()));
        }
        Ok(Self { examples })
    }

    pub fn examples(&self) -> &'a [Example] {
        self.examples
    }

    pub fn batch_size(&self) -> usize {
        self.examples.len()
    }
}

// Examples per leaf of the deterministic reduction tree. Leaves are summed
// sequentially; the tree shape depends only on the batch length.
const LEAF: usize = 16;
const EVAL_CHUNK: usize = 1024;

impl LossModel {
    pub fn new(kind: LossKind, smoothness: f64) -> Result<Self> {
        if !(smoothness.is_finite() && smoothness > 0.0) {
            return Err(Error::param(format!(
                "smoothness H must be positive and finite, got {smoothness}"
            )));
        }
        Ok(Self { kind, smoothness })
    }

    /// Uses [`estimate_h`] on `examples` for the smoothness constant.
    pub fn for_examples(kind: LossKind, examples: &[Example]) -> Result<Self> {
        Self::new(kind, estimate_h(kind, examples)?)
    }

    /// The constant `H`.
    pub fn smoothness(&self) -> f64 {
        self.smoothness
    }

    /// Loss value and derivative with respect to the prediction `w.x`.
    #[inline]
    fn scalar(&self, prediction: f64, label: f64) -> (f64, f64) {
        match self.kind {
            LossKind::SmoothedHinge => {
                let m = label * prediction;
                if m <= 0.0 {
                    (0.5 - m, -label)
                } else if m < 1.0 {
                    let r = 1.0 - m;
                    (0.5 * r * r, -label * r)
                } else {
                    (0.0, 0.0)
                }
            }
            LossKind::Squared => {
                let r = prediction - label;
                (0.5 * r * r, r)
            }
        }
    }

    #[inline]
    fn value_coef(&self, w: &[f64], z: &Example) -> (f64, f64) {
        self.scalar(z.features.dot_unchecked(w), z.label.as_f64())
    }

    fn check(&self, w: &DenseVector, z: &Example) -> Result<()> {
        if z.features.dim() != w.dim() {
            return Err(Error::DimensionMismatch {
                expected: w.dim(),
                found: z.features.dim(),
            });
        }
        Ok(())
    }

    pub fn loss_value(&self, w: &DenseVector, z: &Example) -> Result<f64> {
        self.check(w, z)?;
        Ok(self.value_coef(w.as_slice(), z).0)
    }

    pub fn loss_gradient(&self, w: &DenseVector, z: &Example) -> Result<DenseVector> {
        self.check(w, z)?;
        let (_, coef) = self.value_coef(w.as_slice(), z);
        let mut g = DenseVector::zeros(w.dim());
        g.add_scaled(coef, &z.features);
        Ok(g)
    }

    /// Mean value and gradient over a mini-batch.
    pub fn minibatch_value_grad(
        &self,
        w: &DenseVector,
        batch: &MiniBatch<'_>,
        reduction: Reduction,
    ) -> Result<(f64, DenseVector)> {
        for z in batch.examples {
            self.check(w, z)?;
        }
        let ws = w.as_slice();
        let (value, mut grad) = match reduction {
            Reduction::Deterministic => self.tree_sum(ws, batch.examples),
            Reduction::Fast => batch
                .examples
                .par_iter()
                .fold(
                    || (0.0, vec![0.0; ws.len()]),
                    |(mut v, mut g), z| {
                        let (val, coef) = self.value_coef(ws, z);
                        v += val;
                        z.features.add_scaled_into(coef, &mut g);
                        (v, g)
                    },
                )
                .reduce(|| (0.0, vec![0.0; ws.len()]), combine),
        };
        let b = batch.batch_size() as f64;
        grad.iter_mut().for_each(|g| *g /= b);
        Ok((value / b, DenseVector::from_raw(grad)))
    }

    fn tree_sum(&self, w: &[f64], examples: &[Example]) -> (f64, Vec<f64>) {
        if examples.len() <= LEAF {
            let mut value = 0.0;
            let mut grad = vec![0.0; w.len()];
            for z in examples {
                let (v, coef) = self.value_coef(w, z);
                value += v;
                z.features.add_scaled_into(coef, &mut grad);
            }
            return (value, grad);
        }
        let (left, right) = examples.split_at(examples.len() / 2);
        let (l, r) = rayon::join(|| self.tree_sum(w, left), || self.tree_sum(w, right));
        combine(l, r)
    }

    /// `sqrt(4 H l(w, z)) - |grad l(w, z)|`, non-negative whenever `H` is valid for `z`.
    pub fn self_bound_residual(&self, w: &DenseVector, z: &Example) -> Result<f64> {
        let value = self.loss_value(w, z)?;
        let grad = self.loss_gradient(w, z)?;
        Ok((4.0 * self.smoothness * value).sqrt() - grad.norm(crate::vectorspace::Norm::Two))
    }

    /// Mean loss over `examples`. Chunks are summed in parallel and the
    /// partial sums combined in chunk order, so the result does not depend
    /// on the thread count.
    pub fn mean_loss(&self, w: &DenseVector, examples: &[Example]) -> Result<f64> {
        if examples.is_empty() {
            return Err(Error::Empty("evaluation set".into()));
        }
        for z in examples {
            self.check(w, z)?;
        }
        let ws = w.as_slice();
        let partial: Vec<f64> = examples
            .par_chunks(EVAL_CHUNK)
            .map(|c| c.iter().map(|z| self.value_coef(ws, z).0).sum())
            .collect();
        Ok(partial.iter().sum::<f64>() / examples.len() as f64)
    }
}

fn combine((va, mut ga): (f64, Vec<f64>), (vb, gb): (f64, Vec<f64>)) -> (f64, Vec<f64>) {
    for (a, b) in ga.iter_mut().zip(&gb) {
        *a += b;
    }
    (va + vb, ga)
}

/// Smoothness constant of a linear-predictor loss over `examples`.
///
/// Both supported losses are 1-smooth in the prediction, so `H = max |x|^2`.
pub fn estimate_h(kind: LossKind, examples: &[Example]) -> Result<f64> {
    match kind {
        LossKind::SmoothedHinge | LossKind::Squared => {
            if examples.is_empty() {
                return Err(Error::Empty("dataset".into()));
            }
            let h = examples
                .iter()
                .map(|z| z.features.norm_sq())
                .fold(0.0, f64::max);
            if h <= 0.0 {
                return Err(Error::param("every feature vector is zero; H undefined"));
            }
            Ok(h)
        }
    }
}

/// Fraction of examples with `sign(w.x) != y`, counting `sign(0)` as `+1`.
pub fn misclassification(w: &DenseVector, examples: &[Example]) -> Result<f64> {
    if examples.is_empty() {
        return Err(Error::Empty("evaluation set".into()));
    }
    let mut wrong = 0usize;
    for z in examples {
        let pred = crate::vectorspace::dot(&z.features, w)?;
        let sign = if pred >= 0.0 { 1.0 } else { -1.0 };
        if sign != z.label.as_f64() {
            wrong += 1;
        }
    }
    Ok(wrong as f64 / examples.len() as f64)
}
