//! Mirror maps: strongly convex potentials with their conjugate gradients,
//! Bregman divergences and projections onto the feasible set.
//!
//! Two geometries are provided:
//!
//! * `Euclidean`: `R(w) = |w|^2 / 2` on the ball of radius `D`. Both gradient
//!   maps are the identity and the projection is radial scaling.
//! * `Entropy`: `R(w) = sum_j w_j ln(w_j d)` on the probability simplex,
//!   1-strongly convex with respect to the l1 norm. The `ln d` shift makes it
//!   non-negative on the simplex with minimum at the uniform distribution.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::vectorspace::{DenseVector, Norm};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MapKind {
    Euclidean,
    Entropy,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MirrorMap {
    kind: MapKind,
    radius: f64,
    dimension: usize,
}

/// Value of `Delta_R(w, w')`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct BregmanDivergence(pub f64);

impl MirrorMap {
    /// Euclidean geometry on the ball of radius `radius`.
    pub fn euclidean(dimension: usize, radius: f64) -> Result<Self> {
        if dimension == 0 {
            return Err(Error::param("dimension must be positive"));
        }
        if !(radius.is_finite() && radius > 0.0) {
            return Err(Error::param(format!(
                "radius D must be positive and finite, got {radius}"
            )));
        }
        Ok(Self {
            kind: MapKind::Euclidean,
            radius,
            dimension,
        })
    }

    /// Entropy geometry on the simplex in `dimension >= 2` coordinates (`D = 1` in l1).
    pub fn entropy(dimension: usize) -> Result<Self> {
        if dimension < 2 {
            return Err(Error::param("entropy map needs dimension >= 2"));
        }
        Ok(Self {
            kind: MapKind::Entropy,
            radius: 1.0,
            dimension,
        })
    }

    pub fn kind(&self) -> MapKind {
        self.kind
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn dim(&self) -> usize {
        self.dimension
    }

    /// `K = sqrt(2 sup_{|w| <= 1} R(w))`.
    pub fn constant_k(&self) -> f64 {
        match self.kind {
            MapKind::Euclidean => 1.0,
            MapKind::Entropy => (2.0 * (self.dimension as f64).ln()).sqrt(),
        }
    }

    /// The norm `R` is strongly convex against.
    pub fn paired_norm(&self) -> Norm {
        match self.kind {
            MapKind::Euclidean => Norm::Two,
            MapKind::Entropy => Norm::One,
        }
    }

    fn check_dim(&self, w: &DenseVector) -> Result<()> {
        if w.dim() != self.dimension {
            return Err(Error::DimensionMismatch {
                expected: self.dimension,
                found: w.dim(),
            });
        }
        Ok(())
    }

    /// `argmin R`: the origin or the uniform distribution.
    pub fn minimizer(&self) -> DenseVector {
        match self.kind {
            MapKind::Euclidean => DenseVector::zeros(self.dimension),
            MapKind::Entropy => DenseVector::filled(self.dimension, 1.0 / self.dimension as f64),
        }
    }

    pub fn potential(&self, w: &DenseVector) -> Result<f64> {
        self.check_dim(w)?;
        match self.kind {
            MapKind::Euclidean => Ok(0.5 * w.as_slice().iter().map(|v| v * v).sum::<f64>()),
            MapKind::Entropy => {
                let d = self.dimension as f64;
                let mut acc = 0.0;
                for (j, &v) in w.as_slice().iter().enumerate() {
                    if v < 0.0 {
                        return Err(Error::Domain(format!(
                            "entropy potential at negative coordinate {j}"
                        )));
                    }
                    if v > 0.0 {
                        acc += v * (v * d).ln();
                    }
                }
                Ok(acc)
            }
        }
    }

    /// `grad R(w)`; the entropy map needs every coordinate strictly positive.
    pub fn grad_potential(&self, w: &DenseVector) -> Result<DenseVector> {
        self.check_dim(w)?;
        match self.kind {
            MapKind::Euclidean => Ok(w.clone()),
            MapKind::Entropy => {
                let d = self.dimension as f64;
                let mut out = Vec::with_capacity(self.dimension);
                for (j, &v) in w.as_slice().iter().enumerate() {
                    if v <= 0.0 {
                        return Err(Error::Domain(format!(
                            "entropy gradient needs positive coordinates (w[{j}] = {v})"
                        )));
                    }
                    out.push((v * d).ln() + 1.0);
                }
                Ok(DenseVector::from_raw(out))
            }
        }
    }

    /// `grad R*(theta)`; for the entropy map this is the softmax of `theta`.
    pub fn grad_conjugate(&self, theta: &DenseVector) -> Result<DenseVector> {
        self.check_dim(theta)?;
        match self.kind {
            MapKind::Euclidean => Ok(theta.clone()),
            MapKind::Entropy => {
                let s = theta.as_slice();
                let top = s.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let exps: Vec<f64> = s.iter().map(|t| (t - top).exp()).collect();
                let z: f64 = exps.iter().sum();
                Ok(DenseVector::from_raw(
                    exps.into_iter().map(|e| e / z).collect(),
                ))
            }
        }
    }

    /// `R(w) - R(w') - <grad R(w'), w - w'>`.
    pub fn bregman(&self, w: &DenseVector, w_prime: &DenseVector) -> Result<BregmanDivergence> {
        let g = self.grad_potential(w_prime)?;
        let r = self.potential(w)? - self.potential(w_prime)?;
        let lin: f64 = g
            .as_slice()
            .iter()
            .zip(w.as_slice().iter().zip(w_prime.as_slice()))
            .map(|(gj, (a, b))| gj * (a - b))
            .sum();
        // Clamp tiny negative roundoff.
        Ok(BregmanDivergence((r - lin).max(0.0)))
    }

    /// Bregman projection onto the feasible set.
    ///
    /// Euclidean: radial scaling onto the ball. Entropy: negative coordinates
    /// are clipped to zero and the result is normalized in l1 (the KL
    /// projection of a positive point); an all-zero input maps to uniform.
    pub fn project(&self, w: &DenseVector) -> Result<DenseVector> {
        self.check_dim(w)?;
        let mut out = w.clone();
        self.project_in_place(&mut out);
        Ok(out)
    }

    pub(crate) fn project_in_place(&self, w: &mut DenseVector) {
        match self.kind {
            MapKind::Euclidean => {
                let n = w.norm(Norm::Two);
                if n > self.radius {
                    w.scale_in_place(self.radius / n);
                }
            }
            MapKind::Entropy => {
                let s = w.as_mut_slice();
                s.iter_mut().for_each(|v| *v = v.max(0.0));
                let total: f64 = s.iter().sum();
                if total > 0.0 {
                    s.iter_mut().for_each(|v| *v /= total);
                } else {
                    let u = 1.0 / s.len() as f64;
                    s.iter_mut().for_each(|v| *v = u);
                }
            }
        }
    }

    /// Distance of `w` from the feasible set, used for feasibility checks.
    pub fn infeasibility(&self, w: &DenseVector) -> f64 {
        match self.kind {
            MapKind::Euclidean => (w.norm(Norm::Two) - self.radius).max(0.0),
            MapKind::Entropy => {
                let neg = w
                    .as_slice()
                    .iter()
                    .map(|v| (-v).max(0.0))
                    .fold(0.0, f64::max);
                neg.max((w.sum() - 1.0).abs())
            }
        }
    }
}
