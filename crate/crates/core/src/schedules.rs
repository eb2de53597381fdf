//! Theoretical step sizes for the four methods, the polynomial exponent `p`,
//! the `(gamma_i, beta_i)` sequences and their admissibility check.
//!
//! Logarithms are natural throughout.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// The comparator `w*` enters the step sizes through `|w*|^2` (Euclidean)
/// or `R(w*)` (general mirror map).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Comparator {
    NormSq(f64),
    Potential(f64),
}

/// Problem constants shared by the step-size rules and the bounds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProblemParams {
    /// Smoothness `H`.
    pub smoothness: f64,
    pub batch_size: usize,
    pub iterations: usize,
    /// `L(w*)`.
    pub l_star: f64,
    pub comparator: Comparator,
    /// Radius `D` of the domain.
    pub radius: f64,
    /// `K` of the mirror map (1 for Euclidean).
    pub k: f64,
}

impl ProblemParams {
    /// `|w*|^2`; for a potential-form comparator this is `2 R(w*)`.
    pub fn w_star_norm_sq(&self) -> f64 {
        match self.comparator {
            Comparator::NormSq(v) => v,
            Comparator::Potential(r) => 2.0 * r,
        }
    }

    /// `R(w*)`; for a norm-form comparator this is `|w*|^2 / 2`.
    pub fn r_star(&self) -> f64 {
        match self.comparator {
            Comparator::NormSq(v) => 0.5 * v,
            Comparator::Potential(r) => r,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let pos = |name: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::param(format!(
                    "{name} must be positive and finite, got {v}"
                )))
            }
        };
        let nonneg = |name: &str, v: f64| {
            if v.is_finite() && v >= 0.0 {
                Ok(())
            } else {
                Err(Error::param(format!(
                    "{name} must be non-negative and finite, got {v}"
                )))
            }
        };
        pos("H", self.smoothness)?;
        pos("D", self.radius)?;
        pos("K", self.k)?;
        nonneg("L(w*)", self.l_star)?;
        nonneg("comparator", self.w_star_norm_sq())?;
        if self.batch_size == 0 {
            return Err(Error::param("batch size b must be positive"));
        }
        if self.iterations == 0 {
            return Err(Error::param("iteration count n must be positive"));
        }
        Ok(())
    }
}

/// Resolved step-size parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Schedule {
    SgdEta { eta: f64 },
    SmdEta { eta: f64 },
    AgGammaP { gamma: f64, p: f64 },
    AmdGammaP { gamma: f64, p: f64 },
}

impl Schedule {
    pub fn is_accelerated(&self) -> bool {
        matches!(self, Schedule::AgGammaP { .. } | Schedule::AmdGammaP { .. })
    }

    /// The scalar step magnitude (`eta` or `gamma`).
    pub fn magnitude(&self) -> f64 {
        match *self {
            Schedule::SgdEta { eta } | Schedule::SmdEta { eta } => eta,
            Schedule::AgGammaP { gamma, .. } | Schedule::AmdGammaP { gamma, .. } => gamma,
        }
    }

    pub fn exponent(&self) -> Option<f64> {
        match *self {
            Schedule::AgGammaP { p, .. } | Schedule::AmdGammaP { p, .. } => Some(p),
            _ => None,
        }
    }

    /// Same kind, magnitude multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        match *self {
            Schedule::SgdEta { eta } => Schedule::SgdEta { eta: eta * factor },
            Schedule::SmdEta { eta } => Schedule::SmdEta { eta: eta * factor },
            Schedule::AgGammaP { gamma, p } => Schedule::AgGammaP {
                gamma: gamma * factor,
                p,
            },
            Schedule::AmdGammaP { gamma, p } => Schedule::AmdGammaP {
                gamma: gamma * factor,
                p,
            },
        }
    }

    pub fn validate(&self) -> Result<()> {
        let m = self.magnitude();
        if !(m.is_finite() && m >= 0.0) {
            return Err(Error::param(format!(
                "step size must be finite and non-negative, got {m}"
            )));
        }
        if let Some(p) = self.exponent() {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::param(format!(
                    "exponent p must lie in [0, 1], got {p}"
                )));
            }
        }
        Ok(())
    }

    /// `(gamma_i, beta_i)` for 1-based iteration `i`: `gamma i^p` and
    /// `(i + 1) / 2` for the accelerated kinds, `(eta, 1)` otherwise.
    pub fn sequences(&self, i: usize) -> (f64, f64) {
        debug_assert!(i >= 1);
        match *self {
            Schedule::SgdEta { eta } | Schedule::SmdEta { eta } => (eta, 1.0),
            Schedule::AgGammaP { gamma, p } | Schedule::AmdGammaP { gamma, p } => {
                let i = i as f64;
                (gamma * i.powf(p), (i + 1.0) / 2.0)
            }
        }
    }
}

// The ratio term of the SGD/SMD step sizes tends to `b / H` (resp.
// `b / (16 H K^2)`) as L(w*) -> 0.
fn check(params: &ProblemParams) -> Result<()> {
    params.validate()
}

/// Step size for Euclidean SGD:
/// `min{1/(2H), sqrt(b|w*|^2/(L H n)) / (1 + sqrt(H|w*|^2/(L b n)))}`.
pub fn sgd_eta(params: &ProblemParams) -> Result<f64> {
    check(params)?;
    let h = params.smoothness;
    let b = params.batch_size as f64;
    let n = params.iterations as f64;
    let w2 = params.w_star_norm_sq();
    let l = params.l_star;
    let ratio = if l == 0.0 {
        b / h
    } else {
        (b * w2 / (l * h * n)).sqrt() / (1.0 + (h * w2 / (l * b * n)).sqrt())
    };
    Ok((0.5 / h).min(ratio))
}

/// Step size for mirror descent, adding the `b / (32 H K^2)` clamp.
pub fn smd_eta(params: &ProblemParams) -> Result<f64> {
    check(params)?;
    let h = params.smoothness;
    let b = params.batch_size as f64;
    let n = params.iterations as f64;
    let k2 = params.k * params.k;
    let r = params.r_star();
    let l = params.l_star;
    let ratio = if l == 0.0 {
        b / (16.0 * h * k2)
    } else {
        (32.0 * b * r / (l * h * k2 * n)).sqrt()
            / (16.0 * (1.0 + (32.0 * h * k2 * r / (l * b * n)).sqrt()))
    };
    Ok((0.5 / h).min(b / (32.0 * h * k2)).min(ratio))
}

/// Exponent of the polynomial step-size growth `gamma_i = gamma i^p`:
///
/// `min{max{ln b / (2 ln(n-1)), ln ln n / (2(ln(b(n-1)) - ln ln n))}, 1}`.
///
/// A non-positive denominator in the second term makes that term `+inf`.
pub fn ag_p(batch_size: usize, iterations: usize) -> Result<f64> {
    if batch_size == 0 {
        return Err(Error::param("batch size b must be positive"));
    }
    if iterations < 3 {
        return Err(Error::param(format!(
            "exponent p needs n >= 3, got {iterations}"
        )));
    }
    let b = batch_size as f64;
    let n = iterations as f64;
    let first = b.ln() / (2.0 * (n - 1.0).ln());
    let lln = n.ln().ln();
    let denom = (b * (n - 1.0)).ln() - lln;
    let second = if denom > 0.0 {
        lln / (2.0 * denom)
    } else {
        f64::INFINITY
    };
    Ok(first.max(second).clamp(0.0, 1.0))
}

/// The simpler exponent `ln b / (2 ln(n-1))`, clamped to `[0, 1]`.
pub fn ag_p_simple(batch_size: usize, iterations: usize) -> Result<f64> {
    if batch_size == 0 {
        return Err(Error::param("batch size b must be positive"));
    }
    if iterations < 3 {
        return Err(Error::param(format!(
            "exponent p needs n >= 3, got {iterations}"
        )));
    }
    let v = (batch_size as f64).ln() / (2.0 * ((iterations - 1) as f64).ln());
    Ok(v.clamp(0.0, 1.0))
}

/// Which closed form to use for the third term of `gamma`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GammaForm {
    /// `(6 R(w*) / (3/2 H D^2 + L(w*)))^{p/(2p+1)}` with the `K^2` factors.
    #[default]
    General,
    /// `(|w*|^2 / (4H|w*|^2 + sqrt(4H|w*|^2 L(w*))))^{p/(2p+1)}`, Euclidean only.
    EuclideanVariant,
}

/// Base step `gamma` for the accelerated methods.
///
/// Minimum of `1/(4H)`, `sqrt(b R / (174 H K^2 L (n-1)^{2p+1}))` (dropped
/// when `L(w*) = 0`) and the `form`-dependent third term.
pub fn ag_gamma(params: &ProblemParams, p: f64, form: GammaForm) -> Result<f64> {
    check(params)?;
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::param(format!(
            "exponent p must lie in [0, 1], got {p}"
        )));
    }
    if params.iterations < 2 {
        return Err(Error::param("accelerated step size needs n >= 2"));
    }
    let r = params.r_star();
    if r <= 0.0 {
        return Err(Error::param(
            "comparator must be nonzero for the accelerated step size",
        ));
    }
    let h = params.smoothness;
    let b = params.batch_size as f64;
    let nm1 = (params.iterations - 1) as f64;
    let l = params.l_star;
    let k2 = params.k * params.k;
    let d = params.radius;

    let first = 0.25 / h;
    let second = if l == 0.0 {
        f64::INFINITY
    } else {
        (b * r / (174.0 * h * k2 * l * nm1.powf(2.0 * p + 1.0))).sqrt()
    };
    let lead = (b / (1044.0 * h * k2 * nm1.powf(2.0 * p))).powf((p + 1.0) / (2.0 * p + 1.0));
    let tail = match form {
        GammaForm::General => 6.0 * r / (1.5 * h * d * d + l),
        GammaForm::EuclideanVariant => {
            let w2 = params.w_star_norm_sq();
            w2 / (4.0 * h * w2 + (4.0 * h * w2 * l).sqrt())
        }
    };
    let third = lead * tail.powf(p / (2.0 * p + 1.0));
    Ok(first.min(second).min(third))
}

/// Which admissibility condition failed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Condition {
    /// `beta_1 = 1`, `beta_i >= 1`, `gamma_i > 0`.
    Range,
    /// `0 < gamma_{i+1}(beta_{i+1} - 1) <= beta_i gamma_i`.
    Growth,
    /// `2 H gamma_i <= beta_i`.
    Smoothness,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub iteration: usize,
    pub condition: Condition,
    pub lhs: f64,
    pub rhs: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdmissibilityReport {
    pub iterations_checked: usize,
    pub violation: Option<Violation>,
}

impl AdmissibilityReport {
    pub fn passed(&self) -> bool {
        self.violation.is_none()
    }
}

// Inequalities that hold with equality in exact arithmetic (p = 1, p = 0)
// are compared with a few ulps of relative slack.
const SLACK: f64 = 8.0 * f64::EPSILON;

fn le(lhs: f64, rhs: f64) -> bool {
    lhs <= rhs * (1.0 + SLACK)
}

/// Checks the accelerated step-size conditions for `i = 1..=n`; returns the
/// first violation found.
pub fn validate_admissibility(
    schedule: &Schedule,
    smoothness: f64,
    iterations: usize,
) -> AdmissibilityReport {
    let mut violation = None;
    for i in 1..=iterations {
        let (g, b) = schedule.sequences(i);
        let (g_next, b_next) = schedule.sequences(i + 1);
        let v = |condition, lhs, rhs| {
            Some(Violation {
                iteration: i,
                condition,
                lhs,
                rhs,
            })
        };
        if (i == 1 && b != 1.0) || b < 1.0 {
            violation = v(Condition::Range, b, 1.0);
        } else if !(g > 0.0 && g.is_finite()) {
            violation = v(Condition::Range, g, 0.0);
        } else {
            let grow = g_next * (b_next - 1.0);
            if !(grow > 0.0 && le(grow, b * g)) {
                violation = v(Condition::Growth, grow, b * g);
            } else if !le(2.0 * smoothness * g, b) {
                violation = v(Condition::Smoothness, 2.0 * smoothness * g, b);
            }
        }
        if violation.is_some() {
            break;
        }
    }
    AdmissibilityReport {
        iterations_checked: iterations,
        violation,
    }
}

/// Scales the step magnitude of `base` by each multiplier, scores each
/// candidate with `evaluate` (lower is better, evaluated in parallel) and
/// returns the best schedule with its multiplier. Ties go to the smaller
/// multiplier; non-finite scores are ignored.
pub fn grid_select<F>(base: &Schedule, multipliers: &[f64], evaluate: F) -> Result<(Schedule, f64)>
where
    F: Fn(&Schedule) -> f64 + Sync,
{
    if multipliers.is_empty() {
        return Err(Error::param("multiplier grid is empty"));
    }
    if let Some(bad) = multipliers.iter().find(|m| !(m.is_finite() && **m > 0.0)) {
        return Err(Error::param(format!(
            "multipliers must be positive, got {bad}"
        )));
    }
    let scores: Vec<f64> = multipliers
        .par_iter()
        .map(|&m| evaluate(&base.scaled(m)))
        .collect();
    let mut best: Option<(f64, f64)> = None;
    for (&m, &s) in multipliers.iter().zip(&scores) {
        if !s.is_finite() {
            continue;
        }
        best = match best {
            Some((bm, bs)) if s > bs || (s == bs && m >= bm) => Some((bm, bs)),
            _ => Some((m, s)),
        };
    }
    let (m, _) = best.ok_or(Error::NoFiniteCandidate(multipliers.len()))?;
    Ok((base.scaled(m), m))
}

/// Guarantee preconditions that are not met for `params`; empty when all hold.
pub fn precondition_warnings(params: &ProblemParams) -> Vec<String> {
    let mut out = Vec::new();
    let n = params.iterations as f64;
    if params.iterations < 783 {
        out.push(format!(
            "accelerated Euclidean guarantee requires n >= 783 (n = {})",
            params.iterations
        ));
    }
    let k2 = params.k * params.k;
    let need = (783.0 * k2)
        .max(87.0 * k2 * params.l_star / (params.smoothness * params.radius * params.radius));
    if n < need {
        out.push(format!(
            "accelerated mirror-descent guarantee requires n >= max(783 K^2, 87 K^2 L(w*) / (H D^2)) = {need:.1} (n = {}); \
             the analysis states the condition on the sample size n*b = {} instead",
            params.iterations,
            params.iterations * params.batch_size
        ));
    }
    out
}
