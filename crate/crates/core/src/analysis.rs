//! Numerical evaluation of the convergence bounds and the parallel-speedup
//! regime tables. Regime outputs ignore constants.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::optimizers::Algorithm;
use crate::schedules::ProblemParams;

/// Right-hand sides of the four guarantees for one parameter set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub sgd_bound: f64,
    pub ag_bound: f64,
    /// AG bound with `|w*|` replaced by `D`.
    pub ag_bound_radius_form: f64,
    pub smd_bound: f64,
    pub amd_bound: f64,
    pub sgd_preconditions_met: bool,
    pub ag_preconditions_met: bool,
    pub smd_preconditions_met: bool,
    pub amd_preconditions_met: bool,
    pub warnings: Vec<String>,
}

/// `sqrt(64 H |w*|^2 L / (bn)) + (4L + 4H|w*|^2)/n + 8H|w*|^2/(bn)`
pub fn sgd_bound(p: &ProblemParams) -> f64 {
    let (h, l, w2) = (p.smoothness, p.l_star, p.w_star_norm_sq());
    let (b, n) = (p.batch_size as f64, p.iterations as f64);
    (64.0 * h * w2 * l / (b * n)).sqrt() + (4.0 * l + 4.0 * h * w2) / n + 8.0 * h * w2 / (b * n)
}

/// `117 sqrt(H|w*|^2 L/(bn)) + 367 H |w*|^{4/3} D^{2/3}/(sqrt(b) n)
///  + 546 H D^2 sqrt(ln n)/(bn) + 5 H |w*|^2 / n^2`
pub fn ag_bound(p: &ProblemParams) -> f64 {
    let (h, l, w2, d) = (p.smoothness, p.l_star, p.w_star_norm_sq(), p.radius);
    let (b, n) = (p.batch_size as f64, p.iterations as f64);
    let w = w2.sqrt();
    117.0 * (h * w2 * l / (b * n)).sqrt()
        + 367.0 * h * w.powf(4.0 / 3.0) * d.powf(2.0 / 3.0) / (b.sqrt() * n)
        + 546.0 * h * d * d * n.ln().sqrt() / (b * n)
        + 5.0 * h * w2 / (n * n)
}

/// [`ag_bound`] after substituting `|w*| <= D`.
pub fn ag_bound_radius_form(p: &ProblemParams) -> f64 {
    let (h, l, d) = (p.smoothness, p.l_star, p.radius);
    let (b, n) = (p.batch_size as f64, p.iterations as f64);
    117.0 * (h * d * d * l / (b * n)).sqrt()
        + 367.0 * h * d * d / (b.sqrt() * n)
        + 546.0 * h * d * d * n.ln().sqrt() / (b * n)
        + 5.0 * h * d * d / (n * n)
}

/// `sqrt(128 H K^2 R L/(bn)) + (4L + 8HR)/n + 16 H K^2 R/(bn)`
pub fn smd_bound(p: &ProblemParams) -> f64 {
    let (h, l, r, k2) = (p.smoothness, p.l_star, p.r_star(), p.k * p.k);
    let (b, n) = (p.batch_size as f64, p.iterations as f64);
    (128.0 * h * k2 * r * l / (b * n)).sqrt()
        + (4.0 * l + 8.0 * h * r) / n
        + 16.0 * h * k2 * r / (b * n)
}

/// `164 sqrt(H K^2 R L/(b(n-1))) + 580 H K^2 R^{2/3} D^{2/3}/(sqrt(b)(n-1))
///  + 545 H K^2 D^2 sqrt(ln n)/(b(n-1)) + 8 H R/(n-1)^2`
pub fn amd_bound(p: &ProblemParams) -> f64 {
    let (h, l, r, k2, d) = (p.smoothness, p.l_star, p.r_star(), p.k * p.k, p.radius);
    let (b, n) = (p.batch_size as f64, p.iterations as f64);
    let nm1 = n - 1.0;
    164.0 * (h * k2 * r * l / (b * nm1)).sqrt()
        + 580.0 * h * k2 * r.powf(2.0 / 3.0) * d.powf(2.0 / 3.0) / (b.sqrt() * nm1)
        + 545.0 * h * k2 * d * d * n.ln().sqrt() / (b * nm1)
        + 8.0 * h * r / (nm1 * nm1)
}

/// Evaluates every bound literally and flags unmet preconditions.
pub fn evaluate_bounds(params: &ProblemParams) -> Result<BoundReport> {
    params.validate()?;
    let n = params.iterations;
    let k2 = params.k * params.k;
    let ag_ok = n >= 783;
    let amd_need = (783.0 * k2)
        .max(87.0 * k2 * params.l_star / (params.smoothness * params.radius * params.radius));
    let amd_ok = n >= 2 && n as f64 >= amd_need;
    let mut warnings = crate::schedules::precondition_warnings(params);
    if n < 2 {
        warnings.push("accelerated mirror-descent bound needs n >= 2".into());
    }
    Ok(BoundReport {
        sgd_bound: sgd_bound(params),
        ag_bound: ag_bound(params),
        ag_bound_radius_form: ag_bound_radius_form(params),
        smd_bound: smd_bound(params),
        amd_bound: if n >= 2 {
            amd_bound(params)
        } else {
            f64::INFINITY
        },
        sgd_preconditions_met: true,
        ag_preconditions_met: ag_ok,
        smd_preconditions_met: true,
        amd_preconditions_met: amd_ok,
        warnings,
    })
}

/// Desired suboptimality `epsilon > 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TargetSuboptimality(f64);

impl TargetSuboptimality {
    pub fn new(epsilon: f64) -> Result<Self> {
        if !(epsilon.is_finite() && epsilon > 0.0) {
            return Err(Error::param(format!(
                "epsilon must be positive, got {epsilon}"
            )));
        }
        Ok(Self(epsilon))
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

/// Row of a regime table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    /// `n ~ L/(eps^2 b)`: linear speedup in `b`.
    LinearSpeedup,
    /// SGD `n ~ 1/eps`.
    NoSpeedup,
    /// AG `n ~ 1/(eps sqrt(b))`.
    SqrtSpeedup,
    /// AG `n ~ 1/sqrt(eps)`.
    Saturated,
}

impl Regime {
    pub fn label(self) -> &'static str {
        match self {
            Regime::LinearSpeedup => "n ~ L(w*)/(eps^2 b)",
            Regime::NoSpeedup => "n ~ 1/eps",
            Regime::SqrtSpeedup => "n ~ 1/(eps sqrt(b))",
            Regime::Saturated => "n ~ 1/sqrt(eps)",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegimeReport {
    pub algorithm: Algorithm,
    pub regime: Regime,
    pub regime_label: String,
    /// Predicted iteration count, up to constants.
    pub predicted_n: f64,
    /// Largest mini-batch that keeps the serial (data-access) guarantee.
    pub max_serial_b: f64,
    pub notes: Vec<String>,
}

impl fmt::Display for RegimeReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}: {} (n = {:.6e} up to constants; max serial b = {:.6e})",
            self.algorithm, self.regime_label, self.predicted_n, self.max_serial_b
        )?;
        for note in &self.notes {
            write!(f, "\n  - {note}")?;
        }
        Ok(())
    }
}

pub const NO_SPEEDUP_NOTE: &str = "no non-constant parallel speedup";

/// Places `b` in the regime table of `algorithm`. Ties at a boundary go to
/// the larger-`b` row.
pub fn classify_regime(
    algorithm: Algorithm,
    batch_size: f64,
    sample_size: f64,
    l_star: f64,
    epsilon: TargetSuboptimality,
) -> Result<RegimeReport> {
    if !(batch_size > 0.0 && sample_size > 0.0) || !(l_star.is_finite() && l_star >= 0.0) {
        return Err(Error::param(
            "b and m must be positive and L(w*) non-negative",
        ));
    }
    let (b, m, l, eps) = (batch_size, sample_size, l_star, epsilon.value());
    let linear_n = l / (eps * eps * b);
    let (b_sgd, b_ag) = max_serial_batch(l, epsilon);
    let mut notes = Vec::new();
    let (regime, predicted_n, max_serial_b) = match algorithm {
        Algorithm::Sgd | Algorithm::Smd => {
            let boundary = (l * m).sqrt();
            let regime = if b < boundary {
                (Regime::LinearSpeedup, linear_n)
            } else {
                (Regime::NoSpeedup, 1.0 / eps)
            };
            if l == 0.0 {
                notes.push(format!(
                    "separable case: boundary sqrt(L(w*) m) = 0; {NO_SPEEDUP_NOTE}"
                ));
            } else if regime.0 == Regime::NoSpeedup {
                notes.push(format!(
                    "b >= sqrt(L(w*) m) = {boundary:.6e}; {NO_SPEEDUP_NOTE} beyond this point"
                ));
            }
            (regime.0, regime.1, b_sgd)
        }
        Algorithm::Ag | Algorithm::Amd => {
            let r = if eps < l * l {
                let boundary = l.powf(0.25) * m.powf(0.75);
                if b < boundary {
                    (Regime::LinearSpeedup, linear_n)
                } else {
                    (Regime::Saturated, 1.0 / eps.sqrt())
                }
            } else {
                let lin = l * m;
                let sat = m.powf(2.0 / 3.0);
                if b < lin {
                    (Regime::LinearSpeedup, linear_n)
                } else if b < sat {
                    notes.push(format!(
                        "speedup of at least sqrt(b) up to b = m^(2/3) = {sat:.6e}"
                    ));
                    (Regime::SqrtSpeedup, 1.0 / (eps * b.sqrt()))
                } else {
                    (Regime::Saturated, 1.0 / eps.sqrt())
                }
            };
            (r.0, r.1, b_ag)
        }
    };
    if l == 0.0 {
        notes.push("serial analysis degenerates: maximal serial mini-batch is 0".into());
    }
    Ok(RegimeReport {
        algorithm,
        regime,
        regime_label: format!("{} (up to constants)", regime.label()),
        predicted_n,
        max_serial_b,
        notes,
    })
}

/// Largest mini-batch sizes that keep the serial guarantee within a
/// constant: `(L/eps, L/eps^{3/2})` for SGD and AG.
pub fn max_serial_batch(l_star: f64, epsilon: TargetSuboptimality) -> (f64, f64) {
    let eps = epsilon.value();
    (l_star / eps, l_star / eps.powf(1.5))
}
