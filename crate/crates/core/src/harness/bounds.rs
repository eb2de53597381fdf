use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::analysis::{
    classify_regime, evaluate_bounds, max_serial_batch, BoundReport, RegimeReport,
    TargetSuboptimality,
};
use crate::error::{Error, Result};
use crate::optimizers::Algorithm;
use crate::schedules::{Comparator, ProblemParams};

/// Constants for a bound report. `|w*|` doubles as `D` unless `radius` is
/// set; `r_star` switches to a potential-form comparator for mirror maps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundsRequest {
    pub smoothness: f64,
    pub batch_size: usize,
    pub iterations: usize,
    pub l_star: f64,
    pub w_star_norm: f64,
    #[serde(default)]
    pub radius: Option<f64>,
    #[serde(default)]
    pub k: Option<f64>,
    #[serde(default)]
    pub r_star: Option<f64>,
    /// Sample size for the regime tables; defaults to `n b`.
    #[serde(default)]
    pub sample_size: Option<f64>,
    /// Target suboptimality; defaults to the SGD bound at these constants.
    #[serde(default)]
    pub epsilon: Option<f64>,
}

impl BoundsRequest {
    pub fn params(&self) -> ProblemParams {
        ProblemParams {
            smoothness: self.smoothness,
            batch_size: self.batch_size,
            iterations: self.iterations,
            l_star: self.l_star,
            comparator: match self.r_star {
                Some(r) => Comparator::Potential(r),
                None => Comparator::NormSq(self.w_star_norm * self.w_star_norm),
            },
            radius: self.radius.unwrap_or(self.w_star_norm),
            k: self.k.unwrap_or(1.0),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundsOutput {
    pub params: ProblemParams,
    pub bounds: BoundReport,
    pub sample_size: f64,
    pub epsilon: f64,
    pub regimes: Vec<RegimeReport>,
    pub max_serial_b_sgd: f64,
    pub max_serial_b_ag: f64,
}

impl BoundsOutput {
    pub fn render_text(&self) -> String {
        let b = &self.bounds;
        let p = &self.params;
        let mut s = String::new();
        let flag = |ok: bool| if ok { "" } else { "  [precondition not met]" };
        let _ = writeln!(
            s,
            "H = {}, b = {}, n = {}, L(w*) = {}, |w*|^2 = {}, R(w*) = {}, D = {}, K = {}",
            p.smoothness,
            p.batch_size,
            p.iterations,
            p.l_star,
            p.w_star_norm_sq(),
            p.r_star(),
            p.radius,
            p.k
        );
        let _ = writeln!(
            s,
            "SGD bound: {:.6e}{}",
            b.sgd_bound,
            flag(b.sgd_preconditions_met)
        );
        let _ = writeln!(
            s,
            "AG bound:  {:.6e} (with |w*| -> D: {:.6e}){}",
            b.ag_bound,
            b.ag_bound_radius_form,
            flag(b.ag_preconditions_met)
        );
        let _ = writeln!(
            s,
            "SMD bound: {:.6e}{}",
            b.smd_bound,
            flag(b.smd_preconditions_met)
        );
        let _ = writeln!(
            s,
            "AMD bound: {:.6e}{}",
            b.amd_bound,
            flag(b.amd_preconditions_met)
        );
        for w in &b.warnings {
            let _ = writeln!(s, "warning: {w}");
        }
        let _ = writeln!(
            s,
            "regimes at m = {}, eps = {:.6e}:",
            self.sample_size, self.epsilon
        );
        for r in &self.regimes {
            let _ = writeln!(s, "{r}");
        }
        let _ = writeln!(
            s,
            "max serial mini-batch (up to constants): SGD L/eps = {:.6e}, AG L/eps^1.5 = {:.6e}",
            self.max_serial_b_sgd, self.max_serial_b_ag
        );
        s
    }
}

pub fn cmd_bounds(request: &BoundsRequest) -> Result<BoundsOutput> {
    let params = request.params();
    let bounds = evaluate_bounds(&params)?;
    let sample_size = request
        .sample_size
        .unwrap_or((request.batch_size * request.iterations) as f64);
    if !(sample_size.is_finite() && sample_size > 0.0) {
        return Err(Error::param(format!(
            "sample size must be positive, got {sample_size}"
        )));
    }
    let epsilon = TargetSuboptimality::new(request.epsilon.unwrap_or(bounds.sgd_bound))?;
    let b = request.batch_size as f64;
    let regimes = [Algorithm::Sgd, Algorithm::Ag]
        .into_iter()
        .map(|a| classify_regime(a, b, sample_size, request.l_star, epsilon))
        .collect::<Result<Vec<_>>>()?;
    let (s, a) = max_serial_batch(request.l_star, epsilon);
    Ok(BoundsOutput {
        params,
        bounds,
        sample_size,
        epsilon: epsilon.value(),
        regimes,
        max_serial_b_sgd: s,
        max_serial_b_ag: a,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::NO_SPEEDUP_NOTE;

    fn request() -> BoundsRequest {
        BoundsRequest {
            smoothness: 1.0,
            batch_size: 10,
            iterations: 100,
            l_star: 0.0,
            w_star_norm: 1.0,
            radius: None,
            k: None,
            r_star: None,
            sample_size: None,
            epsilon: None,
        }
    }

    #[test]
    fn separable_report() {
        let out = cmd_bounds(&request()).unwrap();
        let text = out.render_text();
        assert!(text.contains(NO_SPEEDUP_NOTE));
        assert!(text.contains("n >= 783"));
        assert!((out.bounds.sgd_bound - 0.048).abs() < 1e-15);
        let json = serde_json::to_string(&out).unwrap();
        let back: BoundsOutput = serde_json::from_str(&json).unwrap();
        assert_eq!(back, out);
    }

    #[test]
    fn rejects_bad_constants() {
        let mut r = request();
        r.smoothness = -1.0;
        assert!(cmd_bounds(&r).is_err());
        let mut r = request();
        r.epsilon = Some(0.0);
        assert!(cmd_bounds(&r).is_err());
    }
}
