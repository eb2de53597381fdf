use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataio::{Example, Label};
use crate::error::{Error, Result};
use crate::losses::{estimate_h, LossKind, LossModel};
use crate::schedules::{
    ag_gamma, ag_p, validate_admissibility, Comparator, GammaForm, ProblemParams, Schedule,
};
use crate::vectorspace::{DenseVector, SparseVector};

pub const MIN_TRIALS: usize = 1000;
pub const VARIANCE_BATCHES: [usize; 4] = [1, 2, 4, 16];
pub const VARIANCE_DIMENSION: usize = 8;
pub const SELF_BOUND_PAIRS: usize = 10_000;
pub const SELF_BOUND_TOLERANCE: f64 = -1e-12;
pub const ADMISSIBILITY_N: [usize; 5] = [3, 10, 100, 1000, 10_000];
pub const ADMISSIBILITY_B: [usize; 4] = [1, 8, 64, 1024];

/// Coordinate distribution of the mean-zero vectors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Coordinates {
    Rademacher,
    Gaussian,
}

impl fmt::Display for Coordinates {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Coordinates::Rademacher => "rademacher",
            Coordinates::Gaussian => "gaussian",
        })
    }
}

/// Monte Carlo estimate of `E|mean of b iid vectors|^2` against
/// `(1/b^2) sum_t E|x_t|^2`, which is exact here (unit coordinate variance).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VarianceCheck {
    pub coordinates: Coordinates,
    pub b: usize,
    pub dimension: usize,
    pub trials: usize,
    pub estimate: f64,
    pub bound: f64,
    pub std_error: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelfBoundCheck {
    pub loss: LossKind,
    pub pairs: usize,
    pub smoothness: f64,
    pub min_residual: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdmissibilityCheck {
    pub n: usize,
    pub b: usize,
    pub smoothness: f64,
    pub l_star: f64,
    pub p: f64,
    pub gamma: f64,
    pub passed: bool,
    pub violation: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub trials: usize,
    pub seed: u64,
    pub variance: Vec<VarianceCheck>,
    pub self_bound: Vec<SelfBoundCheck>,
    pub admissibility: Vec<AdmissibilityCheck>,
    pub passed: bool,
}

impl fmt::Display for VerifyReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = |ok: bool| if ok { "PASS" } else { "FAIL" };
        for c in &self.variance {
            writeln!(
                f,
                "[{}] mean of b={:<2} {} vectors (d={}): estimate {:.5} vs {:.5} (se {:.2e}, margin {:+.2} se)",
                tag(c.passed),
                c.b,
                c.coordinates,
                c.dimension,
                c.estimate,
                c.bound,
                c.std_error,
                (c.bound - c.estimate) / c.std_error.max(f64::MIN_POSITIVE)
            )?;
        }
        for c in &self.self_bound {
            writeln!(
                f,
                "[{}] self-bound {:?} over {} pairs (H = {:.4}): min residual {:.3e}",
                tag(c.passed),
                c.loss,
                c.pairs,
                c.smoothness,
                c.min_residual
            )?;
        }
        let bad: Vec<_> = self.admissibility.iter().filter(|c| !c.passed).collect();
        writeln!(
            f,
            "[{}] admissibility: {} of {} schedules pass",
            tag(bad.is_empty()),
            self.admissibility.len() - bad.len(),
            self.admissibility.len()
        )?;
        for c in bad {
            writeln!(
                f,
                "  n={} b={} H={} L={}: {:?}",
                c.n, c.b, c.smoothness, c.l_star, c.violation
            )?;
        }
        write!(f, "overall: {}", tag(self.passed))
    }
}

fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Draws `trials` means of `b` iid vectors and compares their squared norm
/// to the exact right-hand side `dimension / b`.
pub fn variance_check(
    coordinates: Coordinates,
    b: usize,
    dimension: usize,
    trials: usize,
    seed: u64,
) -> VarianceCheck {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut mean = vec![0.0; dimension];
    let (mut s1, mut s2) = (0.0, 0.0);
    for _ in 0..trials {
        mean.iter_mut().for_each(|v| *v = 0.0);
        for _ in 0..b {
            for v in mean.iter_mut() {
                *v += match coordinates {
                    Coordinates::Rademacher => {
                        if rng.random::<bool>() {
                            1.0
                        } else {
                            -1.0
                        }
                    }
                    Coordinates::Gaussian => rng.sample::<f64, _>(StandardNormal),
                };
            }
        }
        let sq: f64 = mean.iter().map(|v| v * v).sum::<f64>() / (b * b) as f64;
        s1 += sq;
        s2 += sq * sq;
    }
    let t = trials as f64;
    let estimate = s1 / t;
    let var = (s2 / t - estimate * estimate).max(0.0) * t / (t - 1.0).max(1.0);
    let std_error = (var / t).sqrt();
    // (K^2 / b^2) * b * E|x|^2 with K = 1 and E|x|^2 = dimension.
    let bound = dimension as f64 / b as f64;
    VarianceCheck {
        coordinates,
        b,
        dimension,
        trials,
        estimate,
        bound,
        std_error,
        passed: (estimate - bound).abs() <= 3.0 * std_error,
    }
}

fn random_example(rng: &mut ChaCha8Rng, dimension: usize) -> Example {
    let scale = [0.1, 1.0, 10.0][rng.random_range(0..3)];
    let mut pairs = Vec::new();
    for j in 1..=dimension {
        if rng.random::<f64>() < 0.6 {
            let v = scale * rng.sample::<f64, _>(StandardNormal);
            if v != 0.0 {
                pairs.push((j, v));
            }
        }
    }
    let label = if rng.random::<bool>() {
        Label::Positive
    } else {
        Label::Negative
    };
    // Indices are increasing and values nonzero, so this cannot fail.
    Example::new(
        SparseVector::new(pairs, dimension).expect("valid sparse vector"),
        label,
    )
}

/// `sqrt(4 H l(w, z)) - |grad l(w, z)|` over random pairs with `H = max |x|^2`.
pub fn self_bound_sweep(kind: LossKind, pairs: usize, seed: u64) -> Result<SelfBoundCheck> {
    const DIM: usize = 10;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let examples: Vec<Example> = (0..pairs).map(|_| random_example(&mut rng, DIM)).collect();
    let points: Vec<DenseVector> = (0..pairs)
        .map(|_| {
            let scale = [0.01, 0.1, 1.0, 10.0][rng.random_range(0..4)];
            DenseVector::new(
                (0..DIM)
                    .map(|_| scale * rng.sample::<f64, _>(StandardNormal))
                    .collect(),
            )
        })
        .collect::<Result<_>>()?;
    let model = LossModel::new(kind, estimate_h(kind, &examples)?)?;
    let residuals: Vec<f64> = examples
        .par_iter()
        .zip(&points)
        .map(|(z, w)| model.self_bound_residual(w, z))
        .collect::<Result<_>>()?;
    let min_residual = residuals.into_iter().fold(f64::INFINITY, f64::min);
    Ok(SelfBoundCheck {
        loss: kind,
        pairs,
        smoothness: model.smoothness(),
        min_residual,
        passed: min_residual >= SELF_BOUND_TOLERANCE,
    })
}

/// Checks every accelerated schedule built from the theoretical `p` and
/// `gamma` on the `n x b` grid, for a few `(H, L(w*))` pairs.
pub fn admissibility_sweep() -> Result<Vec<AdmissibilityCheck>> {
    let mut out = Vec::new();
    for (h, l) in [(1.0, 0.0), (1.0, 0.1), (4.0, 0.5), (0.25, 2.0)] {
        for n in ADMISSIBILITY_N {
            for b in ADMISSIBILITY_B {
                let params = ProblemParams {
                    smoothness: h,
                    batch_size: b,
                    iterations: n,
                    l_star: l,
                    comparator: Comparator::NormSq(1.0),
                    radius: 1.0,
                    k: 1.0,
                };
                let p = ag_p(b, n)?;
                let gamma = ag_gamma(&params, p, GammaForm::General)?;
                let report = validate_admissibility(&Schedule::AgGammaP { gamma, p }, h, n);
                out.push(AdmissibilityCheck {
                    n,
                    b,
                    smoothness: h,
                    l_star: l,
                    p,
                    gamma,
                    passed: report.passed(),
                    violation: report.violation.map(|v| format!("{v:?}")),
                });
            }
        }
    }
    Ok(out)
}

/// Monte Carlo and sweep checks of the inequalities the analysis rests on.
/// Failures are reported, not raised.
pub fn cmd_verify(trials: usize, seed: u64) -> Result<VerifyReport> {
    if trials < MIN_TRIALS {
        return Err(Error::param(format!(
            "verify needs at least {MIN_TRIALS} trials, got {trials}"
        )));
    }
    let configs: Vec<(Coordinates, usize)> = [Coordinates::Rademacher, Coordinates::Gaussian]
        .into_iter()
        .flat_map(|c| VARIANCE_BATCHES.into_iter().map(move |b| (c, b)))
        .collect();
    let variance: Vec<VarianceCheck> = configs
        .par_iter()
        .enumerate()
        .map(|(k, &(c, b))| {
            let sub = rng_for(seed, k as u64).random::<u64>();
            variance_check(c, b, VARIANCE_DIMENSION, trials, sub)
        })
        .collect();
    let self_bound = vec![
        self_bound_sweep(LossKind::SmoothedHinge, SELF_BOUND_PAIRS, seed)?,
        self_bound_sweep(LossKind::Squared, SELF_BOUND_PAIRS, seed.wrapping_add(1))?,
    ];
    let admissibility = admissibility_sweep()?;
    let passed = variance.iter().all(|c| c.passed)
        && self_bound.iter().all(|c| c.passed)
        && admissibility.iter().all(|c| c.passed);
    Ok(VerifyReport {
        trials,
        seed,
        variance,
        self_bound,
        admissibility,
        passed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scalar_rademacher_pair() {
        let c = variance_check(Coordinates::Rademacher, 2, 1, 20_000, 7);
        assert_eq!(c.bound, 0.5);
        assert!(c.passed, "{c:?}");
    }

    #[test]
    fn single_vector_is_exact_for_rademacher() {
        // |x|^2 = d for every Rademacher draw, so the estimate has no variance.
        let c = variance_check(Coordinates::Rademacher, 1, 8, 1000, 1);
        assert_eq!(c.estimate, 8.0);
        assert_eq!(c.std_error, 0.0);
        assert!(c.passed);
    }

    #[test]
    fn rejects_few_trials() {
        assert!(cmd_verify(999, 0).is_err());
    }

    #[test]
    fn sweeps_pass() {
        let s = self_bound_sweep(LossKind::SmoothedHinge, 2000, 3).unwrap();
        assert!(s.passed, "{s:?}");
        assert!(admissibility_sweep().unwrap().iter().all(|c| c.passed));
    }
}
