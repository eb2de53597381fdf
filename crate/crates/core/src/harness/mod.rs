//! Experiment orchestration: training runs, batch-size and exponent sweeps
//! at a fixed sample budget, censoring, bound reports and Monte Carlo checks.
//!
//! Configs are JSON, results CSV and data LIBSVM.

mod bounds;
mod censoring;
mod experiment;
mod table;
mod verify;

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::dataio::SynthSpec;
use crate::error::{Error, Result};
use crate::geometry::MapKind;
use crate::losses::LossKind;
use crate::optimizers::{Algorithm, ProxCenter};
use crate::schedules::GammaForm;

pub use bounds::{cmd_bounds, BoundsOutput, BoundsRequest};
pub use censoring::{censor_with_budget, cmd_censor, predictor_path, CensorSummary};
pub use experiment::{cmd_sweep_b, cmd_sweep_p, cmd_train, THEORETICAL_P_NOTE};
pub use table::{ResultRow, ResultTable, SummaryRow, TraceRecord};
pub use verify::{
    admissibility_sweep, cmd_verify, self_bound_sweep, variance_check, AdmissibilityCheck,
    Coordinates, SelfBoundCheck, VarianceCheck, VerifyReport, MIN_TRIALS, VARIANCE_BATCHES,
    VARIANCE_DIMENSION,
};

/// Step-size multipliers searched in grid mode.
pub const DEFAULT_GRID: [f64; 9] = [0.0625, 0.125, 0.25, 0.5, 1.0, 2.0, 4.0, 8.0, 16.0];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DataSource {
    File { path: PathBuf },
    Synthetic(SynthSpec),
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Sweep {
    #[default]
    None,
    BatchSizes {
        batch_sizes: Vec<usize>,
    },
    PValues {
        p_values: Vec<f64>,
        batch_sizes: Vec<usize>,
    },
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StepSizeMode {
    #[default]
    Theoretical,
    /// Theoretical step times each multiplier, picked on validation loss.
    Grid { multipliers: Vec<f64> },
}

/// How the accelerated methods pick the growth exponent `p`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ExponentRule {
    /// The max/min rule balancing the two error terms.
    #[default]
    Balanced,
    /// `ln b / (2 ln(n-1))`.
    Simple,
    Fixed {
        p: f64,
    },
}

/// Overrides for the constants entering the theoretical step sizes.
/// Anything left unset is derived from the data.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct ComparatorSpec {
    pub smoothness: Option<f64>,
    pub l_star: Option<f64>,
    pub w_star_norm: Option<f64>,
    pub radius: Option<f64>,
    /// JSON file holding a reference predictor, e.g. written by `censor`.
    pub predictor: Option<PathBuf>,
}

fn default_true() -> bool {
    true
}

fn default_batch() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub data: DataSource,
    /// Seed of the synthetic generator.
    #[serde(default)]
    pub data_seed: u64,
    pub algorithms: Vec<Algorithm>,
    #[serde(default)]
    pub sweep: Sweep,
    /// Training examples consumed by every run, `m = n b`.
    pub fixed_m: usize,
    /// Batch size when not sweeping.
    #[serde(default = "default_batch")]
    pub batch_size: usize,
    /// Each seed picks a train/validation/test split and the training order.
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub step_size_mode: StepSizeMode,
    #[serde(default)]
    pub exponent: ExponentRule,
    #[serde(default)]
    pub gamma_form: GammaForm,
    #[serde(default = "default_loss")]
    pub loss: LossKind,
    /// Geometry of SMD and AMD; SGD and AG are always Euclidean.
    #[serde(default = "default_mirror")]
    pub mirror: MapKind,
    #[serde(default)]
    pub comparator: ComparatorSpec,
    /// Where the accelerated prox step starts from.
    #[serde(default)]
    pub prox_center: ProxCenter,
    #[serde(default = "default_true")]
    pub projection: bool,
    #[serde(default = "default_true")]
    pub deterministic: bool,
    #[serde(default)]
    pub trace_every: Option<usize>,
    #[serde(default)]
    pub output_path: Option<PathBuf>,
}

fn default_seeds() -> Vec<u64> {
    vec![0]
}

fn default_loss() -> LossKind {
    LossKind::SmoothedHinge
}

fn default_mirror() -> MapKind {
    MapKind::Euclidean
}

impl ExperimentSpec {
    /// A single-run spec with defaults for everything optional.
    pub fn new(data: DataSource, algorithm: Algorithm, fixed_m: usize, batch_size: usize) -> Self {
        Self {
            data,
            data_seed: 0,
            algorithms: vec![algorithm],
            sweep: Sweep::None,
            fixed_m,
            batch_size,
            seeds: vec![0],
            step_size_mode: StepSizeMode::Theoretical,
            exponent: ExponentRule::Balanced,
            gamma_form: GammaForm::General,
            loss: LossKind::SmoothedHinge,
            mirror: MapKind::Euclidean,
            comparator: ComparatorSpec::default(),
            prox_center: ProxCenter::Iterate,
            projection: true,
            deterministic: true,
            trace_every: None,
            output_path: None,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let spec: Self = serde_json::from_str(text)?;
        spec.validate()?;
        Ok(spec)
    }

    /// Batch sizes this spec runs: the sweep list, or `batch_size` alone.
    pub fn batch_sizes(&self) -> &[usize] {
        match &self.sweep {
            Sweep::None => std::slice::from_ref(&self.batch_size),
            Sweep::BatchSizes { batch_sizes } | Sweep::PValues { batch_sizes, .. } => batch_sizes,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.algorithms.is_empty() {
            return Err(Error::param("at least one algorithm is required"));
        }
        if self.seeds.is_empty() {
            return Err(Error::param("at least one seed is required"));
        }
        if self.fixed_m == 0 {
            return Err(Error::param("fixed_m must be positive"));
        }
        let sizes = self.batch_sizes();
        if sizes.is_empty() {
            return Err(Error::param("batch size list is empty"));
        }
        for &b in sizes {
            if b == 0 || !self.fixed_m.is_multiple_of(b) {
                return Err(Error::param(format!(
                    "batch size {b} does not divide fixed_m = {}",
                    self.fixed_m
                )));
            }
        }
        if let Sweep::PValues { p_values, .. } = &self.sweep {
            if p_values.is_empty() {
                return Err(Error::param("p sweep needs at least one p value"));
            }
            if let Some(p) = p_values.iter().find(|p| !(0.0..=1.0).contains(*p)) {
                return Err(Error::param(format!(
                    "p values must lie in [0, 1], got {p}"
                )));
            }
        }
        if let ExponentRule::Fixed { p } = self.exponent {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::param(format!("p must lie in [0, 1], got {p}")));
            }
        }
        if let StepSizeMode::Grid { multipliers } = &self.step_size_mode {
            if multipliers.is_empty() || multipliers.iter().any(|m| !(m.is_finite() && *m > 0.0)) {
                return Err(Error::param(
                    "grid multipliers must be a nonempty list of positive numbers",
                ));
            }
        }
        if self.trace_every == Some(0) {
            return Err(Error::param("trace interval must be positive"));
        }
        if let DataSource::Synthetic(s) = &self.data {
            if s.m == 0 || s.dimension == 0 {
                return Err(Error::param(
                    "synthetic data needs m >= 1 and dimension >= 1",
                ));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn synth() -> DataSource {
        DataSource::Synthetic(SynthSpec {
            m: 100,
            dimension: 5,
            margin: 1.0,
            label_noise: 0.0,
        })
    }

    #[test]
    fn validation_rules() {
        let mut s = ExperimentSpec::new(synth(), Algorithm::Sgd, 64, 8);
        assert!(s.validate().is_ok());
        s.batch_size = 6;
        assert!(s.validate().is_err());
        s.batch_size = 8;
        s.seeds.clear();
        assert!(s.validate().is_err());
        s.seeds = vec![1];
        s.sweep = Sweep::BatchSizes {
            batch_sizes: vec![1, 4, 5],
        };
        assert!(s.validate().is_err());
        s.sweep = Sweep::PValues {
            p_values: vec![0.0, 1.5],
            batch_sizes: vec![4],
        };
        assert!(s.validate().is_err());
        s.sweep = Sweep::None;
        s.step_size_mode = StepSizeMode::Grid {
            multipliers: vec![],
        };
        assert!(s.validate().is_err());
    }

    #[test]
    fn json_round_trip() {
        let mut s = ExperimentSpec::new(synth(), Algorithm::Ag, 64, 4);
        s.sweep = Sweep::BatchSizes {
            batch_sizes: vec![1, 2, 4],
        };
        s.step_size_mode = StepSizeMode::Grid {
            multipliers: DEFAULT_GRID.to_vec(),
        };
        let text = serde_json::to_string_pretty(&s).unwrap();
        assert_eq!(ExperimentSpec::from_json(&text).unwrap(), s);
        let minimal = r#"{"data": {"kind": "file", "path": "a.svm"}, "algorithms": ["sgd"],
                          "fixed_m": 10, "seeds": [1]}"#;
        let parsed = ExperimentSpec::from_json(minimal).unwrap();
        assert!(parsed.projection && parsed.deterministic);
        assert_eq!(parsed.batch_sizes(), &[1]);
    }
}
