//! Mini-batch stochastic and accelerated gradient methods for smooth
//! convex losses, with the matching step-size schedules and bound
//! calculators.

pub mod analysis;
pub mod dataio;
pub mod error;
pub mod geometry;
pub mod harness;
pub mod losses;
pub mod optimizers;
pub mod schedules;
pub mod vectorspace;

pub use analysis::{BoundReport, Regime, RegimeReport, TargetSuboptimality};
pub use dataio::{Dataset, Example, Label, SynthSpec};
pub use error::{Error, Result};
pub use geometry::{MapKind, MirrorMap};
pub use harness::{DataSource, ExperimentSpec, ResultTable, StepSizeMode, Sweep};
pub use losses::{LossKind, LossModel, MiniBatch, Reduction};
pub use optimizers::{Algorithm, ProxCenter, RunConfig, RunResult, RunTrace};
pub use schedules::{Comparator, ProblemParams, Schedule};
pub use vectorspace::{DenseVector, Norm, SparseVector};
