//! The four training loops over a stream of mini-batches: SGD, accelerated
//! gradient (AG), stochastic mirror descent (SMD) and accelerated mirror
//! descent (AMD).
//!
//! Batch `i` (1-based) is examples `b(i-1)+1 ..= bi` of the training slice;
//! exactly `n * b` examples are consumed and the loops never reshuffle.
//! Iterations run sequentially on the calling thread; only the mini-batch
//! gradient inside one iteration is parallel.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::dataio::Example;
use crate::error::{Error, Result};
use crate::geometry::{MapKind, MirrorMap};
use crate::losses::{LossModel, MiniBatch, Reduction};
use crate::schedules::Schedule;
use crate::vectorspace::{DenseVector, Norm};

/// Loss values above this are treated as divergence.
pub const DIVERGENCE_THRESHOLD: f64 = 1e12;

/// A mini-batch objective the optimizers can query.
pub trait BatchObjective: Sync {
    fn batch_value_grad(
        &self,
        w: &DenseVector,
        batch: &MiniBatch<'_>,
        reduction: Reduction,
    ) -> Result<(f64, DenseVector)>;

    fn mean_value(&self, w: &DenseVector, examples: &[Example]) -> Result<f64>;
}

impl BatchObjective for LossModel {
    fn batch_value_grad(
        &self,
        w: &DenseVector,
        batch: &MiniBatch<'_>,
        reduction: Reduction,
    ) -> Result<(f64, DenseVector)> {
        self.minibatch_value_grad(w, batch, reduction)
    }

    fn mean_value(&self, w: &DenseVector, examples: &[Example]) -> Result<f64> {
        self.mean_loss(w, examples)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    Sgd,
    Ag,
    Smd,
    Amd,
}

impl Algorithm {
    pub fn is_accelerated(self) -> bool {
        matches!(self, Algorithm::Ag | Algorithm::Amd)
    }

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Sgd => "sgd",
            Algorithm::Ag => "ag",
            Algorithm::Smd => "smd",
            Algorithm::Amd => "amd",
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "sgd" => Ok(Algorithm::Sgd),
            "ag" => Ok(Algorithm::Ag),
            "smd" => Ok(Algorithm::Smd),
            "amd" => Ok(Algorithm::Amd),
            other => Err(Error::param(format!(
                "unknown algorithm '{other}' (sgd, ag, smd, amd)"
            ))),
        }
    }
}

/// Point the accelerated prox step starts from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProxCenter {
    /// `w_{i+1} = P(w_i - gamma_i g(w^md_i))`, the form the convergence
    /// argument needs.
    #[default]
    Iterate,
    /// `w_{i+1} = P(w^md_i - gamma_i g(w^md_i))`. Its effective step decays
    /// like `gamma_i / beta_i`, so it converges far more slowly.
    MdPoint,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub batch_size: usize,
    pub iterations: usize,
    pub seed: u64,
    pub projection: bool,
    pub deterministic_reduction: bool,
    pub trace_every: usize,
    #[serde(default)]
    pub prox_center: ProxCenter,
}

impl RunConfig {
    pub fn new(batch_size: usize, iterations: usize) -> Self {
        Self {
            batch_size,
            iterations,
            seed: 0,
            projection: true,
            deterministic_reduction: true,
            trace_every: 1,
            prox_center: ProxCenter::Iterate,
        }
    }

    fn reduction(&self) -> Reduction {
        if self.deterministic_reduction {
            Reduction::Deterministic
        } else {
            Reduction::Fast
        }
    }

    fn validate(&self, available: usize) -> Result<()> {
        if self.batch_size == 0 || self.iterations == 0 || self.trace_every == 0 {
            return Err(Error::param(
                "batch size, iterations and trace interval must be positive",
            ));
        }
        let needed = self.batch_size * self.iterations;
        if needed > available {
            return Err(Error::InsufficientData { needed, available });
        }
        Ok(())
    }
}

/// Everything a run reads: the objective, the geometry and the data.
pub struct Problem<'a, O: ?Sized> {
    pub objective: &'a O,
    pub map: &'a MirrorMap,
    pub train: &'a [Example],
    /// Optional evaluation set for the trace.
    pub holdout: Option<&'a [Example]>,
}

impl<O: ?Sized> Clone for Problem<'_, O> {
    fn clone(&self) -> Self {
        *self
    }
}

impl<O: ?Sized> Copy for Problem<'_, O> {}

/// Iterates after an iteration completes. `iteration` is the index `i` of
/// the batch just consumed; `w` holds `w_{i+1}` and `w_ag` holds `w^ag_{i+1}`.
#[derive(Debug, Clone)]
pub struct OptimizerState {
    pub iteration: usize,
    pub w: DenseVector,
    pub w_ag: Option<DenseVector>,
    /// The point the gradient was evaluated at in this iteration (`w_i` or `w^md_i`).
    pub w_md: Option<DenseVector>,
    /// `sum_{j <= i} w_j` for the averaging methods.
    pub running_sum: Option<DenseVector>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub iteration: usize,
    pub train_batch_loss: f64,
    pub holdout_loss: Option<f64>,
    pub iterate_norm: f64,
    pub elapsed_seconds: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RunTrace {
    pub rows: Vec<TraceRow>,
}

impl RunTrace {
    /// Rows without timing, for reproducibility comparisons.
    pub fn numeric_rows(&self) -> Vec<(usize, u64, Option<u64>, u64)> {
        self.rows
            .iter()
            .map(|r| {
                (
                    r.iteration,
                    r.train_batch_loss.to_bits(),
                    r.holdout_loss.map(f64::to_bits),
                    r.iterate_norm.to_bits(),
                )
            })
            .collect()
    }

    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record([
            "iteration",
            "train_batch_loss",
            "holdout_loss",
            "iterate_norm",
            "elapsed_seconds",
        ])?;
        for r in &self.rows {
            w.write_record([
                r.iteration.to_string(),
                r.train_batch_loss.to_string(),
                r.holdout_loss.map(|v| v.to_string()).unwrap_or_default(),
                r.iterate_norm.to_string(),
                r.elapsed_seconds.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct RunResult {
    /// The averaged iterate (SGD/SMD) or `w^ag_n` (AG/AMD).
    pub output: DenseVector,
    pub trace: RunTrace,
    pub gradient_evaluations: usize,
}

struct Driver<'a, 'o, O: ?Sized> {
    problem: Problem<'a, O>,
    config: &'o RunConfig,
    started: Instant,
    trace: RunTrace,
    evaluations: usize,
}

impl<'a, 'o, O: BatchObjective + ?Sized> Driver<'a, 'o, O> {
    fn new(problem: Problem<'a, O>, config: &'o RunConfig) -> Result<Self> {
        config.validate(problem.train.len())?;
        if let Some(z) = problem.train.first() {
            if z.features.dim() != problem.map.dim() {
                return Err(Error::DimensionMismatch {
                    expected: problem.map.dim(),
                    found: z.features.dim(),
                });
            }
        }
        Ok(Self {
            problem,
            config,
            started: Instant::now(),
            trace: RunTrace::default(),
            evaluations: 0,
        })
    }

    fn gradient(&mut self, i: usize, at: &DenseVector) -> Result<(f64, DenseVector)> {
        let b = self.config.batch_size;
        let batch = MiniBatch::new(&self.problem.train[b * (i - 1)..b * i])?;
        let (value, grad) =
            self.problem
                .objective
                .batch_value_grad(at, &batch, self.config.reduction())?;
        self.evaluations += 1;
        if !value.is_finite() || value > DIVERGENCE_THRESHOLD || !grad.is_finite() {
            return Err(Error::Diverged {
                iteration: i,
                value,
            });
        }
        Ok((value, grad))
    }

    fn record(
        &mut self,
        i: usize,
        batch_loss: f64,
        iterate: &DenseVector,
        current: impl FnOnce() -> DenseVector,
    ) -> Result<()> {
        let n = self.config.iterations;
        if !i.is_multiple_of(self.config.trace_every) && i != n {
            return Ok(());
        }
        let holdout_loss = match self.problem.holdout {
            Some(h) if !h.is_empty() => Some(self.problem.objective.mean_value(&current(), h)?),
            _ => None,
        };
        self.trace.rows.push(TraceRow {
            iteration: i,
            train_batch_loss: batch_loss,
            holdout_loss,
            iterate_norm: iterate.norm(Norm::Two),
            elapsed_seconds: self.started.elapsed().as_secs_f64(),
        });
        Ok(())
    }

    fn finish(self, output: DenseVector) -> Result<RunResult> {
        if !output.is_finite() {
            return Err(Error::Diverged {
                iteration: self.config.iterations,
                value: f64::NAN,
            });
        }
        Ok(RunResult {
            output,
            trace: self.trace,
            gradient_evaluations: self.evaluations,
        })
    }
}

type Observer<'x> = Option<&'x mut dyn FnMut(&OptimizerState)>;

fn expect_euclidean(map: &MirrorMap, name: &str) -> Result<()> {
    if map.kind() != MapKind::Euclidean {
        return Err(Error::param(format!(
            "{name} runs in Euclidean geometry only"
        )));
    }
    Ok(())
}

/// Mini-batch SGD from `w_1 = 0`; returns `(1/n) sum_{i=1}^n w_i`.
pub fn run_sgd<O: BatchObjective + ?Sized>(
    problem: Problem<'_, O>,
    schedule: &Schedule,
    config: &RunConfig,
) -> Result<RunResult> {
    run_sgd_observed(problem, schedule, config, None)
}

pub fn run_sgd_observed<O: BatchObjective + ?Sized>(
    problem: Problem<'_, O>,
    schedule: &Schedule,
    config: &RunConfig,
    mut observer: Observer<'_>,
) -> Result<RunResult> {
    expect_euclidean(problem.map, "SGD")?;
    let Schedule::SgdEta { eta } = *schedule else {
        return Err(Error::param("SGD needs an sgd_eta schedule"));
    };
    schedule.validate()?;
    let mut drv = Driver::new(problem, config)?;
    let n = config.iterations;
    let mut w = DenseVector::zeros(problem.map.dim());
    let mut sum = DenseVector::zeros(problem.map.dim());
    for i in 1..=n {
        sum.add_scaled(1.0, &w);
        let (loss, grad) = drv.gradient(i, &w)?;
        let evaluated_at = w.clone();
        w.add_scaled(-eta, &grad);
        if config.projection {
            problem.map.project_in_place(&mut w);
        }
        drv.record(i, loss, &w, || sum.scaled(1.0 / i as f64))?;
        if let Some(obs) = observer.as_mut() {
            obs(&OptimizerState {
                iteration: i,
                w: w.clone(),
                w_ag: None,
                w_md: Some(evaluated_at),
                running_sum: Some(sum.clone()),
            });
        }
    }
    sum.scale_in_place(1.0 / n as f64);
    drv.finish(sum)
}

/// Accelerated gradient from `w_1 = w^ag_1 = 0`; returns `w^ag_n`.
/// Each step queries the gradient at `w^md_i` and, by default, moves from
/// `w_i` (see [`ProxCenter`]).
pub fn run_ag<O: BatchObjective + ?Sized>(
    problem: Problem<'_, O>,
    schedule: &Schedule,
    config: &RunConfig,
) -> Result<RunResult> {
    run_ag_observed(problem, schedule, config, None)
}

pub fn run_ag_observed<O: BatchObjective + ?Sized>(
    problem: Problem<'_, O>,
    schedule: &Schedule,
    config: &RunConfig,
    mut observer: Observer<'_>,
) -> Result<RunResult> {
    expect_euclidean(problem.map, "AG")?;
    if !matches!(schedule, Schedule::AgGammaP { .. }) {
        return Err(Error::param("AG needs an ag_gamma_p schedule"));
    }
    schedule.validate()?;
    let mut drv = Driver::new(problem, config)?;
    let n = config.iterations;
    let d = problem.map.dim();
    let mut w = DenseVector::zeros(d);
    let mut w_ag = DenseVector::zeros(d);
    // w^ag_n is the value of w_ag before the last iteration's update.
    let mut output = w_ag.clone();
    for i in 1..=n {
        let (gamma_i, beta_i) = schedule.sequences(i);
        let inv = 1.0 / beta_i;
        let w_md = DenseVector::mix(inv, &w, &w_ag);
        let (loss, grad) = drv.gradient(i, &w_md)?;
        let mut next = match config.prox_center {
            ProxCenter::Iterate => w.clone(),
            ProxCenter::MdPoint => w_md.clone(),
        };
        next.add_scaled(-gamma_i, &grad);
        if config.projection {
            problem.map.project_in_place(&mut next);
        }
        w = next;
        if i == n {
            output = w_ag.clone();
        }
        w_ag = DenseVector::mix(inv, &w, &w_ag);
        drv.record(i, loss, &w, || w_ag.clone())?;
        if let Some(obs) = observer.as_mut() {
            obs(&OptimizerState {
                iteration: i,
                w: w.clone(),
                w_ag: Some(w_ag.clone()),
                w_md: Some(w_md),
                running_sum: None,
            });
        }
    }
    drv.finish(output)
}

/// Mirror descent from `w_1 = argmin R`:
/// `w_{i+1} = P(grad R*(grad R(w_i) - eta grad l_i(w_i)))`; returns the average.
pub fn run_smd<O: BatchObjective + ?Sized>(
    problem: Problem<'_, O>,
    schedule: &Schedule,
    config: &RunConfig,
) -> Result<RunResult> {
    run_smd_observed(problem, schedule, config, None)
}

pub fn run_smd_observed<O: BatchObjective + ?Sized>(
    problem: Problem<'_, O>,
    schedule: &Schedule,
    config: &RunConfig,
    mut observer: Observer<'_>,
) -> Result<RunResult> {
    let Schedule::SmdEta { eta } = *schedule else {
        return Err(Error::param("SMD needs an smd_eta schedule"));
    };
    schedule.validate()?;
    let map = problem.map;
    let mut drv = Driver::new(problem, config)?;
    let n = config.iterations;
    let mut w = map.minimizer();
    let mut sum = DenseVector::zeros(map.dim());
    for i in 1..=n {
        sum.add_scaled(1.0, &w);
        let (loss, grad) = drv.gradient(i, &w)?;
        let mut theta = map.grad_potential(&w)?;
        theta.add_scaled(-eta, &grad);
        let mut next = map.grad_conjugate(&theta)?;
        if config.projection {
            map.project_in_place(&mut next);
        }
        let evaluated_at = std::mem::replace(&mut w, next);
        drv.record(i, loss, &w, || sum.scaled(1.0 / i as f64))?;
        if let Some(obs) = observer.as_mut() {
            obs(&OptimizerState {
                iteration: i,
                w: w.clone(),
                w_ag: None,
                w_md: Some(evaluated_at),
                running_sum: Some(sum.clone()),
            });
        }
    }
    sum.scale_in_place(1.0 / n as f64);
    drv.finish(sum)
}

/// Accelerated mirror descent from `w_1 = w^ag_1 = argmin R`; returns `w^ag_n`.
/// The mirror step is `grad R*(grad R(c) - gamma_i g(w^md_i))` with centre `c`
/// chosen by [`ProxCenter`].
pub fn run_amd<O: BatchObjective + ?Sized>(
    problem: Problem<'_, O>,
    schedule: &Schedule,
    config: &RunConfig,
) -> Result<RunResult> {
    run_amd_observed(problem, schedule, config, None)
}

pub fn run_amd_observed<O: BatchObjective + ?Sized>(
    problem: Problem<'_, O>,
    schedule: &Schedule,
    config: &RunConfig,
    mut observer: Observer<'_>,
) -> Result<RunResult> {
    if !matches!(schedule, Schedule::AmdGammaP { .. }) {
        return Err(Error::param("AMD needs an amd_gamma_p schedule"));
    }
    schedule.validate()?;
    let map = problem.map;
    let mut drv = Driver::new(problem, config)?;
    let n = config.iterations;
    let mut w = map.minimizer();
    let mut w_ag = w.clone();
    let mut output = w_ag.clone();
    for i in 1..=n {
        let (gamma_i, beta_i) = schedule.sequences(i);
        let inv = 1.0 / beta_i;
        let w_md = DenseVector::mix(inv, &w, &w_ag);
        let (loss, grad) = drv.gradient(i, &w_md)?;
        let center = match config.prox_center {
            ProxCenter::Iterate => &w,
            ProxCenter::MdPoint => &w_md,
        };
        let mut theta = map.grad_potential(center)?;
        theta.add_scaled(-gamma_i, &grad);
        let mut next = map.grad_conjugate(&theta)?;
        if config.projection {
            map.project_in_place(&mut next);
        }
        w = next;
        if i == n {
            output = w_ag.clone();
        }
        w_ag = DenseVector::mix(inv, &w, &w_ag);
        drv.record(i, loss, &w, || w_ag.clone())?;
        if let Some(obs) = observer.as_mut() {
            obs(&OptimizerState {
                iteration: i,
                w: w.clone(),
                w_ag: Some(w_ag.clone()),
                w_md: Some(w_md),
                running_sum: None,
            });
        }
    }
    drv.finish(output)
}

/// Dispatches on `algorithm`.
pub fn run<O: BatchObjective + ?Sized>(
    algorithm: Algorithm,
    problem: Problem<'_, O>,
    schedule: &Schedule,
    config: &RunConfig,
) -> Result<RunResult> {
    match algorithm {
        Algorithm::Sgd => run_sgd(problem, schedule, config),
        Algorithm::Ag => run_ag(problem, schedule, config),
        Algorithm::Smd => run_smd(problem, schedule, config),
        Algorithm::Amd => run_amd(problem, schedule, config),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataio::{synthesize, SynthSpec};
    use crate::losses::LossKind;

    fn setup() -> (crate::dataio::Dataset, LossModel, MirrorMap) {
        let (d, _) = synthesize(
            SynthSpec {
                m: 256,
                dimension: 6,
                margin: 1.5,
                label_noise: 0.0,
            },
            5,
        )
        .unwrap();
        let loss = LossModel::for_examples(LossKind::SmoothedHinge, d.examples()).unwrap();
        let map = MirrorMap::euclidean(6, 10.0).unwrap();
        (d, loss, map)
    }

    #[test]
    fn zero_step_stays_at_start() {
        let (d, loss, map) = setup();
        let problem = Problem {
            objective: &loss,
            map: &map,
            train: d.examples(),
            holdout: None,
        };
        let cfg = RunConfig::new(4, 16);
        let r = run_sgd(problem, &Schedule::SgdEta { eta: 0.0 }, &cfg).unwrap();
        assert_eq!(r.output, DenseVector::zeros(6));
        let r = run_ag(problem, &Schedule::AgGammaP { gamma: 0.0, p: 0.5 }, &cfg).unwrap();
        assert_eq!(r.output, DenseVector::zeros(6));
    }

    #[test]
    fn single_iteration_average_is_start() {
        let (d, loss, map) = setup();
        let problem = Problem {
            objective: &loss,
            map: &map,
            train: d.examples(),
            holdout: None,
        };
        let r = run_sgd(
            problem,
            &Schedule::SgdEta { eta: 0.1 },
            &RunConfig::new(256, 1),
        )
        .unwrap();
        assert_eq!(r.output, DenseVector::zeros(6));
        assert_eq!(r.gradient_evaluations, 1);
    }

    #[test]
    fn first_ag_iteration_is_plain_step() {
        let (d, loss, map) = setup();
        let problem = Problem {
            objective: &loss,
            map: &map,
            train: d.examples(),
            holdout: None,
        };
        let mut states = Vec::new();
        let mut obs = |s: &OptimizerState| states.push(s.clone());
        run_ag_observed(
            problem,
            &Schedule::AgGammaP {
                gamma: 0.05,
                p: 0.5,
            },
            &RunConfig::new(8, 4),
            Some(&mut obs),
        )
        .unwrap();
        let first = &states[0];
        assert_eq!(first.w_md.as_ref().unwrap(), &DenseVector::zeros(6));
        assert_eq!(first.w_ag.as_ref().unwrap(), &first.w);
        let (_, g) = loss
            .minibatch_value_grad(
                &DenseVector::zeros(6),
                &MiniBatch::new(&d.examples()[..8]).unwrap(),
                Reduction::Deterministic,
            )
            .unwrap();
        assert_eq!(first.w, g.scaled(-0.05));
    }

    #[test]
    fn prox_centers_differ_from_third_step() {
        let (d, loss, map) = setup();
        let problem = Problem {
            objective: &loss,
            map: &map,
            train: d.examples(),
            holdout: None,
        };
        let schedule = Schedule::AgGammaP {
            gamma: 0.05,
            p: 0.5,
        };
        let states = |center| {
            let mut out = Vec::new();
            let mut obs = |s: &OptimizerState| out.push(s.clone());
            let mut cfg = RunConfig::new(8, 4);
            cfg.prox_center = center;
            run_ag_observed(problem, &schedule, &cfg, Some(&mut obs)).unwrap();
            out
        };
        let it = states(ProxCenter::Iterate);
        let md = states(ProxCenter::MdPoint);
        // beta_1 = 1 gives w^ag_2 = w_2 = w^md_2, so the first two steps agree.
        for k in 0..2 {
            assert_eq!(it[k].w, md[k].w);
        }
        let step_from = |start: &DenseVector, at: &DenseVector| {
            let (_, g) = loss
                .minibatch_value_grad(
                    at,
                    &MiniBatch::new(&d.examples()[16..24]).unwrap(),
                    Reduction::Deterministic,
                )
                .unwrap();
            let mut next = start.clone();
            next.add_scaled(-schedule.sequences(3).0, &g);
            next
        };
        assert_eq!(it[2].w, step_from(&it[1].w, it[2].w_md.as_ref().unwrap()));
        let md_point = md[2].w_md.as_ref().unwrap();
        assert_eq!(md[2].w, step_from(md_point, md_point));
        assert_ne!(it[2].w, md[2].w);
    }

    #[test]
    fn errors() {
        let (d, loss, map) = setup();
        let problem = Problem {
            objective: &loss,
            map: &map,
            train: d.examples(),
            holdout: None,
        };
        assert!(matches!(
            run_sgd(
                problem,
                &Schedule::SgdEta { eta: 0.1 },
                &RunConfig::new(16, 17)
            ),
            Err(Error::InsufficientData {
                needed: 272,
                available: 256
            })
        ));
        assert!(run_sgd(
            problem,
            &Schedule::AgGammaP { gamma: 0.1, p: 0.0 },
            &RunConfig::new(1, 1)
        )
        .is_err());
        let entropy = MirrorMap::entropy(6).unwrap();
        let p2 = Problem {
            map: &entropy,
            ..problem
        };
        assert!(run_ag(
            p2,
            &Schedule::AgGammaP { gamma: 0.1, p: 0.0 },
            &RunConfig::new(1, 1)
        )
        .is_err());
        let wrong_dim = MirrorMap::euclidean(5, 1.0).unwrap();
        let p3 = Problem {
            map: &wrong_dim,
            ..problem
        };
        assert!(run_sgd(p3, &Schedule::SgdEta { eta: 0.1 }, &RunConfig::new(1, 1)).is_err());
    }

    #[test]
    fn divergence_guard_fires() {
        let (d, _, _) = setup();
        let sq = LossModel::new(LossKind::Squared, 1.0).unwrap();
        let map = MirrorMap::euclidean(6, 1.0).unwrap();
        let problem = Problem {
            objective: &sq,
            map: &map,
            train: d.examples(),
            holdout: None,
        };
        let mut cfg = RunConfig::new(1, 256);
        cfg.projection = false;
        let err = run_sgd(problem, &Schedule::SgdEta { eta: 50.0 }, &cfg).unwrap_err();
        assert!(err.is_divergence(), "{err}");
    }

    #[test]
    fn trace_rows_follow_interval() {
        let (d, loss, map) = setup();
        let problem = Problem {
            objective: &loss,
            map: &map,
            train: d.examples(),
            holdout: Some(&d.examples()[..32]),
        };
        let mut cfg = RunConfig::new(4, 30);
        cfg.trace_every = 7;
        let r = run_ag(
            problem,
            &Schedule::AgGammaP {
                gamma: 0.01,
                p: 0.3,
            },
            &cfg,
        )
        .unwrap();
        let its: Vec<usize> = r.trace.rows.iter().map(|r| r.iteration).collect();
        assert_eq!(its, vec![7, 14, 21, 28, 30]);
        assert!(r
            .trace
            .rows
            .iter()
            .all(|r| r.holdout_loss.unwrap() >= 0.0 && r.train_batch_loss >= 0.0));
    }

    #[test]
    fn algorithm_names_roundtrip() {
        for a in [
            Algorithm::Sgd,
            Algorithm::Ag,
            Algorithm::Smd,
            Algorithm::Amd,
        ] {
            assert_eq!(a.name().parse::<Algorithm>().unwrap(), a);
        }
        assert!("adam".parse::<Algorithm>().is_err());
    }
}
