use std::fs::File;
use std::io::BufReader;
use std::time::Instant;

use log::{info, warn};
use rayon::prelude::*;

use super::table::{ResultRow, ResultTable, TraceRecord};
use super::{DataSource, ExperimentSpec, ExponentRule, StepSizeMode, Sweep};
use crate::dataio::{parse_libsvm, split, synthesize, Dataset, Example, SplitFractions};
use crate::error::{Error, Result};
use crate::geometry::{MapKind, MirrorMap};
use crate::losses::{estimate_h, misclassification, LossModel};
use crate::optimizers::{run, Algorithm, Problem, RunConfig};
use crate::schedules::{
    ag_gamma, ag_p, ag_p_simple, grid_select, precondition_warnings, sgd_eta, smd_eta, Comparator,
    ProblemParams, Schedule,
};
use crate::vectorspace::{DenseVector, Norm};

/// Note attached to the sweep-p rows run at `ln b / (2 ln(n-1))`.
pub const THEORETICAL_P_NOTE: &str = "theoretical_p";

fn load(spec: &ExperimentSpec) -> Result<(Dataset, Option<DenseVector>)> {
    match &spec.data {
        DataSource::File { path } => {
            let file = File::open(path)?;
            let parsed = parse_libsvm(BufReader::new(file), &path.display().to_string())?;
            Ok((parsed.dataset, None))
        }
        DataSource::Synthetic(s) => {
            let (d, planted) = synthesize(*s, spec.data_seed)?;
            Ok((d, Some(planted)))
        }
    }
}

/// Reference predictor used for `|w*|` and `L(w*)` when they are not given:
/// a predictor file, else the planted direction rescaled to unit margin.
fn reference_predictor(
    spec: &ExperimentSpec,
    data: &Dataset,
    planted: Option<DenseVector>,
) -> Result<Option<DenseVector>> {
    if let Some(path) = &spec.comparator.predictor {
        let w: DenseVector = serde_json::from_reader(BufReader::new(File::open(path)?))?;
        if w.dim() != data.dim() {
            return Err(Error::DimensionMismatch {
                expected: data.dim(),
                found: w.dim(),
            });
        }
        return Ok(Some(w));
    }
    let Some(u) = planted else { return Ok(None) };
    let mut smallest = f64::INFINITY;
    for z in data.examples() {
        smallest = smallest.min(z.margin(&u)?.abs());
    }
    if !(smallest > 0.0 && smallest.is_finite()) {
        return Ok(None);
    }
    Ok(Some(u.scaled(1.0 / smallest)))
}

struct Constants {
    loss: LossModel,
    dimension: usize,
    // Euclidean comparator
    l_star: f64,
    w_star_norm_sq: f64,
    radius: f64,
}

fn resolve(
    spec: &ExperimentSpec,
    data: &Dataset,
    planted: Option<DenseVector>,
) -> Result<Constants> {
    let over = &spec.comparator;
    let h = match over.smoothness {
        Some(h) => h,
        None => estimate_h(spec.loss, data.examples())?,
    };
    let loss = LossModel::new(spec.loss, h)?;
    let needs_ref = over.l_star.is_none() || over.w_star_norm.is_none();
    let reference = if needs_ref {
        reference_predictor(spec, data, planted)?
    } else {
        None
    };
    let missing = || {
        Error::param(
            "cannot derive |w*| and L(w*): pass them explicitly, a predictor file, or use synthetic data",
        )
    };
    let w_star_norm = match (over.w_star_norm, &reference) {
        (Some(v), _) => v,
        (None, Some(w)) => w.norm(Norm::Two),
        (None, None) => return Err(missing()),
    };
    let l_star = match (over.l_star, &reference) {
        (Some(v), _) => v,
        (None, Some(w)) => loss.mean_loss(w, data.examples())?,
        (None, None) => return Err(missing()),
    };
    let radius = over.radius.unwrap_or(w_star_norm);
    if !(radius.is_finite() && radius > 0.0) {
        return Err(Error::param(format!(
            "radius D must be positive, got {radius}"
        )));
    }
    info!("constants: H = {h}, |w*| = {w_star_norm}, L(w*) = {l_star}, D = {radius}");
    Ok(Constants {
        loss,
        dimension: data.dim(),
        l_star,
        w_star_norm_sq: w_star_norm * w_star_norm,
        radius,
    })
}

struct SeedData {
    seed: u64,
    train: Vec<Example>,
    validation: Vec<Example>,
    test: Vec<Example>,
}

fn prepare_seed(data: &Dataset, seed: u64, m: usize) -> Result<SeedData> {
    let (train, validation, test) = split(data, SplitFractions::HALF_QUARTER_QUARTER, seed)?;
    if train.len() < m {
        return Err(Error::InsufficientData {
            needed: m,
            available: train.len(),
        });
    }
    if validation.is_empty() || test.is_empty() {
        return Err(Error::Empty("validation or test split".into()));
    }
    let mut train = train.into_examples();
    train.truncate(m);
    Ok(SeedData {
        seed,
        train,
        validation: validation.into_examples(),
        test: test.into_examples(),
    })
}

struct Cell {
    algorithm: Algorithm,
    b: usize,
    p: Option<f64>,
    seed_index: usize,
    note: String,
}

struct Context<'a> {
    spec: &'a ExperimentSpec,
    constants: Constants,
    seeds: Vec<SeedData>,
}

impl Context<'_> {
    fn geometry(
        &self,
        algorithm: Algorithm,
        b: usize,
        n: usize,
    ) -> Result<(MirrorMap, ProblemParams)> {
        let c = &self.constants;
        let entropy = matches!(algorithm, Algorithm::Smd | Algorithm::Amd)
            && self.spec.mirror == MapKind::Entropy;
        if entropy {
            let map = MirrorMap::entropy(c.dimension)?;
            let l_star =
                self.spec.comparator.l_star.ok_or_else(|| {
                    Error::param("entropy geometry needs an explicit L(w*) (l_star)")
                })?;
            let params = ProblemParams {
                smoothness: c.loss.smoothness(),
                batch_size: b,
                iterations: n,
                l_star,
                comparator: Comparator::Potential((c.dimension as f64).ln()),
                radius: 1.0,
                k: map.constant_k(),
            };
            Ok((map, params))
        } else {
            let map = MirrorMap::euclidean(c.dimension, c.radius)?;
            let params = ProblemParams {
                smoothness: c.loss.smoothness(),
                batch_size: b,
                iterations: n,
                l_star: c.l_star,
                comparator: Comparator::NormSq(c.w_star_norm_sq),
                radius: c.radius,
                k: 1.0,
            };
            Ok((map, params))
        }
    }

    fn exponent(&self, b: usize, n: usize) -> Result<f64> {
        match self.spec.exponent {
            ExponentRule::Balanced => ag_p(b, n),
            ExponentRule::Simple => ag_p_simple(b, n),
            ExponentRule::Fixed { p } => Ok(p),
        }
    }

    fn theoretical(
        &self,
        algorithm: Algorithm,
        params: &ProblemParams,
        p: Option<f64>,
    ) -> Result<Schedule> {
        let form = self.spec.gamma_form;
        let (b, n) = (params.batch_size, params.iterations);
        Ok(match algorithm {
            Algorithm::Sgd => Schedule::SgdEta {
                eta: sgd_eta(params)?,
            },
            Algorithm::Smd => Schedule::SmdEta {
                eta: smd_eta(params)?,
            },
            Algorithm::Ag | Algorithm::Amd => {
                let p = match p {
                    Some(p) => p,
                    None => self.exponent(b, n)?,
                };
                let gamma = ag_gamma(params, p, form)?;
                if algorithm == Algorithm::Ag {
                    Schedule::AgGammaP { gamma, p }
                } else {
                    Schedule::AmdGammaP { gamma, p }
                }
            }
        })
    }

    fn run_cell(&self, cell: &Cell) -> Result<(ResultRow, Vec<TraceRecord>)> {
        let started = Instant::now();
        let data = &self.seeds[cell.seed_index];
        let n = self.spec.fixed_m / cell.b;
        let (map, params) = self.geometry(cell.algorithm, cell.b, n)?;
        if cell.seed_index == 0 && cell.algorithm.is_accelerated() {
            for w in precondition_warnings(&params) {
                warn!("{} b={}: {w}", cell.algorithm, cell.b);
            }
        }
        let base = self.theoretical(cell.algorithm, &params, cell.p)?;
        let loss = &self.constants.loss;
        let mut config = RunConfig::new(cell.b, n);
        config.seed = data.seed;
        config.projection = self.spec.projection;
        config.prox_center = self.spec.prox_center;
        config.deterministic_reduction = self.spec.deterministic;
        config.trace_every = n;
        let quiet = Problem {
            objective: loss,
            map: &map,
            train: &data.train,
            holdout: None,
        };

        let schedule = match &self.spec.step_size_mode {
            StepSizeMode::Theoretical => base,
            StepSizeMode::Grid { multipliers } => {
                let evaluate = |s: &Schedule| {
                    run(cell.algorithm, quiet, s, &config)
                        .and_then(|r| loss.mean_loss(&r.output, &data.validation))
                        .unwrap_or(f64::INFINITY)
                };
                grid_select(&base, multipliers, evaluate)?.0
            }
        };

        let mut problem = quiet;
        if let Some(k) = self.spec.trace_every {
            config.trace_every = k;
            problem.holdout = Some(&data.validation);
        }
        let result = run(cell.algorithm, problem, &schedule, &config)?;
        let w = &result.output;
        let p = schedule.exponent();
        let row = ResultRow {
            algorithm: cell.algorithm,
            b: cell.b,
            n,
            p,
            step_size: schedule.magnitude(),
            seed: data.seed,
            final_train_loss: loss.mean_loss(w, &data.train)?,
            test_loss: loss.mean_loss(w, &data.test)?,
            test_misclassification: misclassification(w, &data.test)?,
            wall_seconds: started.elapsed().as_secs_f64(),
            note: cell.note.clone(),
        };
        let traces = if self.spec.trace_every.is_some() {
            result
                .trace
                .rows
                .iter()
                .map(|t| TraceRecord {
                    algorithm: cell.algorithm,
                    b: cell.b,
                    p,
                    seed: data.seed,
                    iteration: t.iteration,
                    train_batch_loss: t.train_batch_loss,
                    holdout_loss: t.holdout_loss,
                    iterate_norm: t.iterate_norm,
                })
                .collect()
        } else {
            Vec::new()
        };
        Ok((row, traces))
    }
}

fn context(spec: &ExperimentSpec) -> Result<Context<'_>> {
    spec.validate()?;
    let (data, planted) = load(spec)?;
    let constants = resolve(spec, &data, planted)?;
    let seeds: Vec<SeedData> = spec
        .seeds
        .par_iter()
        .map(|&s| prepare_seed(&data, s, spec.fixed_m))
        .collect::<Result<_>>()?;
    let train_len =
        (SplitFractions::HALF_QUARTER_QUARTER.train * data.len() as f64).round() as usize;
    let spare = train_len.saturating_sub(spec.fixed_m);
    if spare > 0 {
        warn!(
            "{spare} training examples beyond fixed_m = {} are left unused",
            spec.fixed_m
        );
    }
    Ok(Context {
        spec,
        constants,
        seeds,
    })
}

fn execute(spec: &ExperimentSpec, ctx: &Context<'_>, cells: Vec<Cell>) -> Result<ResultTable> {
    // Cells run concurrently; `collect` keeps them in canonical order.
    let done: Vec<(ResultRow, Vec<TraceRecord>)> = cells
        .par_iter()
        .map(|c| ctx.run_cell(c))
        .collect::<Result<_>>()?;
    let mut table = ResultTable {
        deterministic: spec.deterministic,
        ..ResultTable::default()
    };
    for (row, traces) in done {
        table.rows.push(row);
        table.traces.extend(traces);
    }
    if let Some(path) = &spec.output_path {
        for p in table.write_files(path)? {
            info!("wrote {}", p.display());
        }
    }
    Ok(table)
}

fn grid_cells(spec: &ExperimentSpec, sizes: &[usize]) -> Vec<Cell> {
    let mut cells = Vec::new();
    for &algorithm in &spec.algorithms {
        for &b in sizes {
            for seed_index in 0..spec.seeds.len() {
                cells.push(Cell {
                    algorithm,
                    b,
                    p: None,
                    seed_index,
                    note: String::new(),
                });
            }
        }
    }
    cells
}

/// Runs every algorithm once per seed at `spec.batch_size`.
pub fn cmd_train(spec: &ExperimentSpec) -> Result<ResultTable> {
    let mut single = spec.clone();
    single.sweep = Sweep::None;
    let ctx = context(&single)?;
    execute(&single, &ctx, grid_cells(&single, &[single.batch_size]))
}

/// One run per `(algorithm, b, seed)` with `n = fixed_m / b`.
pub fn cmd_sweep_b(spec: &ExperimentSpec) -> Result<ResultTable> {
    let Sweep::BatchSizes { batch_sizes } = &spec.sweep else {
        return Err(Error::param("sweep-b needs a batch_sizes sweep"));
    };
    let ctx = context(spec)?;
    execute(spec, &ctx, grid_cells(spec, batch_sizes))
}

/// Accelerated runs at every listed `p`, plus the row at the theoretical
/// exponent `ln b / (2 ln(n-1))`, marked with [`THEORETICAL_P_NOTE`].
pub fn cmd_sweep_p(spec: &ExperimentSpec) -> Result<ResultTable> {
    let Sweep::PValues {
        p_values,
        batch_sizes,
    } = &spec.sweep
    else {
        return Err(Error::param("sweep-p needs a p_values sweep"));
    };
    if let Some(a) = spec.algorithms.iter().find(|a| !a.is_accelerated()) {
        return Err(Error::param(format!(
            "sweep-p applies to accelerated methods only, got {a}"
        )));
    }
    let ctx = context(spec)?;
    let mut cells = Vec::new();
    for &algorithm in &spec.algorithms {
        for &b in batch_sizes {
            let theory = ag_p_simple(b, spec.fixed_m / b)?;
            let mut ps: Vec<(f64, &str)> = p_values
                .iter()
                .map(|&p| (p, if p == theory { THEORETICAL_P_NOTE } else { "" }))
                .collect();
            if !p_values.contains(&theory) {
                ps.push((theory, THEORETICAL_P_NOTE));
            }
            for (p, note) in ps {
                for seed_index in 0..spec.seeds.len() {
                    cells.push(Cell {
                        algorithm,
                        b,
                        p: Some(p),
                        seed_index,
                        note: note.to_string(),
                    });
                }
            }
        }
    }
    execute(spec, &ctx, cells)
}
