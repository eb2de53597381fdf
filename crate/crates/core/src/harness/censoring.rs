use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataio::{censor, parse_libsvm, write_libsvm, Dataset, Example};
use crate::error::{Error, Result};
use crate::geometry::MirrorMap;
use crate::losses::{estimate_h, LossKind, LossModel};
use crate::optimizers::{run_ag, Problem, RunConfig};
use crate::schedules::{ag_p, Schedule};
use crate::vectorspace::DenseVector;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CensorSummary {
    pub input_examples: usize,
    pub kept: usize,
    pub removed: usize,
    pub removed_fraction: f64,
    pub budget_epochs: usize,
    /// Mean smoothed-hinge loss of the predictor on the input.
    pub predictor_loss: f64,
    /// Mean loss of the predictor on the censored output; zero by construction.
    pub post_censor_loss: f64,
    pub output: Option<PathBuf>,
    pub predictor_path: Option<PathBuf>,
}

/// Trains an unconstrained serial AG predictor (`b = 1`, `gamma = 1/(4H)`)
/// for `budget` shuffled passes over `data` and drops every example it does
/// not classify with margin at least 1.
pub fn censor_with_budget(
    data: &Dataset,
    budget: usize,
    seed: u64,
) -> Result<(Dataset, DenseVector, CensorSummary)> {
    if budget == 0 {
        return Err(Error::param("censoring budget must be at least one epoch"));
    }
    let loss = LossModel::new(
        LossKind::SmoothedHinge,
        estimate_h(LossKind::SmoothedHinge, data.examples())?,
    )?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut stream: Vec<Example> = Vec::with_capacity(budget * data.len());
    let mut order: Vec<usize> = (0..data.len()).collect();
    for _ in 0..budget {
        order.shuffle(&mut rng);
        stream.extend(order.iter().map(|&k| data.examples()[k].clone()));
    }
    // At a fixed number of examples the serial method reaches the lowest loss.
    let (b, n) = (1, stream.len());
    if n < 3 {
        return Err(Error::InsufficientData {
            needed: 3,
            available: stream.len(),
        });
    }
    let map = MirrorMap::euclidean(data.dim(), f64::MAX)?;
    let schedule = Schedule::AgGammaP {
        gamma: 0.25 / loss.smoothness(),
        p: ag_p(b, n)?,
    };
    let mut config = RunConfig::new(b, n);
    config.seed = seed;
    config.projection = false;
    config.trace_every = n;
    let problem = Problem {
        objective: &loss,
        map: &map,
        train: &stream,
        holdout: None,
    };
    let predictor = run_ag(problem, &schedule, &config)?.output;
    let censored = censor(data, &predictor)?;
    let removed = data.len() - censored.len();
    let summary = CensorSummary {
        input_examples: data.len(),
        kept: censored.len(),
        removed,
        removed_fraction: removed as f64 / data.len() as f64,
        budget_epochs: budget,
        predictor_loss: loss.mean_loss(&predictor, data.examples())?,
        post_censor_loss: loss.mean_loss(&predictor, censored.examples())?,
        output: None,
        predictor_path: None,
    };
    Ok((censored, predictor, summary))
}

/// Path of the predictor written next to a censored output file.
pub fn predictor_path(output: &Path) -> PathBuf {
    let mut s = output.as_os_str().to_owned();
    s.push(".predictor.json");
    PathBuf::from(s)
}

/// Reads `input`, censors it and writes the LIBSVM result to `output` and
/// the predictor as a JSON array to `<output>.predictor.json`.
pub fn cmd_censor(input: &Path, output: &Path, budget: usize, seed: u64) -> Result<CensorSummary> {
    let parsed = parse_libsvm(
        BufReader::new(File::open(input)?),
        &input.display().to_string(),
    )?;
    let (censored, predictor, mut summary) = censor_with_budget(&parsed.dataset, budget, seed)?;
    let mut out = BufWriter::new(File::create(output)?);
    write_libsvm(&censored, &mut out)?;
    out.flush()?;
    let ppath = predictor_path(output);
    let mut pf = BufWriter::new(File::create(&ppath)?);
    serde_json::to_writer(&mut pf, &predictor)?;
    pf.flush()?;
    summary.output = Some(output.to_path_buf());
    summary.predictor_path = Some(ppath);
    Ok(summary)
}
