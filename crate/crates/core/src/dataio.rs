//! Labeled sparse datasets: LIBSVM text I/O, splitting, synthetic
//! generation, and margin-violation censoring.

use std::fmt;
use std::io::{BufRead, Write};

use log::warn;
use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::vectorspace::{dot, DenseVector, Operand, SparseVector};

/// Binary class label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Label {
    Positive,
    Negative,
}

impl Label {
    pub fn as_f64(self) -> f64 {
        match self {
            Label::Positive => 1.0,
            Label::Negative => -1.0,
        }
    }

    pub fn flipped(self) -> Self {
        match self {
            Label::Positive => Label::Negative,
            Label::Negative => Label::Positive,
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Label::Positive => "+1",
            Label::Negative => "-1",
        })
    }
}

/// One labeled instance `(x, y)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Example {
    pub features: SparseVector,
    pub label: Label,
}

impl Example {
    pub fn new(features: SparseVector, label: Label) -> Self {
        Self { features, label }
    }

    /// `y * w.x`
    pub fn margin(&self, w: &DenseVector) -> Result<f64> {
        Ok(self.label.as_f64() * dot(&self.features, w)?)
    }
}

/// An in-memory sample `z_1, ..., z_m`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    examples: Vec<Example>,
    dimension: usize,
    pub provenance: String,
}

impl Dataset {
    pub fn new(
        examples: Vec<Example>,
        dimension: usize,
        provenance: impl Into<String>,
    ) -> Result<Self> {
        if dimension == 0 {
            return Err(Error::param("dataset dimension must be positive"));
        }
        for (k, z) in examples.iter().enumerate() {
            if z.features.dim() != dimension {
                return Err(Error::InvalidVector(format!(
                    "example {k} has dimension {}, dataset has {dimension}",
                    z.features.dim()
                )));
            }
        }
        Ok(Self {
            examples,
            dimension,
            provenance: provenance.into(),
        })
    }

    pub fn examples(&self) -> &[Example] {
        &self.examples
    }

    pub fn into_examples(self) -> Vec<Example> {
        self.examples
    }

    pub fn dim(&self) -> usize {
        self.dimension
    }

    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }

    fn derived(&self, examples: Vec<Example>, note: &str) -> Self {
        Self {
            examples,
            dimension: self.dimension,
            provenance: format!("{} | {note}", self.provenance),
        }
    }
}

/// Result of parsing, with the number of `0` labels remapped to `-1`.
#[derive(Debug, Clone)]
pub struct Parsed {
    pub dataset: Dataset,
    pub zero_labels: usize,
}

/// Reads LIBSVM text: `label idx:val idx:val ...` per line.
///
/// Blank lines and `#` comments are skipped. Labels `+1`, `1`, `-1` and `0`
/// are accepted (`0` becomes `-1`). Explicit zero values are dropped. The
/// dimension is the largest index seen (at least 1).
pub fn parse_libsvm<R: BufRead>(reader: R, provenance: &str) -> Result<Parsed> {
    let mut rows: Vec<(Label, Vec<(usize, f64)>)> = Vec::new();
    let mut max_index = 0usize;
    let mut zero_labels = 0usize;
    for (lineno, line) in reader.lines().enumerate() {
        let lineno = lineno + 1;
        let line = line?;
        let content = match line.find('#') {
            Some(pos) => &line[..pos],
            None => &line,
        };
        let content = content.trim();
        if content.is_empty() {
            continue;
        }
        let err = |message: String| Error::Parse {
            line: lineno,
            message,
        };
        let mut tokens = content.split_ascii_whitespace();
        let label_tok = tokens.next().expect("nonempty line has a token");
        let label_val: f64 = label_tok
            .parse()
            .map_err(|_| err(format!("label '{label_tok}' is not numeric")))?;
        let label = if label_val == 1.0 {
            Label::Positive
        } else if label_val == -1.0 {
            Label::Negative
        } else if label_val == 0.0 {
            zero_labels += 1;
            Label::Negative
        } else {
            return Err(err(format!("label {label_tok} is not one of +1, -1, 0")));
        };
        let mut pairs = Vec::new();
        let mut prev = 0usize;
        for tok in tokens {
            let (idx_s, val_s) = tok
                .split_once(':')
                .ok_or_else(|| err(format!("token '{tok}' is not index:value")))?;
            let idx: usize = idx_s
                .parse()
                .map_err(|_| err(format!("index '{idx_s}' is not a positive integer")))?;
            if idx == 0 {
                return Err(err("indices are 1-based".into()));
            }
            if idx <= prev {
                return Err(err(format!("indices not increasing ({prev} then {idx})")));
            }
            prev = idx;
            let val: f64 = val_s
                .parse()
                .map_err(|_| err(format!("value '{val_s}' is not numeric")))?;
            if !val.is_finite() {
                return Err(err(format!("value '{val_s}' is not finite")));
            }
            max_index = max_index.max(idx);
            if val != 0.0 {
                pairs.push((idx, val));
            }
        }
        rows.push((label, pairs));
    }
    if rows.is_empty() {
        return Err(Error::Empty(format!("no examples in {provenance}")));
    }
    if zero_labels > 0 {
        warn!("{provenance}: {zero_labels} labels of 0 mapped to -1");
    }
    let dimension = max_index.max(1);
    let examples = rows
        .into_iter()
        .map(|(label, pairs)| Ok(Example::new(SparseVector::new(pairs, dimension)?, label)))
        .collect::<Result<Vec<_>>>()?;
    Ok(Parsed {
        dataset: Dataset::new(examples, dimension, provenance)?,
        zero_labels,
    })
}

/// Writes LIBSVM text with LF line endings and shortest round-trip floats.
pub fn write_libsvm<W: Write>(dataset: &Dataset, mut out: W) -> Result<()> {
    for z in dataset.examples() {
        write!(out, "{}", z.label)?;
        for (k, v) in z.features.iter() {
            write!(out, " {k}:{v}")?;
        }
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

/// Train / validation / test fractions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitFractions {
    pub train: f64,
    pub validation: f64,
    pub test: f64,
}

impl SplitFractions {
    /// Half for training, a quarter each for validation and test.
    pub const HALF_QUARTER_QUARTER: Self = Self {
        train: 0.5,
        validation: 0.25,
        test: 0.25,
    };
}

/// Seeded shuffle followed by a contiguous three-way split.
pub fn split(
    dataset: &Dataset,
    fractions: SplitFractions,
    seed: u64,
) -> Result<(Dataset, Dataset, Dataset)> {
    let SplitFractions {
        train,
        validation,
        test,
    } = fractions;
    let valid = |f: f64| f.is_finite() && f >= 0.0;
    let total = train + validation + test;
    if !(valid(train) && valid(validation) && valid(test)) || total <= 0.0 || total > 1.0 + 1e-12 {
        return Err(Error::param(format!(
            "split fractions must be non-negative with 0 < sum <= 1, got ({train}, {validation}, {test})"
        )));
    }
    let m = dataset.len();
    let mut order: Vec<usize> = (0..m).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let count = |f: f64| ((f * m as f64).round() as usize).min(m);
    let n_train = count(train);
    let n_val = count(validation).min(m - n_train);
    let n_test = count(test).min(m - n_train - n_val);
    let pick = |range: std::ops::Range<usize>| -> Vec<Example> {
        order[range]
            .iter()
            .map(|&k| dataset.examples[k].clone())
            .collect()
    };
    Ok((
        dataset.derived(pick(0..n_train), &format!("train split seed={seed}")),
        dataset.derived(
            pick(n_train..n_train + n_val),
            &format!("validation split seed={seed}"),
        ),
        dataset.derived(
            pick(n_train + n_val..n_train + n_val + n_test),
            &format!("test split seed={seed}"),
        ),
    ))
}

/// Parameters of the synthetic linearly separable generator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub m: usize,
    pub dimension: usize,
    pub margin: f64,
    pub label_noise: f64,
}

impl SynthSpec {
    /// Number of nonzero coordinates per instance.
    pub fn nnz(&self) -> usize {
        self.dimension.min(10)
    }

    /// Smallest accepted `|u.x|` for a unit-norm draw `x` and unit planted
    /// direction `u`, before rescaling.
    pub fn acceptance_threshold(&self) -> f64 {
        0.5 / (self.dimension as f64).sqrt()
    }
}

impl fmt::Display for SynthSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "synthetic(m={}, d={}, margin={}, noise={})",
            self.m, self.dimension, self.margin, self.label_noise
        )
    }
}

/// Draws a dataset labeled by a random unit direction `planted`.
///
/// Each instance starts as a unit-norm sparse vector. With a positive
/// margin, draws with `|planted.x|` below [`SynthSpec::acceptance_threshold`]
/// are rejected and every accepted `x` is rescaled by the same factor so
/// that `|planted.x| >= margin`. Labels are `sign(planted.x)`, then flipped
/// independently with probability `label_noise`.
pub fn synthesize(spec: SynthSpec, seed: u64) -> Result<(Dataset, DenseVector)> {
    if spec.m == 0 || spec.dimension == 0 {
        return Err(Error::param("synthesize needs m >= 1 and dimension >= 1"));
    }
    if !(0.0..=1.0).contains(&spec.label_noise) {
        return Err(Error::param(format!(
            "label noise must lie in [0, 1], got {}",
            spec.label_noise
        )));
    }
    if !spec.margin.is_finite() {
        return Err(Error::param("margin must be finite"));
    }
    let d = spec.dimension;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let planted = loop {
        let raw: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
        let n = raw.iter().map(|v| v * v).sum::<f64>().sqrt();
        if n > 0.0 {
            break DenseVector::new(raw.into_iter().map(|v| v / n).collect())?;
        }
    };
    let tau = spec.acceptance_threshold();
    let scale = if spec.margin > 0.0 {
        spec.margin / tau
    } else {
        1.0
    };
    let k = spec.nnz();
    let all: Vec<usize> = (1..=d).collect();
    let mut examples = Vec::with_capacity(spec.m);
    while examples.len() < spec.m {
        let mut idx: Vec<usize> = all.choose_multiple(&mut rng, k).copied().collect();
        idx.sort_unstable();
        let vals: Vec<f64> = (0..k).map(|_| rng.sample(StandardNormal)).collect();
        let n = vals.iter().map(|v| v * v).sum::<f64>().sqrt();
        if n == 0.0 || vals.contains(&0.0) {
            continue;
        }
        let x = SparseVector::new(idx.into_iter().zip(vals.iter().map(|v| v / n)).collect(), d)?;
        let s = x.dot_unchecked(planted.as_slice());
        if spec.margin > 0.0 && s.abs() < tau {
            continue;
        }
        let mut label = if s >= 0.0 {
            Label::Positive
        } else {
            Label::Negative
        };
        if spec.label_noise > 0.0 && rng.random::<f64>() < spec.label_noise {
            label = label.flipped();
        }
        let x = if scale != 1.0 { x.scaled(scale)? } else { x };
        examples.push(Example::new(x, label));
    }
    Ok((Dataset::new(examples, d, spec.to_string())?, planted))
}

/// Keeps exactly the examples with `y * predictor.x >= 1`, in order.
pub fn censor(dataset: &Dataset, predictor: &DenseVector) -> Result<Dataset> {
    let mut kept = Vec::new();
    for z in dataset.examples() {
        if z.margin(predictor)? >= 1.0 {
            kept.push(z.clone());
        }
    }
    if kept.is_empty() {
        return Err(Error::Empty(
            "censoring removed every example; train a better predictor".into(),
        ));
    }
    let removed = dataset.len() - kept.len();
    Ok(dataset.derived(kept, &format!("censored ({removed} removed)")))
}

/// Smallest `y * w.x` over the dataset.
pub fn min_margin(dataset: &Dataset, w: &DenseVector) -> Result<f64> {
    dataset
        .examples()
        .iter()
        .map(|z| z.margin(w))
        .try_fold(f64::INFINITY, |acc, m| m.map(|m| acc.min(m)))
}
