//! `minibatch`: training runs, batch-size and exponent sweeps, censoring,
//! bound reports and Monte Carlo checks from the command line.
//!
//! Exit codes: 0 on success, 1 on invalid input or any other error, 2 when
//! an optimizer diverges.

use std::fs::{self, File};
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use log::info;
use minibatch_core::dataio::{parse_libsvm, write_libsvm};
use minibatch_core::harness::{
    cmd_bounds, cmd_censor, cmd_sweep_b, cmd_sweep_p, cmd_train, cmd_verify, BoundsRequest,
    ComparatorSpec, ExponentRule, DEFAULT_GRID,
};
use minibatch_core::schedules::GammaForm;
use minibatch_core::{
    Algorithm, DataSource, ExperimentSpec, LossKind, MapKind, ProxCenter, ResultTable,
    StepSizeMode, Sweep, SynthSpec,
};

#[derive(Parser, Debug)]
#[command(
    name = "minibatch",
    version,
    about = "Mini-batch SGD and accelerated gradient experiments"
)]
struct Cli {
    /// Worker threads for mini-batch gradients and independent runs.
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Log progress and derived constants to stderr.
    #[arg(short, long, global = true)]
    verbose: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Train each algorithm once per seed at a single batch size.
    Train(ExperimentArgs),
    /// Sweep the batch size at a fixed number of training examples m = n b.
    SweepB(ExperimentArgs),
    /// Sweep the step-size growth exponent p of the accelerated methods.
    SweepP(ExperimentArgs),
    /// Remove the examples a trained predictor does not separate with margin 1.
    Censor(CensorArgs),
    /// Evaluate the convergence bounds and speedup regimes.
    Bounds(BoundsArgs),
    /// Monte Carlo checks of the variance, self-bounding and admissibility properties.
    Verify(VerifyArgs),
    /// Parse a LIBSVM file and write it back in canonical form.
    Convert(ConvertArgs),
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum StepMode {
    Theoretical,
    Grid,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum Exponent {
    Balanced,
    Simple,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum Loss {
    SmoothedHinge,
    Squared,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum Mirror {
    Euclidean,
    Entropy,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum Gamma {
    General,
    EuclideanVariant,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum Center {
    Iterate,
    MdPoint,
}

#[derive(Args, Debug)]
struct ExperimentArgs {
    /// JSON experiment spec; other flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    /// LIBSVM data file.
    #[arg(long, conflicts_with = "synthesize")]
    data: Option<PathBuf>,
    /// Synthetic data as m,d,margin,noise.
    #[arg(long, value_name = "M,D,MARGIN,NOISE")]
    synthesize: Option<String>,
    /// Seed of the synthetic generator.
    #[arg(long)]
    data_seed: Option<u64>,
    /// Algorithms to run (sgd, ag, smd, amd).
    #[arg(long, value_delimiter = ',')]
    algo: Vec<Algorithm>,
    /// Batch size, or the list of batch sizes to sweep.
    #[arg(long, value_delimiter = ',')]
    b: Vec<usize>,
    /// Training examples per run, m = n b.
    #[arg(long)]
    m: Option<usize>,
    /// Exponents for sweep-p, or a single fixed exponent elsewhere.
    #[arg(long, value_delimiter = ',')]
    p: Vec<f64>,
    /// Seeds; each picks a split and a training order.
    #[arg(long, value_delimiter = ',')]
    seeds: Vec<u64>,
    #[arg(long, value_enum)]
    step_mode: Option<StepMode>,
    /// Grid multipliers of the theoretical step size (implies --step-mode grid).
    #[arg(long, value_delimiter = ',')]
    grid: Vec<f64>,
    /// Rule for the growth exponent when --p is not given.
    #[arg(long, value_enum)]
    exponent: Option<Exponent>,
    #[arg(long, value_enum)]
    gamma_form: Option<Gamma>,
    #[arg(long, value_enum)]
    loss: Option<Loss>,
    /// Geometry of smd and amd.
    #[arg(long, value_enum)]
    mirror: Option<Mirror>,
    /// Start of the accelerated prox step.
    #[arg(long, value_enum)]
    prox_center: Option<Center>,
    #[arg(long)]
    smoothness: Option<f64>,
    #[arg(long)]
    l_star: Option<f64>,
    #[arg(long)]
    w_star_norm: Option<f64>,
    #[arg(long)]
    radius: Option<f64>,
    /// Reference predictor (JSON array), e.g. written by `censor`.
    #[arg(long)]
    predictor: Option<PathBuf>,
    #[arg(long)]
    no_projection: bool,
    /// Order-fixed reductions and zeroed timings in the result file.
    #[arg(long, num_args = 0..=1, default_missing_value = "true", value_name = "BOOL")]
    deterministic: Option<bool>,
    /// Result CSV; summary, trace and timing files are written beside it.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Record a trace row every k iterations.
    #[arg(long)]
    trace_every: Option<usize>,
}

#[derive(Args, Debug)]
struct CensorArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Training passes over the data.
    #[arg(long, default_value_t = 20)]
    budget: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args, Debug)]
struct BoundsArgs {
    #[arg(long = "h")]
    smoothness: f64,
    #[arg(long)]
    b: usize,
    #[arg(long)]
    n: usize,
    #[arg(long)]
    l_star: f64,
    #[arg(long)]
    w_star_norm: f64,
    #[arg(long)]
    radius: Option<f64>,
    #[arg(long)]
    k: Option<f64>,
    /// Potential value R(w*) for mirror-map bounds.
    #[arg(long)]
    r_star: Option<f64>,
    /// Sample size for the regime tables (default n b).
    #[arg(long)]
    m: Option<f64>,
    /// Target suboptimality (default: the SGD bound).
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long)]
    json: bool,
}

#[derive(Args, Debug)]
struct VerifyArgs {
    #[arg(long, default_value_t = 100_000)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    json: bool,
}

#[derive(Args, Debug)]
struct ConvertArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

fn parse_synth(text: &str) -> Result<SynthSpec> {
    let parts: Vec<&str> = text.split(',').map(str::trim).collect();
    let [m, d, margin, noise] = parts[..] else {
        bail!("--synthesize expects m,d,margin,noise, got '{text}'");
    };
    Ok(SynthSpec {
        m: m.parse().context("synthetic m")?,
        dimension: d.parse().context("synthetic d")?,
        margin: margin.parse().context("synthetic margin")?,
        label_noise: noise.parse().context("synthetic noise")?,
    })
}

#[derive(Clone, Copy, PartialEq)]
enum Mode {
    Train,
    SweepB,
    SweepP,
}

fn build_spec(a: &ExperimentArgs, mode: Mode) -> Result<ExperimentSpec> {
    let mut spec = match &a.config {
        Some(path) => {
            let text =
                fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            serde_json::from_str::<ExperimentSpec>(&text)
                .with_context(|| format!("parsing {}", path.display()))?
        }
        None => {
            let data = match (&a.data, &a.synthesize) {
                (Some(p), None) => DataSource::File { path: p.clone() },
                (None, Some(s)) => DataSource::Synthetic(parse_synth(s)?),
                _ => bail!("give exactly one of --data, --synthesize or --config"),
            };
            let Some(m) = a.m else {
                bail!("--m is required without --config")
            };
            let mut spec = ExperimentSpec::new(data, Algorithm::Sgd, m, 1);
            if mode == Mode::SweepB {
                spec.exponent = ExponentRule::Simple;
            }
            spec
        }
    };
    if let Some(p) = &a.data {
        spec.data = DataSource::File { path: p.clone() };
    }
    if let Some(s) = &a.synthesize {
        spec.data = DataSource::Synthetic(parse_synth(s)?);
    }
    if let Some(s) = a.data_seed {
        spec.data_seed = s;
    }
    if !a.algo.is_empty() {
        spec.algorithms = a.algo.clone();
    } else if a.config.is_none() && mode == Mode::SweepP {
        spec.algorithms = vec![Algorithm::Ag];
    }
    if let Some(m) = a.m {
        spec.fixed_m = m;
    }
    if !a.seeds.is_empty() {
        spec.seeds = a.seeds.clone();
    }
    match mode {
        Mode::Train => {
            if a.b.len() > 1 {
                bail!("train takes a single --b; use sweep-b for a list");
            }
            if let Some(&b) = a.b.first() {
                spec.batch_size = b;
            }
            spec.sweep = Sweep::None;
        }
        Mode::SweepB => {
            if !a.b.is_empty() {
                spec.sweep = Sweep::BatchSizes {
                    batch_sizes: a.b.clone(),
                };
            }
        }
        Mode::SweepP => {
            let (p_values, batch_sizes) = match &spec.sweep {
                Sweep::PValues {
                    p_values,
                    batch_sizes,
                } => (p_values.clone(), batch_sizes.clone()),
                _ => (Vec::new(), vec![spec.batch_size]),
            };
            spec.sweep = Sweep::PValues {
                p_values: if a.p.is_empty() {
                    p_values
                } else {
                    a.p.clone()
                },
                batch_sizes: if a.b.is_empty() {
                    batch_sizes
                } else {
                    a.b.clone()
                },
            };
        }
    }
    if mode != Mode::SweepP {
        match a.p[..] {
            [] => {}
            [p] => spec.exponent = ExponentRule::Fixed { p },
            _ => bail!("a list of --p values needs sweep-p"),
        }
    }
    if let Some(e) = a.exponent {
        spec.exponent = match e {
            Exponent::Balanced => ExponentRule::Balanced,
            Exponent::Simple => ExponentRule::Simple,
        };
    }
    match (a.step_mode, a.grid.is_empty()) {
        (Some(StepMode::Theoretical), false) => bail!("--grid needs --step-mode grid"),
        (Some(StepMode::Theoretical), true) => spec.step_size_mode = StepSizeMode::Theoretical,
        (Some(StepMode::Grid), true) => {
            spec.step_size_mode = StepSizeMode::Grid {
                multipliers: DEFAULT_GRID.to_vec(),
            }
        }
        (_, false) => {
            spec.step_size_mode = StepSizeMode::Grid {
                multipliers: a.grid.clone(),
            }
        }
        (None, true) => {}
    }
    if let Some(g) = a.gamma_form {
        spec.gamma_form = match g {
            Gamma::General => GammaForm::General,
            Gamma::EuclideanVariant => GammaForm::EuclideanVariant,
        };
    }
    if let Some(l) = a.loss {
        spec.loss = match l {
            Loss::SmoothedHinge => LossKind::SmoothedHinge,
            Loss::Squared => LossKind::Squared,
        };
    }
    if let Some(m) = a.mirror {
        spec.mirror = match m {
            Mirror::Euclidean => MapKind::Euclidean,
            Mirror::Entropy => MapKind::Entropy,
        };
    }
    if let Some(c) = a.prox_center {
        spec.prox_center = match c {
            Center::Iterate => ProxCenter::Iterate,
            Center::MdPoint => ProxCenter::MdPoint,
        };
    }
    let c = &mut spec.comparator;
    let overrides = ComparatorSpec {
        smoothness: a.smoothness.or(c.smoothness),
        l_star: a.l_star.or(c.l_star),
        w_star_norm: a.w_star_norm.or(c.w_star_norm),
        radius: a.radius.or(c.radius),
        predictor: a.predictor.clone().or(c.predictor.take()),
    };
    spec.comparator = overrides;
    if a.no_projection {
        spec.projection = false;
    }
    if let Some(d) = a.deterministic {
        spec.deterministic = d;
    }
    if let Some(path) = &a.out {
        spec.output_path = Some(path.clone());
    }
    if let Some(k) = a.trace_every {
        spec.trace_every = Some(k);
    }
    spec.validate()?;
    Ok(spec)
}

fn print_table(table: &ResultTable, wrote_files: bool) -> Result<()> {
    let stdout = io::stdout();
    let mut out = stdout.lock();
    if wrote_files {
        table.write_summary_csv(&mut out)?;
    } else {
        table.write_csv(&mut out)?;
    }
    Ok(())
}

fn experiment(a: &ExperimentArgs, mode: Mode) -> Result<()> {
    let spec = build_spec(a, mode)?;
    let table = match mode {
        Mode::Train => cmd_train(&spec)?,
        Mode::SweepB => cmd_sweep_b(&spec)?,
        Mode::SweepP => cmd_sweep_p(&spec)?,
    };
    print_table(&table, spec.output_path.is_some())
}

fn censor(a: &CensorArgs) -> Result<()> {
    let summary = cmd_censor(&a.data, &a.out, a.budget, a.seed)?;
    println!("{}", serde_json::to_string_pretty(&summary)?);
    Ok(())
}

fn bounds(a: &BoundsArgs) -> Result<()> {
    let request = BoundsRequest {
        smoothness: a.smoothness,
        batch_size: a.b,
        iterations: a.n,
        l_star: a.l_star,
        w_star_norm: a.w_star_norm,
        radius: a.radius,
        k: a.k,
        r_star: a.r_star,
        sample_size: a.m,
        epsilon: a.epsilon,
    };
    let out = cmd_bounds(&request)?;
    if a.json {
        println!("{}", serde_json::to_string_pretty(&out)?);
    } else {
        print!("{}", out.render_text());
    }
    Ok(())
}

fn verify(a: &VerifyArgs) -> Result<bool> {
    let report = cmd_verify(a.trials, a.seed)?;
    if a.json {
        println!("{}", serde_json::to_string_pretty(&report)?);
    } else {
        println!("{report}");
    }
    Ok(report.passed)
}

fn convert(input: &Path, output: &Path) -> Result<()> {
    let file = File::open(input).with_context(|| format!("opening {}", input.display()))?;
    let parsed = parse_libsvm(BufReader::new(file), &input.display().to_string())?;
    let mut out = BufWriter::new(
        File::create(output).with_context(|| format!("creating {}", output.display()))?,
    );
    write_libsvm(&parsed.dataset, &mut out)?;
    out.flush()?;
    info!(
        "wrote {} examples in {} dimensions to {}",
        parsed.dataset.len(),
        parsed.dataset.dim(),
        output.display()
    );
    Ok(())
}

fn dispatch(cli: &Cli) -> Result<ExitCode> {
    match &cli.command {
        Command::Train(a) => experiment(a, Mode::Train)?,
        Command::SweepB(a) => experiment(a, Mode::SweepB)?,
        Command::SweepP(a) => experiment(a, Mode::SweepP)?,
        Command::Censor(a) => censor(a)?,
        Command::Bounds(a) => bounds(a)?,
        Command::Verify(a) => {
            // A failed check is report content, not an error.
            verify(a)?;
        }
        Command::Convert(a) => convert(&a.data, &a.out)?,
    }
    Ok(ExitCode::SUCCESS)
}

fn exit_code(err: &anyhow::Error) -> u8 {
    let diverged = err.chain().any(|e| {
        e.downcast_ref::<minibatch_core::Error>()
            .is_some_and(|e| e.is_divergence())
    });
    if diverged {
        2
    } else {
        1
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let level = if cli.verbose { "info" } else { "warn" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
        {
            eprintln!("error: cannot start {n} threads: {e}");
            return ExitCode::from(1);
        }
    }
    match dispatch(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
