//! Property tests for the invariants each module promises.

use std::io::Cursor;
use std::sync::Mutex;

use minibatch_core::analysis::evaluate_bounds;
use minibatch_core::dataio::{
    censor, parse_libsvm, split, synthesize, write_libsvm, Dataset, Example, Label, SplitFractions,
    SynthSpec,
};
use minibatch_core::geometry::MirrorMap;
use minibatch_core::losses::{LossKind, LossModel, MiniBatch, Reduction};
use minibatch_core::optimizers::{run, Algorithm, BatchObjective, Problem, RunConfig, RunResult};
use minibatch_core::schedules::{
    ag_gamma, ag_p, sgd_eta, smd_eta, validate_admissibility, Comparator, GammaForm, ProblemParams,
    Schedule,
};
use minibatch_core::vectorspace::{axpy, dot, DenseVector, Norm, SparseVector};
use minibatch_core::Result;
use proptest::prelude::*;

/// Largest Thm.-2-to-Thm.-1 bound ratio on the sampled grid with the AG
/// precondition met. The ratio grows like `sqrt(ln n)`, so C is tied to
/// `n <= 1e5`.
const UNIFORM_SUPERIORITY_C: f64 = 185.0;

fn dense(dim: usize) -> impl Strategy<Value = DenseVector> {
    prop::collection::vec(-1e3..1e3f64, dim).prop_map(|v| DenseVector::new(v).unwrap())
}

fn sparse(dim: usize) -> impl Strategy<Value = SparseVector> {
    prop::collection::vec(prop::option::weighted(0.4, -10.0..10.0f64), dim).prop_map(move |v| {
        let pairs = v
            .into_iter()
            .enumerate()
            .filter_map(|(k, x)| x.filter(|x| *x != 0.0).map(|x| (k + 1, x)))
            .collect();
        SparseVector::new(pairs, dim).unwrap()
    })
}

fn example(dim: usize) -> impl Strategy<Value = Example> {
    (sparse(dim), any::<bool>()).prop_map(|(x, pos)| {
        Example::new(
            x,
            if pos {
                Label::Positive
            } else {
                Label::Negative
            },
        )
    })
}

fn simplex_point(dim: usize) -> impl Strategy<Value = DenseVector> {
    prop::collection::vec(1e-6..1.0f64, dim).prop_map(|v| {
        let s: f64 = v.iter().sum();
        DenseVector::new(v.into_iter().map(|x| x / s).collect()).unwrap()
    })
}

fn kind() -> impl Strategy<Value = LossKind> {
    prop_oneof![Just(LossKind::SmoothedHinge), Just(LossKind::Squared)]
}

fn l1_dist(a: &DenseVector, b: &DenseVector) -> f64 {
    a.as_slice()
        .iter()
        .zip(b.as_slice())
        .map(|(x, y)| (x - y).abs())
        .sum()
}

fn l2_dist(a: &DenseVector, b: &DenseVector) -> f64 {
    axpy(-1.0, b, a).unwrap().norm(Norm::Two)
}

proptest! {
    // vectorspace

    #[test]
    fn dot_is_homogeneous(x in dense(64), y in dense(64), a in -1e3..1e3f64) {
        let lhs = dot(&x.scaled(a), &y).unwrap();
        let rhs = a * dot(&x, &y).unwrap();
        // Relative to the magnitudes summed, which bounds the rounding.
        let scale: f64 = x.as_slice().iter().zip(y.as_slice()).map(|(p, q)| (a * p * q).abs()).sum();
        prop_assert!((lhs - rhs).abs() <= 1e-12 * scale.max(f64::MIN_POSITIVE));
    }

    #[test]
    fn sparse_dot_is_homogeneous(x in sparse(200), y in dense(200), a in -1e3..1e3f64) {
        let lhs = dot(&x.scaled(a).unwrap(), &y).unwrap();
        let rhs = a * dot(&x, &y).unwrap();
        let scale: f64 = x.iter().map(|(k, v)| (a * v * y.get(k - 1)).abs()).sum();
        prop_assert!((lhs - rhs).abs() <= 1e-12 * scale.max(f64::MIN_POSITIVE));
    }

    #[test]
    fn cauchy_schwarz(x in dense(50), y in dense(50)) {
        let d = dot(&x, &y).unwrap().abs();
        prop_assert!(d <= x.norm(Norm::Two) * y.norm(Norm::Two) * (1.0 + 1e-12));
    }

    #[test]
    fn axpy_round_trip(x in dense(40), y in dense(40), a in -10.0..10.0f64) {
        let back = axpy(-a, &x, &axpy(a, &x, &y).unwrap()).unwrap();
        prop_assert!(back.max_abs_diff(&y) <= 1e-12 * (1.0 + y.norm(Norm::Inf) + (a * x.norm(Norm::Inf)).abs()));
    }

    // losses

    #[test]
    fn loss_convex_along_segments(k in kind(), z in example(12), w in dense(12), v in dense(12), t in 0.0..1.0f64) {
        let model = LossModel::new(k, 1.0).unwrap();
        let (w, v) = (w.scaled(1e-3), v.scaled(1e-3));
        let mid = axpy(t, &w, &v.scaled(1.0 - t)).unwrap();
        let lhs = model.loss_value(&mid, &z).unwrap();
        let rhs = t * model.loss_value(&w, &z).unwrap() + (1.0 - t) * model.loss_value(&v, &z).unwrap();
        prop_assert!(lhs <= rhs + 1e-12 * (1.0 + rhs));
    }

    #[test]
    fn loss_gradient_is_h_lipschitz(k in kind(), z in example(12), w in dense(12), v in dense(12)) {
        let h = z.features.norm_sq().max(f64::MIN_POSITIVE);
        let model = LossModel::new(k, h).unwrap();
        let (w, v) = (w.scaled(1e-3), v.scaled(1e-3));
        let gap = l2_dist(&model.loss_gradient(&w, &z).unwrap(), &model.loss_gradient(&v, &z).unwrap());
        prop_assert!(gap <= h * l2_dist(&w, &v) * (1.0 + 1e-9) + 1e-12);
    }

    #[test]
    fn self_bound_residual_nonnegative(z in example(12), w in dense(12)) {
        let h = z.features.norm_sq().max(f64::MIN_POSITIVE);
        let model = LossModel::new(LossKind::SmoothedHinge, h).unwrap();
        prop_assert!(model.self_bound_residual(&w.scaled(1e-3), &z).unwrap() >= -1e-12);
    }

    #[test]
    fn minibatch_equals_plain_mean(k in kind(), zs in prop::collection::vec(example(8), 1..40), w in dense(8)) {
        let model = LossModel::new(k, 1.0).unwrap();
        let w = w.scaled(1e-3);
        let (value, grad) = model
            .minibatch_value_grad(&w, &MiniBatch::new(&zs).unwrap(), Reduction::Deterministic)
            .unwrap();
        let b = zs.len() as f64;
        let mut mean_grad = DenseVector::zeros(8);
        let mut mean_value = 0.0;
        for z in &zs {
            mean_grad = axpy(1.0 / b, &model.loss_gradient(&w, z).unwrap(), &mean_grad).unwrap();
            mean_value += model.loss_value(&w, z).unwrap() / b;
        }
        prop_assert!(grad.max_abs_diff(&mean_grad) <= 1e-12 * (1.0 + mean_grad.norm(Norm::Inf)));
        prop_assert!((value - mean_value).abs() <= 1e-12 * (1.0 + mean_value));
    }

    // geometry

    #[test]
    fn euclidean_bregman_strongly_convex(w in dense(10), v in dense(10)) {
        let map = MirrorMap::euclidean(10, 1e6).unwrap();
        let d = map.bregman(&w, &v).unwrap().0;
        let half = 0.5 * l2_dist(&w, &v).powi(2);
        prop_assert!(d >= half - 1e-12 * (1.0 + half));
        prop_assert_eq!(map.bregman(&w, &w).unwrap().0, 0.0);
    }

    #[test]
    fn entropy_bregman_strongly_convex_in_l1(w in simplex_point(7), v in simplex_point(7)) {
        let map = MirrorMap::entropy(7).unwrap();
        let d = map.bregman(&w, &v).unwrap().0;
        prop_assert!(d >= 0.5 * l1_dist(&w, &v).powi(2) - 1e-12);
        prop_assert!(map.bregman(&w, &w).unwrap().0 <= 1e-12);
    }

    #[test]
    fn projection_idempotent(x in dense(9), r in 0.1..100.0f64) {
        for map in [MirrorMap::euclidean(9, r).unwrap(), MirrorMap::entropy(9).unwrap()] {
            let once = map.project(&x).unwrap();
            let twice = map.project(&once).unwrap();
            prop_assert!(once.max_abs_diff(&twice) <= 1e-12);
            prop_assert!(map.infeasibility(&once) <= 1e-9);
        }
    }

    #[test]
    fn euclidean_projection_optimal(x in dense(6), ys in prop::collection::vec(dense(6), 10)) {
        let r = 1.0;
        let map = MirrorMap::euclidean(6, r).unwrap();
        let x = x.scaled(1.0 + r / x.norm(Norm::Two).max(1e-9));
        let p = map.project(&x).unwrap();
        let best = 0.5 * l2_dist(&p, &x).powi(2);
        for y in ys {
            let y = map.project(&y).unwrap();
            prop_assert!(best <= 0.5 * l2_dist(&y, &x).powi(2) + 1e-12 * (1.0 + best));
        }
    }

    // schedules

    #[test]
    fn schedule_ranges(
        h in 0.01..100.0f64,
        w2 in 0.01..100.0f64,
        l in prop_oneof![Just(0.0), 0.0..10.0f64],
        b in 1usize..2048,
        n in 2usize..100_000,
    ) {
        let params = ProblemParams {
            smoothness: h,
            batch_size: b,
            iterations: n,
            l_star: l,
            comparator: Comparator::NormSq(w2),
            radius: w2.sqrt(),
            k: 1.0,
        };
        prop_assert!(sgd_eta(&params).unwrap() <= 0.5 / h);
        prop_assert!(smd_eta(&params).unwrap() > 0.0);
        if n >= 3 {
            let p = ag_p(b, n).unwrap();
            prop_assert!((0.0..=1.0).contains(&p));
            for form in [GammaForm::General, GammaForm::EuclideanVariant] {
                let g = ag_gamma(&params, p, form).unwrap();
                prop_assert!(g > 0.0 && g <= 0.25 / h);
            }
        }
    }

    #[test]
    fn theoretical_schedules_admissible(
        h in 0.01..100.0f64,
        l in prop_oneof![Just(0.0), 0.0..10.0f64],
        b in prop_oneof![Just(1usize), Just(8), Just(64), Just(1024)],
        n in 3usize..=10_000,
    ) {
        let params = ProblemParams {
            smoothness: h,
            batch_size: b,
            iterations: n,
            l_star: l,
            comparator: Comparator::NormSq(1.0),
            radius: 1.0,
            k: 1.0,
        };
        let p = ag_p(b, n).unwrap();
        let gamma = ag_gamma(&params, p, GammaForm::General).unwrap();
        let report = validate_admissibility(&Schedule::AgGammaP { gamma, p }, h, n);
        prop_assert!(report.passed(), "{:?}", report.violation);
    }

    // analysis

    #[test]
    fn accelerated_bound_within_constant_of_sgd(
        h in 0.1..10.0f64,
        d in 0.1..10.0f64,
        l in prop_oneof![Just(0.0), 0.0..5.0f64],
        b in 1usize..2048,
        n in 783usize..=100_000,
    ) {
        let params = ProblemParams {
            smoothness: h,
            batch_size: b,
            iterations: n,
            l_star: l,
            comparator: Comparator::NormSq(d * d),
            radius: d,
            k: 1.0,
        };
        let r = evaluate_bounds(&params).unwrap();
        prop_assert!(r.ag_bound <= UNIFORM_SUPERIORITY_C * r.sgd_bound);
        for v in [r.sgd_bound, r.ag_bound, r.smd_bound, r.amd_bound] {
            prop_assert!(v >= 0.0);
        }
    }

    // dataio

    #[test]
    fn libsvm_round_trip(zs in prop::collection::vec(example(15), 1..30)) {
        let dim = 15;
        let d = Dataset::new(zs, dim, "prop").unwrap();
        let mut text = Vec::new();
        write_libsvm(&d, &mut text).unwrap();
        let back = parse_libsvm(Cursor::new(text), "prop").unwrap().dataset;
        // The parser infers the dimension from the largest index present.
        prop_assert!(back.dim() <= dim);
        prop_assert_eq!(back.len(), d.len());
        for (a, b) in d.examples().iter().zip(back.examples()) {
            prop_assert_eq!(a.label, b.label);
            prop_assert_eq!(a.features.indices(), b.features.indices());
            prop_assert_eq!(a.features.values(), b.features.values());
        }
    }

    #[test]
    fn split_is_a_reproducible_partition(m in 1usize..300, seed in any::<u64>()) {
        let examples: Vec<Example> = (0..m)
            .map(|k| Example::new(SparseVector::new(vec![(1, k as f64 + 1.0)], 1).unwrap(), Label::Positive))
            .collect();
        let d = Dataset::new(examples, 1, "ids").unwrap();
        let (a, b, c) = split(&d, SplitFractions::HALF_QUARTER_QUARTER, seed).unwrap();
        let ids = |x: &Dataset| x.examples().iter().map(|z| z.features.values()[0] as usize).collect::<Vec<_>>();
        let mut all: Vec<usize> = [ids(&a), ids(&b), ids(&c)].concat();
        prop_assert_eq!(all.len(), m);
        all.sort_unstable();
        all.dedup();
        prop_assert_eq!(all.len(), m);
        let (a2, b2, c2) = split(&d, SplitFractions::HALF_QUARTER_QUARTER, seed).unwrap();
        prop_assert_eq!((a, b, c), (a2, b2, c2));
    }

    #[test]
    fn censor_keeps_an_ordered_subsequence(zs in prop::collection::vec(example(6), 1..50), w in dense(6)) {
        let d = Dataset::new(zs, 6, "prop").unwrap();
        let w = w.scaled(1e-2);
        match censor(&d, &w) {
            Ok(kept) => {
                let mut it = d.examples().iter();
                for z in kept.examples() {
                    prop_assert!(it.any(|x| x == z));
                    prop_assert!(z.margin(&w).unwrap() >= 1.0);
                }
                let model = LossModel::new(LossKind::SmoothedHinge, 1.0).unwrap();
                prop_assert_eq!(model.mean_loss(&w, kept.examples()).unwrap(), 0.0);
            }
            Err(_) => prop_assert!(d.examples().iter().all(|z| z.margin(&w).unwrap() < 1.0)),
        }
    }

    #[test]
    fn noiseless_synthetic_is_separable(m in 1usize..400, dim in 1usize..40, margin in 0.1..3.0f64, seed in any::<u64>()) {
        let spec = SynthSpec { m, dimension: dim, margin, label_noise: 0.0 };
        let (d, u) = synthesize(spec, seed).unwrap();
        prop_assert_eq!(d.len(), m);
        for z in d.examples() {
            prop_assert!(z.margin(&u).unwrap() > 0.0);
        }
    }
}

#[test]
fn uniform_superiority_constant_is_tight_on_grid() {
    let mut worst: f64 = 0.0;
    for h in [0.5, 1.0, 4.0] {
        for d in [0.5, 1.0, 3.0] {
            for l in [0.0, 0.01, 0.1, 1.0] {
                for b in [1, 8, 64, 1024] {
                    for n in [783, 1000, 10_000, 100_000] {
                        let params = ProblemParams {
                            smoothness: h,
                            batch_size: b,
                            iterations: n,
                            l_star: l,
                            comparator: Comparator::NormSq(d * d),
                            radius: d,
                            k: 1.0,
                        };
                        let r = evaluate_bounds(&params).unwrap();
                        assert!(r.ag_preconditions_met);
                        worst = worst.max(r.ag_bound / r.sgd_bound);
                    }
                }
            }
        }
    }
    // Independent evaluation of the same grid gives 184.968032155...
    assert!((worst - 184.96803215544378).abs() < 1e-9, "{worst}");
    assert!(worst <= UNIFORM_SUPERIORITY_C);
}

#[test]
fn entropy_potential_within_k_squared() {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
    for dim in [2usize, 5, 50] {
        let map = MirrorMap::entropy(dim).unwrap();
        let k2 = map.constant_k().powi(2);
        let mut best: f64 = f64::NEG_INFINITY;
        for t in 0..100_000 {
            // Mix interior draws with near-vertex draws, where the maximum sits.
            let spike = t % 2 == 0;
            let mut v: Vec<f64> = (0..dim)
                .map(|_| rng.random::<f64>().powi(if spike { 8 } else { 1 }))
                .collect();
            let s: f64 = v.iter().sum();
            let total = rng.random::<f64>().sqrt();
            v.iter_mut().for_each(|x| *x *= total / s);
            best = best.max(2.0 * map.potential(&DenseVector::new(v).unwrap()).unwrap());
        }
        assert!(best <= k2 * (1.0 + 1e-9), "d = {dim}: {best} > {k2}");
        assert!(
            best > 0.5 * k2,
            "d = {dim}: sampling never got near the vertices"
        );
    }
    let e = MirrorMap::euclidean(4, 1.0).unwrap();
    assert_eq!(e.constant_k(), 1.0);
}

/// Records the slice offset and query point of every mini-batch call.
struct Recorder<'a> {
    inner: &'a LossModel,
    base: *const Example,
    calls: Mutex<Vec<(usize, usize)>>,
}

// The raw pointer is only compared, never dereferenced.
unsafe impl Sync for Recorder<'_> {}

impl BatchObjective for Recorder<'_> {
    fn batch_value_grad(
        &self,
        w: &DenseVector,
        batch: &MiniBatch<'_>,
        reduction: Reduction,
    ) -> Result<(f64, DenseVector)> {
        let offset = (batch.examples().as_ptr() as usize - self.base as usize)
            / std::mem::size_of::<Example>();
        self.calls
            .lock()
            .unwrap()
            .push((offset, batch.batch_size()));
        self.inner.batch_value_grad(w, batch, reduction)
    }

    fn mean_value(&self, w: &DenseVector, examples: &[Example]) -> Result<f64> {
        self.inner.mean_value(w, examples)
    }
}

fn fixture() -> (Dataset, LossModel) {
    let (d, _) = synthesize(
        SynthSpec {
            m: 600,
            dimension: 8,
            margin: 0.5,
            label_noise: 0.1,
        },
        42,
    )
    .unwrap();
    let loss = LossModel::for_examples(LossKind::SmoothedHinge, d.examples()).unwrap();
    (d, loss)
}

fn schedule_for(algorithm: Algorithm, h: f64) -> Schedule {
    match algorithm {
        Algorithm::Sgd => Schedule::SgdEta { eta: 2.0 / h },
        Algorithm::Smd => Schedule::SmdEta { eta: 2.0 / h },
        Algorithm::Ag => Schedule::AgGammaP {
            gamma: 1.0 / h,
            p: 0.5,
        },
        Algorithm::Amd => Schedule::AmdGammaP {
            gamma: 1.0 / h,
            p: 0.5,
        },
    }
}

const ALL: [Algorithm; 4] = [
    Algorithm::Sgd,
    Algorithm::Ag,
    Algorithm::Smd,
    Algorithm::Amd,
];

#[test]
fn one_batch_per_iteration_in_order() {
    let (d, loss) = fixture();
    let map = MirrorMap::euclidean(8, 2.0).unwrap();
    for algorithm in ALL {
        for (b, n) in [(1usize, 7usize), (8, 50), (37, 16)] {
            let rec = Recorder {
                inner: &loss,
                base: d.examples().as_ptr(),
                calls: Mutex::new(Vec::new()),
            };
            let problem = Problem {
                objective: &rec,
                map: &map,
                train: d.examples(),
                holdout: None,
            };
            let r = run(
                algorithm,
                problem,
                &schedule_for(algorithm, loss.smoothness()),
                &RunConfig::new(b, n),
            )
            .unwrap();
            let calls = rec.calls.into_inner().unwrap();
            let expected: Vec<(usize, usize)> = (0..n).map(|i| (i * b, b)).collect();
            assert_eq!(calls, expected, "{algorithm} b={b}");
            assert_eq!(r.gradient_evaluations, n);
        }
    }
}

fn run_with_observer(
    algorithm: Algorithm,
    map: &MirrorMap,
    projection: bool,
    threads: usize,
) -> (RunResult, Vec<DenseVector>) {
    let (d, loss) = fixture();
    let problem = Problem {
        objective: &loss,
        map,
        train: d.examples(),
        holdout: Some(&d.examples()[..100]),
    };
    let mut config = RunConfig::new(4, 150);
    config.projection = projection;
    config.trace_every = 10;
    let schedule = match (algorithm, map.kind()) {
        (Algorithm::Smd, minibatch_core::MapKind::Entropy) => Schedule::SmdEta { eta: 0.5 },
        (Algorithm::Amd, minibatch_core::MapKind::Entropy) => {
            Schedule::AmdGammaP { gamma: 0.2, p: 0.5 }
        }
        _ => schedule_for(algorithm, loss.smoothness()),
    };
    let mut iterates = Vec::new();
    let mut obs = |s: &minibatch_core::optimizers::OptimizerState| iterates.push(s.w.clone());
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .unwrap();
    let result = pool.install(|| {
        use minibatch_core::optimizers::{
            run_ag_observed, run_amd_observed, run_sgd_observed, run_smd_observed,
        };
        let f = match algorithm {
            Algorithm::Sgd => run_sgd_observed,
            Algorithm::Ag => run_ag_observed,
            Algorithm::Smd => run_smd_observed,
            Algorithm::Amd => run_amd_observed,
        };
        f(problem, &schedule, &config, Some(&mut obs))
    });
    (result.unwrap(), iterates)
}

#[test]
fn projected_iterates_stay_feasible() {
    let ball = MirrorMap::euclidean(8, 0.3).unwrap();
    let simplex = MirrorMap::entropy(8).unwrap();
    for algorithm in ALL {
        let (_, its) = run_with_observer(algorithm, &ball, true, 2);
        assert!(
            its.iter().all(|w| w.norm(Norm::Two) <= 0.3 + 1e-9),
            "{algorithm}"
        );
        let (_, free) = run_with_observer(algorithm, &ball, false, 2);
        assert!(
            free.iter().any(|w| w.norm(Norm::Two) > 0.3),
            "{algorithm} should leave the ball unprojected"
        );
        if matches!(algorithm, Algorithm::Smd | Algorithm::Amd) {
            let (_, its) = run_with_observer(algorithm, &simplex, true, 2);
            assert!(
                its.iter().all(|w| simplex.infeasibility(w) <= 1e-9),
                "{algorithm} on the simplex"
            );
        }
    }
}

#[test]
fn runs_are_bit_identical_across_thread_counts() {
    let ball = MirrorMap::euclidean(8, 2.0).unwrap();
    for algorithm in ALL {
        let (a, ia) = run_with_observer(algorithm, &ball, true, 1);
        let (b, ib) = run_with_observer(algorithm, &ball, true, 8);
        assert_eq!(a.output, b.output, "{algorithm}");
        assert_eq!(ia, ib, "{algorithm}");
        assert_eq!(
            a.trace.numeric_rows(),
            b.trace.numeric_rows(),
            "{algorithm}"
        );
    }
}
