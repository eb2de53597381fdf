//! Shared fixtures for the benchmarks.

use minibatch_core::dataio::{synthesize, write_libsvm};
use minibatch_core::{Dataset, SynthSpec};

/// A noisy synthetic dataset with `m` examples in `d` dimensions.
pub fn dataset(m: usize, d: usize, seed: u64) -> Dataset {
    let spec = SynthSpec {
        m,
        dimension: d,
        margin: 1.0,
        label_noise: 0.05,
    };
    synthesize(spec, seed).expect("valid synthetic spec").0
}

/// `dataset` rendered as LIBSVM text.
pub fn libsvm_text(m: usize, d: usize, seed: u64) -> Vec<u8> {
    let mut out = Vec::new();
    write_libsvm(&dataset(m, d, seed), &mut out).expect("in-memory write");
    out
}
