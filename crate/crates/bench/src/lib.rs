//! Shared fixtures for the valuation benchmarks.

use shapcal_core::dataset::{synth_blobs, Dataset};
use shapcal_core::Sample;

/// Two-class blob training set plus one query sample.
pub fn fixture(n: usize, seed: u64) -> (Dataset, Sample) {
    let train = synth_blobs(n, 2, 2, 4.0, 1.0, seed).expect("fixture generation");
    let query = Sample {
        id: 0,
        features: vec![1.0, 0.5],
        label: 0,
    };
    (train, query)
}
