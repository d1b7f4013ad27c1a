//! Fixtures shared by the benchmarks.

use qmr_core::dataio::synth_dataset;
use qmr_core::{LabeledDictionary, QuaternionMatrix, SynthSpec};

/// A synthetic problem with `atoms` training images of `side x side` pixels
/// split over five classes, and one clean query.
pub fn problem(atoms: usize, side: usize, seed: u64) -> (LabeledDictionary, QuaternionMatrix) {
    let classes = 5;
    assert!(atoms % classes == 0, "atoms must be a multiple of {classes}");
    let data = synth_dataset(&SynthSpec::new(classes, atoms / classes, (side, side), seed))
        .expect("valid synthetic spec");
    let query = data.test[0].image.clone();
    (data.train, query)
}
