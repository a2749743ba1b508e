//! Shared fixtures for the benchmarks in `benches/`.

use std::sync::OnceLock;

use hinf_core::model::reference_system;
use hinf_core::{synthesize, SynthesisOptions, SynthesisResult};

/// Reference design at gamma 0.5, computed once per process.
pub fn reference_design() -> &'static SynthesisResult {
    static CELL: OnceLock<SynthesisResult> = OnceLock::new();
    CELL.get_or_init(|| {
        synthesize(&reference_system(), 0.5, &SynthesisOptions::default()).expect("reference design is feasible")
    })
}
