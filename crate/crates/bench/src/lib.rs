//! Fixtures shared by the criterion benchmarks in `benches/`.

use onestep::models::{bittorrent_chunks, fasttrack, ChunkModelParams, FastTrackParams};
use onestep::Scheme;

/// FastTrack with the default coefficients.
pub fn fasttrack_default() -> Scheme {
    fasttrack(&FastTrackParams::default()).expect("default coefficients are valid")
}

/// Chunk model with `m` chunks and default coefficients.
pub fn chunks(m: usize) -> Scheme {
    bittorrent_chunks(&ChunkModelParams::with_chunks(m)).expect("default coefficients are valid")
}

/// A state with every species at `level`.
pub fn flat_state(scheme: &Scheme, level: f64) -> Vec<f64> {
    vec![level; scheme.species_count()]
}
