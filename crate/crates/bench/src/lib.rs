//! Benchmark fixtures built from the synthetic generator.

use roadclust_core::synthgen::{self, ArchetypeSpec};
use roadclust_core::{BucketGrid, ObservedSeries};

/// Observed series from the default archetypes, `per_archetype` streets
/// each, on a grid of `bucket_minutes`.
pub fn observed(per_archetype: usize, bucket_minutes: u32, seed: u64) -> Vec<ObservedSeries> {
    let specs: Vec<ArchetypeSpec> = synthgen::default_specs()
        .into_iter()
        .map(|s| ArchetypeSpec {
            count: per_archetype,
            ..s
        })
        .collect();
    let grid = BucketGrid::new(bucket_minutes).expect("valid grid");
    synthgen::generate(&specs, grid, seed)
        .and_then(|syn| syn.dataset.observed_series())
        .expect("fixture generation")
}
