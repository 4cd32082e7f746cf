use std::collections::HashSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use roadclust_core::colorify::{colorify, impute, ImputedDataset};
use roadclust_core::synthgen::{default_specs, generate, important_roads_specs, ArchetypeSpec, Archetype};
use roadclust_core::{
    find_important_secondary, kmeans_dtw, BucketGrid, ClusterConfig, Dataset, ImportanceConfig,
    SpeedSeries,
};

fn grid() -> BucketGrid {
    BucketGrid::with_buckets(168).unwrap()
}

/// Hides roughly `fraction` of the observed cells; returns the hidden ones.
fn hold_out(ds: &Dataset, fraction: f64, seed: u64) -> (Dataset, Vec<(usize, usize, f64)>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut hidden = Vec::new();
    let profiles = ds
        .profiles()
        .iter()
        .enumerate()
        .map(|(p, profile)| {
            let values = profile
                .series()
                .values()
                .iter()
                .enumerate()
                .map(|(b, v)| match v {
                    Some(x) if rng.gen::<f64>() < fraction => {
                        hidden.push((p, b, *x));
                        None
                    }
                    other => *other,
                })
                .collect();
            let mut out = profile.clone();
            out.set_series(SpeedSeries::new(values).unwrap());
            out
        })
        .collect();
    (Dataset::new(ds.grid(), profiles).unwrap(), hidden)
}

#[test]
fn cluster_imputation_beats_global_bucket_mean() {
    let specs: Vec<ArchetypeSpec> = default_specs()
        .into_iter()
        .map(|s| ArchetypeSpec { count: 12, ..s })
        .collect();
    let syn = generate(&specs, grid(), 8).unwrap();
    let (train, hidden) = hold_out(&syn.dataset, 0.1, 1);
    let model = kmeans_dtw(&train.observed_series().unwrap(), &ClusterConfig::default())
        .unwrap()
        .with_street_ids(train.street_ids());
    let filled = impute(&train, &model).unwrap();

    let buckets = grid().buckets_per_week();
    let global: Vec<f64> = (0..buckets)
        .map(|b| {
            let v: Vec<f64> = train.profiles().iter().filter_map(|p| p.series().get(b)).collect();
            v.iter().sum::<f64>() / v.len() as f64
        })
        .collect();
    let (mut ours, mut baseline) = (0.0, 0.0);
    for &(p, b, truth) in &hidden {
        ours += (filled.dataset.profiles()[p].series().get(b).unwrap() - truth).abs();
        baseline += (global[b] - truth).abs();
    }
    assert!(ours <= 0.9 * baseline, "{ours} vs {baseline}");

    for (before, after) in train.profiles().iter().zip(filled.dataset.profiles()) {
        for (b, v) in before.series().observed() {
            assert_eq!(after.series().get(b).unwrap().to_bits(), v.to_bits());
        }
    }

    let thresholds = Default::default();
    let plain = colorify(&ImputedDataset::observed_only(train.clone()), &thresholds).unwrap();
    let colored = colorify(&filled, &thresholds).unwrap();
    assert!(colored.assignments.len() >= plain.assignments.len());
    assert_eq!(colored.summary.cells_observed, plain.assignments.len());
}

#[test]
fn planted_primary_like_secondaries_are_selected() {
    let specs: Vec<ArchetypeSpec> = important_roads_specs()
        .into_iter()
        .map(|s| {
            let count = if s.name == Archetype::PrimaryLikeSecondary { 10 } else { s.count / 4 };
            ArchetypeSpec { count, ..s }
        })
        .collect();
    let syn = generate(&specs, grid(), 5).unwrap();
    let res = find_important_secondary(&syn.dataset, 3, &ImportanceConfig::default()).unwrap();
    let labels = syn.labels_for(&syn.dataset);
    let planted: HashSet<&str> = syn
        .dataset
        .profiles()
        .iter()
        .zip(&labels)
        .filter(|(_, l)| l.map(|l| syn.specs[l].name) == Some(Archetype::PrimaryLikeSecondary))
        .map(|(p, _)| p.street_id())
        .collect();
    let hits = res.important_street_ids.iter().filter(|s| planted.contains(s.as_str())).count();
    assert!(hits >= 9, "{hits}");
    assert!((res.important_street_ids.len() - hits) as f64 <= 0.1 * res.important_street_ids.len() as f64);
    let best = res.cluster_distances.iter().copied().fold(f64::INFINITY, f64::min);
    assert_eq!(res.cluster_distances[res.selected_cluster], best);
    assert!(res.per_street.iter().all(|s| s.filling_rate > 0.9));
}
