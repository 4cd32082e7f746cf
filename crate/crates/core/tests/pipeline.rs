use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use roadclust_core::pipeline::io::{self, Tz};
use roadclust_core::pipeline::{clean, ingest, prepare, CleaningConfig, RawRecord};
use roadclust_core::synthgen::{default_specs, generate, ArchetypeSpec, Synthetic};
use roadclust_core::BucketGrid;

fn synthetic() -> Synthetic {
    let specs: Vec<ArchetypeSpec> = default_specs()
        .into_iter()
        .map(|s| ArchetypeSpec { count: 6, ..s })
        .collect();
    generate(&specs, BucketGrid::default(), 17).unwrap()
}

#[test]
fn records_round_trip_to_the_generated_dataset() {
    let syn = synthetic();
    let mut buf = Vec::new();
    io::write_records(&mut buf, &syn.records()).unwrap();
    let records = io::read_records(buf.as_slice(), BucketGrid::default(), Tz::UTC).unwrap();
    let mut attrs = Vec::new();
    io::write_attributes(&mut attrs, &syn.attribute_rows()).unwrap();
    let attrs = io::read_attributes(attrs.as_slice()).unwrap();

    let (ds, report) = prepare(records, Some(&attrs), BucketGrid::default(), &CleaningConfig::default()).unwrap();
    assert_eq!(report.unmatched_attributes, 0);
    assert_eq!(report.outlier_records, 0);
    assert_eq!(ds.len(), syn.dataset.len());
    for p in syn.dataset.profiles() {
        assert_eq!(ds.get(p.street_id()), Some(p));
    }
}

#[test]
fn record_order_is_irrelevant() {
    let syn = synthetic();
    let mut records = syn.records();
    let a = ingest(records.clone(), BucketGrid::default()).unwrap();
    records.shuffle(&mut ChaCha8Rng::seed_from_u64(4));
    let b = ingest(records, BucketGrid::default()).unwrap();
    assert_eq!(a, b);
}

#[test]
fn cleaning_is_idempotent_and_conforms() {
    let syn = synthetic();
    let mut records = syn.records();
    // A sparse street, out-of-bounds speeds and exact duplicates.
    for b in 0..100 {
        records.push(RawRecord::new("sparse", b, 40.0));
    }
    records.push(RawRecord::new("residential-0000", 0, 400.0));
    records.push(RawRecord::new("residential-0000", 1, 0.5));
    records.push(records[0].clone());

    let cfg = CleaningConfig::default();
    let (ds, report) = prepare(records, None, BucketGrid::default(), &cfg).unwrap();
    assert_eq!(report.outlier_records, 2);
    assert_eq!(report.duplicate_records, 1);
    assert_eq!(report.dropped_low_filling_rate, 1);
    assert!(ds.get("sparse").is_none());
    for p in ds.profiles() {
        assert!(p.filling_rate() > 1.0 / 3.0);
        assert!(p.series().present_count() >= 3);
        assert!(p.series().observed().all(|(_, v)| cfg.in_bounds(v)));
    }
    let (again, second) = clean(&ds, &cfg).unwrap();
    assert_eq!(again, ds);
    assert_eq!(second.dropped_low_filling_rate + second.dropped_low_observation + second.outlier_cells, 0);
}

#[test]
fn dataset_snapshots_round_trip() {
    let syn = synthetic();
    let json = io::dataset_to_json(&syn.dataset).unwrap();
    assert_eq!(io::dataset_from_json(&json).unwrap(), syn.dataset);
    let mut csv = Vec::new();
    io::write_dataset_csv(&mut csv, &syn.dataset).unwrap();
    let back = io::read_dataset_csv(csv.as_slice()).unwrap();
    assert_eq!(back.street_ids(), syn.dataset.street_ids());
    for (a, b) in back.profiles().iter().zip(syn.dataset.profiles()) {
        assert_eq!(a.series(), b.series());
        assert_eq!(a.road_class, b.road_class);
    }
}
