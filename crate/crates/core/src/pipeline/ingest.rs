use std::collections::{BTreeMap, HashSet};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::clean::CleaningConfig;
use crate::error::{Error, Result};
use crate::model::{BucketGrid, Dataset, SpeedSeries, StreetProfile};
use crate::stats;

/// One speed observation of a street in a bucket of the week.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawRecord {
    pub street_id: String,
    pub bucket_index: usize,
    pub speed_kmh: f64,
}

impl RawRecord {
    pub fn new(street_id: impl Into<String>, bucket_index: usize, speed_kmh: f64) -> Self {
        RawRecord {
            street_id: street_id.into(),
            bucket_index,
            speed_kmh,
        }
    }
}

/// Record-level counts gathered while folding records into profiles.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IngestStats {
    pub records: usize,
    pub duplicate_records: usize,
    pub outlier_records: usize,
}

/// Folds records into one weekly profile per street: exact duplicates of
/// `(street, bucket, speed)` are collapsed, then each bucket takes the
/// median of its speeds. Records from several weeks land on the same
/// bucket-of-week and are pooled.
///
/// Non-positive or non-finite speeds are discarded as outliers. Streets come
/// out sorted by id, so record order does not matter.
pub fn ingest<I>(records: I, grid: BucketGrid) -> Result<Dataset>
where
    I: IntoIterator<Item = RawRecord>,
{
    ingest_with(records, grid, None).map(|(ds, _)| ds)
}

/// As [`ingest`], additionally discarding speeds outside the configured
/// bounds before aggregation.
pub fn ingest_with<I>(
    records: I,
    grid: BucketGrid,
    bounds: Option<&CleaningConfig>,
) -> Result<(Dataset, IngestStats)>
where
    I: IntoIterator<Item = RawRecord>,
{
    let buckets = grid.buckets_per_week();
    let mut stats = IngestStats::default();
    let mut seen: HashSet<(String, usize, u64)> = HashSet::new();
    let mut streets: BTreeMap<String, BTreeMap<usize, Vec<f64>>> = BTreeMap::new();

    for record in records {
        stats.records += 1;
        if record.bucket_index >= buckets {
            return Err(Error::InvalidBucket {
                street_id: record.street_id,
                bucket: record.bucket_index as i64,
                buckets,
                line: stats.records as u64,
            });
        }
        let speed = record.speed_kmh;
        let in_bounds = bounds.map_or(true, |c| speed >= c.min_speed_kmh && speed <= c.max_speed_kmh);
        if !(speed.is_finite() && speed > 0.0 && in_bounds) {
            stats.outlier_records += 1;
            continue;
        }
        // -0.0 cannot reach here, so bit equality is value equality.
        if !seen.insert((record.street_id.clone(), record.bucket_index, speed.to_bits())) {
            stats.duplicate_records += 1;
            continue;
        }
        streets
            .entry(record.street_id)
            .or_default()
            .entry(record.bucket_index)
            .or_default()
            .push(speed);
    }

    let profiles = streets
        .into_par_iter()
        .map(|(id, cells)| {
            let mut values = vec![None; buckets];
            for (b, speeds) in cells {
                values[b] = stats::median(&speeds);
            }
            Ok(StreetProfile::new(id, SpeedSeries::new(values)?))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((Dataset::new(grid, profiles)?, stats))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid() -> BucketGrid {
        BucketGrid::with_buckets(4).unwrap()
    }

    #[test]
    fn odd_and_even_medians() {
        let records = vec![
            RawRecord::new("a", 0, 50.0),
            RawRecord::new("a", 0, 60.0),
            RawRecord::new("a", 0, 100.0),
            RawRecord::new("a", 1, 50.0),
            RawRecord::new("a", 1, 60.0),
        ];
        let ds = ingest(records, grid()).unwrap();
        let s = ds.profiles()[0].series();
        assert_eq!(s.get(0), Some(60.0));
        assert_eq!(s.get(1), Some(55.0));
        assert_eq!(s.get(2), None);
    }

    #[test]
    fn duplicates_collapse_before_median() {
        let records = vec![
            RawRecord::new("a", 0, 10.0),
            RawRecord::new("a", 0, 10.0),
            RawRecord::new("a", 0, 10.0),
            RawRecord::new("a", 0, 40.0),
        ];
        let (ds, stats) = ingest_with(records, grid(), None).unwrap();
        assert_eq!(ds.profiles()[0].series().get(0), Some(25.0));
        assert_eq!(stats.duplicate_records, 2);
    }

    #[test]
    fn out_of_range_bucket() {
        let err = ingest(vec![RawRecord::new("a", 4, 10.0)], grid()).unwrap_err();
        assert!(matches!(err, Error::InvalidBucket { bucket: 4, .. }));
    }

    #[test]
    fn bounds_drop_records_before_aggregation() {
        let records = vec![
            RawRecord::new("a", 0, 250.0),
            RawRecord::new("a", 1, 250.0),
            RawRecord::new("a", 1, 30.0),
        ];
        let cfg = CleaningConfig::default();
        let (ds, stats) = ingest_with(records, grid(), Some(&cfg)).unwrap();
        assert_eq!(stats.outlier_records, 2);
        let s = ds.profiles()[0].series();
        assert_eq!(s.get(0), None);
        assert_eq!(s.get(1), Some(30.0));
    }

    #[test]
    fn street_order_is_sorted() {
        let ds = ingest(
            vec![RawRecord::new("z", 0, 1.0), RawRecord::new("b", 0, 2.0)],
            grid(),
        )
        .unwrap();
        assert_eq!(ds.street_ids(), vec!["b", "z"]);
    }
}
