//! Ingestion, cleaning, attribute join and feature scaling.

mod attributes;
mod clean;
mod ingest;
pub mod io;
mod scaler;

pub use attributes::{join_attributes, AttributeRow, JoinReport};
pub use clean::{clean, CleaningConfig, CleaningReport};
pub use ingest::{ingest, ingest_with, IngestStats, RawRecord};
pub use scaler::{apply_scaler, fit_scaler, FeatureSpec, ScaledFeatures, ScalerParams};

use crate::error::Result;
use crate::model::{BucketGrid, Dataset};

/// Records to a cleaned dataset: bounded ingestion, street filters, then the
/// optional attribute join. The report covers every stage.
pub fn prepare<I>(
    records: I,
    attributes: Option<&[AttributeRow]>,
    grid: BucketGrid,
    cfg: &CleaningConfig,
) -> Result<(Dataset, CleaningReport)>
where
    I: IntoIterator<Item = RawRecord>,
{
    cfg.validate()?;
    let (ds, stats) = ingest_with(records, grid, Some(cfg))?;
    let (ds, mut report) = clean(&ds, cfg)?;
    report.outlier_records = stats.outlier_records;
    report.duplicate_records = stats.duplicate_records;
    match attributes {
        Some(rows) => {
            let (ds, join) = join_attributes(&ds, rows)?;
            report.unmatched_attributes = join.unmatched_streets.len();
            report.unused_attribute_rows = join.unused_rows;
            Ok((ds, report))
        }
        None => {
            report.unmatched_attributes = ds.len();
            Ok((ds, report))
        }
    }
}
