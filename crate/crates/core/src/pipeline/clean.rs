use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Dataset, SpeedSeries, StreetProfile};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CleaningConfig {
    pub min_speed_kmh: f64,
    pub max_speed_kmh: f64,
    /// Streets with fewer present buckets are dropped.
    pub min_observed_buckets: usize,
    /// Streets must fill strictly more than this fraction of the week.
    pub min_filling_rate: f64,
}

impl Default for CleaningConfig {
    fn default() -> Self {
        CleaningConfig {
            min_speed_kmh: 1.0,
            max_speed_kmh: 140.0,
            min_observed_buckets: 3,
            min_filling_rate: 1.0 / 3.0,
        }
    }
}

impl CleaningConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.min_speed_kmh >= 0.0 && self.min_speed_kmh < self.max_speed_kmh) {
            return Err(Error::InvalidConfig(format!(
                "speed bounds must satisfy 0 <= min < max, got [{}, {}]",
                self.min_speed_kmh, self.max_speed_kmh
            )));
        }
        if !(0.0..=1.0).contains(&self.min_filling_rate) {
            return Err(Error::InvalidConfig(format!(
                "min_filling_rate {} outside [0, 1]",
                self.min_filling_rate
            )));
        }
        Ok(())
    }

    pub fn in_bounds(&self, speed: f64) -> bool {
        speed >= self.min_speed_kmh && speed <= self.max_speed_kmh
    }
}

/// Counts of everything the ingestion and cleaning stages discarded.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CleaningReport {
    pub outlier_records: usize,
    pub duplicate_records: usize,
    /// Aggregated bucket values outside the speed bounds.
    pub outlier_cells: usize,
    pub dropped_low_observation: usize,
    pub dropped_low_filling_rate: usize,
    /// Streets with no attribute row.
    pub unmatched_attributes: usize,
    /// Attribute rows naming a street absent from the dataset.
    pub unused_attribute_rows: usize,
}

/// Removes out-of-bounds bucket values, then drops streets with too few
/// observed buckets or a filling rate not above the threshold. A street
/// failing both tests counts as low-observation.
pub fn clean(ds: &Dataset, cfg: &CleaningConfig) -> Result<(Dataset, CleaningReport)> {
    cfg.validate()?;
    let mut report = CleaningReport::default();
    let mut kept: Vec<StreetProfile> = Vec::with_capacity(ds.len());
    for profile in ds.profiles() {
        let mut profile = profile.clone();
        let values: Vec<Option<f64>> = profile
            .series()
            .values()
            .iter()
            .map(|v| v.filter(|&s| cfg.in_bounds(s)))
            .collect();
        let removed = profile.series().present_count() - values.iter().flatten().count();
        if removed > 0 {
            report.outlier_cells += removed;
            profile.set_series(SpeedSeries::new(values)?);
        }
        if profile.series().present_count() < cfg.min_observed_buckets {
            report.dropped_low_observation += 1;
        } else if profile.filling_rate() <= cfg.min_filling_rate {
            report.dropped_low_filling_rate += 1;
        } else {
            kept.push(profile);
        }
    }
    Ok((Dataset::new(ds.grid(), kept)?, report))
}
