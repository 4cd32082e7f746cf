//! Shared domain types: the weekly bucket grid, speed series with gaps,
//! their null-dropped form, street profiles and datasets.

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MINUTES_PER_WEEK: u32 = 7 * 24 * 60;

/// A uniform partition of the week into fixed-width buckets.
///
/// Bucket `0` starts Monday 00:00; bucket `b` covers minutes
/// `[b * bucket_minutes, (b + 1) * bucket_minutes)` of the week.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "GridRepr", into = "GridRepr")]
pub struct BucketGrid {
    bucket_minutes: u32,
    buckets_per_week: usize,
}

#[derive(Serialize, Deserialize)]
struct GridRepr {
    bucket_minutes: u32,
    buckets_per_week: usize,
}

impl TryFrom<GridRepr> for BucketGrid {
    type Error = Error;

    fn try_from(repr: GridRepr) -> Result<Self> {
        let grid = BucketGrid::new(repr.bucket_minutes)?;
        if grid.buckets_per_week != repr.buckets_per_week {
            return Err(Error::InvalidGrid(format!(
                "{} buckets of {} minutes do not cover a week",
                repr.buckets_per_week, repr.bucket_minutes
            )));
        }
        Ok(grid)
    }
}

impl From<BucketGrid> for GridRepr {
    fn from(grid: BucketGrid) -> Self {
        GridRepr {
            bucket_minutes: grid.bucket_minutes,
            buckets_per_week: grid.buckets_per_week,
        }
    }
}

impl Default for BucketGrid {
    fn default() -> Self {
        BucketGrid {
            bucket_minutes: 15,
            buckets_per_week: 672,
        }
    }
}

impl BucketGrid {
    pub fn new(bucket_minutes: u32) -> Result<Self> {
        if bucket_minutes == 0 || MINUTES_PER_WEEK % bucket_minutes != 0 {
            return Err(Error::InvalidGrid(format!(
                "{bucket_minutes} minutes does not evenly divide a week"
            )));
        }
        Ok(BucketGrid {
            bucket_minutes,
            buckets_per_week: (MINUTES_PER_WEEK / bucket_minutes) as usize,
        })
    }

    /// A grid with an arbitrary bucket count, for small fixtures that do not
    /// model a real week. `bucket_minutes` is set to the week divided evenly
    /// when possible and to 0 otherwise.
    pub fn with_buckets(buckets_per_week: usize) -> Result<Self> {
        if buckets_per_week == 0 {
            return Err(Error::InvalidGrid("grid needs at least one bucket".into()));
        }
        let minutes = MINUTES_PER_WEEK as usize;
        let bucket_minutes = if minutes % buckets_per_week == 0 {
            (minutes / buckets_per_week) as u32
        } else {
            0
        };
        Ok(BucketGrid {
            bucket_minutes,
            buckets_per_week,
        })
    }

    pub fn bucket_minutes(&self) -> u32 {
        self.bucket_minutes
    }

    pub fn buckets_per_week(&self) -> usize {
        self.buckets_per_week
    }

    /// Bucket containing `minute_of_week`.
    pub fn bucket_of_minute(&self, minute_of_week: u32) -> Option<usize> {
        if self.bucket_minutes == 0 || minute_of_week >= MINUTES_PER_WEEK {
            return None;
        }
        Some((minute_of_week / self.bucket_minutes) as usize)
    }

    /// `(day, hour, minute)` at which a bucket starts, with day 0 = Monday.
    pub fn bucket_start(&self, bucket: usize) -> Option<(u32, u32, u32)> {
        if bucket >= self.buckets_per_week || self.bucket_minutes == 0 {
            return None;
        }
        let minute = bucket as u32 * self.bucket_minutes;
        Some((minute / 1440, (minute % 1440) / 60, minute % 60))
    }
}

/// One street's speed per bucket, in km/h; `None` marks a bucket with no
/// observations.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent)]
pub struct SpeedSeries {
    values: Vec<Option<f64>>,
}

impl SpeedSeries {
    pub fn new(values: Vec<Option<f64>>) -> Result<Self> {
        if let Some((i, v)) = values
            .iter()
            .enumerate()
            .find_map(|(i, v)| v.filter(|v| !(v.is_finite() && *v > 0.0)).map(|v| (i, v)))
        {
            return Err(Error::InvalidSeries(format!(
                "bucket {i} holds non-positive or non-finite speed {v}"
            )));
        }
        Ok(SpeedSeries { values })
    }

    pub fn missing(len: usize) -> Self {
        SpeedSeries {
            values: vec![None; len],
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[Option<f64>] {
        &self.values
    }

    pub fn get(&self, bucket: usize) -> Option<f64> {
        self.values.get(bucket).copied().flatten()
    }

    pub fn present_count(&self) -> usize {
        self.values.iter().filter(|v| v.is_some()).count()
    }

    /// Iterator over `(bucket, speed)` for present buckets.
    pub fn observed(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.values
            .iter()
            .enumerate()
            .filter_map(|(i, v)| v.map(|v| (i, v)))
    }
}

/// Fraction of buckets holding a value.
pub fn filling_rate(series: &SpeedSeries) -> f64 {
    if series.is_empty() {
        return 0.0;
    }
    series.present_count() as f64 / series.len() as f64
}

/// Present values of a series in bucket order, along with the buckets they
/// came from.
pub fn drop_nulls(series: &SpeedSeries) -> Result<ObservedSeries> {
    let (source_buckets, values): (Vec<usize>, Vec<f64>) = series.observed().unzip();
    if values.is_empty() {
        return Err(Error::EmptySeries { index: None });
    }
    Ok(ObservedSeries {
        values,
        source_buckets,
    })
}

/// A gap-free series of finite values. Each value remembers the bucket it
/// was taken from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservedSeries {
    values: Vec<f64>,
    source_buckets: Vec<usize>,
}

impl ObservedSeries {
    /// Wraps plain values; buckets are numbered `0..len`.
    pub fn new(values: Vec<f64>) -> Result<Self> {
        let buckets = (0..values.len()).collect();
        Self::from_parts(values, buckets)
    }

    pub fn from_parts(values: Vec<f64>, source_buckets: Vec<usize>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::EmptySeries { index: None });
        }
        if values.len() != source_buckets.len() {
            return Err(Error::InvalidSeries(format!(
                "{} values but {} bucket indices",
                values.len(),
                source_buckets.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidSeries("non-finite value".into()));
        }
        if source_buckets.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidSeries(
                "bucket indices must be strictly increasing".into(),
            ));
        }
        Ok(ObservedSeries {
            values,
            source_buckets,
        })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn source_buckets(&self) -> &[usize] {
        &self.source_buckets
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Places the values back on a grid of `buckets` slots.
    pub fn embed(&self, buckets: usize) -> Vec<Option<f64>> {
        let mut out = vec![None; buckets];
        for (&b, &v) in self.source_buckets.iter().zip(&self.values) {
            if b < buckets {
                out[b] = Some(v);
            }
        }
        out
    }
}

impl AsRef<[f64]> for ObservedSeries {
    fn as_ref(&self) -> &[f64] {
        &self.values
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RoadClass {
    Primary,
    Secondary,
    Tertiary,
    Trunk,
    Residential,
    Other,
}

impl RoadClass {
    pub const ALL: [RoadClass; 6] = [
        RoadClass::Primary,
        RoadClass::Secondary,
        RoadClass::Tertiary,
        RoadClass::Trunk,
        RoadClass::Residential,
        RoadClass::Other,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            RoadClass::Primary => "primary",
            RoadClass::Secondary => "secondary",
            RoadClass::Tertiary => "tertiary",
            RoadClass::Trunk => "trunk",
            RoadClass::Residential => "residential",
            RoadClass::Other => "other",
        }
    }
}

impl fmt::Display for RoadClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for RoadClass {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let lower = s.trim().to_ascii_lowercase();
        RoadClass::ALL
            .into_iter()
            .find(|c| c.as_str() == lower)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown road class {s:?}")))
    }
}

/// A street's weekly speed profile together with its GIS attributes.
#[derive(Debug, Clone, PartialEq)]
pub struct StreetProfile {
    street_id: String,
    series: SpeedSeries,
    filling_rate: f64,
    pub road_class: Option<RoadClass>,
    pub max_speed_kmh: Option<f64>,
    pub length_m: Option<f64>,
    /// Carried through from the attribute table; no computation reads it.
    pub avg_speed_kmh: Option<f64>,
    pub name: Option<String>,
    pub county: Option<String>,
}

impl StreetProfile {
    pub fn new(street_id: impl Into<String>, series: SpeedSeries) -> Self {
        let filling_rate = filling_rate(&series);
        StreetProfile {
            street_id: street_id.into(),
            series,
            filling_rate,
            road_class: None,
            max_speed_kmh: None,
            length_m: None,
            avg_speed_kmh: None,
            name: None,
            county: None,
        }
    }

    pub fn with_road_class(mut self, class: RoadClass) -> Self {
        self.road_class = Some(class);
        self
    }

    pub fn with_max_speed(mut self, kmh: f64) -> Self {
        self.max_speed_kmh = Some(kmh);
        self
    }

    pub fn street_id(&self) -> &str {
        &self.street_id
    }

    pub fn series(&self) -> &SpeedSeries {
        &self.series
    }

    pub fn filling_rate(&self) -> f64 {
        self.filling_rate
    }

    pub fn set_series(&mut self, series: SpeedSeries) {
        self.filling_rate = filling_rate(&series);
        self.series = series;
    }

    pub fn observed(&self) -> Result<ObservedSeries> {
        drop_nulls(&self.series)
    }
}

/// Street profiles sharing one bucket grid, with unique street ids.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    grid: BucketGrid,
    profiles: Vec<StreetProfile>,
}

impl Dataset {
    pub fn new(grid: BucketGrid, profiles: Vec<StreetProfile>) -> Result<Self> {
        let mut seen = HashSet::with_capacity(profiles.len());
        for p in &profiles {
            if !seen.insert(p.street_id()) {
                return Err(Error::DuplicateStreet(p.street_id().to_string()));
            }
            if p.series().len() != grid.buckets_per_week() {
                return Err(Error::InvalidSeries(format!(
                    "street {} has {} buckets, grid has {}",
                    p.street_id(),
                    p.series().len(),
                    grid.buckets_per_week()
                )));
            }
        }
        Ok(Dataset { grid, profiles })
    }

    pub fn grid(&self) -> BucketGrid {
        self.grid
    }

    pub fn profiles(&self) -> &[StreetProfile] {
        &self.profiles
    }

    pub fn len(&self) -> usize {
        self.profiles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.profiles.is_empty()
    }

    pub fn get(&self, street_id: &str) -> Option<&StreetProfile> {
        self.profiles.iter().find(|p| p.street_id() == street_id)
    }

    pub fn into_profiles(self) -> Vec<StreetProfile> {
        self.profiles
    }

    /// Keeps the profiles matching `keep`, preserving order.
    pub fn filtered(&self, mut keep: impl FnMut(&StreetProfile) -> bool) -> Dataset {
        Dataset {
            grid: self.grid,
            profiles: self.profiles.iter().filter(|p| keep(p)).cloned().collect(),
        }
    }

    /// Null-dropped series of every profile, in order.
    pub fn observed_series(&self) -> Result<Vec<ObservedSeries>> {
        self.profiles
            .iter()
            .enumerate()
            .map(|(i, p)| p.observed().map_err(|_| Error::EmptySeries { index: Some(i) }))
            .collect()
    }

    pub fn street_ids(&self) -> Vec<String> {
        self.profiles.iter().map(|p| p.street_id().to_string()).collect()
    }
}
