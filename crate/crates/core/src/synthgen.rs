//! Seedable generator of weekly street speed profiles with planted cluster
//! structure.
//!
//! Each street follows its archetype's waveform: a flat base speed, lowered
//! by the dip fraction in weekday rush hours (07:00-09:00 and 17:00-19:00),
//! plus Gaussian noise clipped to the default cleaning bounds. Buckets go
//! missing independently. Every street draws from its own ChaCha stream, so
//! output is identical for a given seed regardless of thread count.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{BucketGrid, Dataset, RoadClass, SpeedSeries, StreetProfile};
use crate::pipeline::{AttributeRow, CleaningConfig, RawRecord};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Archetype {
    Residential,
    Arterial,
    Highway,
    PrimaryLikeSecondary,
}

impl Archetype {
    pub fn as_str(&self) -> &'static str {
        match self {
            Archetype::Residential => "residential",
            Archetype::Arterial => "arterial",
            Archetype::Highway => "highway",
            Archetype::PrimaryLikeSecondary => "primary_like_secondary",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArchetypeSpec {
    pub name: Archetype,
    pub base_speed_kmh: f64,
    pub rush_hour_dip_fraction: f64,
    pub noise_std_kmh: f64,
    pub missing_prob: f64,
    pub count: usize,
    pub road_class: RoadClass,
    /// Posted limit written to the attribute table.
    pub max_speed_kmh: Option<f64>,
}

impl ArchetypeSpec {
    fn validate(&self, bounds: &CleaningConfig) -> Result<()> {
        let fail = |msg: String| Err(Error::InvalidSpec(format!("{}: {msg}", self.name.as_str())));
        if self.count == 0 {
            return fail("count must be at least 1".into());
        }
        if !bounds.in_bounds(self.base_speed_kmh) {
            return fail(format!("base speed {} outside cleaning bounds", self.base_speed_kmh));
        }
        if !(0.0..1.0).contains(&self.rush_hour_dip_fraction) {
            return fail("rush-hour dip must lie in [0, 1)".into());
        }
        if !(self.noise_std_kmh >= 0.0 && self.noise_std_kmh.is_finite()) {
            return fail("noise std must be finite and non-negative".into());
        }
        // Streets must be able to clear the filling-rate filter on average.
        if !(0.0..1.0 - bounds.min_filling_rate).contains(&self.missing_prob) {
            return fail(format!(
                "missing_prob {} must lie in [0, {})",
                self.missing_prob,
                1.0 - bounds.min_filling_rate
            ));
        }
        Ok(())
    }

    /// Noise-free speed in `bucket`.
    pub fn waveform(&self, grid: &BucketGrid, bucket: usize) -> f64 {
        if is_rush_hour(grid, bucket) {
            self.base_speed_kmh * (1.0 - self.rush_hour_dip_fraction)
        } else {
            self.base_speed_kmh
        }
    }
}

/// Weekday 07:00-09:00 or 17:00-19:00, by bucket start time.
pub fn is_rush_hour(grid: &BucketGrid, bucket: usize) -> bool {
    match grid.bucket_start(bucket) {
        Some((day, hour, _)) => day < 5 && matches!(hour, 7 | 8 | 17 | 18),
        None => false,
    }
}

/// Three archetypes of 100 streets each, 30% missing buckets.
pub fn default_specs() -> Vec<ArchetypeSpec> {
    vec![
        ArchetypeSpec {
            name: Archetype::Residential,
            base_speed_kmh: 25.0,
            rush_hour_dip_fraction: 0.2,
            noise_std_kmh: 3.0,
            missing_prob: 0.3,
            count: 100,
            road_class: RoadClass::Residential,
            max_speed_kmh: Some(30.0),
        },
        ArchetypeSpec {
            name: Archetype::Arterial,
            base_speed_kmh: 57.0,
            rush_hour_dip_fraction: 0.5,
            noise_std_kmh: 4.0,
            missing_prob: 0.3,
            count: 100,
            road_class: RoadClass::Secondary,
            max_speed_kmh: Some(60.0),
        },
        ArchetypeSpec {
            name: Archetype::Highway,
            base_speed_kmh: 90.0,
            rush_hour_dip_fraction: 0.6,
            noise_std_kmh: 6.0,
            missing_prob: 0.3,
            count: 100,
            road_class: RoadClass::Trunk,
            max_speed_kmh: Some(100.0),
        },
    ]
}

/// Primary highways, 180 ordinary secondary streets in two speed regimes,
/// and 20 secondary streets that carry highway-like traffic.
pub fn important_roads_specs() -> Vec<ArchetypeSpec> {
    vec![
        ArchetypeSpec {
            name: Archetype::Highway,
            base_speed_kmh: 90.0,
            rush_hour_dip_fraction: 0.6,
            noise_std_kmh: 6.0,
            missing_prob: 0.1,
            count: 40,
            road_class: RoadClass::Primary,
            max_speed_kmh: Some(100.0),
        },
        ArchetypeSpec {
            name: Archetype::Arterial,
            base_speed_kmh: 50.0,
            rush_hour_dip_fraction: 0.5,
            noise_std_kmh: 4.0,
            missing_prob: 0.4,
            count: 90,
            road_class: RoadClass::Secondary,
            max_speed_kmh: Some(50.0),
        },
        ArchetypeSpec {
            name: Archetype::Residential,
            base_speed_kmh: 30.0,
            rush_hour_dip_fraction: 0.2,
            noise_std_kmh: 3.0,
            missing_prob: 0.4,
            count: 90,
            road_class: RoadClass::Secondary,
            max_speed_kmh: Some(40.0),
        },
        ArchetypeSpec {
            name: Archetype::PrimaryLikeSecondary,
            base_speed_kmh: 85.0,
            rush_hour_dip_fraction: 0.6,
            noise_std_kmh: 6.0,
            missing_prob: 0.05,
            count: 20,
            road_class: RoadClass::Secondary,
            max_speed_kmh: Some(60.0),
        },
    ]
}

/// Generated dataset with the spec index each street was drawn from.
#[derive(Debug, Clone, PartialEq)]
pub struct Synthetic {
    pub dataset: Dataset,
    pub labels: Vec<usize>,
    pub specs: Vec<ArchetypeSpec>,
}

impl Synthetic {
    pub fn archetype_of(&self, profile_index: usize) -> Archetype {
        self.specs[self.labels[profile_index]].name
    }

    /// Planted labels for the streets of `ds`, in its order; `None` for
    /// streets this generator did not produce.
    pub fn labels_for(&self, ds: &Dataset) -> Vec<Option<usize>> {
        let by_id: std::collections::HashMap<&str, usize> = self
            .dataset
            .profiles()
            .iter()
            .map(|p| p.street_id())
            .zip(self.labels.iter().copied())
            .collect();
        ds.profiles().iter().map(|p| by_id.get(p.street_id()).copied()).collect()
    }

    /// One record per observed bucket.
    pub fn records(&self) -> Vec<RawRecord> {
        self.dataset
            .profiles()
            .iter()
            .flat_map(|p| {
                p.series()
                    .observed()
                    .map(move |(b, v)| RawRecord::new(p.street_id(), b, v))
            })
            .collect()
    }

    pub fn attribute_rows(&self) -> Vec<AttributeRow> {
        self.dataset
            .profiles()
            .iter()
            .map(|p| AttributeRow {
                street_id: p.street_id().to_string(),
                road_class: p.road_class,
                max_speed_kmh: p.max_speed_kmh,
                length_m: p.length_m,
                ..Default::default()
            })
            .collect()
    }

    /// `(street_id, archetype)` pairs, for the oracle-only label file.
    pub fn label_rows(&self) -> Vec<(String, &'static str)> {
        (0..self.labels.len())
            .map(|i| {
                (
                    self.dataset.profiles()[i].street_id().to_string(),
                    self.archetype_of(i).as_str(),
                )
            })
            .collect()
    }
}

fn round_centi(v: f64) -> f64 {
    (v * 100.0).round() / 100.0
}

pub fn generate(specs: &[ArchetypeSpec], grid: BucketGrid, seed: u64) -> Result<Synthetic> {
    if specs.is_empty() {
        return Err(Error::InvalidSpec("no archetypes given".into()));
    }
    let bounds = CleaningConfig::default();
    for spec in specs {
        spec.validate(&bounds)?;
    }
    let jobs: Vec<usize> = specs
        .iter()
        .enumerate()
        .flat_map(|(s, spec)| std::iter::repeat(s).take(spec.count))
        .collect();

    let profiles = jobs
        .par_iter()
        .enumerate()
        .map(|(street, &s)| {
            let spec = &specs[s];
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(street as u64);
            let noise = Normal::new(0.0, spec.noise_std_kmh)
                .map_err(|e| Error::InvalidSpec(e.to_string()))?;
            let length_m = round_centi(rng.gen_range(50.0..2000.0));
            let values = (0..grid.buckets_per_week())
                .map(|b| {
                    let speed = spec.waveform(&grid, b) + noise.sample(&mut rng);
                    let speed = round_centi(speed.clamp(bounds.min_speed_kmh, bounds.max_speed_kmh));
                    let missing = rng.gen::<f64>() < spec.missing_prob;
                    (!missing).then_some(speed)
                })
                .collect();
            let mut profile = StreetProfile::new(
                format!("{}-{:04}", spec.name.as_str(), street),
                SpeedSeries::new(values)?,
            )
            .with_road_class(spec.road_class);
            profile.max_speed_kmh = spec.max_speed_kmh;
            profile.length_m = Some(length_m);
            Ok(profile)
        })
        .collect::<Result<Vec<_>>>()?;

    Ok(Synthetic {
        dataset: Dataset::new(grid, profiles)?,
        labels: jobs,
        specs: specs.to_vec(),
    })
}
