//! Per-column standardization of the street feature matrix: one column per
//! bucket, followed by the optional scalar columns.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::StreetProfile;
use crate::stats;

/// Which scalar columns follow the bucket columns.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureSpec {
    pub filling_rate: bool,
    pub max_speed: bool,
}

impl Default for FeatureSpec {
    fn default() -> Self {
        FeatureSpec {
            filling_rate: true,
            max_speed: true,
        }
    }
}

impl FeatureSpec {
    pub fn series_only() -> Self {
        FeatureSpec {
            filling_rate: false,
            max_speed: false,
        }
    }

    pub fn scalar_count(&self) -> usize {
        self.filling_rate as usize + self.max_speed as usize
    }

    fn scalars(&self, profile: &StreetProfile) -> Vec<Option<f64>> {
        let mut out = Vec::with_capacity(self.scalar_count());
        if self.filling_rate {
            out.push(Some(profile.filling_rate()));
        }
        if self.max_speed {
            out.push(profile.max_speed_kmh);
        }
        out
    }
}

/// Column means and population standard deviations. A column with no
/// observations has mean 0 and std 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalerParams {
    pub spec: FeatureSpec,
    pub buckets: usize,
    pub means: Vec<f64>,
    pub stds: Vec<f64>,
}

/// A profile's features after scaling; missing cells stay missing.
#[derive(Debug, Clone, PartialEq)]
pub struct ScaledFeatures {
    pub series: Vec<Option<f64>>,
    pub scalars: Vec<Option<f64>>,
}

fn columns(profile: &StreetProfile, spec: FeatureSpec) -> Vec<Option<f64>> {
    let mut row = profile.series().values().to_vec();
    row.extend(spec.scalars(profile));
    row
}

pub fn fit_scaler(profiles: &[StreetProfile], spec: FeatureSpec) -> Result<ScalerParams> {
    if profiles.len() < 2 {
        return Err(Error::TooFewProfiles {
            needed: 2,
            got: profiles.len(),
        });
    }
    let buckets = profiles[0].series().len();
    if profiles.iter().any(|p| p.series().len() != buckets) {
        return Err(Error::InvalidSeries("profiles have different bucket counts".into()));
    }
    let rows: Vec<Vec<Option<f64>>> = profiles.iter().map(|p| columns(p, spec)).collect();
    let width = buckets + spec.scalar_count();
    let (means, stds) = (0..width)
        .map(|c| {
            let column: Vec<f64> = rows.iter().filter_map(|r| r[c]).collect();
            (
                stats::mean(&column).unwrap_or(0.0),
                stats::std_dev(&column).unwrap_or(0.0),
            )
        })
        .unzip();
    Ok(ScalerParams {
        spec,
        buckets,
        means,
        stds,
    })
}

impl ScalerParams {
    fn scale(&self, c: usize, x: f64) -> f64 {
        if self.stds[c] > 0.0 {
            (x - self.means[c]) / self.stds[c]
        } else {
            0.0
        }
    }

    /// Scales one bucket value.
    pub fn scale_bucket(&self, bucket: usize, x: f64) -> f64 {
        self.scale(bucket, x)
    }

    /// Maps a scaled value in column `c` back to its original units.
    pub fn inverse(&self, c: usize, z: f64) -> f64 {
        z * self.stds[c] + self.means[c]
    }
}

pub fn apply_scaler(profile: &StreetProfile, params: &ScalerParams) -> Result<ScaledFeatures> {
    if profile.series().len() != params.buckets {
        return Err(Error::InvalidSeries(format!(
            "profile has {} buckets, scaler was fit on {}",
            profile.series().len(),
            params.buckets
        )));
    }
    let mut scaled: Vec<Option<f64>> = columns(profile, params.spec)
        .into_iter()
        .enumerate()
        .map(|(c, v)| v.map(|x| params.scale(c, x)))
        .collect();
    let scalars = scaled.split_off(params.buckets);
    Ok(ScaledFeatures {
        series: scaled,
        scalars,
    })
}
