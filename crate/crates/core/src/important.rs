//! Secondary streets whose traffic pattern resembles the primary network.
//!
//! Features are standardized, primary roads are averaged into one
//! representative, secondary roads are clustered with DTW K-Means, and the
//! cluster whose centroid lies closest to the representative is selected.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::clustering::{kmeans_dtw_with_features, ClusterConfig, ClusterModel};
use crate::dtw::Dtw;
use crate::error::{Error, Result};
use crate::model::{Dataset, ObservedSeries, RoadClass};
use crate::pipeline::{apply_scaler, fit_scaler, FeatureSpec, ScalerParams};
use crate::stats;

/// Mean scaled feature vector of the primary roads.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrimaryRepresentative {
    /// One entry per bucket; `None` where no primary road was observed.
    pub series: Vec<Option<f64>>,
    /// Mean scaled scalar features; `None` where no primary road had a value.
    pub scalar_features: Vec<Option<f64>>,
    pub primary_count: usize,
}

impl PrimaryRepresentative {
    pub fn observed(&self) -> Result<ObservedSeries> {
        let (buckets, values): (Vec<usize>, Vec<f64>) = self
            .series
            .iter()
            .enumerate()
            .filter_map(|(b, v)| v.map(|v| (b, v)))
            .unzip();
        ObservedSeries::from_parts(values, buckets)
    }

    /// Scalar features with absent entries at the column mean (0 after
    /// scaling).
    pub fn scalars_filled(&self) -> Vec<f64> {
        self.scalar_features.iter().map(|v| v.unwrap_or(0.0)).collect()
    }
}

fn column_means(rows: &[Vec<Option<f64>>], width: usize) -> Vec<Option<f64>> {
    (0..width)
        .map(|c| {
            let column: Vec<f64> = rows.iter().filter_map(|r| r[c]).collect();
            stats::mean(&column)
        })
        .collect()
}

pub fn primary_representative(ds: &Dataset, scaler: &ScalerParams) -> Result<PrimaryRepresentative> {
    let scaled = ds
        .profiles()
        .iter()
        .filter(|p| p.road_class == Some(RoadClass::Primary))
        .map(|p| apply_scaler(p, scaler))
        .collect::<Result<Vec<_>>>()?;
    if scaled.is_empty() {
        return Err(Error::NoPrimaryRoads);
    }
    let series: Vec<Vec<Option<f64>>> = scaled.iter().map(|s| s.series.clone()).collect();
    let scalars: Vec<Vec<Option<f64>>> = scaled.iter().map(|s| s.scalars.clone()).collect();
    Ok(PrimaryRepresentative {
        series: column_means(&series, scaler.buckets),
        scalar_features: column_means(&scalars, scaler.spec.scalar_count()),
        primary_count: scaled.len(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ImportanceConfig {
    /// Clustering settings; `feature_weight` also weighs the scalar term of
    /// the centroid-to-representative distance.
    pub cluster: ClusterConfig,
    pub features: FeatureSpec,
    /// Centroids closer than this fraction of the mean member distance
    /// trigger a warning.
    pub distinct_fraction: f64,
}

impl Default for ImportanceConfig {
    fn default() -> Self {
        ImportanceConfig {
            cluster: ClusterConfig::default(),
            features: FeatureSpec::default(),
            distinct_fraction: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImportantStreet {
    pub street_id: String,
    pub filling_rate: f64,
    pub road_class: RoadClass,
    pub name: Option<String>,
    pub county: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ImportanceResult {
    pub k: usize,
    pub selected_cluster: usize,
    pub cluster_distances: Vec<f64>,
    pub cluster_sizes: Vec<usize>,
    pub important_street_ids: Vec<String>,
    pub per_street: Vec<ImportantStreet>,
    pub inertia: f64,
    pub warnings: Vec<String>,
    #[serde(skip)]
    pub model: ClusterModel,
}

/// Index of the smallest distance; ties go to the lowest index.
pub fn argmin(distances: &[f64]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, &d) in distances.iter().enumerate() {
        if best.is_none_or(|b| d < distances[b]) {
            best = Some(i);
        }
    }
    best
}

/// Centroid-to-representative distance: DTW on the series plus the weighted
/// Euclidean distance on scalar features.
pub fn representative_distance(
    dtw: &Dtw,
    weight: f64,
    rep_series: &ObservedSeries,
    rep_scalars: &[f64],
    centroid_series: &[f64],
    centroid_scalars: &[f64],
) -> Result<f64> {
    let series = dtw.distance(centroid_series, rep_series.values())?;
    if rep_scalars.is_empty() {
        return Ok(series);
    }
    Ok(series + weight * stats::euclidean(centroid_scalars, rep_scalars))
}

pub fn find_important_secondary(ds: &Dataset, k: usize, config: &ImportanceConfig) -> Result<ImportanceResult> {
    let scaler = fit_scaler(ds.profiles(), config.features)?;
    let representative = primary_representative(ds, &scaler)?;
    let rep_series = representative.observed()?;
    let rep_scalars = representative.scalars_filled();

    let secondary: Vec<_> = ds
        .profiles()
        .iter()
        .filter(|p| p.road_class == Some(RoadClass::Secondary))
        .collect();
    if secondary.len() < k {
        return Err(Error::TooFewSeries { k, n: secondary.len() });
    }
    let scaled = secondary
        .par_iter()
        .map(|p| apply_scaler(p, &scaler))
        .collect::<Result<Vec<_>>>()?;
    let mut series = Vec::with_capacity(scaled.len());
    let mut features = Vec::with_capacity(scaled.len());
    for (i, s) in scaled.iter().enumerate() {
        let (buckets, values): (Vec<usize>, Vec<f64>) = s
            .series
            .iter()
            .enumerate()
            .filter_map(|(b, v)| v.map(|v| (b, v)))
            .unzip();
        series.push(
            ObservedSeries::from_parts(values, buckets)
                .map_err(|_| Error::EmptySeries { index: Some(i) })?,
        );
        features.push(s.scalars.iter().map(|v| v.unwrap_or(0.0)).collect::<Vec<f64>>());
    }

    let cluster_config = config.cluster.clone().with_k(k);
    let model = kmeans_dtw_with_features(&series, &features, &cluster_config)?
        .with_street_ids(secondary.iter().map(|p| p.street_id().to_string()).collect());

    let dtw = cluster_config.dtw();
    let cluster_distances = model
        .centroids
        .par_iter()
        .map(|c| {
            let empty = Vec::new();
            let scalars = c.scalar_features.as_ref().unwrap_or(&empty);
            representative_distance(
                &dtw,
                cluster_config.feature_weight,
                &rep_series,
                &rep_scalars,
                &c.series,
                scalars,
            )
        })
        .collect::<Result<Vec<_>>>()?;
    let selected_cluster = argmin(&cluster_distances).expect("k >= 1");

    let members = model.members(selected_cluster);
    let per_street: Vec<ImportantStreet> = members
        .iter()
        .map(|&i| {
            let p = secondary[i];
            ImportantStreet {
                street_id: p.street_id().to_string(),
                filling_rate: p.filling_rate(),
                road_class: RoadClass::Secondary,
                name: p.name.clone(),
                county: p.county.clone(),
            }
        })
        .collect();

    let warnings = distinctiveness_warnings(&dtw, &model, config.distinct_fraction)?;
    Ok(ImportanceResult {
        k,
        selected_cluster,
        cluster_distances,
        cluster_sizes: model.cluster_sizes(),
        important_street_ids: per_street.iter().map(|s| s.street_id.clone()).collect(),
        per_street,
        inertia: model.inertia(),
        warnings,
        model,
    })
}

/// Warns when two centroids sit closer than `fraction` of the mean
/// member-to-centroid distance.
fn distinctiveness_warnings(dtw: &Dtw, model: &ClusterModel, fraction: f64) -> Result<Vec<String>> {
    let Some(spread) = stats::mean(&model.distances) else {
        return Ok(Vec::new());
    };
    let threshold = fraction * spread;
    let mut warnings = Vec::new();
    for i in 0..model.k() {
        for j in i + 1..model.k() {
            let d = dtw.distance(&model.centroids[i].series, &model.centroids[j].series)?;
            if d <= threshold {
                warnings.push(format!(
                    "centroids {i} and {j} are not distinct: dtw {d:.3} <= {threshold:.3}"
                ));
            }
        }
    }
    Ok(warnings)
}

/// Selected streets as `road_class,filling_rate_pct,street_id,name,county`.
pub fn write_important_csv<W: Write>(writer: W, streets: &[ImportantStreet]) -> Result<()> {
    let mut csv = csv::Writer::from_writer(writer);
    csv.write_record(["road_class", "filling_rate_pct", "street_id", "name", "county"])?;
    for s in streets {
        csv.write_record([
            s.road_class.as_str().to_string(),
            format!("{:.2}", s.filling_rate * 100.0),
            s.street_id.clone(),
            s.name.clone().unwrap_or_default(),
            s.county.clone().unwrap_or_default(),
        ])?;
    }
    csv.flush().map_err(|e| Error::Io {
        path: "<csv>".into(),
        source: e,
    })?;
    Ok(())
}
