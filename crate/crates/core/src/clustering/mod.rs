//! K-Means over variable-length series with a DTW assignment metric.
//!
//! Centroids are updated by DTW barycenter averaging; inertia is the sum of
//! squared point-to-centroid distances. Points may carry a small vector of
//! scalar features, in which case the point-to-centroid distance is
//! `dtw(series) + feature_weight * euclidean(features)`.

mod barycenter;
mod elbow;
mod kmeans;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::dtw::{Dtw, LocalDistance};
use crate::error::{Error, Result};
use crate::model::ObservedSeries;

pub use barycenter::{dba, resample};
pub use elbow::{elbow_select, knee_point, log_curve, ElbowResult};
pub use kmeans::{kmeans_dtw, kmeans_dtw_from, kmeans_dtw_with_features};

pub const MODEL_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ClusterConfig {
    pub k: usize,
    pub max_iterations: usize,
    pub seed: u64,
    /// Stop once the relative inertia change between iterations falls
    /// below this.
    pub tolerance: f64,
    pub barycenter_iterations: usize,
    pub local: LocalDistance,
    pub window: Option<usize>,
    /// Weight of the scalar-feature Euclidean term, when features are used.
    pub feature_weight: f64,
}

impl Default for ClusterConfig {
    fn default() -> Self {
        ClusterConfig {
            k: 3,
            max_iterations: 50,
            seed: 0,
            tolerance: 1e-4,
            barycenter_iterations: 10,
            local: LocalDistance::Absolute,
            window: None,
            feature_weight: 1.0,
        }
    }
}

impl ClusterConfig {
    pub fn with_k(mut self, k: usize) -> Self {
        self.k = k;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn dtw(&self) -> Dtw {
        Dtw {
            local: self.local,
            window: self.window,
        }
    }

    pub(crate) fn validate(&self, n: usize) -> Result<()> {
        if self.k == 0 {
            return Err(Error::InvalidConfig("k must be positive".into()));
        }
        if self.max_iterations == 0 {
            return Err(Error::InvalidConfig("max_iterations must be positive".into()));
        }
        if !(self.feature_weight.is_finite() && self.feature_weight >= 0.0) {
            return Err(Error::InvalidConfig("feature_weight must be finite and >= 0".into()));
        }
        if self.k > n {
            return Err(Error::TooFewSeries { k: self.k, n });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Centroid {
    pub series: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scalar_features: Option<Vec<f64>>,
}

impl Centroid {
    pub fn new(series: Vec<f64>) -> Self {
        Centroid {
            series,
            scalar_features: None,
        }
    }

    pub fn observed(&self) -> Result<ObservedSeries> {
        ObservedSeries::new(self.series.clone())
    }
}

/// A fitted partition. `assignments[i]` is the cluster of input `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterModel {
    pub config: ClusterConfig,
    pub centroids: Vec<Centroid>,
    pub assignments: Vec<usize>,
    /// Distance from each input to its centroid.
    pub distances: Vec<f64>,
    /// Street ids in input order; empty when clustering anonymous series.
    pub street_ids: Vec<String>,
    pub inertia_trace: Vec<f64>,
    pub iterations_run: usize,
}

impl ClusterModel {
    pub fn k(&self) -> usize {
        self.centroids.len()
    }

    pub fn inertia(&self) -> f64 {
        self.distances.iter().map(|d| d * d).sum()
    }

    pub fn with_street_ids(mut self, ids: Vec<String>) -> Self {
        self.street_ids = ids;
        self
    }

    pub fn cluster_of(&self, street_id: &str) -> Option<usize> {
        self.street_ids
            .iter()
            .position(|s| s == street_id)
            .map(|i| self.assignments[i])
    }

    /// Street id to cluster index.
    pub fn assignment_map(&self) -> BTreeMap<String, usize> {
        self.street_ids
            .iter()
            .cloned()
            .zip(self.assignments.iter().copied())
            .collect()
    }

    pub fn members(&self, cluster: usize) -> Vec<usize> {
        self.assignments
            .iter()
            .enumerate()
            .filter(|(_, &c)| c == cluster)
            .map(|(i, _)| i)
            .collect()
    }

    pub fn cluster_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k()];
        for &c in &self.assignments {
            sizes[c] += 1;
        }
        sizes
    }

    pub fn to_document(&self) -> ModelDocument {
        ModelDocument {
            schema_version: MODEL_SCHEMA_VERSION,
            config: self.config.clone(),
            centroids: self
                .centroids
                .iter()
                .map(|c| CentroidDocument {
                    length: c.series.len(),
                    values: c.series.clone(),
                    scalar_features: c.scalar_features.clone(),
                })
                .collect(),
            assignments: self.assignment_map(),
            inertia_trace: self.inertia_trace.clone(),
            iterations_run: self.iterations_run,
        }
    }
}

/// Exported model. Assignments are keyed by street id; the document does not
/// carry per-point distances.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelDocument {
    pub schema_version: u32,
    pub config: ClusterConfig,
    pub centroids: Vec<CentroidDocument>,
    pub assignments: BTreeMap<String, usize>,
    pub inertia_trace: Vec<f64>,
    pub iterations_run: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CentroidDocument {
    pub length: usize,
    pub values: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scalar_features: Option<Vec<f64>>,
}

impl ModelDocument {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: ModelDocument = serde_json::from_str(text)?;
        if doc.schema_version != MODEL_SCHEMA_VERSION {
            return Err(Error::InvalidConfig(format!(
                "unsupported model schema_version {}",
                doc.schema_version
            )));
        }
        if let Some(c) = doc.centroids.iter().find(|c| c.length != c.values.len()) {
            return Err(Error::InvalidConfig(format!(
                "centroid length {} does not match its {} values",
                c.length,
                c.values.len()
            )));
        }
        if let Some((id, &c)) = doc.assignments.iter().find(|(_, &c)| c >= doc.centroids.len()) {
            return Err(Error::InvalidConfig(format!(
                "street {id} assigned to missing cluster {c}"
            )));
        }
        Ok(doc)
    }

    pub fn centroids(&self) -> Vec<Centroid> {
        self.centroids
            .iter()
            .map(|c| Centroid {
                series: c.values.clone(),
                scalar_features: c.scalar_features.clone(),
            })
            .collect()
    }
}

/// DTW barycenter update of a centroid from its members.
pub fn update_barycenter(
    members: &[ObservedSeries],
    init: &Centroid,
    iterations: usize,
    dtw: &Dtw,
) -> Result<Centroid> {
    if members.is_empty() {
        return Err(Error::EmptySeries { index: None });
    }
    let series = dba(dtw, members, &init.series, iterations)?;
    Ok(Centroid {
        series,
        scalar_features: init.scalar_features.clone(),
    })
}

/// Sum of squared DTW distances from each series to its assigned centroid.
pub fn inertia(series: &[ObservedSeries], model: &ClusterModel) -> Result<f64> {
    let dtw = model.config.dtw();
    let mut total = 0.0;
    for (i, (s, &c)) in series.iter().zip(&model.assignments).enumerate() {
        let d = dtw
            .distance(s.values(), &model.centroids[c].series)
            .map_err(|_| Error::EmptySeries { index: Some(i) })?;
        total += d * d;
    }
    Ok(total)
}
