//! Clustering of road speed profiles with K-Means under Dynamic Time
//! Warping, plus the two applications built on top of it: imputing missing
//! speeds for congestion coloring, and finding secondary roads that behave
//! like primary roads.

pub mod clustering;
pub mod colorify;
pub mod dtw;
pub mod error;
pub mod important;
pub mod metrics;
pub mod model;
pub mod pipeline;
pub mod stats;
pub mod synthgen;

pub use clustering::{
    elbow_select, inertia, kmeans_dtw, kmeans_dtw_with_features, update_barycenter, Centroid,
    ClusterConfig, ClusterModel, ElbowResult, ModelDocument,
};
pub use colorify::{
    colorify, free_flow_reference, impute, CongestionLevel, CongestionThresholds, ImputedDataset,
};
pub use dtw::{dtw_alignment, dtw_distance, pairwise_distances, AlignmentPath, Dtw, LocalDistance};
pub use error::{Error, ErrorClass, Result};
pub use important::{
    find_important_secondary, primary_representative, ImportanceConfig, ImportanceResult,
    PrimaryRepresentative,
};
pub use model::{
    drop_nulls, filling_rate, BucketGrid, Dataset, ObservedSeries, RoadClass, SpeedSeries,
    StreetProfile,
};
