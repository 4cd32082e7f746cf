//! Cluster-peer imputation of missing bucket speeds and per-cell congestion
//! levels for map tile coloring.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::clustering::ClusterModel;
use crate::error::{Error, Result};
use crate::model::{Dataset, SpeedSeries, StreetProfile};
use crate::stats;

/// Congestion levels, ordered from most to least congested so that
/// `Blocked < Queuing < Heavy < FreeFlow`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CongestionLevel {
    Blocked,
    Queuing,
    Heavy,
    FreeFlow,
}

impl CongestionLevel {
    pub const ALL: [CongestionLevel; 4] = [
        CongestionLevel::FreeFlow,
        CongestionLevel::Heavy,
        CongestionLevel::Queuing,
        CongestionLevel::Blocked,
    ];

    pub fn color(&self) -> &'static str {
        match self {
            CongestionLevel::FreeFlow => "green",
            CongestionLevel::Heavy => "yellow",
            CongestionLevel::Queuing => "red",
            CongestionLevel::Blocked => "black",
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            CongestionLevel::FreeFlow => "free_flow",
            CongestionLevel::Heavy => "heavy",
            CongestionLevel::Queuing => "queuing",
            CongestionLevel::Blocked => "blocked",
        }
    }
}

impl fmt::Display for CongestionLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CongestionThresholds {
    /// Speed ratio at or above which traffic is free flowing.
    pub free_flow_ratio: f64,
    /// Speed ratio at or above which traffic is heavy rather than queuing.
    pub heavy_ratio: f64,
    /// Speeds at or below this are blocked regardless of ratio.
    pub blocked_speed_kmh: f64,
}

impl Default for CongestionThresholds {
    fn default() -> Self {
        CongestionThresholds {
            free_flow_ratio: 0.75,
            heavy_ratio: 0.40,
            blocked_speed_kmh: 5.0,
        }
    }
}

impl CongestionThresholds {
    pub fn validate(&self) -> Result<()> {
        if !(0.0 < self.heavy_ratio
            && self.heavy_ratio < self.free_flow_ratio
            && self.free_flow_ratio <= 1.0)
        {
            return Err(Error::InvalidConfig(format!(
                "thresholds need 0 < heavy ({}) < free flow ({}) <= 1",
                self.heavy_ratio, self.free_flow_ratio
            )));
        }
        if !(self.blocked_speed_kmh >= 0.0 && self.blocked_speed_kmh.is_finite()) {
            return Err(Error::InvalidConfig("blocked speed must be >= 0".into()));
        }
        Ok(())
    }

    /// Parses `free:heavy:blocked`, e.g. `0.75:0.4:5`.
    pub fn parse(text: &str) -> Result<Self> {
        let parts: Vec<&str> = text.split(':').collect();
        let bad = || Error::InvalidConfig(format!("thresholds must be free:heavy:blocked, got {text:?}"));
        if parts.len() != 3 {
            return Err(bad());
        }
        let nums = parts
            .iter()
            .map(|p| p.trim().parse::<f64>().map_err(|_| bad()))
            .collect::<Result<Vec<_>>>()?;
        let t = CongestionThresholds {
            free_flow_ratio: nums[0],
            heavy_ratio: nums[1],
            blocked_speed_kmh: nums[2],
        };
        t.validate()?;
        Ok(t)
    }

    pub fn classify(&self, speed_kmh: f64, free_flow_kmh: f64) -> CongestionLevel {
        if speed_kmh <= self.blocked_speed_kmh {
            return CongestionLevel::Blocked;
        }
        let ratio = speed_kmh / free_flow_kmh;
        if ratio >= self.free_flow_ratio {
            CongestionLevel::FreeFlow
        } else if ratio >= self.heavy_ratio {
            CongestionLevel::Heavy
        } else {
            CongestionLevel::Queuing
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct ImputationReport {
    pub cells_observed: usize,
    pub cells_imputed: usize,
    /// Missing cells no cluster peer could fill.
    pub cells_unfilled: usize,
    /// Streets absent from the cluster assignments; left untouched.
    pub unassigned_streets: Vec<String>,
}

/// A dataset after imputation; `imputed[p][b]` marks filled-in cells of
/// profile `p`.
#[derive(Debug, Clone, PartialEq)]
pub struct ImputedDataset {
    pub dataset: Dataset,
    pub imputed: Vec<Vec<bool>>,
    pub report: ImputationReport,
}

impl ImputedDataset {
    /// Wraps a dataset with nothing imputed.
    pub fn observed_only(dataset: Dataset) -> Self {
        let imputed = dataset
            .profiles()
            .iter()
            .map(|p| vec![false; p.series().len()])
            .collect();
        let cells_observed = dataset.profiles().iter().map(|p| p.series().present_count()).sum();
        let cells_total: usize = dataset.profiles().iter().map(|p| p.series().len()).sum();
        ImputedDataset {
            dataset,
            imputed,
            report: ImputationReport {
                cells_observed,
                cells_imputed: 0,
                cells_unfilled: cells_total - cells_observed,
                unassigned_streets: Vec::new(),
            },
        }
    }
}

#[derive(Clone, Copy)]
struct PeerCell {
    sum: f64,
    count: usize,
    min: f64,
    max: f64,
}

impl Default for PeerCell {
    fn default() -> Self {
        PeerCell {
            sum: 0.0,
            count: 0,
            min: f64::INFINITY,
            max: f64::NEG_INFINITY,
        }
    }
}

/// Fills each missing cell with the mean of the observed values at that
/// bucket over the other streets of its cluster. Observed cells are never
/// changed; cells with no observing peer stay missing.
pub fn impute(ds: &Dataset, model: &ClusterModel) -> Result<ImputedDataset> {
    let assignments: HashMap<&str, usize> = model
        .street_ids
        .iter()
        .map(String::as_str)
        .zip(model.assignments.iter().copied())
        .collect();
    impute_with(ds, |id| assignments.get(id).copied())
}

/// As [`impute`], with cluster membership given by a lookup.
pub fn impute_with(ds: &Dataset, cluster_of: impl Fn(&str) -> Option<usize>) -> Result<ImputedDataset> {
    let buckets = ds.grid().buckets_per_week();
    let clusters: Vec<Option<usize>> = ds.profiles().iter().map(|p| cluster_of(p.street_id())).collect();

    let mut peers: BTreeMap<usize, Vec<PeerCell>> = BTreeMap::new();
    for (p, c) in ds.profiles().iter().zip(&clusters) {
        let Some(c) = c else { continue };
        let cells = peers.entry(*c).or_insert_with(|| vec![PeerCell::default(); buckets]);
        for (b, v) in p.series().observed() {
            let cell = &mut cells[b];
            cell.sum += v;
            cell.count += 1;
            cell.min = cell.min.min(v);
            cell.max = cell.max.max(v);
        }
    }

    let mut report = ImputationReport::default();
    let mut imputed = Vec::with_capacity(ds.len());
    let mut profiles = Vec::with_capacity(ds.len());
    for (p, c) in ds.profiles().iter().zip(&clusters) {
        let mut mask = vec![false; buckets];
        report.cells_observed += p.series().present_count();
        let Some(cells) = c.and_then(|c| peers.get(&c)) else {
            report.unassigned_streets.push(p.street_id().to_string());
            report.cells_unfilled += buckets - p.series().present_count();
            profiles.push(p.clone());
            imputed.push(mask);
            continue;
        };
        let values: Vec<Option<f64>> = p
            .series()
            .values()
            .iter()
            .enumerate()
            .map(|(b, v)| match v {
                Some(v) => Some(*v),
                None => {
                    let cell = cells[b];
                    if cell.count == 0 {
                        report.cells_unfilled += 1;
                        None
                    } else {
                        mask[b] = true;
                        report.cells_imputed += 1;
                        Some((cell.sum / cell.count as f64).clamp(cell.min, cell.max))
                    }
                }
            })
            .collect();
        let mut filled = p.clone();
        filled.set_series(SpeedSeries::new(values)?);
        profiles.push(filled);
        imputed.push(mask);
    }

    Ok(ImputedDataset {
        dataset: Dataset::new(ds.grid(), profiles)?,
        imputed,
        report,
    })
}

/// Expected uncongested speed: the posted maximum when known, otherwise the
/// 85th percentile of the street's measured speeds (or of its imputed ones
/// when nothing was measured).
pub fn free_flow_reference(profile: &StreetProfile, imputed: Option<&[bool]>) -> Result<f64> {
    if let Some(max) = profile.max_speed_kmh {
        return Ok(max);
    }
    let is_imputed = |b: usize| imputed.is_some_and(|m| m.get(b).copied().unwrap_or(false));
    let measured: Vec<f64> = profile
        .series()
        .observed()
        .filter(|(b, _)| !is_imputed(*b))
        .map(|(_, v)| v)
        .collect();
    let pool = if measured.is_empty() {
        profile.series().observed().map(|(_, v)| v).collect()
    } else {
        measured
    };
    stats::percentile(&pool, 0.85).ok_or_else(|| Error::NoData(profile.street_id().to_string()))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CongestionAssignment {
    pub street_id: String,
    pub bucket_index: usize,
    pub speed_kmh: f64,
    pub imputed: bool,
    pub level: CongestionLevel,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ColorifySummary {
    pub cells_observed: usize,
    pub cells_imputed: usize,
    pub cells_unfilled: usize,
    pub level_histogram: BTreeMap<String, usize>,
    /// Streets skipped for lack of any speed value.
    pub skipped_streets: Vec<String>,
    pub thresholds: CongestionThresholds,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Colorified {
    pub assignments: Vec<CongestionAssignment>,
    pub summary: ColorifySummary,
}

/// One congestion level per (street, bucket) that holds a speed.
pub fn colorify(data: &ImputedDataset, thresholds: &CongestionThresholds) -> Result<Colorified> {
    thresholds.validate()?;
    let mut assignments = Vec::new();
    let mut skipped = Vec::new();
    let mut histogram: BTreeMap<String, usize> =
        CongestionLevel::ALL.iter().map(|l| (l.as_str().to_string(), 0)).collect();
    let (mut observed, mut imputed_cells, mut unfilled) = (0, 0, 0);

    for (p, mask) in data.dataset.profiles().iter().zip(&data.imputed) {
        let reference = match free_flow_reference(p, Some(mask)) {
            Ok(r) => r,
            Err(Error::NoData(id)) => {
                unfilled += p.series().len();
                skipped.push(id);
                continue;
            }
            Err(e) => return Err(e),
        };
        for (b, value) in p.series().values().iter().enumerate() {
            let Some(speed) = *value else {
                unfilled += 1;
                continue;
            };
            let level = thresholds.classify(speed, reference);
            *histogram.get_mut(level.as_str()).expect("all levels present") += 1;
            if mask[b] {
                imputed_cells += 1;
            } else {
                observed += 1;
            }
            assignments.push(CongestionAssignment {
                street_id: p.street_id().to_string(),
                bucket_index: b,
                speed_kmh: speed,
                imputed: mask[b],
                level,
            });
        }
    }
    Ok(Colorified {
        assignments,
        summary: ColorifySummary {
            cells_observed: observed,
            cells_imputed: imputed_cells,
            cells_unfilled: unfilled,
            level_histogram: histogram,
            skipped_streets: skipped,
            thresholds: *thresholds,
        },
    })
}

/// Street id to color for one bucket: the tile renderer's input.
pub fn tile_snapshot(assignments: &[CongestionAssignment], bucket: usize) -> BTreeMap<String, &'static str> {
    assignments
        .iter()
        .filter(|a| a.bucket_index == bucket)
        .map(|a| (a.street_id.clone(), a.level.color()))
        .collect()
}

pub fn write_assignments_csv<W: Write>(writer: W, assignments: &[CongestionAssignment]) -> Result<()> {
    let mut csv = csv::Writer::from_writer(writer);
    csv.write_record(["street_id", "bucket_index", "speed_kmh", "imputed", "level", "color"])?;
    for a in assignments {
        csv.write_record([
            a.street_id.clone(),
            a.bucket_index.to_string(),
            a.speed_kmh.to_string(),
            a.imputed.to_string(),
            a.level.as_str().to_string(),
            a.level.color().to_string(),
        ])?;
    }
    csv.flush().map_err(|e| Error::Io {
        path: "<csv>".into(),
        source: e,
    })?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::BucketGrid;
    use proptest::prelude::*;

    fn profile(id: &str, values: &[Option<f64>]) -> StreetProfile {
        StreetProfile::new(id, SpeedSeries::new(values.to_vec()).unwrap())
    }

    fn two_cluster_fixture() -> Dataset {
        let grid = BucketGrid::with_buckets(3).unwrap();
        Dataset::new(
            grid,
            vec![
                profile("a", &[Some(60.0), Some(10.0), None]),
                profile("b", &[Some(70.0), None, None]),
                profile("c", &[None, Some(20.0), None]),
                profile("far", &[Some(5.0), Some(6.0), Some(7.0)]),
            ],
        )
        .unwrap()
    }

    fn lookup(id: &str) -> Option<usize> {
        match id {
            "a" | "b" | "c" => Some(0),
            "far" => Some(1),
            _ => None,
        }
    }

    #[test]
    fn peers_mean_fills_gap() {
        let out = impute_with(&two_cluster_fixture(), lookup).unwrap();
        let c = out.dataset.get("c").unwrap();
        assert_eq!(c.series().get(0), Some(65.0));
        assert!(out.imputed[2][0]);
        let b = out.dataset.get("b").unwrap();
        assert_eq!(b.series().get(1), Some(15.0));
        // Nobody in cluster 0 observed bucket 2.
        assert_eq!(c.series().get(2), None);
        assert!(!out.imputed[2][2]);
        assert_eq!(out.report.cells_unfilled, 3);
        assert_eq!(out.report.cells_imputed, 2);
        assert_eq!(out.report.cells_observed, 7);
    }

    #[test]
    fn observed_cells_untouched_and_unassigned_reported() {
        let ds = two_cluster_fixture();
        let out = impute_with(&ds, |id| if id == "far" { None } else { lookup(id) }).unwrap();
        for (before, after) in ds.profiles().iter().zip(out.dataset.profiles()) {
            for (b, v) in before.series().observed() {
                assert_eq!(after.series().get(b).map(f64::to_bits), Some(v.to_bits()));
            }
        }
        assert_eq!(out.report.unassigned_streets, vec!["far"]);
    }

    #[test]
    fn free_flow_reference_rules() {
        let p = profile("a", &[Some(40.0)]).with_max_speed(100.0);
        assert_eq!(free_flow_reference(&p, None).unwrap(), 100.0);
        let p = profile("a", &[Some(40.0)]);
        assert_eq!(free_flow_reference(&p, None).unwrap(), 40.0);
        let values: Vec<Option<f64>> = (1..=100).map(|v| Some(v as f64)).collect();
        let p = profile("u", &values);
        let r = free_flow_reference(&p, None).unwrap();
        assert!((r - 85.0).abs() <= 0.5, "{r}");
        let p = profile("none", &[None, None]);
        assert!(matches!(free_flow_reference(&p, None), Err(Error::NoData(_))));
    }

    #[test]
    fn measured_speeds_preferred_for_reference() {
        let p = profile("a", &[Some(40.0), Some(90.0)]);
        assert_eq!(free_flow_reference(&p, Some(&[false, true])).unwrap(), 40.0);
        assert_eq!(free_flow_reference(&p, Some(&[true, true])).unwrap(), 40.0 + 0.85 * 50.0);
    }

    #[test]
    fn level_examples() {
        let t = CongestionThresholds::default();
        assert_eq!(t.classify(80.0, 100.0), CongestionLevel::FreeFlow);
        assert_eq!(t.classify(50.0, 100.0), CongestionLevel::Heavy);
        assert_eq!(t.classify(30.0, 100.0), CongestionLevel::Queuing);
        assert_eq!(t.classify(3.0, 100.0), CongestionLevel::Blocked);
        assert_eq!(t.classify(3.0, 3.5), CongestionLevel::Blocked);
        assert_eq!(CongestionLevel::Queuing.color(), "red");
    }

    #[test]
    fn threshold_parsing() {
        let t = CongestionThresholds::parse("0.8:0.5:3").unwrap();
        assert_eq!(t.free_flow_ratio, 0.8);
        assert_eq!(t.blocked_speed_kmh, 3.0);
        assert!(CongestionThresholds::parse("0.4:0.8:3").is_err());
        assert!(CongestionThresholds::parse("0.8:0.4").is_err());
    }

    #[test]
    fn colorify_counts_and_csv() {
        let ds = two_cluster_fixture();
        let before = colorify(&ImputedDataset::observed_only(ds.clone()), &Default::default()).unwrap();
        let after = colorify(&impute_with(&ds, lookup).unwrap(), &Default::default()).unwrap();
        assert_eq!(before.assignments.len(), 7);
        assert_eq!(after.assignments.len(), 9);
        assert_eq!(after.summary.cells_imputed, 2);
        assert_eq!(after.summary.level_histogram.values().sum::<usize>(), 9);

        let snap = tile_snapshot(&after.assignments, 2);
        assert_eq!(snap.len(), 1);
        assert_eq!(snap["far"], "green");

        let mut buf = Vec::new();
        write_assignments_csv(&mut buf, &after.assignments[..1]).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "street_id,bucket_index,speed_kmh,imputed,level,color\na,0,60,false,free_flow,green\n"
        );
    }

    #[test]
    fn street_without_values_is_skipped() {
        let grid = BucketGrid::with_buckets(2).unwrap();
        let ds = Dataset::new(grid, vec![profile("x", &[None, None])]).unwrap();
        let out = colorify(&ImputedDataset::observed_only(ds), &Default::default()).unwrap();
        assert!(out.assignments.is_empty());
        assert_eq!(out.summary.skipped_streets, vec!["x"]);
    }

    proptest! {
        #[test]
        fn level_monotone_in_ratio(r1 in 0.0f64..2.0, r2 in 0.0f64..2.0, reference in 6.0f64..150.0) {
            let t = CongestionThresholds::default();
            let (lo, hi) = if r1 <= r2 { (r1, r2) } else { (r2, r1) };
            prop_assert!(t.classify(lo * reference, reference) <= t.classify(hi * reference, reference));
        }

        #[test]
        fn imputed_within_peer_range(cols in prop::collection::vec(prop::collection::vec(prop::option::of(1.0f64..140.0), 6), 2..8)) {
            let grid = BucketGrid::with_buckets(6).unwrap();
            let profiles: Vec<_> = cols.iter().enumerate().map(|(i, v)| profile(&format!("s{i}"), v)).collect();
            let ds = Dataset::new(grid, profiles).unwrap();
            let out = impute_with(&ds, |_| Some(0)).unwrap();
            for (p, mask) in out.dataset.profiles().iter().zip(&out.imputed) {
                for b in 0..6 {
                    if mask[b] {
                        let peers: Vec<f64> = cols.iter().filter_map(|c| c[b]).collect();
                        let v = p.series().get(b).unwrap();
                        let lo = peers.iter().copied().fold(f64::INFINITY, f64::min);
                        let hi = peers.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                        prop_assert!(lo <= v && v <= hi);
                    }
                }
            }
            let colorable = |d: &Dataset| d.profiles().iter().map(|p| p.series().present_count()).sum::<usize>();
            prop_assert!(colorable(&out.dataset) >= colorable(&ds));
        }
    }
}
