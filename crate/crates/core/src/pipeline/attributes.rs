use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Dataset, RoadClass};

/// GIS attributes of one street.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct AttributeRow {
    pub street_id: String,
    pub road_class: Option<RoadClass>,
    pub max_speed_kmh: Option<f64>,
    pub length_m: Option<f64>,
    pub avg_speed_kmh: Option<f64>,
    pub name: Option<String>,
    pub county: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct JoinReport {
    /// Streets that found no attribute row.
    pub unmatched_streets: Vec<String>,
    /// Attribute rows whose street is not in the dataset.
    pub unused_rows: usize,
}

/// Attaches attributes by street id. Streets without a row keep their
/// current (absent) attributes.
pub fn join_attributes(ds: &Dataset, rows: &[AttributeRow]) -> Result<(Dataset, JoinReport)> {
    let mut by_id: HashMap<&str, &AttributeRow> = HashMap::with_capacity(rows.len());
    for row in rows {
        if by_id.insert(row.street_id.as_str(), row).is_some() {
            return Err(Error::DuplicateAttributeKey(row.street_id.clone()));
        }
    }
    let mut report = JoinReport::default();
    let mut used = 0;
    let mut profiles = Vec::with_capacity(ds.len());
    for profile in ds.profiles() {
        let mut profile = profile.clone();
        match by_id.get(profile.street_id()) {
            Some(row) => {
                used += 1;
                profile.road_class = row.road_class;
                profile.max_speed_kmh = row.max_speed_kmh;
                profile.length_m = row.length_m;
                profile.avg_speed_kmh = row.avg_speed_kmh;
                profile.name = row.name.clone();
                profile.county = row.county.clone();
            }
            None => report.unmatched_streets.push(profile.street_id().to_string()),
        }
        profiles.push(profile);
    }
    report.unused_rows = rows.len() - used;
    Ok((Dataset::new(ds.grid(), profiles)?, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{BucketGrid, SpeedSeries, StreetProfile};

    fn ds() -> Dataset {
        let grid = BucketGrid::with_buckets(2).unwrap();
        let s = SpeedSeries::new(vec![Some(10.0), None]).unwrap();
        Dataset::new(
            grid,
            vec![StreetProfile::new("a", s.clone()), StreetProfile::new("b", s)],
        )
        .unwrap()
    }

    fn row(id: &str) -> AttributeRow {
        AttributeRow {
            street_id: id.into(),
            road_class: Some(RoadClass::Secondary),
            max_speed_kmh: Some(50.0),
            length_m: Some(120.0),
            ..Default::default()
        }
    }

    #[test]
    fn matched_unmatched_and_unused() {
        let (out, report) = join_attributes(&ds(), &[row("a"), row("zz")]).unwrap();
        let a = out.get("a").unwrap();
        assert_eq!(a.road_class, Some(RoadClass::Secondary));
        assert_eq!(a.max_speed_kmh, Some(50.0));
        assert_eq!(a.length_m, Some(120.0));
        let b = out.get("b").unwrap();
        assert_eq!(b.road_class, None);
        assert_eq!(report.unmatched_streets, vec!["b"]);
        assert_eq!(report.unused_rows, 1);
        assert_eq!(out.len(), 2);
    }

    #[test]
    fn duplicate_rows_rejected() {
        let err = join_attributes(&ds(), &[row("a"), row("a")]).unwrap_err();
        assert!(matches!(err, Error::DuplicateAttributeKey(id) if id == "a"));
    }
}
