//! CSV and JSON readers and writers for records, attributes and dataset
//! snapshots.

use std::io::{Read, Write};

use chrono::{DateTime, Datelike, NaiveDateTime, TimeZone, Timelike};
pub use chrono_tz::Tz;
use serde::{Deserialize, Serialize};

use super::attributes::AttributeRow;
use super::ingest::RawRecord;
use crate::error::{Error, Result};
use crate::model::{BucketGrid, Dataset, RoadClass, SpeedSeries, StreetProfile};

pub const DATASET_SCHEMA_VERSION: u32 = 1;

fn parse_err(line: u64, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        message: message.into(),
    }
}

fn line_of(record: &csv::StringRecord) -> u64 {
    record.position().map_or(0, |p| p.line())
}

fn parse_f64(field: &str, line: u64, what: &str) -> Result<f64> {
    field
        .trim()
        .parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| parse_err(line, format!("invalid {what} {field:?}")))
}

fn parse_opt_f64(field: Option<&str>, line: u64, what: &str) -> Result<Option<f64>> {
    match field.map(str::trim) {
        None | Some("") => Ok(None),
        Some(s) => parse_f64(s, line, what).map(Some),
    }
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

/// Bucket-of-week of a timestamp. Timestamps without an offset are read as
/// local time in `tz`.
pub fn bucket_of_timestamp(text: &str, grid: &BucketGrid, tz: Tz) -> Option<usize> {
    let text = text.trim();
    let local = match DateTime::parse_from_rfc3339(text) {
        Ok(dt) => dt.with_timezone(&tz),
        Err(_) => {
            let naive = ["%Y-%m-%dT%H:%M:%S%.f", "%Y-%m-%d %H:%M:%S%.f", "%Y-%m-%dT%H:%M"]
                .iter()
                .find_map(|f| NaiveDateTime::parse_from_str(text, f).ok())?;
            tz.from_local_datetime(&naive).earliest()?
        }
    };
    let minute = local.weekday().num_days_from_monday() * 1440 + local.hour() * 60 + local.minute();
    grid.bucket_of_minute(minute)
}

enum TimeColumn {
    Bucket,
    Timestamp,
}

/// Reads `street_id,bucket_index,speed_kmh` or
/// `street_id,timestamp_iso8601,speed_kmh` records.
pub fn read_records<R: Read>(reader: R, grid: BucketGrid, tz: Tz) -> Result<Vec<RawRecord>> {
    let mut csv = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = csv.headers()?.clone();
    let names: Vec<&str> = headers.iter().collect();
    let time = match names.as_slice() {
        ["street_id", "bucket_index", "speed_kmh"] => TimeColumn::Bucket,
        ["street_id", "timestamp_iso8601", "speed_kmh"] => TimeColumn::Timestamp,
        _ => {
            return Err(parse_err(
                1,
                format!("unexpected records header {:?}", names.join(",")),
            ))
        }
    };
    let buckets = grid.buckets_per_week();
    let mut out = Vec::new();
    for row in csv.records() {
        let row = row?;
        let line = line_of(&row);
        if row.len() != 3 {
            return Err(parse_err(line, format!("expected 3 fields, got {}", row.len())));
        }
        let street_id = row[0].to_string();
        if street_id.is_empty() {
            return Err(parse_err(line, "empty street_id"));
        }
        let bucket_index = match time {
            TimeColumn::Bucket => {
                let b: i64 = row[1]
                    .parse()
                    .map_err(|_| parse_err(line, format!("invalid bucket_index {:?}", &row[1])))?;
                if b < 0 || b as usize >= buckets {
                    return Err(Error::InvalidBucket {
                        street_id,
                        bucket: b,
                        buckets,
                        line,
                    });
                }
                b as usize
            }
            TimeColumn::Timestamp => bucket_of_timestamp(&row[1], &grid, tz)
                .ok_or_else(|| parse_err(line, format!("invalid timestamp {:?}", &row[1])))?,
        };
        let speed_kmh = parse_f64(&row[2], line, "speed_kmh")?;
        out.push(RawRecord {
            street_id,
            bucket_index,
            speed_kmh,
        });
    }
    Ok(out)
}

pub fn write_records<W: Write>(writer: W, records: &[RawRecord]) -> Result<()> {
    let mut csv = csv::Writer::from_writer(writer);
    csv.write_record(["street_id", "bucket_index", "speed_kmh"])?;
    for r in records {
        csv.write_record([
            r.street_id.clone(),
            r.bucket_index.to_string(),
            r.speed_kmh.to_string(),
        ])?;
    }
    csv.flush().map_err(|e| Error::io("<csv>", e))?;
    Ok(())
}

/// Reads the attribute table. Required columns: `street_id`, `road_class`,
/// `max_speed_kmh`, `length_m`; `avg_speed_kmh`, `name` and `county` are
/// picked up when present. Empty cells are absent values.
pub fn read_attributes<R: Read>(reader: R) -> Result<Vec<AttributeRow>> {
    let mut csv = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = csv.headers()?.clone();
    let col = |name: &str| headers.iter().position(|h| h == name);
    let required = ["street_id", "road_class", "max_speed_kmh", "length_m"];
    if let Some(missing) = required.iter().find(|c| col(c).is_none()) {
        return Err(parse_err(1, format!("attributes header lacks {missing}")));
    }
    let (id, class, max, len) = (
        col("street_id").unwrap(),
        col("road_class").unwrap(),
        col("max_speed_kmh").unwrap(),
        col("length_m").unwrap(),
    );
    let (avg, name, county) = (col("avg_speed_kmh"), col("name"), col("county"));
    let mut out = Vec::new();
    for row in csv.records() {
        let row = row?;
        let line = line_of(&row);
        let text = |c: Option<usize>| c.and_then(|c| row.get(c)).filter(|s| !s.is_empty());
        let road_class = match text(Some(class)) {
            None => None,
            Some(s) => Some(s.parse::<RoadClass>().map_err(|e| parse_err(line, e.to_string()))?),
        };
        out.push(AttributeRow {
            street_id: row.get(id).unwrap_or_default().to_string(),
            road_class,
            max_speed_kmh: parse_opt_f64(text(Some(max)), line, "max_speed_kmh")?,
            length_m: parse_opt_f64(text(Some(len)), line, "length_m")?,
            avg_speed_kmh: parse_opt_f64(text(avg), line, "avg_speed_kmh")?,
            name: text(name).map(str::to_string),
            county: text(county).map(str::to_string),
        });
    }
    Ok(out)
}

pub fn write_attributes<W: Write>(writer: W, rows: &[AttributeRow]) -> Result<()> {
    let mut csv = csv::Writer::from_writer(writer);
    csv.write_record(["street_id", "road_class", "max_speed_kmh", "length_m"])?;
    for r in rows {
        csv.write_record([
            r.street_id.clone(),
            r.road_class.map(|c| c.to_string()).unwrap_or_default(),
            fmt_opt(r.max_speed_kmh),
            fmt_opt(r.length_m),
        ])?;
    }
    csv.flush().map_err(|e| Error::io("<csv>", e))?;
    Ok(())
}

const SNAPSHOT_FIXED: [&str; 5] = ["street_id", "road_class", "max_speed_kmh", "length_m", "filling_rate"];

/// Writes one row per street: attributes, filling rate, then one column per
/// bucket (`b0`, `b1`, ...) with empty cells for missing values.
pub fn write_dataset_csv<W: Write>(writer: W, ds: &Dataset) -> Result<()> {
    let mut csv = csv::Writer::from_writer(writer);
    let mut header: Vec<String> = SNAPSHOT_FIXED.iter().map(|s| s.to_string()).collect();
    header.extend((0..ds.grid().buckets_per_week()).map(|b| format!("b{b}")));
    csv.write_record(&header)?;
    for p in ds.profiles() {
        let mut row = vec![
            p.street_id().to_string(),
            p.road_class.map(|c| c.to_string()).unwrap_or_default(),
            fmt_opt(p.max_speed_kmh),
            fmt_opt(p.length_m),
            p.filling_rate().to_string(),
        ];
        row.extend(p.series().values().iter().map(|v| fmt_opt(*v)));
        csv.write_record(&row)?;
    }
    csv.flush().map_err(|e| Error::io("<csv>", e))?;
    Ok(())
}

pub fn read_dataset_csv<R: Read>(reader: R) -> Result<Dataset> {
    let mut csv = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = csv.headers()?.clone();
    let names: Vec<&str> = headers.iter().collect();
    if names.len() < SNAPSHOT_FIXED.len() || names[..SNAPSHOT_FIXED.len()] != SNAPSHOT_FIXED {
        return Err(parse_err(1, "not a dataset snapshot header"));
    }
    let buckets = names.len() - SNAPSHOT_FIXED.len();
    for (b, name) in names[SNAPSHOT_FIXED.len()..].iter().enumerate() {
        if *name != format!("b{b}") {
            return Err(parse_err(1, format!("expected column b{b}, found {name}")));
        }
    }
    let grid = snapshot_grid(buckets)?;
    let mut profiles = Vec::new();
    for row in csv.records() {
        let row = row?;
        let line = line_of(&row);
        if row.len() != names.len() {
            return Err(parse_err(line, format!("expected {} fields, got {}", names.len(), row.len())));
        }
        let values = (0..buckets)
            .map(|b| parse_opt_f64(Some(&row[SNAPSHOT_FIXED.len() + b]), line, "speed"))
            .collect::<Result<Vec<_>>>()?;
        let series = SpeedSeries::new(values).map_err(|e| parse_err(line, e.to_string()))?;
        let mut p = StreetProfile::new(&row[0], series);
        if !row[1].is_empty() {
            p.road_class = Some(row[1].parse().map_err(|e: Error| parse_err(line, e.to_string()))?);
        }
        p.max_speed_kmh = parse_opt_f64(Some(&row[2]), line, "max_speed_kmh")?;
        p.length_m = parse_opt_f64(Some(&row[3]), line, "length_m")?;
        profiles.push(p);
    }
    Dataset::new(grid, profiles)
}

fn snapshot_grid(buckets: usize) -> Result<BucketGrid> {
    BucketGrid::with_buckets(buckets)
}

#[derive(Debug, Serialize, Deserialize)]
struct DatasetDocument {
    schema_version: u32,
    grid: BucketGrid,
    profiles: Vec<ProfileDocument>,
}

#[derive(Debug, Serialize, Deserialize)]
struct ProfileDocument {
    street_id: String,
    #[serde(default)]
    road_class: Option<RoadClass>,
    #[serde(default)]
    max_speed_kmh: Option<f64>,
    #[serde(default)]
    length_m: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    avg_speed_kmh: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    name: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    county: Option<String>,
    filling_rate: f64,
    values: Vec<Option<f64>>,
}

pub fn dataset_to_json(ds: &Dataset) -> Result<String> {
    let doc = DatasetDocument {
        schema_version: DATASET_SCHEMA_VERSION,
        grid: ds.grid(),
        profiles: ds
            .profiles()
            .iter()
            .map(|p| ProfileDocument {
                street_id: p.street_id().to_string(),
                road_class: p.road_class,
                max_speed_kmh: p.max_speed_kmh,
                length_m: p.length_m,
                avg_speed_kmh: p.avg_speed_kmh,
                name: p.name.clone(),
                county: p.county.clone(),
                filling_rate: p.filling_rate(),
                values: p.series().values().to_vec(),
            })
            .collect(),
    };
    Ok(serde_json::to_string(&doc)?)
}

/// Parses a JSON snapshot. Filling rates are recomputed from the values.
pub fn dataset_from_json(text: &str) -> Result<Dataset> {
    let doc: DatasetDocument = serde_json::from_str(text)?;
    if doc.schema_version != DATASET_SCHEMA_VERSION {
        return Err(Error::InvalidConfig(format!(
            "unsupported dataset schema_version {}",
            doc.schema_version
        )));
    }
    let profiles = doc
        .profiles
        .into_iter()
        .map(|d| {
            let mut p = StreetProfile::new(d.street_id, SpeedSeries::new(d.values)?);
            p.road_class = d.road_class;
            p.max_speed_kmh = d.max_speed_kmh;
            p.length_m = d.length_m;
            p.avg_speed_kmh = d.avg_speed_kmh;
            p.name = d.name;
            p.county = d.county;
            Ok(p)
        })
        .collect::<Result<Vec<_>>>()?;
    Dataset::new(doc.grid, profiles)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Dataset {
        let grid = BucketGrid::with_buckets(4).unwrap();
        let mut a = StreetProfile::new(
            "way/1",
            SpeedSeries::new(vec![Some(12.5), None, Some(40.0), Some(33.25)]).unwrap(),
        );
        a.road_class = Some(RoadClass::Primary);
        a.max_speed_kmh = Some(60.0);
        let b = StreetProfile::new("b", SpeedSeries::new(vec![None, Some(5.0), None, None]).unwrap());
        Dataset::new(grid, vec![a, b]).unwrap()
    }

    #[test]
    fn snapshot_csv_round_trip() {
        let ds = sample();
        let mut buf = Vec::new();
        write_dataset_csv(&mut buf, &ds).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("street_id,road_class,max_speed_kmh,length_m,filling_rate,b0,b1,b2,b3\n"));
        assert!(text.contains("way/1,primary,60,,0.75,12.5,,40,33.25\n"));
        assert_eq!(read_dataset_csv(&buf[..]).unwrap(), ds);
    }

    #[test]
    fn snapshot_json_round_trip() {
        let ds = sample();
        let json = dataset_to_json(&ds).unwrap();
        assert_eq!(dataset_from_json(&json).unwrap(), ds);
    }

    #[test]
    fn records_with_bucket_index() {
        let text = "street_id,bucket_index,speed_kmh\na,0,50\na,3,60.5\n";
        let grid = BucketGrid::with_buckets(4).unwrap();
        let recs = read_records(text.as_bytes(), grid, Tz::UTC).unwrap();
        assert_eq!(recs, vec![RawRecord::new("a", 0, 50.0), RawRecord::new("a", 3, 60.5)]);

        let mut out = Vec::new();
        write_records(&mut out, &recs).unwrap();
        assert_eq!(read_records(&out[..], grid, Tz::UTC).unwrap(), recs);
    }

    #[test]
    fn record_errors_carry_line_numbers() {
        let grid = BucketGrid::with_buckets(4).unwrap();
        let err = read_records("street_id,bucket_index,speed_kmh\na,0,50\na,9,1\n".as_bytes(), grid, Tz::UTC)
            .unwrap_err();
        assert!(matches!(err, Error::InvalidBucket { line: 3, bucket: 9, .. }), "{err:?}");
        let err = read_records("street_id,bucket_index,speed_kmh\na,0,fast\n".as_bytes(), grid, Tz::UTC)
            .unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }), "{err:?}");
        let err = read_records("id,when,speed\n".as_bytes(), grid, Tz::UTC).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 1, .. }));
    }

    #[test]
    fn timestamps_map_to_bucket_of_week() {
        let grid = BucketGrid::default();
        // 2024-01-01 was a Monday.
        assert_eq!(bucket_of_timestamp("2024-01-01T00:14:59Z", &grid, Tz::UTC), Some(0));
        assert_eq!(bucket_of_timestamp("2024-01-02T08:15:00Z", &grid, Tz::UTC), Some(96 + 33));
        assert_eq!(bucket_of_timestamp("2024-01-07 23:59:00", &grid, Tz::UTC), Some(671));
        // Tehran is UTC+03:30 in January.
        let tehran: Tz = "Asia/Tehran".parse().unwrap();
        assert_eq!(bucket_of_timestamp("2024-01-01T04:30:00Z", &grid, tehran), Some(32));
        assert_eq!(bucket_of_timestamp("yesterday", &grid, Tz::UTC), None);

        let text = "street_id,timestamp_iso8601,speed_kmh\na,2024-01-08T00:20:00Z,30\n";
        let recs = read_records(text.as_bytes(), grid, Tz::UTC).unwrap();
        assert_eq!(recs[0].bucket_index, 1);
    }

    #[test]
    fn attribute_table() {
        let text = "street_id,road_class,max_speed_kmh,length_m,name\n\
                    a,SECONDARY,50,120.5,Marzdaran Blvd\n\
                    b,,,,\n";
        let rows = read_attributes(text.as_bytes()).unwrap();
        assert_eq!(rows[0].road_class, Some(RoadClass::Secondary));
        assert_eq!(rows[0].length_m, Some(120.5));
        assert_eq!(rows[0].name.as_deref(), Some("Marzdaran Blvd"));
        assert_eq!(rows[1], AttributeRow { street_id: "b".into(), ..Default::default() });

        let err = read_attributes("street_id,road_class,max_speed_kmh,length_m\na,highway,1,1\n".as_bytes());
        assert!(matches!(err, Err(Error::Parse { line: 2, .. })));
        assert!(read_attributes("street_id,road_class\n".as_bytes()).is_err());
    }
}
