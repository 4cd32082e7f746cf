use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use roadclust_core::clustering::{knee_point, log_curve, ModelDocument};
use roadclust_core::colorify::{self, write_assignments_csv, ImputedDataset};
use roadclust_core::important::{write_important_csv, ImportanceConfig, ImportanceResult};
use roadclust_core::pipeline::{self, clean, io, join_attributes, CleaningReport};
use roadclust_core::synthgen::{self, ArchetypeSpec};
use roadclust_core::{
    elbow_select, find_important_secondary, kmeans_dtw, Dataset, Dtw, Error, LocalDistance,
};
use serde::Serialize;

use crate::args::{DtwArgs, Preset};
use crate::error::CliError;
use crate::manifest::Run;
use crate::settings::Settings;

fn utf8(bytes: Vec<u8>, path: &Path) -> Result<String, CliError> {
    String::from_utf8(bytes).map_err(|_| {
        CliError::Core(Error::Parse {
            line: 0,
            message: format!("{} is not UTF-8", path.display()),
        })
    })
}

/// Reads `--input` (records CSV or dataset JSON) and `--attrs`, then cleans.
fn load_dataset(run: &mut Run, s: &Settings) -> Result<Dataset, CliError> {
    let input = s.input()?;
    let bytes = run.read(input)?;
    let attrs = match &s.attrs {
        Some(path) => Some(io::read_attributes(run.read(path)?.as_slice())?),
        None => None,
    };
    let (ds, report) = run.stage("load", || -> Result<(Dataset, CleaningReport), CliError> {
        if input.extension().is_some_and(|e| e == "json") {
            let ds = io::dataset_from_json(&utf8(bytes, input)?)?;
            let (ds, mut report) = clean(&ds, &s.cleaning)?;
            match &attrs {
                Some(rows) => {
                    let (ds, join) = join_attributes(&ds, rows)?;
                    report.unmatched_attributes = join.unmatched_streets.len();
                    report.unused_attribute_rows = join.unused_rows;
                    Ok((ds, report))
                }
                None => Ok((ds, report)),
            }
        } else {
            let records = io::read_records(bytes.as_slice(), s.grid, s.time_zone())?;
            Ok(pipeline::prepare(records, attrs.as_deref(), s.grid, &s.cleaning)?)
        }
    })?;
    run.note("cleaning", report);
    run.note("streets", ds.len());
    Ok(ds)
}

pub fn synth(s: &Settings) -> Result<(), CliError> {
    let mut run = Run::new("synth", Some(s.clone()), Some(s.out_dir()?))?;
    let specs: Vec<ArchetypeSpec> = match &s.specs {
        Some(path) => {
            let text = utf8(run.read(path)?, path)?;
            serde_json::from_str(&text).map_err(Error::from)?
        }
        None => match s.preset {
            Preset::Default => synthgen::default_specs(),
            Preset::ImportantRoads => synthgen::important_roads_specs(),
        },
    };
    let syn = run.stage("generate", || synthgen::generate(&specs, s.grid, s.seed))?;

    let mut records = Vec::new();
    io::write_records(&mut records, &syn.records())?;
    run.write("records.csv", &records)?;
    let mut attrs = Vec::new();
    io::write_attributes(&mut attrs, &syn.attribute_rows())?;
    run.write("attributes.csv", &attrs)?;
    let mut labels = String::from("street_id,archetype\n");
    for (id, archetype) in syn.label_rows() {
        writeln!(labels, "{id},{archetype}").expect("write to string");
    }
    run.write("labels.csv", labels.as_bytes())?;
    run.note("streets", syn.dataset.len());
    run.finish()
}

pub fn ingest(s: &Settings) -> Result<(), CliError> {
    let mut run = Run::new("ingest", Some(s.clone()), Some(s.out_dir()?))?;
    let ds = load_dataset(&mut run, s)?;
    let mut json = io::dataset_to_json(&ds)?;
    json.push('\n');
    run.write("dataset.json", json.as_bytes())?;
    let mut csv = Vec::new();
    io::write_dataset_csv(&mut csv, &ds)?;
    run.write("dataset.csv", &csv)?;
    run.finish()
}

fn cluster_outputs(run: &mut Run, model: &roadclust_core::ClusterModel) -> Result<(), CliError> {
    let doc = model.to_document();
    let mut json = doc.to_json()?;
    json.push('\n');
    run.write("model.json", json.as_bytes())?;
    let mut assignments = String::from("street_id,cluster\n");
    for (id, c) in model.street_ids.iter().zip(&model.assignments) {
        writeln!(assignments, "{id},{c}").expect("write to string");
    }
    run.write("assignments.csv", assignments.as_bytes())?;
    let mut centroids = String::from("cluster,position,speed_kmh\n");
    for (c, centroid) in model.centroids.iter().enumerate() {
        for (i, v) in centroid.series.iter().enumerate() {
            writeln!(centroids, "{c},{i},{v}").expect("write to string");
        }
    }
    run.write("centroids.csv", centroids.as_bytes())?;
    run.note("cluster_sizes", model.cluster_sizes());
    run.note("inertia", model.inertia());
    Ok(())
}

fn fit(run: &mut Run, ds: &Dataset, s: &Settings) -> Result<roadclust_core::ClusterModel, CliError> {
    let series = ds.observed_series()?;
    let model = run.stage("cluster", || kmeans_dtw(&series, &s.clustering))?;
    Ok(model.with_street_ids(ds.street_ids()))
}

pub fn cluster(s: &Settings) -> Result<(), CliError> {
    let mut run = Run::new("cluster", Some(s.clone()), Some(s.out_dir()?))?;
    let ds = load_dataset(&mut run, s)?;
    let model = fit(&mut run, &ds, s)?;
    cluster_outputs(&mut run, &model)?;
    run.finish()
}

pub fn elbow(s: &Settings) -> Result<(), CliError> {
    let mut run = Run::new("elbow", Some(s.clone()), Some(s.out_dir()?))?;
    let ds = load_dataset(&mut run, s)?;
    let series = ds.observed_series()?;
    let (lo, hi) = s.k_range;
    let res = run.stage("elbow", || elbow_select(&series, lo..=hi, &s.clustering))?;
    let mut curve = String::from("k,inertia\n");
    for (k, inertia) in &res.curve {
        writeln!(curve, "{k},{inertia}").expect("write to string");
    }
    run.write("elbow_curve.csv", curve.as_bytes())?;
    run.write_json("elbow.json", &res)?;
    run.set_chosen_k(res.chosen_k);
    run.finish()
}

/// Imputes from `--model` when given, otherwise from a fresh fit.
fn imputed(run: &mut Run, ds: &Dataset, s: &Settings) -> Result<ImputedDataset, CliError> {
    let assignments: BTreeMap<String, usize> = match &s.model {
        Some(path) => {
            let doc = ModelDocument::from_json(&utf8(run.read(path)?, path)?)?;
            doc.assignments
        }
        None => {
            let model = fit(run, ds, s)?;
            cluster_outputs(run, &model)?;
            model.assignment_map()
        }
    };
    let out = run.stage("impute", || colorify::impute_with(ds, |id| assignments.get(id).copied()))?;
    if !out.report.unassigned_streets.is_empty() {
        run.warn(format!(
            "{} streets have no cluster and were not imputed",
            out.report.unassigned_streets.len()
        ));
    }
    run.write_json("imputation_report.json", &out.report)?;
    Ok(out)
}

pub fn impute(s: &Settings) -> Result<(), CliError> {
    let mut run = Run::new("impute", Some(s.clone()), Some(s.out_dir()?))?;
    let ds = load_dataset(&mut run, s)?;
    let out = imputed(&mut run, &ds, s)?;
    let mut json = io::dataset_to_json(&out.dataset)?;
    json.push('\n');
    run.write("imputed_dataset.json", json.as_bytes())?;
    let mut cells = String::from("street_id,bucket_index,speed_kmh\n");
    for (p, mask) in out.dataset.profiles().iter().zip(&out.imputed) {
        for (b, v) in p.series().observed() {
            if mask[b] {
                writeln!(cells, "{},{b},{v}", p.street_id()).expect("write to string");
            }
        }
    }
    run.write("imputed_cells.csv", cells.as_bytes())?;
    run.finish()
}

#[derive(Serialize)]
struct TileSnapshot<'a> {
    bucket_index: usize,
    day: u32,
    hour: u32,
    minute: u32,
    colors: BTreeMap<String, &'a str>,
}

pub fn colorify(s: &Settings) -> Result<(), CliError> {
    let mut run = Run::new("colorify", Some(s.clone()), Some(s.out_dir()?))?;
    let ds = load_dataset(&mut run, s)?;
    let data = if s.no_impute {
        ImputedDataset::observed_only(ds)
    } else {
        imputed(&mut run, &ds, s)?
    };
    let out = run.stage("colorify", || colorify::colorify(&data, &s.thresholds))?;
    if !out.summary.skipped_streets.is_empty() {
        run.warn(format!(
            "{} streets have no speeds and were skipped",
            out.summary.skipped_streets.len()
        ));
    }
    let mut csv = Vec::new();
    write_assignments_csv(&mut csv, &out.assignments)?;
    run.write("colors.csv", &csv)?;
    run.write_json("colorify_summary.json", &out.summary)?;

    let grid = data.dataset.grid();
    let bucket = s
        .snapshot_bucket
        .or_else(|| grid.bucket_of_minute(8 * 60))
        .unwrap_or(0);
    let (day, hour, minute) = grid.bucket_start(bucket).ok_or_else(|| {
        CliError::Usage(format!(
            "--snapshot-bucket {bucket} outside 0..{}",
            grid.buckets_per_week()
        ))
    })?;
    let snapshot = TileSnapshot {
        bucket_index: bucket,
        day,
        hour,
        minute,
        colors: colorify::tile_snapshot(&out.assignments, bucket),
    };
    run.write_json("tiles.json", &snapshot)?;
    run.finish()
}

#[derive(Serialize)]
struct ImportantReport<'a> {
    result: &'a ImportanceResult,
    #[serde(skip_serializing_if = "Option::is_none")]
    compare: Option<&'a ImportanceResult>,
    #[serde(skip_serializing_if = "Option::is_none")]
    elbow: Option<ElbowCheck>,
}

#[derive(Serialize)]
struct ElbowCheck {
    chosen_k: usize,
    curve: Vec<(usize, f64)>,
}

pub fn important_roads(s: &Settings) -> Result<(), CliError> {
    let mut run = Run::new("important-roads", Some(s.clone()), Some(s.out_dir()?))?;
    let ds = load_dataset(&mut run, s)?;
    let config = ImportanceConfig {
        cluster: s.clustering.clone(),
        ..Default::default()
    };
    let result = run.stage("select", || find_important_secondary(&ds, s.k, &config))?;
    let compare = match s.compare_k {
        Some(k) => Some(run.stage("compare", || find_important_secondary(&ds, k, &config))?),
        None => None,
    };
    let elbow = match s.elbow_range {
        Some((lo, hi)) => {
            let curve = run.stage("elbow", || {
                (lo..=hi)
                    .map(|k| find_important_secondary(&ds, k, &config).map(|r| (k, r.inertia)))
                    .collect::<roadclust_core::Result<Vec<_>>>()
            })?;
            let idx = knee_point(&log_curve(&curve)).expect("non-empty range");
            Some(ElbowCheck {
                chosen_k: curve[idx].0,
                curve,
            })
        }
        None => None,
    };
    for w in result.warnings.iter().chain(compare.iter().flat_map(|c| &c.warnings)) {
        run.warn(w.clone());
    }
    if let Some(e) = &elbow {
        run.set_chosen_k(e.chosen_k);
    }

    let mut csv = Vec::new();
    write_important_csv(&mut csv, &result.per_street)?;
    run.write("important_roads.csv", &csv)?;
    if let Some(c) = &compare {
        let mut csv = Vec::new();
        write_important_csv(&mut csv, &c.per_street)?;
        run.write(&format!("important_roads_k{}.csv", c.k), &csv)?;
    }
    run.write_json(
        "important_roads.json",
        &ImportantReport {
            result: &result,
            compare: compare.as_ref(),
            elbow,
        },
    )?;
    run.note("selected_cluster", result.selected_cluster);
    run.note("important_streets", result.important_street_ids.len());
    run.finish()
}

/// Parses `1,2,,4` or `@file`; empty, `null` and `NA` entries are dropped.
pub fn parse_series(arg: &str) -> Result<Vec<f64>, CliError> {
    let text = match arg.strip_prefix('@') {
        Some(path) => std::fs::read_to_string(path).map_err(|e| CliError::io(Path::new(path), e))?,
        None => arg.to_string(),
    };
    let mut out = Vec::new();
    for token in text.split(|c: char| c == ',' || c.is_whitespace()) {
        let token = token.trim();
        if token.is_empty() || token.eq_ignore_ascii_case("null") || token.eq_ignore_ascii_case("na") {
            continue;
        }
        let v: f64 = token
            .parse()
            .ok()
            .filter(|v: &f64| v.is_finite())
            .ok_or_else(|| CliError::Usage(format!("invalid series value {token:?}")))?;
        out.push(v);
    }
    Ok(out)
}

#[derive(Serialize)]
struct DtwOutput {
    a: Vec<f64>,
    b: Vec<f64>,
    local: LocalDistance,
    window: Option<usize>,
    distance: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    path: Option<Vec<(usize, usize)>>,
}

pub fn dtw(args: &DtwArgs) -> Result<(), CliError> {
    let a = parse_series(&args.a)?;
    let b = parse_series(&args.b)?;
    let local: LocalDistance = match &args.local {
        Some(l) => l.parse().map_err(|e: Error| CliError::Usage(e.to_string()))?,
        None => LocalDistance::default(),
    };
    let mut dtw = Dtw::new(local);
    if let Some(w) = args.window {
        dtw = dtw.with_window(w);
    }
    let mut run = Run::new("dtw", None, args.out_dir.as_deref())?;
    let (distance, path) = run.stage("dtw", || -> roadclust_core::Result<_> {
        if args.path {
            let (d, p) = dtw.alignment(&a, &b)?;
            Ok((d, Some(p.pairs().to_vec())))
        } else {
            Ok((dtw.distance(&a, &b)?, None))
        }
    })?;
    println!("{distance:?}");
    if let Some(p) = &path {
        let pairs: Vec<String> = p.iter().map(|(i, j)| format!("({i},{j})")).collect();
        println!("{}", pairs.join(" "));
    }
    if args.out_dir.is_some() {
        run.write_json(
            "dtw.json",
            &DtwOutput {
                a,
                b,
                local,
                window: args.window,
                distance,
                path,
            },
        )?;
    }
    run.finish()
}
