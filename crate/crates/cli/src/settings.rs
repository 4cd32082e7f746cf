use std::path::{Path, PathBuf};

use roadclust_core::colorify::CongestionThresholds;
use roadclust_core::pipeline::io::Tz;
use roadclust_core::pipeline::CleaningConfig;
use roadclust_core::{BucketGrid, ClusterConfig};
use serde::{Deserialize, Serialize};

use crate::args::{
    ClusterArgs, ColorifyArgs, DataArgs, ElbowArgs, ImportantArgs, ImputeArgs, KMeansArgs, Preset,
    SynthArgs,
};
use crate::error::CliError;

/// Every setting, optional. Read from the `--config` file and built from
/// flags; flags win field by field.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Layer {
    pub input: Option<PathBuf>,
    pub attrs: Option<PathBuf>,
    pub out_dir: Option<PathBuf>,
    pub model: Option<PathBuf>,
    pub specs: Option<PathBuf>,
    pub k: Option<usize>,
    pub k_range: Option<String>,
    pub compare_k: Option<usize>,
    pub elbow_range: Option<String>,
    pub max_iter: Option<usize>,
    pub seed: Option<u64>,
    pub min_filling_rate: Option<f64>,
    pub bucket_minutes: Option<u32>,
    pub tz: Option<String>,
    pub thresholds: Option<String>,
    pub snapshot_bucket: Option<usize>,
    pub no_impute: Option<bool>,
    pub preset: Option<Preset>,
    pub feature_weight: Option<f64>,
    pub threads: Option<usize>,
}

macro_rules! overlay {
    ($top:expr, $base:expr, $($field:ident),*) => {
        Layer { $($field: $top.$field.or($base.$field)),* }
    };
}

impl Layer {
    pub fn from_file(path: &Path) -> Result<Layer, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        serde_json::from_str(&text)
            .map_err(|e| CliError::Usage(format!("config {}: {e}", path.display())))
    }

    /// `self` wins wherever it has a value.
    pub fn over(self, base: Layer) -> Layer {
        overlay!(
            self, base, input, attrs, out_dir, model, specs, k, k_range, compare_k, elbow_range,
            max_iter, seed, min_filling_rate, bucket_minutes, tz, thresholds, snapshot_bucket,
            no_impute, preset, feature_weight, threads
        )
    }

    fn data(&mut self, d: DataArgs) {
        self.input = d.input;
        self.attrs = d.attrs;
        self.out_dir = d.out_dir;
        self.min_filling_rate = d.min_filling_rate;
        self.bucket_minutes = d.bucket_minutes;
        self.tz = d.tz;
    }

    fn kmeans(&mut self, k: KMeansArgs) {
        self.max_iter = k.max_iter;
        self.seed = k.seed;
    }

    pub fn from_synth(a: SynthArgs) -> Layer {
        Layer {
            out_dir: a.out_dir,
            seed: a.seed,
            bucket_minutes: a.bucket_minutes,
            preset: a.preset,
            specs: a.specs,
            ..Default::default()
        }
    }

    pub fn from_data(a: DataArgs) -> Layer {
        let mut l = Layer::default();
        l.data(a);
        l
    }

    pub fn from_cluster(a: ClusterArgs) -> Layer {
        let mut l = Layer::from_data(a.data);
        l.kmeans(a.kmeans);
        l.k = a.k;
        l
    }

    pub fn from_elbow(a: ElbowArgs) -> Layer {
        let mut l = Layer::from_data(a.data);
        l.kmeans(a.kmeans);
        l.k_range = a.k_range;
        l
    }

    pub fn from_impute(a: ImputeArgs) -> Layer {
        let mut l = Layer::from_data(a.data);
        l.kmeans(a.kmeans);
        l.k = a.k;
        l.model = a.model;
        l
    }

    pub fn from_colorify(a: ColorifyArgs) -> Layer {
        let mut l = Layer::from_impute(a.imputation);
        l.thresholds = a.thresholds;
        l.snapshot_bucket = a.snapshot_bucket;
        l.no_impute = a.no_impute.then_some(true);
        l
    }

    pub fn from_important(a: ImportantArgs) -> Layer {
        let mut l = Layer::from_data(a.data);
        l.kmeans(a.kmeans);
        l.k = a.k;
        l.compare_k = a.compare_k;
        l.elbow_range = a.elbow_range;
        l.feature_weight = a.feature_weight;
        l
    }
}

/// Fully resolved run settings, recorded in the manifest.
#[derive(Debug, Clone, Serialize)]
pub struct Settings {
    pub input: Option<PathBuf>,
    pub attrs: Option<PathBuf>,
    pub out_dir: Option<PathBuf>,
    pub model: Option<PathBuf>,
    pub specs: Option<PathBuf>,
    pub preset: Preset,
    pub k: usize,
    pub k_range: (usize, usize),
    pub compare_k: Option<usize>,
    pub elbow_range: Option<(usize, usize)>,
    pub seed: u64,
    pub tz: String,
    /// Defaults to Monday 08:00 on the data's grid.
    pub snapshot_bucket: Option<usize>,
    pub no_impute: bool,
    pub grid: BucketGrid,
    pub cleaning: CleaningConfig,
    pub clustering: ClusterConfig,
    pub thresholds: CongestionThresholds,
}

/// Parses `a..b`, `a..=b` or `a-b` as an inclusive range.
pub fn parse_range(text: &str) -> Result<(usize, usize), CliError> {
    let bad = || CliError::Usage(format!("expected a range like 1..6, got {text:?}"));
    let (lo, hi) = text
        .split_once("..=")
        .or_else(|| text.split_once(".."))
        .or_else(|| text.split_once('-'))
        .ok_or_else(bad)?;
    let lo: usize = lo.trim().parse().map_err(|_| bad())?;
    let hi: usize = hi.trim().parse().map_err(|_| bad())?;
    if lo == 0 || hi < lo {
        return Err(bad());
    }
    Ok((lo, hi))
}

impl Settings {
    pub fn resolve(layer: Layer) -> Result<Settings, CliError> {
        let usage = |e: roadclust_core::Error| CliError::Usage(e.to_string());
        let grid = BucketGrid::new(layer.bucket_minutes.unwrap_or(15)).map_err(usage)?;
        let mut cleaning = CleaningConfig::default();
        if let Some(rate) = layer.min_filling_rate {
            cleaning.min_filling_rate = rate;
        }
        cleaning.validate().map_err(usage)?;

        let seed = layer.seed.unwrap_or(0);
        let mut clustering = ClusterConfig::default().with_k(layer.k.unwrap_or(3)).with_seed(seed);
        if let Some(max_iter) = layer.max_iter {
            clustering.max_iterations = max_iter;
        }
        if let Some(w) = layer.feature_weight {
            clustering.feature_weight = w;
        }
        if clustering.k == 0 || clustering.max_iterations == 0 {
            return Err(CliError::Usage("--k and --max-iter must be positive".into()));
        }

        let thresholds = match &layer.thresholds {
            Some(t) => CongestionThresholds::parse(t).map_err(usage)?,
            None => CongestionThresholds::default(),
        };
        let tz = layer.tz.unwrap_or_else(|| "UTC".to_string());
        tz.parse::<Tz>()
            .map_err(|_| CliError::Usage(format!("unknown time zone {tz:?}")))?;
        if layer.threads == Some(0) {
            return Err(CliError::Usage("--threads must be positive".into()));
        }

        Ok(Settings {
            input: layer.input,
            attrs: layer.attrs,
            out_dir: layer.out_dir,
            model: layer.model,
            specs: layer.specs,
            preset: layer.preset.unwrap_or(Preset::Default),
            k: clustering.k,
            k_range: layer.k_range.as_deref().map(parse_range).transpose()?.unwrap_or((1, 6)),
            compare_k: layer.compare_k,
            elbow_range: layer.elbow_range.as_deref().map(parse_range).transpose()?,
            seed,
            tz,
            snapshot_bucket: layer.snapshot_bucket,
            no_impute: layer.no_impute.unwrap_or(false),
            grid,
            cleaning,
            clustering,
            thresholds,
        })
    }

    pub fn time_zone(&self) -> Tz {
        self.tz.parse().expect("validated in resolve")
    }

    pub fn input(&self) -> Result<&Path, CliError> {
        self.input
            .as_deref()
            .ok_or_else(|| CliError::Usage("--input is required".into()))
    }

    pub fn out_dir(&self) -> Result<&Path, CliError> {
        self.out_dir
            .as_deref()
            .ok_or_else(|| CliError::Usage("--out-dir is required".into()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ranges() {
        assert_eq!(parse_range("1..6").unwrap(), (1, 6));
        assert_eq!(parse_range("2..=5").unwrap(), (2, 5));
        assert_eq!(parse_range("3-4").unwrap(), (3, 4));
        assert!(parse_range("6..1").is_err());
        assert!(parse_range("0..3").is_err());
        assert!(parse_range("x").is_err());
    }

    #[test]
    fn flags_override_file() {
        let file: Layer = serde_json::from_str(r#"{"k": 5, "seed": 9, "thresholds": "0.8:0.5:3"}"#).unwrap();
        let flags = Layer {
            k: Some(4),
            ..Default::default()
        };
        let s = Settings::resolve(flags.over(file)).unwrap();
        assert_eq!(s.k, 4);
        assert_eq!(s.seed, 9);
        assert_eq!(s.clustering.seed, 9);
        assert_eq!(s.thresholds.free_flow_ratio, 0.8);
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(serde_json::from_str::<Layer>(r#"{"kk": 5}"#).is_err());
    }

    #[test]
    fn invalid_values() {
        let bad = |l: Layer| Settings::resolve(l).is_err();
        assert!(bad(Layer { bucket_minutes: Some(7 * 1000), ..Default::default() }));
        assert!(bad(Layer { min_filling_rate: Some(2.0), ..Default::default() }));
        assert!(bad(Layer { tz: Some("Mars/Base".into()), ..Default::default() }));
        assert!(bad(Layer { k: Some(0), ..Default::default() }));
    }
}
