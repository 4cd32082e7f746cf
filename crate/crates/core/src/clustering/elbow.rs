use std::ops::RangeInclusive;

use rayon::prelude::*;
use serde::Serialize;

use super::{kmeans_dtw, kmeans_dtw_from, ClusterConfig, ClusterModel};
use crate::error::{Error, Result};
use crate::model::ObservedSeries;

#[derive(Debug, Clone, Serialize)]
pub struct ElbowResult {
    pub chosen_k: usize,
    /// `(k, final inertia)` for every k in the range.
    pub curve: Vec<(usize, f64)>,
    #[serde(skip)]
    pub models: Vec<ClusterModel>,
}

/// Index into `curve` of the point lying farthest below the chord joining
/// the first and last points. Ties go to the smaller k.
pub fn knee_point(curve: &[(usize, f64)]) -> Option<usize> {
    let (&(k0, y0), &(k1, y1)) = (curve.first()?, curve.last()?);
    if curve.len() < 3 || k1 == k0 {
        return Some(0);
    }
    let slope = (y1 - y0) / (k1 as f64 - k0 as f64);
    let mut best = (0, f64::NEG_INFINITY);
    for (idx, &(k, y)) in curve.iter().enumerate() {
        let gap = y0 + slope * (k as f64 - k0 as f64) - y;
        if gap > best.1 {
            best = (idx, gap);
        }
    }
    Some(best.0)
}

/// The curve with inertia on a log scale, which is where the knee is read.
///
/// On a linear scale the chord is dominated by the k = 1 point. Under DTW
/// that point is also the least stable one: a single barycenter can hold a
/// few points at every speed level, and which such optimum a fit reaches
/// varies by a factor of several between seeds. Reading relative drops
/// keeps the choice tied to where the curve flattens. Zero inertia is
/// floored just below the smallest positive value.
pub fn log_curve(curve: &[(usize, f64)]) -> Vec<(usize, f64)> {
    let floor = curve
        .iter()
        .map(|p| p.1)
        .filter(|&y| y > 0.0)
        .fold(f64::INFINITY, f64::min);
    let floor = if floor.is_finite() { floor * 1e-6 } else { 1.0 };
    curve.iter().map(|&(k, y)| (k, y.max(floor).ln())).collect()
}

/// Fits one model per k and picks the elbow of the inertia curve, read on
/// a log scale (see [`log_curve`]).
///
/// A fresh fit whose inertia exceeds that of the previous k is refit from
/// the previous model's centroids plus one new seed, and the better of the
/// two is kept, so the curve is non-increasing whenever `k_range` is
/// contiguous.
pub fn elbow_select(
    series: &[ObservedSeries],
    k_range: RangeInclusive<usize>,
    template: &ClusterConfig,
) -> Result<ElbowResult> {
    let ks: Vec<usize> = k_range.collect();
    if ks.len() < 3 {
        return Err(Error::InvalidConfig(
            "elbow selection needs at least three values of k".into(),
        ));
    }
    if let Some(&k) = ks.iter().find(|&&k| k == 0 || k > series.len()) {
        return Err(Error::TooFewSeries { k, n: series.len() });
    }
    let mut models = ks
        .par_iter()
        .map(|&k| kmeans_dtw(series, &template.clone().with_k(k)))
        .collect::<Result<Vec<_>>>()?;
    for i in 1..models.len() {
        if ks[i] != ks[i - 1] + 1 || models[i].inertia() <= models[i - 1].inertia() {
            continue;
        }
        let warm = kmeans_dtw_from(series, &template.clone().with_k(ks[i]), &models[i - 1].centroids)?;
        if warm.inertia() < models[i].inertia() {
            models[i] = warm;
        }
    }
    let curve: Vec<(usize, f64)> = ks.iter().copied().zip(models.iter().map(|m| m.inertia())).collect();
    let chosen_k = curve[knee_point(&log_curve(&curve)).expect("non-empty curve")].0;
    Ok(ElbowResult {
        chosen_k,
        curve,
        models,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hand_computed_chord_distances() {
        let curve = [(1, 100.0), (2, 50.0), (3, 20.0), (4, 18.0), (5, 17.0)];
        assert_eq!(knee_point(&curve), Some(2));
    }

    #[test]
    fn linear_curve_picks_smallest_k() {
        let curve = [(2, 100.0), (3, 80.0), (4, 60.0), (5, 40.0), (6, 20.0)];
        assert_eq!(knee_point(&curve), Some(0));
    }

    #[test]
    fn log_scale_reads_relative_drops() {
        // A poorly fitted k = 1 makes the linear chord favour k = 2.
        let curve = [(1, 6.2e9), (2, 8.1e8), (3, 4.5e8), (4, 4.4e8), (5, 4.3e8), (6, 4.3e8)];
        assert_eq!(knee_point(&curve), Some(1));
        assert_eq!(knee_point(&log_curve(&curve)), Some(2));
    }

    #[test]
    fn zero_inertia_stays_finite() {
        let logged = log_curve(&[(1, 10.0), (2, 1.0), (3, 0.0)]);
        assert!(logged.iter().all(|p| p.1.is_finite()));
        assert!(logged[2].1 < logged[1].1);
        assert!(log_curve(&[(1, 0.0), (2, 0.0)]).iter().all(|p| p.1 == 0.0));
    }

    #[test]
    fn short_ranges_rejected() {
        let s = vec![ObservedSeries::new(vec![1.0]).unwrap(); 4];
        assert!(elbow_select(&s, 1..=2, &ClusterConfig::default()).is_err());
        assert!(matches!(
            elbow_select(&s, 1..=5, &ClusterConfig::default()),
            Err(Error::TooFewSeries { k: 5, n: 4 })
        ));
    }

    #[test]
    fn curve_is_non_increasing() {
        let series: Vec<ObservedSeries> = [5.0, 6.0, 30.0, 31.0, 32.0, 80.0, 82.0, 120.0]
            .iter()
            .enumerate()
            .map(|(i, &level)| {
                let v = (0..12 + i).map(|t| level + (t % 3) as f64).collect();
                ObservedSeries::new(v).unwrap()
            })
            .collect();
        let res = elbow_select(&series, 1..=6, &ClusterConfig::default()).unwrap();
        assert_eq!(res.curve.len(), 6);
        for w in res.curve.windows(2) {
            assert!(w[1].1 <= w[0].1, "{:?}", res.curve);
        }
        assert!(elbow_select(&series, 1..=2, &ClusterConfig::default()).is_err());
    }
}
