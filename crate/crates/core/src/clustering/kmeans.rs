use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::barycenter::{dba, resample};
use super::{Centroid, ClusterConfig, ClusterModel};
use crate::dtw::Dtw;
use crate::error::{Error, Result};
use crate::model::ObservedSeries;
use crate::stats;

/// K-Means with DTW assignment, k-means++ seeding and barycenter updates.
///
/// Deterministic for a given input order and `config.seed`.
pub fn kmeans_dtw(series: &[ObservedSeries], config: &ClusterConfig) -> Result<ClusterModel> {
    let slices: Vec<&[f64]> = series.iter().map(|s| s.values()).collect();
    Problem::new(slices, None, config)?.fit(Vec::new())
}

/// As [`kmeans_dtw`], starting from `initial` centroids; k-means++ adds the
/// remaining `config.k - initial.len()` seeds. Starting from a fitted
/// model's centroids, the final inertia never exceeds that model's.
pub fn kmeans_dtw_from(
    series: &[ObservedSeries],
    config: &ClusterConfig,
    initial: &[Centroid],
) -> Result<ClusterModel> {
    if initial.len() > config.k {
        return Err(Error::InvalidConfig(format!(
            "{} initial centroids for k = {}",
            initial.len(),
            config.k
        )));
    }
    if initial.iter().any(|c| c.series.is_empty() || c.scalar_features.is_some()) {
        return Err(Error::InvalidConfig(
            "initial centroids must be non-empty plain series".into(),
        ));
    }
    let slices: Vec<&[f64]> = series.iter().map(|s| s.values()).collect();
    Problem::new(slices, None, config)?.fit(initial.to_vec())
}

/// As [`kmeans_dtw`], with a scalar feature vector attached to every series.
pub fn kmeans_dtw_with_features(
    series: &[ObservedSeries],
    features: &[Vec<f64>],
    config: &ClusterConfig,
) -> Result<ClusterModel> {
    if features.len() != series.len() {
        return Err(Error::InvalidConfig(format!(
            "{} feature vectors for {} series",
            features.len(),
            series.len()
        )));
    }
    let dim = features.first().map_or(0, Vec::len);
    if features.iter().any(|f| f.len() != dim || f.iter().any(|v| !v.is_finite())) {
        return Err(Error::InvalidConfig(
            "feature vectors must share one length and be finite".into(),
        ));
    }
    let slices: Vec<&[f64]> = series.iter().map(|s| s.values()).collect();
    Problem::new(slices, Some(features), config)?.fit(Vec::new())
}

struct Problem<'a> {
    series: Vec<&'a [f64]>,
    features: Option<&'a [Vec<f64>]>,
    config: &'a ClusterConfig,
    dtw: Dtw,
    centroid_len: usize,
}

impl<'a> Problem<'a> {
    fn new(
        series: Vec<&'a [f64]>,
        features: Option<&'a [Vec<f64>]>,
        config: &'a ClusterConfig,
    ) -> Result<Self> {
        if series.is_empty() {
            return Err(Error::TooFewSeries { k: config.k, n: 0 });
        }
        if let Some(i) = series.iter().position(|s| s.is_empty()) {
            return Err(Error::EmptySeries { index: Some(i) });
        }
        config.validate(series.len())?;
        let lengths: Vec<f64> = series.iter().map(|s| s.len() as f64).collect();
        let centroid_len = (stats::median(&lengths).unwrap_or(2.0).round() as usize).max(2);
        Ok(Problem {
            series,
            features,
            config,
            dtw: config.dtw(),
            centroid_len,
        })
    }

    fn distance(&self, i: usize, c: &Centroid) -> Result<f64> {
        let d = self
            .dtw
            .distance(self.series[i], &c.series)
            .map_err(|_| Error::EmptySeries { index: Some(i) })?;
        match (self.features, &c.scalar_features) {
            (Some(f), Some(cf)) => Ok(d + self.config.feature_weight * stats::euclidean(&f[i], cf)),
            _ => Ok(d),
        }
    }

    fn centroid_from(&self, i: usize) -> Centroid {
        Centroid {
            series: resample(self.series[i], self.centroid_len),
            scalar_features: self.features.map(|f| f[i].clone()),
        }
    }

    /// k-means++ seeding with squared DTW weights, extending `centroids`.
    fn seed_centroids(&self, rng: &mut ChaCha8Rng, mut centroids: Vec<Centroid>) -> Result<Vec<Centroid>> {
        let n = self.series.len();
        let k = self.config.k;
        let mut chosen = vec![false; n];
        if centroids.is_empty() {
            let first = rng.gen_range(0..n);
            chosen[first] = true;
            centroids.push(self.centroid_from(first));
        }
        let mut nearest = vec![f64::INFINITY; n];
        for c in &centroids {
            for (d, new) in nearest.iter_mut().zip(self.distances_to(c)?) {
                *d = d.min(new);
            }
        }

        while centroids.len() < k {
            let weights: Vec<f64> = (0..n)
                .map(|i| if chosen[i] { 0.0 } else { nearest[i] * nearest[i] })
                .collect();
            let total: f64 = weights.iter().sum();
            let pick = if total > 0.0 && total.is_finite() {
                let target = rng.gen::<f64>() * total;
                let mut acc = 0.0;
                let mut pick = None;
                for (i, w) in weights.iter().enumerate() {
                    if *w > 0.0 {
                        acc += w;
                        pick = Some(i);
                        if acc > target {
                            break;
                        }
                    }
                }
                pick.expect("positive total weight")
            } else {
                let free: Vec<usize> = (0..n).filter(|&i| !chosen[i]).collect();
                free[rng.gen_range(0..free.len())]
            };
            chosen[pick] = true;
            let centroid = self.centroid_from(pick);
            for (d, new) in nearest.iter_mut().zip(self.distances_to(&centroid)?) {
                *d = d.min(new);
            }
            centroids.push(centroid);
        }
        Ok(centroids)
    }

    fn distances_to(&self, c: &Centroid) -> Result<Vec<f64>> {
        (0..self.series.len())
            .into_par_iter()
            .map(|i| self.distance(i, c))
            .collect()
    }

    /// Nearest centroid per point, ties to the lowest index.
    fn assign(&self, centroids: &[Centroid]) -> Result<(Vec<usize>, Vec<f64>)> {
        let best: Vec<(usize, f64)> = (0..self.series.len())
            .into_par_iter()
            .map(|i| {
                let mut best = (0, f64::INFINITY);
                for (c, centroid) in centroids.iter().enumerate() {
                    let d = self.distance(i, centroid)?;
                    if d < best.1 {
                        best = (c, d);
                    }
                }
                Ok(best)
            })
            .collect::<Result<_>>()?;
        Ok(best.into_iter().unzip())
    }

    /// Assignment step; an emptied cluster is reseeded with the point
    /// farthest from its own centroid, then everything is reassigned.
    fn assign_nonempty(&self, centroids: &mut [Centroid]) -> Result<(Vec<usize>, Vec<f64>)> {
        let k = centroids.len();
        for _ in 0..k {
            let (assign, dists) = self.assign(centroids)?;
            let mut sizes = vec![0usize; k];
            for &c in &assign {
                sizes[c] += 1;
            }
            if sizes.iter().all(|&s| s > 0) {
                return Ok((assign, dists));
            }
            let mut taken = vec![false; assign.len()];
            let empties: Vec<usize> = (0..k).filter(|&c| sizes[c] == 0).collect();
            for empty in empties {
                let donor = (0..assign.len())
                    .filter(|&i| !taken[i] && sizes[assign[i]] > 1)
                    .fold(None, |best: Option<usize>, i| match best {
                        Some(b) if dists[b] >= dists[i] => Some(b),
                        _ => Some(i),
                    });
                let Some(p) = donor else { break };
                taken[p] = true;
                sizes[assign[p]] -= 1;
                sizes[empty] += 1;
                centroids[empty] = self.centroid_from(p);
            }
        }
        self.assign(centroids)
    }

    fn update(&self, members: &[usize], current: &Centroid, dists: &[f64]) -> Result<Centroid> {
        let member_series: Vec<&[f64]> = members.iter().map(|&i| self.series[i]).collect();
        let series = dba(
            &self.dtw,
            &member_series,
            &current.series,
            self.config.barycenter_iterations,
        )?;
        let scalar_features = self.features.map(|f| {
            let dim = f[members[0]].len();
            (0..dim)
                .map(|d| members.iter().map(|&i| f[i][d]).sum::<f64>() / members.len() as f64)
                .collect()
        });
        let candidate = Centroid {
            series,
            scalar_features,
        };

        let old_cost: f64 = members.iter().map(|&i| dists[i] * dists[i]).sum();
        let new_dists = members
            .par_iter()
            .map(|&i| self.distance(i, &candidate))
            .collect::<Result<Vec<_>>>()?;
        let new_cost: f64 = new_dists.iter().map(|d| d * d).sum();
        Ok(if new_cost < old_cost {
            candidate
        } else {
            current.clone()
        })
    }

    fn fit(&self, initial: Vec<Centroid>) -> Result<ClusterModel> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.config.seed);
        let mut centroids = self.seed_centroids(&mut rng, initial)?;
        let mut trace = Vec::new();
        let mut iterations = 0;

        loop {
            iterations += 1;
            let (assign, dists) = self.assign_nonempty(&mut centroids)?;
            let inertia: f64 = dists.iter().map(|d| d * d).sum();
            let small_change = trace.last().is_some_and(|&prev: &f64| {
                prev <= 0.0 || (prev - inertia).abs() / prev < self.config.tolerance
            });
            trace.push(inertia);

            // Stable assignments alone are not enough: DBA keeps refining
            // centroids (always, when k = 1) until inertia settles.
            if small_change || iterations >= self.config.max_iterations {
                return Ok(ClusterModel {
                    config: self.config.clone(),
                    centroids,
                    assignments: assign,
                    distances: dists,
                    street_ids: Vec::new(),
                    inertia_trace: trace,
                    iterations_run: iterations,
                });
            }

            for (c, centroid) in centroids.iter_mut().enumerate() {
                let members: Vec<usize> = (0..assign.len()).filter(|&i| assign[i] == c).collect();
                if !members.is_empty() {
                    *centroid = self.update(&members, centroid, &dists)?;
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::clustering::inertia;
    use crate::dtw::dtw_distance;
    use rand_distr::{Distribution, Normal};

    fn obs(v: Vec<f64>) -> ObservedSeries {
        ObservedSeries::new(v).unwrap()
    }

    /// Three level-shifted sine-ish groups with different lengths.
    fn blobs(per_group: usize, seed: u64) -> (Vec<ObservedSeries>, Vec<usize>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let noise = Normal::new(0.0, 1.0).unwrap();
        let mut series = Vec::new();
        let mut labels = Vec::new();
        for (g, level) in [20.0, 50.0, 90.0].into_iter().enumerate() {
            for _ in 0..per_group {
                let len = rng.gen_range(20..30);
                let v = (0..len)
                    .map(|t| level + 5.0 * (t as f64 / 4.0).sin() + noise.sample(&mut rng))
                    .collect();
                series.push(obs(v));
                labels.push(g);
            }
        }
        (series, labels)
    }

    #[test]
    fn single_cluster_takes_everything() {
        let (series, _) = blobs(4, 1);
        let model = kmeans_dtw(&series, &ClusterConfig::default().with_k(1)).unwrap();
        assert!(model.assignments.iter().all(|&c| c == 0));
        let c = &model.centroids[0].series;
        let expected: f64 = series
            .iter()
            .map(|s| dtw_distance(s.values(), c, model.config.local).unwrap().powi(2))
            .sum();
        assert_eq!(model.inertia(), expected);
        assert_eq!(inertia(&series, &model).unwrap(), expected);
    }

    #[test]
    fn saturated_clustering_has_zero_inertia() {
        let series: Vec<_> = (0..5)
            .map(|i| obs(vec![10.0 * i as f64, 10.0 * i as f64 + 3.0, 1.0]))
            .collect();
        let model = kmeans_dtw(&series, &ClusterConfig::default().with_k(5)).unwrap();
        let mut seen = model.assignments.clone();
        seen.sort_unstable();
        seen.dedup();
        assert_eq!(seen.len(), 5);
        assert!(model.inertia() <= 1e-9);
    }

    #[test]
    fn warm_start_never_worse_than_its_origin() {
        let (series, _) = blobs(5, 11);
        for k in 1..4 {
            let base = kmeans_dtw(&series, &ClusterConfig::default().with_k(k)).unwrap();
            let warm = kmeans_dtw_from(&series, &ClusterConfig::default().with_k(k + 1), &base.centroids).unwrap();
            assert_eq!(warm.k(), k + 1);
            assert!(warm.inertia() <= base.inertia());
        }
        let base = kmeans_dtw(&series, &ClusterConfig::default().with_k(2)).unwrap();
        assert!(kmeans_dtw_from(&series, &ClusterConfig::default().with_k(1), &base.centroids).is_err());
    }

    #[test]
    fn too_many_clusters() {
        let (series, _) = blobs(1, 2);
        let err = kmeans_dtw(&series, &ClusterConfig::default().with_k(4)).unwrap_err();
        assert!(matches!(err, Error::TooFewSeries { k: 4, n: 3 }));
        let err = kmeans_dtw(&[], &ClusterConfig::default().with_k(1)).unwrap_err();
        assert!(matches!(err, Error::TooFewSeries { .. }));
    }

    #[test]
    fn recovers_level_groups() {
        let (series, labels) = blobs(10, 3);
        let model = kmeans_dtw(&series, &ClusterConfig::default().with_seed(5)).unwrap();
        let ari = crate::metrics::adjusted_rand_index(&labels, &model.assignments);
        assert_eq!(ari, 1.0);
        assert!(model.cluster_sizes().iter().all(|&s| s > 0));
    }

    #[test]
    fn assignments_are_nearest_centroids() {
        let (series, _) = blobs(8, 4);
        let model = kmeans_dtw(&series, &ClusterConfig::default().with_k(4).with_seed(9)).unwrap();
        for (i, s) in series.iter().enumerate() {
            let dists: Vec<f64> = model
                .centroids
                .iter()
                .map(|c| dtw_distance(s.values(), &c.series, model.config.local).unwrap())
                .collect();
            let own = dists[model.assignments[i]];
            assert_eq!(own, model.distances[i]);
            for (c, d) in dists.iter().enumerate() {
                assert!(own < *d || (own == *d && model.assignments[i] <= c));
            }
        }
    }

    #[test]
    fn deterministic_and_trace_non_increasing() {
        let (series, _) = blobs(8, 6);
        let config = ClusterConfig::default().with_k(3).with_seed(42);
        let a = kmeans_dtw(&series, &config).unwrap();
        let b = kmeans_dtw(&series, &config).unwrap();
        assert_eq!(a, b);
        assert!(a.iterations_run <= config.max_iterations);
        assert_eq!(a.inertia_trace.len(), a.iterations_run);
        for w in a.inertia_trace.windows(2) {
            assert!(w[1] <= w[0] * (1.0 + 1e-9), "{:?}", a.inertia_trace);
        }
    }

    #[test]
    fn max_iterations_caps_the_loop() {
        let (series, _) = blobs(6, 7);
        let mut config = ClusterConfig::default().with_k(3);
        config.max_iterations = 1;
        let model = kmeans_dtw(&series, &config).unwrap();
        assert_eq!(model.iterations_run, 1);
    }

    #[test]
    fn features_participate_in_distance() {
        // Identical series, split only by their features.
        let series: Vec<_> = (0..6).map(|_| obs(vec![1.0, 2.0, 3.0])).collect();
        let features: Vec<Vec<f64>> = (0..6).map(|i| vec![if i < 3 { 0.0 } else { 10.0 }]).collect();
        let model =
            kmeans_dtw_with_features(&series, &features, &ClusterConfig::default().with_k(2)).unwrap();
        assert_eq!(
            crate::metrics::adjusted_rand_index(&model.assignments, &[0, 0, 0, 1, 1, 1]),
            1.0
        );
        assert!(model.centroids.iter().all(|c| c.scalar_features.is_some()));
        assert!(kmeans_dtw_with_features(&series, &features[..2], &ClusterConfig::default()).is_err());
    }
}
