//! Partition agreement and cluster quality scores.

use std::collections::HashMap;

use crate::dtw::DistanceMatrix;

fn choose2(n: usize) -> f64 {
    let n = n as f64;
    n * (n - 1.0) / 2.0
}

/// Chance-corrected agreement between two labelings of the same points.
/// Returns 1.0 when both partitions are identical up to relabeling.
pub fn adjusted_rand_index(a: &[usize], b: &[usize]) -> f64 {
    assert_eq!(a.len(), b.len(), "labelings must cover the same points");
    let n = a.len();
    let mut table: HashMap<(usize, usize), usize> = HashMap::new();
    let mut rows: HashMap<usize, usize> = HashMap::new();
    let mut cols: HashMap<usize, usize> = HashMap::new();
    for (&x, &y) in a.iter().zip(b) {
        *table.entry((x, y)).or_default() += 1;
        *rows.entry(x).or_default() += 1;
        *cols.entry(y).or_default() += 1;
    }
    let index: f64 = table.values().map(|&c| choose2(c)).sum();
    let sum_rows: f64 = rows.values().map(|&c| choose2(c)).sum();
    let sum_cols: f64 = cols.values().map(|&c| choose2(c)).sum();
    let total = choose2(n);
    if total == 0.0 {
        return 1.0;
    }
    let expected = sum_rows * sum_cols / total;
    let max = (sum_rows + sum_cols) / 2.0;
    if max == expected {
        return 1.0;
    }
    (index - expected) / (max - expected)
}

/// Mean silhouette coefficient of `labels` under precomputed distances.
/// Points in singleton clusters score 0.
pub fn silhouette(distances: &DistanceMatrix, labels: &[usize]) -> f64 {
    let n = labels.len();
    assert_eq!(distances.len(), n);
    let k = labels.iter().copied().max().map_or(0, |m| m + 1);
    let mut sizes = vec![0usize; k];
    for &l in labels {
        sizes[l] += 1;
    }
    let mut total = 0.0;
    for i in 0..n {
        let own = labels[i];
        if sizes[own] <= 1 {
            continue;
        }
        let mut sums = vec![0.0; k];
        for (j, &d) in distances.row(i).iter().enumerate() {
            if j != i {
                sums[labels[j]] += d;
            }
        }
        let a = sums[own] / (sizes[own] - 1) as f64;
        let b = (0..k)
            .filter(|&c| c != own && sizes[c] > 0)
            .map(|c| sums[c] / sizes[c] as f64)
            .fold(f64::INFINITY, f64::min);
        if b.is_finite() {
            let denom = a.max(b);
            if denom > 0.0 {
                total += (b - a) / denom;
            }
        }
    }
    total / n as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dtw::pairwise_distances;
    use crate::dtw::LocalDistance;

    #[test]
    fn ari_of_relabeled_partition_is_one() {
        assert_eq!(adjusted_rand_index(&[0, 0, 1, 1, 2], &[2, 2, 0, 0, 1]), 1.0);
    }

    #[test]
    fn ari_known_value() {
        // sklearn: adjusted_rand_score([0,0,1,1],[0,0,1,2]) = 0.5714285714285715
        let ari = adjusted_rand_index(&[0, 0, 1, 1], &[0, 0, 1, 2]);
        assert!((ari - 4.0 / 7.0).abs() < 1e-12);
    }

    #[test]
    fn silhouette_separated_groups() {
        let series = vec![vec![0.0], vec![1.0], vec![100.0], vec![101.0]];
        let d = pairwise_distances(&series, LocalDistance::Absolute).unwrap();
        let good = silhouette(&d, &[0, 0, 1, 1]);
        let bad = silhouette(&d, &[0, 1, 0, 1]);
        assert!(good > 0.9);
        assert!(bad < 0.0);
    }
}
