//! DTW barycenter averaging.

use rayon::prelude::*;

use crate::dtw::Dtw;
use crate::error::Result;

/// Sum of squared DTW distances from `members` to `center`.
pub(crate) fn sum_sq_distance<S: AsRef<[f64]> + Sync>(
    dtw: &Dtw,
    members: &[S],
    center: &[f64],
) -> Result<f64> {
    let dists = members
        .par_iter()
        .map(|m| dtw.distance(m.as_ref(), center))
        .collect::<Result<Vec<_>>>()?;
    Ok(dists.iter().map(|d| d * d).sum())
}

/// One averaging pass: aligns every member to `center` and replaces each
/// center position by the mean of the member values warped onto it.
///
/// Returns the new center and the squared-distance cost of the old one.
fn refine<S: AsRef<[f64]> + Sync>(dtw: &Dtw, members: &[S], center: &[f64]) -> Result<(Vec<f64>, f64)> {
    let aligned = members
        .par_iter()
        .map(|m| {
            let m = m.as_ref();
            let matrix = dtw.matrix(center, m)?;
            let mut sums = vec![0.0; center.len()];
            let mut counts = vec![0u32; center.len()];
            for &(i, j) in matrix.path().pairs() {
                sums[i - 1] += m[j - 1];
                counts[i - 1] += 1;
            }
            Ok((matrix.distance(), sums, counts))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut sums = vec![0.0; center.len()];
    let mut counts = vec![0u32; center.len()];
    let mut cost = 0.0;
    for (d, s, c) in aligned {
        cost += d * d;
        for i in 0..center.len() {
            sums[i] += s[i];
            counts[i] += c[i];
        }
    }
    // Every center position lies on each warping path, so counts are >= 1.
    let next = sums.iter().zip(&counts).map(|(s, &c)| s / c as f64).collect();
    Ok((next, cost))
}

/// Refines `init` for up to `iterations` averaging passes and returns the
/// visited center with the lowest sum of squared DTW distances (the earliest
/// one on ties, so `init` wins when nothing improves on it).
///
/// The output has the length of `init`. `members` must be non-empty.
pub fn dba<S: AsRef<[f64]> + Sync>(
    dtw: &Dtw,
    members: &[S],
    init: &[f64],
    iterations: usize,
) -> Result<Vec<f64>> {
    let mut best = init.to_vec();
    let mut best_cost = f64::INFINITY;
    let mut current = init.to_vec();
    for _ in 0..iterations {
        let (next, cost) = refine(dtw, members, &current)?;
        if cost < best_cost {
            best_cost = cost;
            best = current.clone();
        }
        if next == current {
            return Ok(best);
        }
        current = next;
    }
    if sum_sq_distance(dtw, members, &current)? < best_cost {
        best = current;
    }
    Ok(best)
}

/// Linear interpolation of `values` onto `len` evenly spaced points.
pub fn resample(values: &[f64], len: usize) -> Vec<f64> {
    if values.len() == len {
        return values.to_vec();
    }
    if values.len() == 1 || len == 1 {
        return vec![values[0]; len];
    }
    let scale = (values.len() - 1) as f64 / (len - 1) as f64;
    (0..len)
        .map(|t| {
            let pos = t as f64 * scale;
            let lo = (pos.floor() as usize).min(values.len() - 1);
            let hi = (lo + 1).min(values.len() - 1);
            let frac = pos - lo as f64;
            values[lo] + (values[hi] - values[lo]) * frac
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dtw::LocalDistance;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn identical_members_are_a_fixed_point() {
        let members = vec![vec![3.0, 4.0, 5.0]; 2];
        let c = dba(&Dtw::default(), &members, &members[0], 10).unwrap();
        assert_eq!(c, vec![3.0, 4.0, 5.0]);
    }

    #[test]
    fn symmetric_pair_averages_to_midpoint() {
        let members = vec![vec![0.0, 0.0], vec![2.0, 2.0]];
        let c = dba(&Dtw::default(), &members, &[1.0, 1.0], 10).unwrap();
        assert_eq!(c, vec![1.0, 1.0]);
    }

    #[test]
    fn output_keeps_init_length() {
        let members = vec![vec![1.0, 2.0, 3.0, 4.0, 5.0], vec![2.0, 3.0]];
        let c = dba(&Dtw::default(), &members, &[0.0, 1.0, 2.0], 5).unwrap();
        assert_eq!(c.len(), 3);
    }

    #[test]
    fn never_worse_than_pointwise_mean() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for local in [LocalDistance::Absolute, LocalDistance::Squared] {
            let dtw = Dtw::new(local);
            for _ in 0..25 {
                let len = rng.gen_range(2..12);
                let count = rng.gen_range(1..6);
                let members: Vec<Vec<f64>> = (0..count)
                    .map(|_| (0..len).map(|_| rng.gen_range(0.0..100.0)).collect())
                    .collect();
                let mean: Vec<f64> = (0..len)
                    .map(|t| members.iter().map(|m| m[t]).sum::<f64>() / count as f64)
                    .collect();
                let bary = dba(&dtw, &members, &mean, 10).unwrap();
                let before = sum_sq_distance(&dtw, &members, &mean).unwrap();
                let after = sum_sq_distance(&dtw, &members, &bary).unwrap();
                assert!(after <= before, "{after} > {before}");
            }
        }
    }

    #[test]
    fn resample_endpoints_and_identity() {
        assert_eq!(resample(&[1.0, 2.0, 3.0], 3), vec![1.0, 2.0, 3.0]);
        assert_eq!(resample(&[4.0], 3), vec![4.0; 3]);
        assert_eq!(resample(&[0.0, 10.0], 5), vec![0.0, 2.5, 5.0, 7.5, 10.0]);
        let r = resample(&[0.0, 10.0, 0.0], 2);
        assert_eq!(r, vec![0.0, 0.0]);
    }
}
