//! Dynamic Time Warping between series of possibly different lengths.
//!
//! The accumulated cost table has an extra leading row and column:
//! `cost[0][0] = 0`, the rest of row 0 and column 0 are `+inf`, and every
//! other cell is `d(a_i, b_j) + min(diag, left, up)`. The distance is
//! `cost[n][m]`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Point-wise cost between two samples.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LocalDistance {
    /// `|x - y|`
    #[default]
    Absolute,
    /// `(x - y)^2`
    Squared,
}

impl LocalDistance {
    #[inline(always)]
    pub fn eval(self, x: f64, y: f64) -> f64 {
        match self {
            LocalDistance::Absolute => (x - y).abs(),
            LocalDistance::Squared => (x - y) * (x - y),
        }
    }
}

impl std::str::FromStr for LocalDistance {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "abs" | "absolute" => Ok(LocalDistance::Absolute),
            "sq" | "squared" => Ok(LocalDistance::Squared),
            _ => Err(Error::InvalidConfig(format!("unknown local distance {s:?}"))),
        }
    }
}

/// Fully populated accumulated-cost table, `(n + 1) x (m + 1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct AlignmentMatrix {
    n: usize,
    m: usize,
    cost: Vec<f64>,
}

impl AlignmentMatrix {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    /// Accumulated cost at `(i, j)`, with `0 <= i <= n` and `0 <= j <= m`.
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.cost[i * (self.m + 1) + j]
    }

    pub fn distance(&self) -> f64 {
        self.get(self.n, self.m)
    }

    /// Backtracks from `(n, m)` to `(1, 1)`. Ties prefer the diagonal, then
    /// the left neighbour `(i, j - 1)`, then the upper one `(i - 1, j)`.
    pub fn path(&self) -> AlignmentPath {
        let (mut i, mut j) = (self.n, self.m);
        let mut pairs = Vec::with_capacity(self.n + self.m);
        pairs.push((i, j));
        while (i, j) != (1, 1) {
            let diag = self.get(i - 1, j - 1);
            let left = self.get(i, j - 1);
            let up = self.get(i - 1, j);
            if diag <= left && diag <= up {
                i -= 1;
                j -= 1;
            } else if left <= up {
                j -= 1;
            } else {
                i -= 1;
            }
            pairs.push((i, j));
        }
        pairs.reverse();
        AlignmentPath { pairs }
    }
}

/// Matched index pairs, 1-based, from `(1, 1)` to `(n, m)`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct AlignmentPath {
    pairs: Vec<(usize, usize)>,
}

impl AlignmentPath {
    pub fn pairs(&self) -> &[(usize, usize)] {
        &self.pairs
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    /// Sum of local costs along the path, accumulated from the origin.
    pub fn cost(&self, a: &[f64], b: &[f64], local: LocalDistance) -> f64 {
        self.pairs
            .iter()
            .fold(0.0, |acc, &(i, j)| local.eval(a[i - 1], b[j - 1]) + acc)
    }
}

/// DTW configuration. No window means unconstrained warping.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dtw {
    pub local: LocalDistance,
    /// Sakoe-Chiba band half-width. Widened to `|n - m|` when narrower so
    /// that a path always exists.
    pub window: Option<usize>,
}

impl Dtw {
    pub fn new(local: LocalDistance) -> Self {
        Dtw {
            local,
            window: None,
        }
    }

    pub fn with_window(mut self, window: usize) -> Self {
        self.window = Some(window);
        self
    }

    fn band(&self, n: usize, m: usize) -> usize {
        match self.window {
            Some(w) => w.max(n.abs_diff(m)),
            None => n.max(m),
        }
    }

    /// Distance using two rolling rows over the shorter series.
    pub fn distance(&self, a: &[f64], b: &[f64]) -> Result<f64> {
        if a.is_empty() || b.is_empty() {
            return Err(Error::EmptySeries { index: None });
        }
        // Transposing the table leaves every cell value unchanged for a
        // symmetric local cost, so iterate with the shorter series inside.
        let (outer, inner) = if b.len() <= a.len() { (a, b) } else { (b, a) };
        let (n, m) = (outer.len(), inner.len());
        let w = self.band(n, m);
        let local = self.local;

        let mut prev = vec![f64::INFINITY; m + 1];
        let mut curr = vec![f64::INFINITY; m + 1];
        prev[0] = 0.0;
        for i in 1..=n {
            let x = outer[i - 1];
            let lo = i.saturating_sub(w).max(1);
            let hi = (i + w).min(m);
            curr[..lo].fill(f64::INFINITY);
            for j in lo..=hi {
                let best = prev[j - 1].min(curr[j - 1]).min(prev[j]);
                curr[j] = local.eval(x, inner[j - 1]) + best;
            }
            if hi < m {
                curr[hi + 1..].fill(f64::INFINITY);
            }
            std::mem::swap(&mut prev, &mut curr);
        }
        Ok(prev[m])
    }

    /// Full accumulated-cost table for `a` (rows) against `b` (columns).
    pub fn matrix(&self, a: &[f64], b: &[f64]) -> Result<AlignmentMatrix> {
        if a.is_empty() || b.is_empty() {
            return Err(Error::EmptySeries { index: None });
        }
        let (n, m) = (a.len(), b.len());
        let w = self.band(n, m);
        let stride = m + 1;
        let mut cost = vec![f64::INFINITY; (n + 1) * stride];
        cost[0] = 0.0;
        for i in 1..=n {
            let lo = i.saturating_sub(w).max(1);
            let hi = (i + w).min(m);
            for j in lo..=hi {
                let best = cost[(i - 1) * stride + j - 1]
                    .min(cost[i * stride + j - 1])
                    .min(cost[(i - 1) * stride + j]);
                cost[i * stride + j] = self.local.eval(a[i - 1], b[j - 1]) + best;
            }
        }
        Ok(AlignmentMatrix { n, m, cost })
    }

    pub fn alignment(&self, a: &[f64], b: &[f64]) -> Result<(f64, AlignmentPath)> {
        let matrix = self.matrix(a, b)?;
        Ok((matrix.distance(), matrix.path()))
    }

    /// Symmetric matrix of all pairwise distances.
    pub fn pairwise<S: AsRef<[f64]> + Sync>(&self, series: &[S]) -> Result<DistanceMatrix> {
        if let Some(i) = series.iter().position(|s| s.as_ref().is_empty()) {
            return Err(Error::EmptySeries { index: Some(i) });
        }
        let n = series.len();
        let pairs: Vec<(usize, usize)> = (0..n)
            .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
            .collect();
        let values: Vec<f64> = pairs
            .par_iter()
            .map(|&(i, j)| self.distance(series[i].as_ref(), series[j].as_ref()))
            .collect::<Result<_>>()?;
        let mut data = vec![0.0; n * n];
        for (&(i, j), d) in pairs.iter().zip(values) {
            data[i * n + j] = d;
            data[j * n + i] = d;
        }
        Ok(DistanceMatrix { n, data })
    }
}

/// Dense square matrix of distances.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceMatrix {
    n: usize,
    data: Vec<f64>,
}

impl DistanceMatrix {
    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }
}

/// Unconstrained DTW distance.
pub fn dtw_distance(a: &[f64], b: &[f64], local: LocalDistance) -> Result<f64> {
    Dtw::new(local).distance(a, b)
}

/// Unconstrained DTW distance and its warping path.
pub fn dtw_alignment(a: &[f64], b: &[f64], local: LocalDistance) -> Result<(f64, AlignmentPath)> {
    Dtw::new(local).alignment(a, b)
}

pub fn pairwise_distances<S: AsRef<[f64]> + Sync>(
    series: &[S],
    local: LocalDistance,
) -> Result<DistanceMatrix> {
    Dtw::new(local).pairwise(series)
}
