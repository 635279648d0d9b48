//! Empirical 1-Wasserstein distances between equal-size datasets, solved
//! exactly as a linear assignment problem.

use rand::seq::index;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::dtw::dtw_distance;
use crate::error::{Error, Result};
use crate::points::{squared_distance, PointSet};
use crate::rng::{domain, RandomStream};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum GroundMetric {
    /// DTW between rows read as 1-D series.
    Dtw,
    /// Euclidean distance between rows read as vectors.
    Euclidean,
}

impl GroundMetric {
    pub fn distance(self, a: &[f64], b: &[f64]) -> Result<f64> {
        match self {
            GroundMetric::Dtw => dtw_distance(a, b),
            GroundMetric::Euclidean => {
                if a.len() != b.len() {
                    return Err(Error::invalid("euclidean metric needs equal dimensions"));
                }
                Ok(squared_distance(a, b).sqrt())
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CostMatrix {
    pub rows: usize,
    pub cols: usize,
    /// Row-major.
    pub costs: Vec<f64>,
    pub row_source: String,
    pub col_source: String,
}

impl CostMatrix {
    pub fn new(rows: usize, cols: usize, costs: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 || costs.len() != rows * cols {
            return Err(Error::invalid(format!(
                "cost matrix {rows}x{cols} needs {} entries, got {}",
                rows * cols,
                costs.len()
            )));
        }
        if costs.iter().any(|c| !(c.is_finite() && *c >= 0.0)) {
            return Err(Error::invalid("costs must be finite and nonnegative"));
        }
        Ok(Self {
            rows,
            cols,
            costs,
            row_source: String::new(),
            col_source: String::new(),
        })
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.costs[i * self.cols + j]
    }
}

/// `costs[i][j] = metric(a[i], b[j])`; rows are computed in parallel.
pub fn pairwise_cost(a: &PointSet, b: &PointSet, metric: GroundMetric) -> Result<CostMatrix> {
    a.require_nonempty("first set")?;
    b.require_nonempty("second set")?;
    let rows: Vec<Result<Vec<f64>>> = (0..a.len())
        .into_par_iter()
        .map(|i| b.rows().map(|bj| metric.distance(a.row(i), bj)).collect())
        .collect();
    let mut costs = Vec::with_capacity(a.len() * b.len());
    for row in rows {
        costs.extend(row?);
    }
    CostMatrix::new(a.len(), b.len(), costs)
}

/// Minimum-cost perfect matching of a square matrix: `result[i]` is the
/// column assigned to row `i`. Shortest augmenting paths with dual
/// potentials, O(n^3).
pub fn optimal_assignment(cost: &CostMatrix) -> Result<Vec<usize>> {
    if cost.rows != cost.cols {
        return Err(Error::invalid(format!(
            "assignment needs equal-size datasets, got {}x{}; subsample the larger one",
            cost.rows, cost.cols
        )));
    }
    let n = cost.rows;
    // 1-based with column 0 as the virtual source
    let mut u = vec![0.0f64; n + 1];
    let mut v = vec![0.0f64; n + 1];
    let mut owner = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    let mut minv = vec![0.0f64; n + 1];
    let mut used = vec![false; n + 1];

    for row in 1..=n {
        owner[0] = row;
        let mut col0 = 0usize;
        minv.iter_mut().for_each(|m| *m = f64::INFINITY);
        used.iter_mut().for_each(|u| *u = false);
        loop {
            used[col0] = true;
            let i0 = owner[col0];
            let mut delta = f64::INFINITY;
            let mut col1 = 0usize;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let reduced = cost.get(i0 - 1, j - 1) - u[i0] - v[j];
                if reduced < minv[j] {
                    minv[j] = reduced;
                    way[j] = col0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    col1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[owner[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            col0 = col1;
            if owner[col0] == 0 {
                break;
            }
        }
        loop {
            let col1 = way[col0];
            owner[col0] = owner[col1];
            col0 = col1;
            if col0 == 0 {
                break;
            }
        }
    }

    let mut assignment = vec![0usize; n];
    for j in 1..=n {
        assignment[owner[j] - 1] = j - 1;
    }
    Ok(assignment)
}

/// `(1/n) * min over permutations of sum_i cost[i][pi(i)]`.
pub fn wasserstein_assignment(cost: &CostMatrix) -> Result<f64> {
    let assignment = optimal_assignment(cost)?;
    let total: f64 = assignment
        .iter()
        .enumerate()
        .map(|(i, &j)| cost.get(i, j))
        .sum();
    Ok(total / cost.rows as f64)
}

/// Pairwise dataset distances and their max-normalized form.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DistanceReport {
    pub dataset_ids: Vec<String>,
    pub metric: GroundMetric,
    pub matrix: Vec<Vec<f64>>,
    pub normalized: Vec<Vec<f64>>,
    /// True when every off-diagonal entry is zero and normalization was
    /// skipped.
    pub degenerate: bool,
    pub original_sizes: Vec<usize>,
    /// Common size every dataset was subsampled to.
    pub sample_size: usize,
    pub subsample_seed: u64,
}

impl DistanceReport {
    pub fn max_normalized_off_diagonal(&self) -> f64 {
        let n = self.dataset_ids.len();
        let mut best = 0.0f64;
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    best = best.max(self.normalized[i][j]);
                }
            }
        }
        best
    }

    pub fn raw(&self, a: &str, b: &str) -> Option<f64> {
        let i = self.dataset_ids.iter().position(|d| d == a)?;
        let j = self.dataset_ids.iter().position(|d| d == b)?;
        Some(self.matrix[i][j])
    }
}

/// Computes the Wasserstein distance between every pair of datasets and
/// divides by the largest one.
///
/// Datasets larger than the common size (the smallest dataset, further capped
/// by `max_size`) are subsampled without replacement. The subsample depends
/// only on `(subsample_seed, dataset length)`, so two identical datasets get
/// identical subsamples.
pub fn normalized_distance_report(
    datasets: &[(String, PointSet)],
    metric: GroundMetric,
    subsample_seed: u64,
    max_size: Option<usize>,
) -> Result<DistanceReport> {
    if datasets.len() < 2 {
        return Err(Error::invalid("a distance report needs at least two datasets"));
    }
    for (name, set) in datasets {
        set.require_nonempty(name)?;
    }
    let original_sizes: Vec<usize> = datasets.iter().map(|(_, s)| s.len()).collect();
    let mut size = *original_sizes.iter().min().unwrap_or(&0);
    if let Some(cap) = max_size {
        if cap == 0 {
            return Err(Error::invalid("subsample size must be at least 1"));
        }
        size = size.min(cap);
    }

    let samples: Vec<PointSet> = datasets
        .iter()
        .map(|(_, set)| subsample(set, size, subsample_seed))
        .collect();

    let n = datasets.len();
    let pairs: Vec<(usize, usize)> = (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect();
    let mut matrix = vec![vec![0.0; n]; n];
    for &(i, j) in &pairs {
        let mut cost = pairwise_cost(&samples[i], &samples[j], metric)?;
        cost.row_source = datasets[i].0.clone();
        cost.col_source = datasets[j].0.clone();
        let w = wasserstein_assignment(&cost)?;
        matrix[i][j] = w;
        matrix[j][i] = w;
    }

    let max = pairs.iter().map(|&(i, j)| matrix[i][j]).fold(0.0, f64::max);
    let degenerate = !(max > 0.0);
    let normalized = if degenerate {
        matrix.clone()
    } else {
        matrix
            .iter()
            .map(|row| row.iter().map(|w| w / max).collect())
            .collect()
    };

    Ok(DistanceReport {
        dataset_ids: datasets.iter().map(|(name, _)| name.clone()).collect(),
        metric,
        matrix,
        normalized,
        degenerate,
        original_sizes,
        sample_size: size,
        subsample_seed,
    })
}

fn subsample(set: &PointSet, size: usize, seed: u64) -> PointSet {
    if set.len() == size {
        return set.clone();
    }
    let mut rng = RandomStream::new(seed, domain::SUBSAMPLE.wrapping_add(set.len() as u64));
    let mut picked = index::sample(&mut rng, set.len(), size).into_vec();
    picked.sort_unstable();
    set.select(&picked)
}
