use nalgebra::{DMatrix, DVectorView};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dataset::{squared_distance, DataMatrix};
use crate::error::{Error, Result};

/// A trained codebook: column `c` of `centers` is cluster `c`.
#[derive(Clone, Debug, PartialEq)]
pub struct KmeansModel {
    pub centers: DMatrix<f64>,
    /// Sum of squared point-to-nearest-center distances after seeding and
    /// after every Lloyd iteration.
    pub objective_history: Vec<f64>,
}

impl KmeansModel {
    pub fn k(&self) -> usize {
        self.centers.ncols()
    }

    /// Index of the nearest center; ties go to the smaller index.
    pub fn nearest(&self, x: DVectorView<'_, f64>) -> (usize, f64) {
        nearest_center(x, &self.centers)
    }

    pub fn assign(&self, x: &DataMatrix) -> Result<Vec<usize>> {
        if x.dim() != self.centers.nrows() {
            return Err(Error::dims("kmeans assign", self.centers.nrows(), x.dim()));
        }
        Ok(assign_nearest(x.values(), &self.centers).0)
    }

    pub fn objective(&self) -> f64 {
        *self.objective_history.last().unwrap_or(&f64::NAN)
    }
}

/// Lloyd's algorithm from k-means++ seeding.
pub fn kmeans(x: &DataMatrix, k: usize, seed: u64, max_iters: usize) -> Result<KmeansModel> {
    kmeans_matrix(x.values(), k, seed, max_iters)
}

pub(crate) fn kmeans_matrix(
    data: &DMatrix<f64>,
    k: usize,
    seed: u64,
    max_iters: usize,
) -> Result<KmeansModel> {
    let n = data.ncols();
    if k == 0 || k > n {
        return Err(Error::param(format!("k must be in 1..={n}, got {k}")));
    }
    if max_iters == 0 {
        return Err(Error::param("max_iters must be at least 1"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centers = plus_plus(data, k, &mut rng);
    let (mut assignment, objective) = assign_nearest(data, &centers);
    let mut history = vec![objective];

    for _ in 0..max_iters {
        update_centers(data, &assignment, &mut centers, EmptyClusterPolicy::Farthest);
        let (next, objective) = assign_nearest(data, &centers);
        history.push(objective);
        if next == assignment {
            break;
        }
        assignment = next;
    }

    Ok(KmeansModel {
        centers,
        objective_history: history,
    })
}

fn plus_plus(data: &DMatrix<f64>, k: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    let n = data.ncols();
    let mut centers = DMatrix::zeros(data.nrows(), k);
    let first = rng.random_range(0..n);
    centers.set_column(0, &data.column(first));
    let mut best: Vec<f64> = (0..n)
        .map(|j| squared_distance(data.column(j), data.column(first)))
        .collect();

    for c in 1..k {
        let total: f64 = best.iter().sum();
        let pick = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut pick = n - 1;
            for (j, &w) in best.iter().enumerate() {
                if w > 0.0 && target < w {
                    pick = j;
                    break;
                }
                target -= w;
            }
            // float slop can run past the end; fall back to the last positive weight
            if best[pick] == 0.0 {
                pick = best.iter().rposition(|&w| w > 0.0).unwrap_or(pick);
            }
            pick
        } else {
            rng.random_range(0..n)
        };
        centers.set_column(c, &data.column(pick));
        for (j, b) in best.iter_mut().enumerate() {
            let d = squared_distance(data.column(j), data.column(pick));
            if d < *b {
                *b = d;
            }
        }
    }
    centers
}

pub(crate) fn nearest_center(x: DVectorView<'_, f64>, centers: &DMatrix<f64>) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (c, center) in centers.column_iter().enumerate() {
        let d: f64 = x.iter().zip(center.iter()).map(|(a, b)| (a - b) * (a - b)).sum();
        if d < best.1 {
            best = (c, d);
        }
    }
    best
}

/// Nearest-center assignment of every column and the resulting objective.
pub(crate) fn assign_nearest(data: &DMatrix<f64>, centers: &DMatrix<f64>) -> (Vec<usize>, f64) {
    let mut objective = 0.0;
    let assignment = data
        .column_iter()
        .map(|col| {
            let (c, d) = nearest_center(col, centers);
            objective += d;
            c
        })
        .collect();
    (assignment, objective)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) enum EmptyClusterPolicy {
    /// Leave an empty cluster's center where it was.
    Keep,
    /// Move it onto the point farthest from its own center.
    Farthest,
}

/// Replaces every non-empty center by the mean of its members.
pub(crate) fn update_centers(
    data: &DMatrix<f64>,
    assignment: &[usize],
    centers: &mut DMatrix<f64>,
    policy: EmptyClusterPolicy,
) {
    let k = centers.ncols();
    let mut sums = DMatrix::<f64>::zeros(data.nrows(), k);
    let mut counts = vec![0usize; k];
    for (j, &c) in assignment.iter().enumerate() {
        let mut col = sums.column_mut(c);
        col += data.column(j);
        counts[c] += 1;
    }
    for c in 0..k {
        if counts[c] > 0 {
            let mean = sums.column(c) / counts[c] as f64;
            centers.set_column(c, &mean);
        }
    }
    if policy == EmptyClusterPolicy::Keep || counts.iter().all(|&n| n > 0) {
        return;
    }

    let mut residual: Vec<f64> = assignment
        .iter()
        .enumerate()
        .map(|(j, &c)| squared_distance(data.column(j), centers.column(c)))
        .collect();
    for c in 0..k {
        if counts[c] > 0 {
            continue;
        }
        let mut far = 0;
        for (j, &r) in residual.iter().enumerate() {
            if r > residual[far] {
                far = j;
            }
        }
        centers.set_column(c, &data.column(far));
        residual[far] = -1.0;
    }
}
