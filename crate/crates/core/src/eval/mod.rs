//! Recall@R evaluation, convergence traces and the codes-as-features
//! classification check.

mod config;
mod experiment;

pub use config::{ExperimentConfig, Method, Strategy, DataSource};
pub use experiment::{
    bench, convergence_trace, embedding_classification, run_experiment, run_on_split, train_model, BenchRow,
    ExperimentOutput, FeatureEncoder, Split,
};

use crate::dataset::NeighborList;
use crate::distance::RankedList;
use crate::error::{Error, Result};

/// Default evaluation radii, `1, 2, 4, ..., 1024`.
pub fn default_r_grid() -> Vec<usize> {
    (0..=10).map(|p| 1usize << p).collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct RecallCurve {
    pub r_grid: Vec<usize>,
    pub recall: Vec<f64>,
    pub method: String,
    pub bit_budget: usize,
}

/// Fraction of queries whose true nearest neighbor is among the first `R`
/// retrieved ids, for every `R` of the grid.
pub fn recall_at_r(
    retrieved: &[RankedList],
    ground_truth: &[NeighborList],
    r_grid: &[usize],
) -> Result<Vec<f64>> {
    if retrieved.len() != ground_truth.len() {
        return Err(Error::dims("ground truth lists", retrieved.len(), ground_truth.len()));
    }
    if retrieved.is_empty() {
        return Err(Error::param("no queries to evaluate"));
    }
    check_grid(r_grid)?;
    let mut hits = vec![0usize; r_grid.len()];
    for (list, truth) in retrieved.iter().zip(ground_truth) {
        let nn = *truth
            .ids
            .first()
            .ok_or_else(|| Error::Incompatible(format!("query {} has no ground truth", truth.query_id)))?;
        if let Some(rank) = list.ids.iter().position(|&id| id == nn) {
            for (h, &r) in hits.iter_mut().zip(r_grid) {
                if rank < r {
                    *h += 1;
                }
            }
        }
    }
    let q = retrieved.len() as f64;
    Ok(hits.into_iter().map(|h| h as f64 / q).collect())
}

fn check_grid(r_grid: &[usize]) -> Result<()> {
    if r_grid.is_empty() || r_grid[0] == 0 || r_grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::param("R grid must be nonempty, positive and strictly ascending"));
    }
    Ok(())
}

/// Trapezoidal area under recall over `log2 R`, divided by the `log2` span
/// of the grid. A single-point grid yields its recall value.
pub fn auc_recall(r_grid: &[usize], recall: &[f64]) -> Result<f64> {
    check_grid(r_grid)?;
    if recall.len() != r_grid.len() {
        return Err(Error::dims("recall curve", r_grid.len(), recall.len()));
    }
    if r_grid.len() == 1 {
        return Ok(recall[0]);
    }
    let x: Vec<f64> = r_grid.iter().map(|&r| (r as f64).log2()).collect();
    let area: f64 = x
        .windows(2)
        .zip(recall.windows(2))
        .map(|(xs, ys)| (xs[1] - xs[0]) * (ys[0] + ys[1]) / 2.0)
        .sum();
    Ok(area / (x[x.len() - 1] - x[0]))
}

impl RecallCurve {
    pub fn auc(&self) -> Result<f64> {
        auc_recall(&self.r_grid, &self.recall)
    }
}
