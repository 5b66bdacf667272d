//! Scalar uniform quantizer, k-means and the reconstruction-error metric.

mod kmeans;
mod quantizer;

pub use kmeans::{kmeans, KmeansModel};
pub(crate) use kmeans::{assign_nearest, kmeans_matrix, update_centers, EmptyClusterPolicy};
pub use quantizer::UniformQuantizer;

use nalgebra::DMatrix;

use crate::dataset::DataMatrix;
use crate::error::{Error, Result};

/// Squared Frobenius norm of `x - reconstruction`.
pub fn quantization_error(x: &DataMatrix, reconstruction: &DataMatrix) -> Result<f64> {
    squared_frobenius_diff(x.values(), reconstruction.values())
}

pub(crate) fn squared_frobenius_diff(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<f64> {
    if a.shape() != b.shape() {
        return Err(Error::Incompatible(format!(
            "shape {:?} vs {:?}",
            a.shape(),
            b.shape()
        )));
    }
    Ok(a.iter().zip(b.iter()).map(|(x, y)| (x - y) * (x - y)).sum())
}
