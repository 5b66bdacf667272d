//! Iterative quantization: PCA followed by a learned rotation that aligns the
//! projected data with the corners of the binary hypercube.

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::dataset::DataMatrix;
use crate::encoders::codes::BinaryCodeSet;
use crate::error::{Error, Result};
use crate::linalg::{principal_directions, procrustes, random_orthogonal};
use crate::quantcore::squared_frobenius_diff;

#[derive(Clone, Debug, PartialEq)]
pub struct ItqModel {
    /// `D x m` top principal directions.
    pub projection: DMatrix<f64>,
    /// `m x m` orthogonal rotation.
    pub rotation: DMatrix<f64>,
    /// Least-squares scale of the `+-1` codes used for reconstruction in the
    /// input space.
    pub scale: f64,
    /// `||B - R^T P^T X||_F^2` with `B = sign(R^T P^T X)`, before the
    /// first rotation update and after each one.
    pub loss_history: Vec<f64>,
}

fn signs(v: &DMatrix<f64>) -> DMatrix<f64> {
    v.map(|e| if e >= 0.0 { 1.0 } else { -1.0 })
}

pub fn train_itq(x: &DataMatrix, m_bits: usize, iters: usize, seed: u64) -> Result<ItqModel> {
    let d = x.dim();
    if m_bits == 0 || m_bits > d {
        return Err(Error::param(format!("ITQ needs 1 <= bits <= {d}, got {m_bits}")));
    }
    let data = x.values();
    let projection = principal_directions(data, m_bits)?;
    let v = projection.transpose() * data;

    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x1709_0000_0000_0001);
    let mut rotation = random_orthogonal(m_bits, &mut rng);
    let mut b = signs(&(rotation.transpose() * &v));
    let mut history = vec![squared_frobenius_diff(&b, &(rotation.transpose() * &v))?];

    for _ in 0..iters {
        rotation = procrustes(&(&v * b.transpose()))?;
        let rotated = rotation.transpose() * &v;
        b = signs(&rotated);
        history.push(squared_frobenius_diff(&b, &rotated)?);
    }

    // best scalar alpha for X ~ alpha * P R B
    let basis = &projection * &rotation * &b;
    let denom = basis.norm_squared();
    let scale = if denom > 0.0 { basis.dot(data) / denom } else { 0.0 };

    Ok(ItqModel {
        projection,
        rotation,
        scale,
        loss_history: history,
    })
}

impl ItqModel {
    pub fn dim(&self) -> usize {
        self.projection.nrows()
    }

    pub fn bits(&self) -> usize {
        self.rotation.ncols()
    }

    pub fn project(&self, x: &DataMatrix) -> Result<DMatrix<f64>> {
        if x.dim() != self.dim() {
            return Err(Error::dims("itq project", self.dim(), x.dim()));
        }
        Ok(self.rotation.transpose() * self.projection.transpose() * x.values())
    }

    /// Bit `j` of a point is set iff its `j`-th rotated projection is `>= 0`.
    pub fn encode(&self, x: &DataMatrix) -> Result<BinaryCodeSet> {
        let proj = self.project(x)?;
        let mut codes = BinaryCodeSet::zeros(self.bits(), x.count());
        for (j, col) in proj.column_iter().enumerate() {
            for (i, &v) in col.iter().enumerate() {
                if v >= 0.0 {
                    codes.set_bit(j, i);
                }
            }
        }
        Ok(codes)
    }

    pub fn reconstruct(&self, codes: &BinaryCodeSet) -> Result<DataMatrix> {
        if codes.bits() != self.bits() {
            return Err(Error::dims("itq reconstruct", self.bits(), codes.bits()));
        }
        let b = DMatrix::from_fn(self.bits(), codes.count(), |i, j| {
            if codes.bit(j, i) { 1.0 } else { -1.0 }
        });
        DataMatrix::new(&self.projection * &self.rotation * b * self.scale)
    }

    pub fn loss(&self) -> f64 {
        *self.loss_history.last().unwrap_or(&f64::NAN)
    }
}
