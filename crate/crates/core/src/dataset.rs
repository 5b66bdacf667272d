//! Dataset containers, file formats, preprocessing, synthetic data and the
//! exact nearest-neighbor ground truth.

use std::cmp::Ordering;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use nalgebra::{DMatrix, DVector, DVectorView};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use crate::error::{Error, Result};

const RAW_MAGIC: &[u8; 4] = b"NARY";

/// A `D x N` matrix of finite reals; column `j` is point `j`.
#[derive(Clone, Debug, PartialEq)]
pub struct DataMatrix {
    values: DMatrix<f64>,
}

impl DataMatrix {
    pub fn new(values: DMatrix<f64>) -> Result<Self> {
        if values.nrows() == 0 || values.ncols() == 0 {
            return Err(Error::param(format!(
                "data matrix must be non-empty, got {}x{}",
                values.nrows(),
                values.ncols()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("data matrix"));
        }
        Ok(DataMatrix { values })
    }

    /// Builds a matrix from column-major values.
    pub fn from_column_slice(dim: usize, count: usize, values: &[f64]) -> Result<Self> {
        if values.len() != dim * count {
            return Err(Error::dims("column-major payload", dim * count, values.len()));
        }
        Self::new(DMatrix::from_column_slice(dim, count, values))
    }

    pub fn dim(&self) -> usize {
        self.values.nrows()
    }

    pub fn count(&self) -> usize {
        self.values.ncols()
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn into_inner(self) -> DMatrix<f64> {
        self.values
    }

    pub fn column(&self, j: usize) -> DVectorView<'_, f64> {
        self.values.column(j)
    }

    /// Copies columns `start..start + len`.
    pub fn columns(&self, start: usize, len: usize) -> Result<Self> {
        if len == 0 || start + len > self.count() {
            return Err(Error::param(format!(
                "column range {start}..{} out of bounds for {} points",
                start + len,
                self.count()
            )));
        }
        Ok(DataMatrix {
            values: self.values.columns(start, len).into_owned(),
        })
    }

    pub fn select(&self, ids: &[usize]) -> Result<Self> {
        if ids.iter().any(|&i| i >= self.count()) {
            return Err(Error::param("column id out of bounds"));
        }
        Self::new(self.values.select_columns(ids))
    }
}

/// On-disk matrix encodings.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MatrixFormat {
    /// `NARY` magic, `u32` D, `u32` N, then `D*N` little-endian f32 in
    /// column-major order.
    RawF32,
    /// One point per row, comma separated, no header.
    Csv,
}

impl MatrixFormat {
    /// Picks a format from the file extension; anything but `.csv` is raw.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("csv") => MatrixFormat::Csv,
            _ => MatrixFormat::RawF32,
        }
    }
}

pub fn load_matrix(path: impl AsRef<Path>, format: MatrixFormat) -> Result<DataMatrix> {
    let bytes = fs::read(path.as_ref())?;
    match format {
        MatrixFormat::RawF32 => decode_raw(&bytes),
        MatrixFormat::Csv => decode_csv(&bytes),
    }
}

pub fn save_matrix(m: &DataMatrix, path: impl AsRef<Path>, format: MatrixFormat) -> Result<()> {
    let bytes = match format {
        MatrixFormat::RawF32 => encode_raw(m)?,
        MatrixFormat::Csv => encode_csv(m),
    };
    let file = fs::File::create(path.as_ref())?;
    let mut w = BufWriter::new(file);
    w.write_all(&bytes)?;
    w.flush()?;
    Ok(())
}

pub fn encode_raw(m: &DataMatrix) -> Result<Vec<u8>> {
    let dim = u32::try_from(m.dim()).map_err(|_| Error::param("dimension exceeds u32"))?;
    let count = u32::try_from(m.count()).map_err(|_| Error::param("count exceeds u32"))?;
    let mut out = Vec::with_capacity(12 + 4 * m.values.len());
    out.extend_from_slice(RAW_MAGIC);
    out.extend_from_slice(&dim.to_le_bytes());
    out.extend_from_slice(&count.to_le_bytes());
    for &v in m.values.iter() {
        let v = v as f32;
        if !v.is_finite() {
            return Err(Error::NonFinite("raw-f32 payload (f32 overflow)"));
        }
        out.extend_from_slice(&v.to_le_bytes());
    }
    Ok(out)
}

pub fn decode_raw(bytes: &[u8]) -> Result<DataMatrix> {
    if bytes.len() < 12 || &bytes[..4] != RAW_MAGIC {
        return Err(Error::format("raw-f32 header", "missing NARY magic or truncated header"));
    }
    let dim = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
    let count = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    if dim == 0 || count == 0 {
        return Err(Error::format("raw-f32 header", format!("empty shape {dim}x{count}")));
    }
    let payload = &bytes[12..];
    let expected = dim
        .checked_mul(count)
        .and_then(|n| n.checked_mul(4))
        .ok_or_else(|| Error::format("raw-f32 header", "shape overflows"))?;
    if payload.len() != expected {
        return Err(Error::format(
            "raw-f32 payload",
            format!(
                "header declares {dim}x{count} ({expected} bytes), found {} bytes",
                payload.len()
            ),
        ));
    }
    let mut values = Vec::with_capacity(dim * count);
    for chunk in payload.chunks_exact(4) {
        let v = f32::from_le_bytes(chunk.try_into().unwrap());
        if !v.is_finite() {
            return Err(Error::NonFinite("raw-f32 payload"));
        }
        values.push(f64::from(v));
    }
    DataMatrix::from_column_slice(dim, count, &values)
}

fn encode_csv(m: &DataMatrix) -> Vec<u8> {
    let mut out = String::new();
    for col in m.values.column_iter() {
        let row: Vec<String> = col.iter().map(|v| format!("{v}")).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out.into_bytes()
}

fn decode_csv(bytes: &[u8]) -> Result<DataMatrix> {
    let text = std::str::from_utf8(bytes).map_err(|e| Error::format("csv", e.to_string()))?;
    let mut dim = None;
    let mut values = Vec::new();
    let mut count = 0;
    for (line_no, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let mut fields = 0;
        for field in line.split(',') {
            let v: f64 = field.trim().parse().map_err(|_| {
                Error::format("csv", format!("line {}: bad number {field:?}", line_no + 1))
            })?;
            if !v.is_finite() {
                return Err(Error::NonFinite("csv payload"));
            }
            values.push(v);
            fields += 1;
        }
        match dim {
            None => dim = Some(fields),
            Some(d) if d != fields => {
                return Err(Error::format(
                    "csv",
                    format!("line {}: expected {d} fields, found {fields}", line_no + 1),
                ))
            }
            _ => {}
        }
        count += 1;
    }
    let dim = dim.ok_or_else(|| Error::format("csv", "no rows"))?;
    DataMatrix::from_column_slice(dim, count, &values)
}

/// Draws an isotropic Gaussian mixture; returns the points, their cluster
/// labels and the `D x clusters` matrix of generator centers.
pub fn generate_labeled(
    seed: u64,
    dim: usize,
    count: usize,
    n_clusters: usize,
    spread: f64,
) -> Result<(DataMatrix, Vec<usize>, DMatrix<f64>)> {
    if dim == 0 || count == 0 {
        return Err(Error::param("dim and count must be positive"));
    }
    if n_clusters == 0 {
        return Err(Error::param("n_clusters must be at least 1"));
    }
    if !(spread.is_finite() && spread >= 0.0) {
        return Err(Error::param(format!("spread must be a nonnegative real, got {spread}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let centers = DMatrix::from_fn(dim, n_clusters, |_, _| rng.random_range(-1.0..=1.0));
    let noise = Normal::new(0.0, spread).map_err(|e| Error::param(e.to_string()))?;
    let mut labels = Vec::with_capacity(count);
    let mut values = DMatrix::zeros(dim, count);
    for j in 0..count {
        let c = rng.random_range(0..n_clusters);
        labels.push(c);
        for i in 0..dim {
            let eps = if spread > 0.0 { noise.sample(&mut rng) } else { 0.0 };
            values[(i, j)] = centers[(i, c)] + eps;
        }
    }
    Ok((DataMatrix::new(values)?, labels, centers))
}

pub fn generate_synthetic(
    seed: u64,
    dim: usize,
    count: usize,
    n_clusters: usize,
    spread: f64,
) -> Result<DataMatrix> {
    generate_labeled(seed, dim, count, n_clusters, spread).map(|(m, _, _)| m)
}

/// Mean-centering and optional projection onto the unit sphere.
#[derive(Clone, Debug, PartialEq)]
pub struct PreprocessModel {
    pub mean: DVector<f64>,
    pub normalize_to_sphere: bool,
}

pub fn fit_preprocess(x: &DataMatrix, normalize: bool) -> PreprocessModel {
    PreprocessModel {
        mean: x.values.column_mean(),
        normalize_to_sphere: normalize,
    }
}

pub fn apply_preprocess(model: &PreprocessModel, x: &DataMatrix) -> Result<DataMatrix> {
    if model.mean.len() != x.dim() {
        return Err(Error::dims("preprocess", model.mean.len(), x.dim()));
    }
    let mut out = x.values.clone();
    for mut col in out.column_iter_mut() {
        col -= &model.mean;
        if model.normalize_to_sphere {
            let norm = col.norm();
            // zero columns pass through untouched
            if norm > 0.0 {
                col /= norm;
            }
        }
    }
    DataMatrix::new(out)
}

impl PreprocessModel {
    pub fn apply(&self, x: &DataMatrix) -> Result<DataMatrix> {
        apply_preprocess(self, x)
    }
}

/// Exact neighbors of one query, nearest first.
#[derive(Clone, Debug, PartialEq)]
pub struct NeighborList {
    pub query_id: usize,
    pub ids: Vec<usize>,
    /// Euclidean (not squared) distances, ascending.
    pub distances: Vec<f64>,
}

pub(crate) fn squared_distance(a: DVectorView<'_, f64>, b: DVectorView<'_, f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Keeps the `k` smallest `(distance, id)` pairs in ascending order.
pub(crate) fn top_k_ascending(mut scored: Vec<(f64, usize)>, k: usize) -> Vec<(f64, usize)> {
    let cmp = |a: &(f64, usize), b: &(f64, usize)| -> Ordering {
        a.0.total_cmp(&b.0).then(a.1.cmp(&b.1))
    };
    if k < scored.len() {
        scored.select_nth_unstable_by(k, cmp);
        scored.truncate(k);
    }
    scored.sort_unstable_by(cmp);
    scored
}

/// Exact Euclidean k-NN of every query; ties go to the smaller base id.
pub fn brute_force_knn(base: &DataMatrix, queries: &DataMatrix, k: usize) -> Result<Vec<NeighborList>> {
    if base.dim() != queries.dim() {
        return Err(Error::dims("brute_force_knn", base.dim(), queries.dim()));
    }
    if k == 0 || k > base.count() {
        return Err(Error::param(format!(
            "k must be in 1..={}, got {k}",
            base.count()
        )));
    }
    let lists = (0..queries.count())
        .into_par_iter()
        .map(|q| {
            let query = queries.column(q);
            let scored: Vec<(f64, usize)> = (0..base.count())
                .map(|j| (squared_distance(query, base.column(j)), j))
                .collect();
            let top = top_k_ascending(scored, k);
            NeighborList {
                query_id: q,
                ids: top.iter().map(|&(_, id)| id).collect(),
                distances: top.iter().map(|&(d, _)| d.sqrt()).collect(),
            }
        })
        .collect();
    Ok(lists)
}
