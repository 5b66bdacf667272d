//! Subspace clustering coders: product quantization and Cartesian k-means.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::dataset::DataMatrix;
use crate::encoders::codes::NaryCodeSet;
use crate::error::{Error, Result};
use crate::linalg::{principal_directions, procrustes, random_orthogonal};
use crate::quantcore::{
    assign_nearest, kmeans_matrix, squared_frobenius_diff, update_centers, EmptyClusterPolicy,
};

/// Lloyd iterations used for every per-subspace k-means run.
pub const SUBSPACE_KMEANS_ITERS: usize = 25;

/// Per-subspace codebooks, optionally behind a global rotation.
///
/// A point `x` is rotated to `z = R^T x` (or left as is without a rotation),
/// split into contiguous blocks of `subspace_dims`, and each block is
/// assigned to its nearest center.
#[derive(Clone, Debug, PartialEq)]
pub struct SubspaceCodebooks {
    pub subspace_dims: Vec<usize>,
    pub arity: usize,
    /// One `d_i x n` matrix per subspace.
    pub codebooks: Vec<DMatrix<f64>>,
    pub rotation: Option<DMatrix<f64>>,
    /// 1-D embedding of each subspace's centers, see [`refine_ck_indices`].
    pub index_values: Option<Vec<Vec<f64>>>,
    /// Reconstruction error after each training sub-step.
    pub objective_history: Vec<f64>,
}

/// Splits `dim` into `m` contiguous blocks, the first `dim % m` one longer.
pub fn split_dims(dim: usize, m: usize) -> Result<Vec<usize>> {
    if m == 0 || m > dim {
        return Err(Error::param(format!("subspace count must be in 1..={dim}, got {m}")));
    }
    let base = dim / m;
    let extra = dim % m;
    Ok((0..m).map(|i| base + usize::from(i < extra)).collect())
}

fn offsets(dims: &[usize]) -> Vec<usize> {
    let mut acc = 0;
    dims.iter()
        .map(|&d| {
            let o = acc;
            acc += d;
            o
        })
        .collect()
}

pub(crate) fn block_seed(seed: u64, block: usize) -> u64 {
    seed.wrapping_add((block as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

fn check_params(x: &DataMatrix, m: usize, n: usize) -> Result<Vec<usize>> {
    if n == 0 || n > x.count() {
        return Err(Error::param(format!(
            "clusters per subspace must be in 1..={}, got {n}",
            x.count()
        )));
    }
    if n > u32::MAX as usize {
        return Err(Error::param("too many clusters"));
    }
    split_dims(x.dim(), m)
}

fn train_blocks(z: &DMatrix<f64>, dims: &[usize], n: usize, seed: u64) -> Result<Vec<DMatrix<f64>>> {
    let offs = offsets(dims);
    dims.iter()
        .zip(&offs)
        .enumerate()
        .map(|(i, (&d, &o))| {
            let block = z.rows(o, d).into_owned();
            kmeans_matrix(&block, n, block_seed(seed, i), SUBSPACE_KMEANS_ITERS).map(|km| km.centers)
        })
        .collect()
}

/// Product quantization: `m` axis-aligned blocks, `n` centers each.
pub fn train_pq(x: &DataMatrix, m: usize, n: usize, seed: u64) -> Result<SubspaceCodebooks> {
    let dims = check_params(x, m, n)?;
    let codebooks = train_blocks(x.values(), &dims, n, seed)?;
    let mut cb = SubspaceCodebooks {
        subspace_dims: dims,
        arity: n,
        codebooks,
        rotation: None,
        index_values: None,
        objective_history: Vec::new(),
    };
    let err = cb.training_error(x.values());
    cb.objective_history.push(err);
    Ok(cb)
}

/// Cartesian k-means: product quantization in a learned rotated basis.
///
/// Each round updates assignments, then centers, then the rotation (an
/// orthogonal Procrustes fit of `X` to the current reconstruction); every
/// sub-step can only lower the reconstruction error.
pub fn train_ckmeans(x: &DataMatrix, m: usize, n: usize, iters: usize, seed: u64) -> Result<SubspaceCodebooks> {
    let dims = check_params(x, m, n)?;
    let data = x.values();
    let d = x.dim();
    let offs = offsets(&dims);

    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xC4_EA45_0000_0002);
    let random = random_orthogonal(d, &mut rng);
    let rotated = random.transpose() * data;
    let random_books = train_blocks(&rotated, &dims, n, seed)?;
    let random_err = reconstruction_error(data, &rotated, &random, &dims, &random_books);

    // the identity start is plain product quantization; keep whichever is better
    let id_books = train_blocks(data, &dims, n, seed)?;
    let identity = DMatrix::<f64>::identity(d, d);
    let id_err = reconstruction_error(data, data, &identity, &dims, &id_books);
    let (mut rotation, mut codebooks, start_err) = if random_err <= id_err {
        (random, random_books, random_err)
    } else {
        (identity, id_books, id_err)
    };
    let mut history = vec![start_err];

    for _ in 0..iters {
        let round_start = *history.last().unwrap();
        let z = rotation.transpose() * data;

        let assignments: Vec<Vec<usize>> = dims
            .iter()
            .zip(&offs)
            .zip(&codebooks)
            .map(|((&di, &o), book)| assign_nearest(&z.rows(o, di).into_owned(), book).0)
            .collect();
        let recon = assemble(&dims, &offs, &codebooks, &assignments, x.count());
        history.push(squared_frobenius_diff(data, &(&rotation * &recon))?);

        for (i, (&di, &o)) in dims.iter().zip(&offs).enumerate() {
            let block = z.rows(o, di).into_owned();
            update_centers(&block, &assignments[i], &mut codebooks[i], EmptyClusterPolicy::Keep);
        }
        let recon = assemble(&dims, &offs, &codebooks, &assignments, x.count());
        history.push(squared_frobenius_diff(data, &(&rotation * &recon))?);

        rotation = procrustes(&(data * recon.transpose()))?;
        let err = squared_frobenius_diff(data, &(&rotation * &recon))?;
        history.push(err);

        if round_start <= 0.0 || round_start - err <= 1e-12 * round_start {
            break;
        }
    }

    let mut cb = SubspaceCodebooks {
        subspace_dims: dims,
        arity: n,
        codebooks,
        rotation: Some(rotation),
        index_values: None,
        objective_history: history,
    };
    // final nearest-center error under the last rotation
    let err = cb.training_error(data);
    if err <= *cb.objective_history.last().unwrap() {
        cb.objective_history.push(err);
    }
    Ok(cb)
}

fn assemble(
    dims: &[usize],
    offs: &[usize],
    books: &[DMatrix<f64>],
    assignments: &[Vec<usize>],
    count: usize,
) -> DMatrix<f64> {
    let mut recon = DMatrix::zeros(dims.iter().sum(), count);
    for (i, (&di, &o)) in dims.iter().zip(offs).enumerate() {
        for (j, &c) in assignments[i].iter().enumerate() {
            recon.view_mut((o, j), (di, 1)).copy_from(&books[i].column(c));
        }
    }
    recon
}

fn reconstruction_error(
    data: &DMatrix<f64>,
    rotated: &DMatrix<f64>,
    rotation: &DMatrix<f64>,
    dims: &[usize],
    books: &[DMatrix<f64>],
) -> f64 {
    let recon = nearest_reconstruction(rotated, dims, books);
    squared_frobenius_diff(data, &(rotation * recon)).unwrap()
}

fn nearest_reconstruction(z: &DMatrix<f64>, dims: &[usize], books: &[DMatrix<f64>]) -> DMatrix<f64> {
    let offs = offsets(dims);
    let assignments: Vec<Vec<usize>> = dims
        .iter()
        .zip(&offs)
        .zip(books)
        .map(|((&di, &o), book)| assign_nearest(&z.rows(o, di).into_owned(), book).0)
        .collect();
    assemble(dims, &offs, books, &assignments, z.ncols())
}

impl SubspaceCodebooks {
    pub fn m(&self) -> usize {
        self.subspace_dims.len()
    }

    pub fn dim(&self) -> usize {
        self.subspace_dims.iter().sum()
    }

    pub fn offsets(&self) -> Vec<usize> {
        offsets(&self.subspace_dims)
    }

    fn training_error(&self, data: &DMatrix<f64>) -> f64 {
        let identity;
        let rotation = match &self.rotation {
            Some(r) => r,
            None => {
                identity = DMatrix::<f64>::identity(self.dim(), self.dim());
                &identity
            }
        };
        let z = rotation.transpose() * data;
        reconstruction_error(data, &z, rotation, &self.subspace_dims, &self.codebooks)
    }

    /// The rotated representation `R^T X` that codebooks live in.
    pub fn rotate(&self, x: &DataMatrix) -> Result<DMatrix<f64>> {
        if x.dim() != self.dim() {
            return Err(Error::dims("subspace codebooks", self.dim(), x.dim()));
        }
        Ok(match &self.rotation {
            Some(r) => r.transpose() * x.values(),
            None => x.values().clone(),
        })
    }

    pub fn encode(&self, x: &DataMatrix) -> Result<NaryCodeSet> {
        let z = self.rotate(x)?;
        let m = self.m();
        let mut codes = vec![0u32; m * x.count()];
        for (i, (&di, o)) in self.subspace_dims.iter().zip(self.offsets()).enumerate() {
            let block = z.rows(o, di).into_owned();
            let (assignment, _) = assign_nearest(&block, &self.codebooks[i]);
            for (j, c) in assignment.into_iter().enumerate() {
                codes[j * m + i] = c as u32 + 1;
            }
        }
        NaryCodeSet::new(m, self.arity, codes)
    }

    fn check_codes(&self, codes: &NaryCodeSet) -> Result<()> {
        if codes.m() != self.m() || codes.arity() != self.arity {
            return Err(Error::Incompatible(format!(
                "codes are {}x{}-ary, codebooks expect {}x{}-ary",
                codes.m(),
                codes.arity(),
                self.m(),
                self.arity
            )));
        }
        Ok(())
    }

    /// Concatenated centers in the rotated space, `D x N`.
    pub fn rotated_reconstruction(&self, codes: &NaryCodeSet) -> Result<DMatrix<f64>> {
        self.check_codes(codes)?;
        let offs = self.offsets();
        let mut out = DMatrix::zeros(self.dim(), codes.count());
        for (j, code) in codes.iter().enumerate() {
            for (i, &c) in code.iter().enumerate() {
                out.view_mut((offs[i], j), (self.subspace_dims[i], 1))
                    .copy_from(&self.codebooks[i].column(c as usize - 1));
            }
        }
        Ok(out)
    }

    pub fn reconstruct(&self, codes: &NaryCodeSet) -> Result<DataMatrix> {
        let z = self.rotated_reconstruction(codes)?;
        DataMatrix::new(match &self.rotation {
            Some(r) => r * z,
            None => z,
        })
    }

    /// Squared distances from each rotated query block to every center:
    /// entry `[i][c]` for subspace `i`, 0-based center `c`.
    pub fn center_distances(&self, query: &DVector<f64>) -> Result<Vec<Vec<f64>>> {
        if query.len() != self.dim() {
            return Err(Error::dims("subspace codebooks", self.dim(), query.len()));
        }
        let z = match &self.rotation {
            Some(r) => r.transpose() * query,
            None => query.clone(),
        };
        Ok(self
            .subspace_dims
            .iter()
            .zip(self.offsets())
            .zip(&self.codebooks)
            .map(|((&di, o), book)| {
                let u = z.rows(o, di);
                book.column_iter()
                    .map(|c| (c - u).norm_squared())
                    .collect()
            })
            .collect())
    }
}

/// Result of [`refine_ck_indices`].
#[derive(Clone, Debug, PartialEq)]
pub struct RefinedCodebooks {
    pub codebooks: SubspaceCodebooks,
    /// Subspaces whose centers all coincide; their values are all zero.
    pub degenerate_subspaces: Vec<usize>,
}

/// Embeds each subspace's centers on a line: project onto the first
/// principal direction of the centers and rescale affinely to `[-1, 1]`.
pub fn refine_ck_indices(cb: &SubspaceCodebooks) -> Result<RefinedCodebooks> {
    let mut values = Vec::with_capacity(cb.m());
    let mut degenerate = Vec::new();
    for (i, book) in cb.codebooks.iter().enumerate() {
        let n = book.ncols();
        let proj: Vec<f64> = if n < 2 {
            vec![0.0; n]
        } else {
            let dir = principal_directions(book, 1)?;
            let mean = book.column_mean();
            book.column_iter()
                .map(|c| (c - &mean).dot(&dir.column(0)))
                .collect()
        };
        let lo = proj.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = proj.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let scale = book.amax().max(1.0);
        if n < 2 || !(hi - lo > 1e-12 * scale) {
            degenerate.push(i);
            values.push(vec![0.0; n]);
        } else {
            values.push(proj.iter().map(|p| -1.0 + 2.0 * (p - lo) / (hi - lo)).collect());
        }
    }
    let mut codebooks = cb.clone();
    codebooks.index_values = Some(values);
    Ok(RefinedCodebooks {
        codebooks,
        degenerate_subspaces: degenerate,
    })
}
