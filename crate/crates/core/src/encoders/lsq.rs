//! Linear Subspace Quantization.
//!
//! A point `x` is coded as `q_n(W^T x)`, where `q_n` is the uniform
//! quantizer, and reconstructed as `V^T q_n(W^T x)`. Training minimizes
//!
//! ```text
//! ||X - V^T q_n(W^T X)||_F^2 + lambda ||V||_F^2
//! ```
//!
//! by alternating a ridge-regression update of `V` with `W` fixed and the
//! pseudoinverse update `W = pinv(V)` with `V` fixed.

use nalgebra::DMatrix;

use crate::dataset::DataMatrix;
use crate::encoders::codes::{BinaryCodeSet, NaryCodeSet};
use crate::error::{Error, Result};
use crate::linalg::{principal_directions, pseudo_inverse};
use crate::quantcore::{squared_frobenius_diff, UniformQuantizer};

#[derive(Clone, Debug, PartialEq)]
pub struct LsqParams {
    /// Code length `m`.
    pub code_len: usize,
    /// Quantizer levels `n`.
    pub arity: usize,
    pub lambda: f64,
    pub max_iters: usize,
    /// Relative objective decrease per iteration below which training stops.
    pub tol: f64,
}

impl LsqParams {
    pub fn new(code_len: usize, arity: usize) -> Self {
        LsqParams {
            code_len,
            arity,
            lambda: 1.0,
            max_iters: 100,
            tol: 1e-6,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LsqModel {
    /// `D x m` mapping, codes are `q_n(W^T x)`.
    pub mapping: DMatrix<f64>,
    /// `m x D` reconstruction, points are rebuilt as `V^T y`.
    pub reconstruction: DMatrix<f64>,
    pub quantizer: UniformQuantizer,
    pub lambda: f64,
    /// Objective after every accepted half-step, starting with the first
    /// `V` update.
    pub objective_history: Vec<f64>,
    /// Set when `H H^T + lambda I` was singular and `V` came from a
    /// pseudoinverse solve.
    pub used_pseudoinverse: bool,
    /// Number of pseudoinverse `W` updates that would have raised the
    /// objective and were rejected. Training stops at the first one.
    pub rejected_mapping_steps: usize,
}

/// The training objective for given `W`, `V`.
pub fn lsq_objective(
    x: &DMatrix<f64>,
    mapping: &DMatrix<f64>,
    reconstruction: &DMatrix<f64>,
    quantizer: &UniformQuantizer,
    lambda: f64,
) -> f64 {
    let h = quantizer.quantize_values(&(mapping.transpose() * x));
    let recon = reconstruction.transpose() * h;
    let fit = squared_frobenius_diff(x, &recon).expect("shapes agree by construction");
    fit + lambda * reconstruction.norm_squared()
}

/// Quantile of `|W^T x|` mapped to 1 in every column of the initial `W`.
const INIT_PERCENTILE: f64 = 0.95;

fn initial_mapping(x: &DMatrix<f64>, m: usize) -> Result<DMatrix<f64>> {
    let mut w = principal_directions(x, m)?;
    let proj = w.transpose() * x;
    for j in 0..m {
        let mut mags: Vec<f64> = proj.row(j).iter().map(|v| v.abs()).collect();
        let rank = ((INIT_PERCENTILE * mags.len() as f64).ceil() as usize).clamp(1, mags.len()) - 1;
        mags.select_nth_unstable_by(rank, f64::total_cmp);
        if mags[rank] > 0.0 {
            let mut col = w.column_mut(j);
            col /= mags[rank];
        }
    }
    Ok(w)
}

/// `V = (H H^T + lambda I)^{-1} H X^T`; the flag reports a pseudoinverse
/// fallback for a singular system.
fn ridge_update(h: &DMatrix<f64>, x: &DMatrix<f64>, lambda: f64) -> Result<(DMatrix<f64>, bool)> {
    let m = h.nrows();
    let gram = h * h.transpose() + DMatrix::<f64>::identity(m, m) * lambda;
    let rhs = h * x.transpose();
    if let Some(chol) = gram.clone().cholesky() {
        let v = chol.solve(&rhs);
        if v.iter().all(|e| e.is_finite()) {
            return Ok((v, false));
        }
    }
    let v = pseudo_inverse(&gram)? * rhs;
    if v.iter().any(|e| !e.is_finite()) {
        return Err(Error::Numeric("ridge update produced non-finite values".into()));
    }
    Ok((v, true))
}

pub fn train_lsq(x: &DataMatrix, params: &LsqParams) -> Result<LsqModel> {
    let d = x.dim();
    let m = params.code_len;
    if m == 0 || m > d {
        return Err(Error::param(format!("code length must be in 1..={d}, got {m}")));
    }
    if !(params.lambda.is_finite() && params.lambda >= 0.0) {
        return Err(Error::param(format!("lambda must be >= 0, got {}", params.lambda)));
    }
    if params.max_iters == 0 {
        return Err(Error::param("max_iters must be at least 1"));
    }
    let quantizer = UniformQuantizer::new(params.arity)?;
    let data = x.values();
    let lambda = params.lambda;

    let mut mapping = initial_mapping(data, m)?;
    let h = quantizer.quantize_values(&(mapping.transpose() * data));
    let (mut reconstruction, mut used_pinv) = ridge_update(&h, data, lambda)?;
    let mut objective = lsq_objective(data, &mapping, &reconstruction, &quantizer, lambda);
    let mut history = vec![objective];
    let mut rejected = 0;

    for _ in 1..params.max_iters {
        let start = objective;

        let candidate = pseudo_inverse(&reconstruction)?;
        let obj_w = lsq_objective(data, &candidate, &reconstruction, &quantizer, lambda);
        if !(obj_w <= objective) {
            rejected += 1;
            break;
        }
        mapping = candidate;
        objective = obj_w;
        history.push(objective);

        let h = quantizer.quantize_values(&(mapping.transpose() * data));
        let (v, fallback) = ridge_update(&h, data, lambda)?;
        used_pinv |= fallback;
        let obj_v = lsq_objective(data, &mapping, &v, &quantizer, lambda);
        // the ridge step is exact, so a rise is float noise; keep the old V
        if obj_v <= objective {
            reconstruction = v;
            objective = obj_v;
        }
        history.push(objective);

        let decrease = start - objective;
        if start <= 0.0 || decrease <= params.tol * start {
            break;
        }
    }

    Ok(LsqModel {
        mapping,
        reconstruction,
        quantizer,
        lambda,
        objective_history: history,
        used_pseudoinverse: used_pinv,
        rejected_mapping_steps: rejected,
    })
}

/// Binary LSQ: two quantizer levels, codes packed as bits.
pub fn train_lsq_binary(x: &DataMatrix, m_bits: usize, lambda: f64, max_iters: usize, tol: f64) -> Result<LsqModel> {
    train_lsq(
        x,
        &LsqParams {
            code_len: m_bits,
            arity: 2,
            lambda,
            max_iters,
            tol,
        },
    )
}

impl LsqModel {
    pub fn dim(&self) -> usize {
        self.mapping.nrows()
    }

    pub fn code_len(&self) -> usize {
        self.mapping.ncols()
    }

    pub fn arity(&self) -> usize {
        self.quantizer.arity()
    }

    pub fn objective(&self) -> f64 {
        *self.objective_history.last().unwrap_or(&f64::NAN)
    }

    /// Unquantized projection `W^T X` (`m x N`).
    pub fn project(&self, x: &DataMatrix) -> Result<DMatrix<f64>> {
        if x.dim() != self.dim() {
            return Err(Error::dims("lsq project", self.dim(), x.dim()));
        }
        Ok(self.mapping.transpose() * x.values())
    }

    pub fn encode(&self, x: &DataMatrix) -> Result<NaryCodeSet> {
        let proj = self.project(x)?;
        let m = self.code_len();
        let mut codes = Vec::with_capacity(proj.len());
        for col in proj.column_iter() {
            codes.extend(col.iter().map(|&v| self.quantizer.index_of(v)));
        }
        NaryCodeSet::new(m, self.arity(), codes)
    }

    /// Bit `i` is set iff `(W^T x)_i >= 0`. Requires a 2-level model.
    pub fn encode_binary(&self, x: &DataMatrix) -> Result<BinaryCodeSet> {
        if self.arity() != 2 {
            return Err(Error::Incompatible(format!(
                "binary encoding needs arity 2, model has {}",
                self.arity()
            )));
        }
        self.encode(x)?.to_binary()
    }

    /// Level values `theta_n(code)` as an `m x N` matrix.
    pub fn level_values(&self, codes: &NaryCodeSet) -> Result<DMatrix<f64>> {
        if codes.m() != self.code_len() || codes.arity() != self.arity() {
            return Err(Error::Incompatible(format!(
                "codes are {}x{}-ary, model expects {}x{}-ary",
                codes.m(),
                codes.arity(),
                self.code_len(),
                self.arity()
            )));
        }
        let mut values = DMatrix::zeros(codes.m(), codes.count());
        for (j, code) in codes.iter().enumerate() {
            for (i, &c) in code.iter().enumerate() {
                values[(i, j)] = self.quantizer.level(c);
            }
        }
        Ok(values)
    }

    pub fn reconstruct(&self, codes: &NaryCodeSet) -> Result<DataMatrix> {
        let values = self.level_values(codes)?;
        DataMatrix::new(self.reconstruction.transpose() * values)
    }

    pub fn reconstruct_binary(&self, codes: &BinaryCodeSet) -> Result<DataMatrix> {
        let nary = codes.to_nary_chunks(1)?;
        self.reconstruct(&nary)
    }

    /// Same `W` and `V` with a different quantizer.
    pub fn with_arity(&self, arity: usize) -> Result<LsqModel> {
        Ok(LsqModel {
            quantizer: UniformQuantizer::new(arity)?,
            ..self.clone()
        })
    }
}
