//! Binary and n-ary vector coding for approximate nearest-neighbor retrieval.
//!
//! The crate provides Linear Subspace Quantization (LSQ) together with the
//! usual baselines (ITQ, product quantization, Cartesian k-means), two ways of
//! searching the resulting codes (exhaustive distance estimation and
//! multi-index hashing), and a Recall@R evaluation harness.
//!
//! Data matrices are column-major: column `j` of a `D x N` matrix is point `j`.

pub mod dataset;
pub mod distance;
pub mod encoders;
pub mod error;
pub mod eval;
pub mod io;
pub mod linalg;
pub mod mih;
pub mod model;
pub mod quantcore;

pub use dataset::{DataMatrix, MatrixFormat, NeighborList, PreprocessModel};
pub use encoders::{BinaryCode, BinaryCodeSet, ItqModel, LsqModel, LsqParams, NaryCodeSet, SubspaceCodebooks};
pub use error::{Error, Result};
pub use mih::MultiIndexHash;
pub use model::{Codes, Model};
pub use quantcore::{KmeansModel, UniformQuantizer};
