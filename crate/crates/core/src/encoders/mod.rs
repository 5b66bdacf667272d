//! Trainers and codecs: LSQ, ITQ, product quantization and Cartesian k-means.

mod codes;
mod embedding;
mod itq;
mod lsq;
mod subspace;

pub use codes::{BinaryCode, BinaryCodeSet, NaryCodeSet};
pub(crate) use codes::{chunk_key, tail_mask};
pub use embedding::{codes_as_features, FeatureSource};
pub use itq::{train_itq, ItqModel};
pub use lsq::{lsq_objective, train_lsq, train_lsq_binary, LsqModel, LsqParams};
pub use subspace::{
    refine_ck_indices, split_dims, train_ckmeans, train_pq, RefinedCodebooks, SubspaceCodebooks,
    SUBSPACE_KMEANS_ITERS,
};
