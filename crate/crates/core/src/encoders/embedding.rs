//! Codes as real-valued feature vectors.

use nalgebra::DMatrix;

use crate::dataset::DataMatrix;
use crate::encoders::codes::NaryCodeSet;
use crate::encoders::subspace::SubspaceCodebooks;
use crate::error::{Error, Result};
use crate::quantcore::UniformQuantizer;

#[derive(Clone, Copy, Debug)]
pub enum FeatureSource<'a> {
    /// Each entry becomes its quantizer level value.
    LsqLevels(&'a UniformQuantizer),
    /// Each entry becomes the refined 1-D value of its cluster center.
    CkRefined(&'a SubspaceCodebooks),
    /// The raw cluster index, spread evenly over `[-1, 1]`. Baseline only:
    /// index order carries no geometric meaning.
    RawIndex,
}

/// Maps an `m x N` code set to an `m x N` real matrix.
pub fn codes_as_features(codes: &NaryCodeSet, source: FeatureSource<'_>) -> Result<DataMatrix> {
    let (m, n) = (codes.m(), codes.arity());
    let mut out = DMatrix::zeros(m, codes.count());
    match source {
        FeatureSource::LsqLevels(q) => {
            if q.arity() != n {
                return Err(Error::Incompatible(format!(
                    "quantizer has {} levels, codes are {n}-ary",
                    q.arity()
                )));
            }
            for (j, code) in codes.iter().enumerate() {
                for (i, &c) in code.iter().enumerate() {
                    out[(i, j)] = q.level(c);
                }
            }
        }
        FeatureSource::CkRefined(cb) => {
            let values = cb.index_values.as_ref().ok_or_else(|| {
                Error::Incompatible("codebooks carry no refined index values".into())
            })?;
            if values.len() != m || cb.arity != n {
                return Err(Error::Incompatible(format!(
                    "codebooks are {}x{}-ary, codes are {m}x{n}-ary",
                    values.len(),
                    cb.arity
                )));
            }
            for (j, code) in codes.iter().enumerate() {
                for (i, &c) in code.iter().enumerate() {
                    out[(i, j)] = values[i][c as usize - 1];
                }
            }
        }
        FeatureSource::RawIndex => {
            let span = (n.max(2) - 1) as f64;
            for (j, code) in codes.iter().enumerate() {
                for (i, &c) in code.iter().enumerate() {
                    out[(i, j)] = -1.0 + 2.0 * (c - 1) as f64 / span;
                }
            }
        }
    }
    DataMatrix::new(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn middle_level_is_zero() {
        let q = UniformQuantizer::new(3).unwrap();
        let codes = NaryCodeSet::new(2, 3, vec![2, 1, 3, 2, 2, 2]).unwrap();
        let f = codes_as_features(&codes, FeatureSource::LsqLevels(&q)).unwrap();
        assert_eq!((f.dim(), f.count()), (2, 3));
        assert_eq!(f.values().as_slice(), &[0.0, -1.0, 1.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn refined_requires_index_values() {
        let cb = SubspaceCodebooks {
            subspace_dims: vec![1],
            arity: 2,
            codebooks: vec![DMatrix::from_row_slice(1, 2, &[0.0, 1.0])],
            rotation: None,
            index_values: None,
            objective_history: vec![],
        };
        let codes = NaryCodeSet::new(1, 2, vec![1, 2]).unwrap();
        assert!(codes_as_features(&codes, FeatureSource::CkRefined(&cb)).is_err());
        let cb = SubspaceCodebooks {
            index_values: Some(vec![vec![0.25, -0.75]]),
            ..cb
        };
        let f = codes_as_features(&codes, FeatureSource::CkRefined(&cb)).unwrap();
        assert_eq!(f.values().as_slice(), &[0.25, -0.75]);
    }

    #[test]
    fn raw_index_spans_unit_interval() {
        let codes = NaryCodeSet::new(1, 5, vec![1, 3, 5]).unwrap();
        let f = codes_as_features(&codes, FeatureSource::RawIndex).unwrap();
        assert_eq!(f.values().as_slice(), &[-1.0, 0.0, 1.0]);
    }
}
