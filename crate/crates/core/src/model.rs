//! A trained coder of any supported kind behind one interface.

use nalgebra::DVector;

use crate::dataset::DataMatrix;
use crate::distance::{build_lookup_tables, CodeMetric, CodeRef, CodeSetRef, LookupTables};
use crate::encoders::{BinaryCodeSet, ItqModel, LsqModel, NaryCodeSet, SubspaceCodebooks};
use crate::error::{Error, Result};
use crate::mih::{CodeKind, MultiIndexHash, ProbeCosts};

#[derive(Clone, Debug, PartialEq)]
pub enum Model {
    /// LSQ; a 2-level model produces packed binary codes.
    Lsq(LsqModel),
    Itq(ItqModel),
    Pq(SubspaceCodebooks),
    Ckmeans(SubspaceCodebooks),
    /// Cartesian k-means with two centers per subspace, codes packed as bits.
    Okmeans(SubspaceCodebooks),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Codes {
    Nary(NaryCodeSet),
    Binary(BinaryCodeSet),
}

impl Codes {
    pub fn count(&self) -> usize {
        self.as_set().count()
    }

    pub fn as_set(&self) -> CodeSetRef<'_> {
        match self {
            Codes::Nary(c) => CodeSetRef::Nary(c),
            Codes::Binary(c) => CodeSetRef::Binary(c),
        }
    }

    pub fn code(&self, j: usize) -> CodeRef<'_> {
        self.as_set().code(j)
    }

    /// Storage per codeword in bits: `m log2(n)` or the bit count.
    pub fn bits_per_code(&self) -> f64 {
        match self {
            Codes::Nary(c) => c.bits_per_code(),
            Codes::Binary(c) => c.bits() as f64,
        }
    }
}

/// Owns whatever a [`CodeMetric`] borrows.
#[derive(Clone, Debug)]
pub enum MetricContext<'a> {
    Levels(&'a crate::quantcore::UniformQuantizer),
    Tables(LookupTables),
    Hamming,
}

impl MetricContext<'_> {
    pub fn metric(&self) -> CodeMetric<'_> {
        match self {
            MetricContext::Levels(q) => CodeMetric::CodeEuclidean(q),
            MetricContext::Tables(t) => CodeMetric::Symmetric(t),
            MetricContext::Hamming => CodeMetric::Hamming,
        }
    }
}

impl Model {
    pub fn method_name(&self) -> &'static str {
        match self {
            Model::Lsq(m) if m.arity() == 2 => "lsq-binary",
            Model::Lsq(_) => "lsq-nary",
            Model::Itq(_) => "itq",
            Model::Pq(_) => "pq",
            Model::Ckmeans(_) => "ckmeans",
            Model::Okmeans(_) => "okmeans",
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            Model::Lsq(m) => m.dim(),
            Model::Itq(m) => m.dim(),
            Model::Pq(c) | Model::Ckmeans(c) | Model::Okmeans(c) => c.dim(),
        }
    }

    pub fn is_binary(&self) -> bool {
        match self {
            Model::Lsq(m) => m.arity() == 2,
            Model::Itq(_) | Model::Okmeans(_) => true,
            Model::Pq(_) | Model::Ckmeans(_) => false,
        }
    }

    pub fn encode(&self, x: &DataMatrix) -> Result<Codes> {
        Ok(match self {
            Model::Lsq(m) if m.arity() == 2 => Codes::Binary(m.encode_binary(x)?),
            Model::Lsq(m) => Codes::Nary(m.encode(x)?),
            Model::Itq(m) => Codes::Binary(m.encode(x)?),
            Model::Pq(c) | Model::Ckmeans(c) => Codes::Nary(c.encode(x)?),
            Model::Okmeans(c) => Codes::Binary(c.encode(x)?.to_binary()?),
        })
    }

    pub fn reconstruct(&self, codes: &Codes) -> Result<DataMatrix> {
        match (self, codes) {
            (Model::Lsq(m), Codes::Nary(c)) => m.reconstruct(c),
            (Model::Lsq(m), Codes::Binary(c)) => m.reconstruct_binary(c),
            (Model::Itq(m), Codes::Binary(c)) => m.reconstruct(c),
            (Model::Pq(cb) | Model::Ckmeans(cb), Codes::Nary(c)) => cb.reconstruct(c),
            (Model::Okmeans(cb), Codes::Binary(c)) => cb.reconstruct(&c.to_nary_chunks(1)?),
            _ => Err(Error::Incompatible(format!(
                "{} cannot reconstruct these codes",
                self.method_name()
            ))),
        }
    }

    /// The code-space distance native to this model.
    pub fn metric_context(&self) -> MetricContext<'_> {
        match self {
            Model::Lsq(m) if m.arity() > 2 => MetricContext::Levels(&m.quantizer),
            Model::Pq(c) | Model::Ckmeans(c) => MetricContext::Tables(build_lookup_tables(c)),
            _ => MetricContext::Hamming,
        }
    }

    /// Expansion costs for one query point against `index`, or `None` to use
    /// the index defaults.
    pub fn probe_costs(&self, query: &DVector<f64>, index: &MultiIndexHash) -> Result<Option<ProbeCosts>> {
        if query.len() != self.dim() {
            return Err(Error::dims("query point", self.dim(), query.len()));
        }
        match (self, index.kind()) {
            (Model::Lsq(m), CodeKind::Nary { .. }) => {
                let y = m.mapping.transpose() * query;
                Ok(Some(ProbeCosts::from_projection(&m.quantizer, y.as_slice())?))
            }
            (Model::Pq(c) | Model::Ckmeans(c), CodeKind::Nary { .. }) => {
                Ok(Some(ProbeCosts::from_center_distances(&c.center_distances(query)?)?))
            }
            _ => Ok(None),
        }
    }
}
