//! Distances in code space and the exhaustive ranker.
//!
//! All real-valued distances are squared Euclidean.

use nalgebra::DMatrix;

use crate::dataset::top_k_ascending;
use crate::encoders::{tail_mask, BinaryCode, BinaryCodeSet, NaryCodeSet, SubspaceCodebooks};
use crate::error::{Error, Result};
use crate::quantcore::UniformQuantizer;

/// Per-subspace `n x n` tables of squared center-to-center distances.
#[derive(Clone, Debug, PartialEq)]
pub struct LookupTables {
    arity: usize,
    tables: Vec<DMatrix<f64>>,
}

pub fn build_lookup_tables(cb: &SubspaceCodebooks) -> LookupTables {
    let n = cb.arity;
    let tables = cb
        .codebooks
        .iter()
        .map(|book| {
            let mut t = DMatrix::zeros(n, n);
            for a in 0..n {
                for b in (a + 1)..n {
                    let d = (book.column(a) - book.column(b)).norm_squared();
                    t[(a, b)] = d;
                    t[(b, a)] = d;
                }
            }
            t
        })
        .collect();
    LookupTables { arity: n, tables }
}

impl LookupTables {
    pub fn m(&self) -> usize {
        self.tables.len()
    }

    pub fn arity(&self) -> usize {
        self.arity
    }

    pub fn table(&self, i: usize) -> &DMatrix<f64> {
        &self.tables[i]
    }

    fn check(&self, code: &[u32]) -> Result<()> {
        if code.len() != self.m() {
            return Err(Error::dims("symmetric distance code", self.m(), code.len()));
        }
        if code.iter().any(|&c| c == 0 || c as usize > self.arity) {
            return Err(Error::Incompatible(format!("code entry outside 1..={}", self.arity)));
        }
        Ok(())
    }

    /// `sum_i L_i(a_i, b_i)`.
    pub fn symmetric_distance(&self, a: &[u32], b: &[u32]) -> Result<f64> {
        self.check(a)?;
        self.check(b)?;
        Ok(self.distance_unchecked(a, b))
    }

    #[inline]
    pub(crate) fn distance_unchecked(&self, a: &[u32], b: &[u32]) -> f64 {
        self.tables
            .iter()
            .zip(a.iter().zip(b))
            .map(|(t, (&x, &y))| t[(x as usize - 1, y as usize - 1)])
            .sum()
    }
}

/// Popcount of the XOR of two packed words slices; bits at or above `bits`
/// are ignored.
#[inline]
pub fn hamming_words(a: &[u64], b: &[u64], bits: usize) -> u32 {
    let last = a.len().saturating_sub(1);
    let mask = tail_mask(bits);
    a.iter()
        .zip(b)
        .enumerate()
        .map(|(i, (x, y))| {
            let w = x ^ y;
            if i == last { w & mask } else { w }.count_ones()
        })
        .sum()
}

pub fn hamming(a: &BinaryCode, b: &BinaryCode) -> Result<u32> {
    if a.bits() != b.bits() {
        return Err(Error::dims("hamming", a.bits(), b.bits()));
    }
    Ok(hamming_words(a.words(), b.words(), a.bits()))
}

/// `sum_j (theta_n(a_j) - theta_n(b_j))^2`.
pub fn code_euclidean(q: &UniformQuantizer, a: &[u32], b: &[u32]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::dims("code euclidean", a.len(), b.len()));
    }
    let mut total = 0.0;
    for (&x, &y) in a.iter().zip(b) {
        let d = q.try_level(x)? - q.try_level(y)?;
        total += d * d;
    }
    Ok(total)
}

/// Distance used to compare codes of one kind.
#[derive(Clone, Copy, Debug)]
pub enum CodeMetric<'a> {
    Symmetric(&'a LookupTables),
    Hamming,
    CodeEuclidean(&'a UniformQuantizer),
}

/// A borrowed code set of either kind.
#[derive(Clone, Copy, Debug)]
pub enum CodeSetRef<'a> {
    Nary(&'a NaryCodeSet),
    Binary(&'a BinaryCodeSet),
}

/// A borrowed single codeword of either kind.
#[derive(Clone, Copy, Debug)]
pub enum CodeRef<'a> {
    Nary(&'a [u32]),
    Binary(&'a [u64]),
}

impl<'a> CodeSetRef<'a> {
    pub fn count(&self) -> usize {
        match self {
            CodeSetRef::Nary(c) => c.count(),
            CodeSetRef::Binary(c) => c.count(),
        }
    }

    pub fn code(&self, j: usize) -> CodeRef<'a> {
        match *self {
            CodeSetRef::Nary(c) => CodeRef::Nary(c.code(j)),
            CodeSetRef::Binary(c) => CodeRef::Binary(c.code_words(j)),
        }
    }
}

/// Precomputed scorer for one query against many base codes.
pub(crate) enum Scorer<'a> {
    Symmetric(&'a LookupTables, &'a [u32]),
    Hamming(&'a [u64], usize),
    Levels(Vec<f64>, &'a [u32]),
}

impl<'a> Scorer<'a> {
    /// Validates that the query, the base codes and the metric agree.
    pub(crate) fn new(metric: CodeMetric<'a>, query: CodeRef<'a>, base: CodeSetRef<'_>) -> Result<Self> {
        match (metric, query, base) {
            (CodeMetric::Symmetric(t), CodeRef::Nary(q), CodeSetRef::Nary(b)) => {
                t.check(q)?;
                if b.m() != t.m() || b.arity() != t.arity() {
                    return Err(Error::Incompatible("base codes do not match lookup tables".into()));
                }
                Ok(Scorer::Symmetric(t, q))
            }
            (CodeMetric::CodeEuclidean(qz), CodeRef::Nary(q), CodeSetRef::Nary(b)) => {
                if b.m() != q.len() {
                    return Err(Error::dims("query code length", b.m(), q.len()));
                }
                if b.arity() != qz.arity() || q.iter().any(|&c| c == 0 || c as usize > qz.arity()) {
                    return Err(Error::Incompatible("code arity does not match quantizer".into()));
                }
                Ok(Scorer::Levels(qz.levels().to_vec(), q))
            }
            (CodeMetric::Hamming, CodeRef::Binary(q), CodeSetRef::Binary(b)) => {
                if q.len() != b.words_per_code() {
                    return Err(Error::dims("query code words", b.words_per_code(), q.len()));
                }
                Ok(Scorer::Hamming(q, b.bits()))
            }
            _ => Err(Error::Incompatible(
                "metric, query code and base codes are of different kinds".into(),
            )),
        }
    }

    #[inline]
    pub(crate) fn distance(&self, code: CodeRef<'_>) -> f64 {
        match (self, code) {
            (Scorer::Symmetric(t, q), CodeRef::Nary(c)) => t.distance_unchecked(q, c),
            (Scorer::Hamming(q, bits), CodeRef::Binary(c)) => hamming_words(q, c, *bits) as f64,
            (Scorer::Levels(levels, q), CodeRef::Nary(c)) => q
                .iter()
                .zip(c)
                .map(|(&x, &y)| {
                    let d = levels[x as usize - 1] - levels[y as usize - 1];
                    d * d
                })
                .sum(),
            _ => unreachable!("scorer kind checked at construction"),
        }
    }
}

/// Ordering of a [`RankedList`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RankOrder {
    /// `scores` are distances, ascending.
    AscendingDistance,
    /// `scores` are match counts, descending.
    DescendingScore,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RankedList {
    pub ids: Vec<usize>,
    pub scores: Vec<f64>,
    pub order: RankOrder,
}

impl RankedList {
    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }
}

/// Full scan of `base`, returning the `k` nearest codes; ties go to the
/// smaller id.
pub fn exhaustive_rank(
    query: CodeRef<'_>,
    base: CodeSetRef<'_>,
    metric: CodeMetric<'_>,
    k: usize,
) -> Result<RankedList> {
    let n = base.count();
    if k == 0 || k > n {
        return Err(Error::param(format!("k must be in 1..={n}, got {k}")));
    }
    let scorer = Scorer::new(metric, query, base)?;
    let scored: Vec<(f64, usize)> = (0..n).map(|j| (scorer.distance(base.code(j)), j)).collect();
    let top = top_k_ascending(scored, k);
    Ok(RankedList {
        ids: top.iter().map(|&(_, id)| id).collect(),
        scores: top.iter().map(|&(d, _)| d).collect(),
        order: RankOrder::AscendingDistance,
    })
}
