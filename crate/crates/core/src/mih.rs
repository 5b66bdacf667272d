//! Multi-index hashing over n-ary codes and over `b`-bit chunks of binary
//! codes.
//!
//! There is one table per code dimension (or per chunk). Each table maps a
//! key to the posting list of base ids holding that key. A query probes its
//! own key in every table and scores each retrieved id by the number of
//! tables it came back from. When fewer than `k` distinct ids are found, the
//! query key of one table is substituted by the cheapest not-yet-probed
//! alternative and that bucket is probed too, repeating until `k` ids are
//! found or every bucket has been probed.

use std::cmp::{Ordering, Reverse};
use std::collections::BinaryHeap;

use crate::distance::{CodeMetric, CodeRef, CodeSetRef, RankOrder, RankedList, Scorer};
use crate::encoders::{chunk_key, BinaryCodeSet, NaryCodeSet};
use crate::error::{Error, Result};
use crate::quantcore::UniformQuantizer;

/// Largest chunk width accepted for binary indexes (`2^20` buckets).
pub const MAX_CHUNK_BITS: usize = 20;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CodeKind {
    Nary { arity: usize },
    Binary { chunk_bits: usize },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum BaseCodes {
    Nary(NaryCodeSet),
    Binary(BinaryCodeSet),
}

impl BaseCodes {
    pub fn as_ref(&self) -> CodeSetRef<'_> {
        match self {
            BaseCodes::Nary(c) => CodeSetRef::Nary(c),
            BaseCodes::Binary(c) => CodeSetRef::Binary(c),
        }
    }

    pub fn count(&self) -> usize {
        self.as_ref().count()
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MultiIndexHash {
    kind: CodeKind,
    bucket_count: usize,
    /// `tables[t][key]` holds ascending base ids.
    tables: Vec<Vec<Vec<u32>>>,
    base: BaseCodes,
}

fn check_count(count: usize) -> Result<()> {
    if count == 0 || count > u32::MAX as usize {
        return Err(Error::param(format!("cannot index {count} codes")));
    }
    Ok(())
}

pub fn build_nary_index(codes: &NaryCodeSet) -> Result<MultiIndexHash> {
    check_count(codes.count())?;
    let n = codes.arity();
    let mut tables = vec![vec![Vec::new(); n]; codes.m()];
    for (p, code) in codes.iter().enumerate() {
        for (t, &c) in code.iter().enumerate() {
            tables[t][c as usize - 1].push(p as u32);
        }
    }
    Ok(MultiIndexHash {
        kind: CodeKind::Nary { arity: n },
        bucket_count: n,
        tables,
        base: BaseCodes::Nary(codes.clone()),
    })
}

/// Groups bits into `bits / b` chunks, MSB first within a chunk, each chunk
/// keying a table of `2^b` buckets.
pub fn build_binary_index(codes: &BinaryCodeSet, b: usize) -> Result<MultiIndexHash> {
    check_count(codes.count())?;
    if b == 0 || b > MAX_CHUNK_BITS || !codes.bits().is_multiple_of(b) {
        return Err(Error::param(format!(
            "chunk width {b} must divide the {} code bits and be at most {MAX_CHUNK_BITS}",
            codes.bits()
        )));
    }
    let table_count = codes.bits() / b;
    let buckets = 1usize << b;
    let mut tables = vec![vec![Vec::new(); buckets]; table_count];
    for p in 0..codes.count() {
        let words = codes.code_words(p);
        for (t, table) in tables.iter_mut().enumerate() {
            table[chunk_key(words, t, b) as usize].push(p as u32);
        }
    }
    Ok(MultiIndexHash {
        kind: CodeKind::Binary { chunk_bits: b },
        bucket_count: buckets,
        tables,
        base: BaseCodes::Binary(codes.clone()),
    })
}

/// Cost of probing each `(table, key)`; the expansion order is by the
/// increase over the cost of the query's own key in that table.
#[derive(Clone, Debug, PartialEq)]
pub struct ProbeCosts {
    table_count: usize,
    bucket_count: usize,
    costs: Vec<f64>,
}

impl ProbeCosts {
    pub fn new(table_count: usize, bucket_count: usize, costs: Vec<f64>) -> Result<Self> {
        if costs.len() != table_count * bucket_count {
            return Err(Error::dims("probe costs", table_count * bucket_count, costs.len()));
        }
        if costs.iter().any(|c| !c.is_finite()) {
            return Err(Error::NonFinite("probe costs"));
        }
        Ok(ProbeCosts {
            table_count,
            bucket_count,
            costs,
        })
    }

    /// `|theta_n(v) - y_t|` for an unquantized projection `y`.
    pub fn from_projection(q: &UniformQuantizer, y: &[f64]) -> Result<Self> {
        let costs = y
            .iter()
            .flat_map(|&v| q.levels().iter().map(move |&l| (l - v).abs()))
            .collect();
        Self::new(y.len(), q.arity(), costs)
    }

    /// Distances of the query's subspace blocks to every center, given as
    /// squared distances.
    pub fn from_center_distances(distances: &[Vec<f64>]) -> Result<Self> {
        let buckets = distances.first().map(Vec::len).unwrap_or(0);
        if distances.iter().any(|d| d.len() != buckets) {
            return Err(Error::Incompatible("ragged center distances".into()));
        }
        Self::new(
            distances.len(),
            buckets,
            distances.concat().into_iter().map(f64::sqrt).collect(),
        )
    }

    /// Hamming distance between each chunk value and the query's chunk.
    pub fn chunk_hamming(keys: &[u32], chunk_bits: usize) -> Result<Self> {
        let buckets = 1usize << chunk_bits;
        let costs = keys
            .iter()
            .flat_map(|&k| (0..buckets as u32).map(move |v| (v ^ k).count_ones() as f64))
            .collect();
        Self::new(keys.len(), buckets, costs)
    }

    /// `|v - key|` in level-index units.
    pub fn level_steps(keys: &[u32], bucket_count: usize) -> Result<Self> {
        let costs = keys
            .iter()
            .flat_map(|&k| (0..bucket_count as u32).map(move |v| v.abs_diff(k) as f64))
            .collect();
        Self::new(keys.len(), bucket_count, costs)
    }

    pub fn cost(&self, table: usize, key: u32) -> f64 {
        self.costs[table * self.bucket_count + key as usize]
    }
}

/// One substituted probe of the expansion sequence.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ProbeStep {
    pub table: usize,
    pub key: u32,
    /// Cost increase over the query's own key in this table.
    pub increase: f64,
}

#[derive(Debug, PartialEq)]
struct HeapEntry {
    increase: f64,
    table: usize,
    pos: usize,
}

impl Eq for HeapEntry {}

impl Ord for HeapEntry {
    fn cmp(&self, other: &Self) -> Ordering {
        self.increase
            .total_cmp(&other.increase)
            .then(self.table.cmp(&other.table))
            .then(self.pos.cmp(&other.pos))
    }
}

impl PartialOrd for HeapEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Lazily merges the per-table alternative keys into one sequence ordered by
/// `(increase, table, key)`.
pub struct Expansion {
    per_table: Vec<Vec<(f64, u32)>>,
    heap: BinaryHeap<Reverse<HeapEntry>>,
}

impl Expansion {
    pub fn new(keys: &[u32], costs: &ProbeCosts) -> Result<Self> {
        if costs.table_count != keys.len() {
            return Err(Error::dims("probe cost tables", keys.len(), costs.table_count));
        }
        let per_table: Vec<Vec<(f64, u32)>> = keys
            .iter()
            .enumerate()
            .map(|(t, &cur)| {
                let base = costs.cost(t, cur);
                let mut alts: Vec<(f64, u32)> = (0..costs.bucket_count as u32)
                    .filter(|&v| v != cur)
                    .map(|v| (costs.cost(t, v) - base, v))
                    .collect();
                alts.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
                alts
            })
            .collect();
        let heap = per_table
            .iter()
            .enumerate()
            .filter(|(_, alts)| !alts.is_empty())
            .map(|(t, alts)| {
                Reverse(HeapEntry {
                    increase: alts[0].0,
                    table: t,
                    pos: 0,
                })
            })
            .collect();
        Ok(Expansion { per_table, heap })
    }
}

impl Iterator for Expansion {
    type Item = ProbeStep;

    fn next(&mut self) -> Option<ProbeStep> {
        let Reverse(top) = self.heap.pop()?;
        let alts = &self.per_table[top.table];
        let (increase, key) = alts[top.pos];
        if let Some(&(next, _)) = alts.get(top.pos + 1) {
            self.heap.push(Reverse(HeapEntry {
                increase: next,
                table: top.table,
                pos: top.pos + 1,
            }));
        }
        Some(ProbeStep {
            table: top.table,
            key,
            increase,
        })
    }
}

/// Output of [`MultiIndexHash::query`].
#[derive(Clone, Debug, PartialEq)]
pub struct MihResult {
    /// Top-`k` ids; `scores` hold the match counts.
    pub list: RankedList,
    /// Number of substituted probes run.
    pub expansions: usize,
    /// Distinct ids retrieved before truncation to `k`.
    pub candidates: usize,
}

impl MultiIndexHash {
    /// Assembles an index from parts, checking every structural invariant.
    pub fn from_parts(kind: CodeKind, tables: Vec<Vec<Vec<u32>>>, base: BaseCodes) -> Result<Self> {
        let (expected_tables, buckets) = match (&kind, &base) {
            (CodeKind::Nary { arity }, BaseCodes::Nary(c)) if *arity == c.arity() => (c.m(), *arity),
            (CodeKind::Binary { chunk_bits }, BaseCodes::Binary(c))
                if *chunk_bits > 0 && *chunk_bits <= MAX_CHUNK_BITS && c.bits() % chunk_bits == 0 =>
            {
                (c.bits() / chunk_bits, 1 << chunk_bits)
            }
            _ => return Err(Error::format("index", "code kind does not match base codes")),
        };
        if tables.len() != expected_tables {
            return Err(Error::format(
                "index",
                format!("{} tables, codes imply {expected_tables}", tables.len()),
            ));
        }
        let index = MultiIndexHash {
            kind,
            bucket_count: buckets,
            tables,
            base,
        };
        let n = index.base.count();
        for t in 0..index.table_count() {
            if index.tables[t].len() != buckets {
                return Err(Error::format("index", format!("table {t} has wrong bucket count")));
            }
            let mut seen = vec![false; n];
            let mut total = 0;
            for (key, list) in index.tables[t].iter().enumerate() {
                for &id in list {
                    let id = id as usize;
                    if id >= n || seen[id] || index.stored_key(t, id) != key as u32 {
                        return Err(Error::format(
                            "index",
                            format!("posting list {t}/{key} disagrees with base codes"),
                        ));
                    }
                    seen[id] = true;
                    total += 1;
                }
                if list.windows(2).any(|w| w[0] >= w[1]) {
                    return Err(Error::format("index", "posting list not ascending"));
                }
            }
            if total != n {
                return Err(Error::format("index", format!("table {t} covers {total} of {n} ids")));
            }
        }
        Ok(index)
    }

    pub fn kind(&self) -> CodeKind {
        self.kind
    }

    pub fn table_count(&self) -> usize {
        self.tables.len()
    }

    pub fn bucket_count(&self) -> usize {
        self.bucket_count
    }

    pub fn posting(&self, table: usize, key: u32) -> &[u32] {
        &self.tables[table][key as usize]
    }

    pub fn tables(&self) -> &[Vec<Vec<u32>>] {
        &self.tables
    }

    pub fn base(&self) -> &BaseCodes {
        &self.base
    }

    pub fn len(&self) -> usize {
        self.base.count()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn stored_key(&self, table: usize, id: usize) -> u32 {
        match (&self.base, self.kind) {
            (BaseCodes::Nary(c), _) => c.code(id)[table] - 1,
            (BaseCodes::Binary(c), CodeKind::Binary { chunk_bits }) => {
                chunk_key(c.code_words(id), table, chunk_bits)
            }
            _ => unreachable!("kind and base agree by construction"),
        }
    }

    /// 0-based key of the query in every table.
    pub fn query_keys(&self, query: CodeRef<'_>) -> Result<Vec<u32>> {
        match (self.kind, query, &self.base) {
            (CodeKind::Nary { arity }, CodeRef::Nary(code), _) => {
                if code.len() != self.table_count() {
                    return Err(Error::dims("query code length", self.table_count(), code.len()));
                }
                code.iter()
                    .map(|&c| {
                        if c == 0 || c as usize > arity {
                            Err(Error::Incompatible(format!("query entry {c} outside 1..={arity}")))
                        } else {
                            Ok(c - 1)
                        }
                    })
                    .collect()
            }
            (CodeKind::Binary { chunk_bits }, CodeRef::Binary(words), BaseCodes::Binary(base)) => {
                if words.len() != base.words_per_code() {
                    return Err(Error::dims("query code words", base.words_per_code(), words.len()));
                }
                Ok((0..self.table_count())
                    .map(|t| chunk_key(words, t, chunk_bits))
                    .collect())
            }
            _ => Err(Error::Incompatible("query code kind does not match the index".into())),
        }
    }

    /// Probe costs used when the caller supplies none.
    pub fn default_costs(&self, keys: &[u32]) -> Result<ProbeCosts> {
        match self.kind {
            CodeKind::Nary { arity } => ProbeCosts::level_steps(keys, arity),
            CodeKind::Binary { chunk_bits } => ProbeCosts::chunk_hamming(keys, chunk_bits),
        }
    }

    /// Top-`k` retrieval ranked by descending score, then ascending code
    /// distance under `metric`, then ascending id.
    pub fn query(
        &self,
        query: CodeRef<'_>,
        k: usize,
        costs: Option<&ProbeCosts>,
        metric: CodeMetric<'_>,
    ) -> Result<MihResult> {
        if k == 0 {
            return Err(Error::param("k must be at least 1"));
        }
        let keys = self.query_keys(query)?;
        let scorer = Scorer::new(metric, query, self.base.as_ref())?;
        let owned;
        let costs = match costs {
            Some(c) => {
                if c.table_count != self.table_count() || c.bucket_count != self.bucket_count {
                    return Err(Error::Incompatible("probe costs do not match the index shape".into()));
                }
                c
            }
            None => {
                owned = self.default_costs(&keys)?;
                &owned
            }
        };

        let n = self.len();
        let mut scores = vec![0u32; n];
        let mut touched: Vec<u32> = Vec::new();
        let probe = |table: usize, key: u32, scores: &mut Vec<u32>, touched: &mut Vec<u32>| {
            for &id in &self.tables[table][key as usize] {
                let s = &mut scores[id as usize];
                if *s == 0 {
                    touched.push(id);
                }
                *s += 1;
            }
        };

        for (t, &key) in keys.iter().enumerate() {
            probe(t, key, &mut scores, &mut touched);
        }
        let mut expansions = 0;
        if touched.len() < k {
            for step in Expansion::new(&keys, costs)? {
                probe(step.table, step.key, &mut scores, &mut touched);
                expansions += 1;
                if touched.len() >= k {
                    break;
                }
            }
        }

        let base = self.base.as_ref();
        let mut ranked: Vec<(u32, f64, u32)> = touched
            .iter()
            .map(|&id| (scores[id as usize], scorer.distance(base.code(id as usize)), id))
            .collect();
        ranked.sort_unstable_by(|a, b| {
            b.0.cmp(&a.0)
                .then(a.1.total_cmp(&b.1))
                .then(a.2.cmp(&b.2))
        });
        let candidates = ranked.len();
        ranked.truncate(k);
        Ok(MihResult {
            list: RankedList {
                ids: ranked.iter().map(|r| r.2 as usize).collect(),
                scores: ranked.iter().map(|r| r.0 as f64).collect(),
                order: RankOrder::DescendingScore,
            },
            expansions,
            candidates,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::encoders::BinaryCode;

    #[test]
    fn single_point_index() {
        let codes = NaryCodeSet::new(3, 4, vec![2, 4, 1]).unwrap();
        let idx = build_nary_index(&codes).unwrap();
        for t in 0..3 {
            let sizes: Vec<usize> = idx.tables()[t].iter().map(Vec::len).collect();
            assert_eq!(sizes.iter().sum::<usize>(), 1);
            assert_eq!(sizes.iter().filter(|&&s| s == 1).count(), 1);
        }
        assert_eq!(idx.posting(1, 3), &[0]);
    }

    #[test]
    fn six_bit_code_chunk_keys() {
        let code = BinaryCode::from_bit_str("110000").unwrap();
        let set = BinaryCodeSet::from_codes(&[code.clone()]).unwrap();
        let idx = build_binary_index(&set, 3).unwrap();
        assert_eq!(idx.table_count(), 2);
        assert_eq!(idx.bucket_count(), 8);
        assert_eq!(idx.posting(0, 6), &[0]);
        assert_eq!(idx.posting(1, 0), &[0]);
        assert_eq!(idx.query_keys(CodeRef::Binary(code.words())).unwrap(), vec![6, 0]);

        let whole = build_binary_index(&set, 6).unwrap();
        assert_eq!(whole.table_count(), 1);
        assert_eq!(whole.posting(0, 0b110000), &[0]);
        assert!(build_binary_index(&set, 4).is_err());
    }

    #[test]
    fn binary_expansion_starts_with_one_bit_flips() {
        let costs = ProbeCosts::chunk_hamming(&[0b110], 3).unwrap();
        let steps: Vec<u32> = Expansion::new(&[0b110], &costs).unwrap().map(|s| s.key).take(3).collect();
        assert_eq!(steps, vec![0b010, 0b100, 0b111]);
    }

    #[test]
    fn nary_expansion_follows_projection() {
        let q = UniformQuantizer::new(3).unwrap();
        // level 2 (key 1) at y = 0.9 in table 0, and y = 0.0 in table 1
        let costs = ProbeCosts::from_projection(&q, &[0.9, 0.0]).unwrap();
        let mut exp = Expansion::new(&[1, 1], &costs).unwrap();
        let first = exp.next().unwrap();
        assert_eq!((first.table, first.key), (0, 2));
        let rest: Vec<(usize, u32)> = exp.map(|s| (s.table, s.key)).collect();
        assert_eq!(rest, vec![(0, 0), (1, 0), (1, 2)]);
    }

    #[test]
    fn identical_code_gets_full_score() {
        let codes = NaryCodeSet::new(3, 3, vec![1, 2, 3, 3, 2, 1, 1, 1, 1]).unwrap();
        let idx = build_nary_index(&codes).unwrap();
        let q = UniformQuantizer::new(3).unwrap();
        let res = idx
            .query(CodeRef::Nary(&[3, 2, 1]), 1, None, CodeMetric::CodeEuclidean(&q))
            .unwrap();
        assert_eq!(res.list.ids, vec![1]);
        assert_eq!(res.list.scores, vec![3.0]);
        assert_eq!(res.expansions, 0);
    }

    #[test]
    fn exhaustion_returns_everything() {
        let codes = NaryCodeSet::new(2, 4, vec![1, 1, 2, 2, 3, 3, 4, 4, 4, 1]).unwrap();
        let idx = build_nary_index(&codes).unwrap();
        let q = UniformQuantizer::new(4).unwrap();
        let res = idx
            .query(CodeRef::Nary(&[1, 1]), 5, None, CodeMetric::CodeEuclidean(&q))
            .unwrap();
        let mut ids = res.list.ids.clone();
        ids.sort_unstable();
        assert_eq!(ids, vec![0, 1, 2, 3, 4]);
        assert!(res.expansions >= 1);
        // asking for more than N still terminates
        let res = idx
            .query(CodeRef::Nary(&[1, 1]), 50, None, CodeMetric::CodeEuclidean(&q))
            .unwrap();
        assert_eq!(res.list.len(), 5);
    }

    #[test]
    fn kind_mismatch_is_rejected() {
        let codes = NaryCodeSet::new(2, 2, vec![1, 2]).unwrap();
        let idx = build_nary_index(&codes).unwrap();
        assert!(idx.query(CodeRef::Binary(&[0]), 1, None, CodeMetric::Hamming).is_err());
        assert!(idx.query(CodeRef::Nary(&[1, 3]), 1, None, CodeMetric::Hamming).is_err());
        assert!(idx.query(CodeRef::Nary(&[1, 2]), 0, None, CodeMetric::Hamming).is_err());
    }

    #[test]
    fn from_parts_validates() {
        let codes = NaryCodeSet::new(1, 2, vec![1, 2]).unwrap();
        let idx = build_nary_index(&codes).unwrap();
        let ok = MultiIndexHash::from_parts(idx.kind(), idx.tables().to_vec(), idx.base().clone());
        assert_eq!(ok.unwrap(), idx);
        let bad = MultiIndexHash::from_parts(idx.kind(), vec![vec![vec![1], vec![0]]], idx.base().clone());
        assert!(bad.is_err());
    }
}
