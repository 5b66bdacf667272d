//! Binary containers for models (`NARYMDL`), code sets (`NARYCOD`) and
//! multi-index hashes (`NARYIDX`).
//!
//! All integers are little-endian `u32` and every real matrix is stored as a
//! block of `rows`, `cols` and `rows * cols` column-major `f32` values.
//! Packed binary code words are little-endian `u64`. Reals are narrowed to
//! `f32` on save, so a loaded model re-saves to identical bytes.

use std::fs;
use std::path::Path;

use nalgebra::DMatrix;

use crate::encoders::{BinaryCodeSet, ItqModel, LsqModel, NaryCodeSet, SubspaceCodebooks};
use crate::error::{Error, Result};
use crate::mih::{BaseCodes, CodeKind, MultiIndexHash};
use crate::model::{Codes, Model};
use crate::quantcore::UniformQuantizer;

const MODEL_MAGIC: &[u8; 7] = b"NARYMDL";
const CODES_MAGIC: &[u8; 7] = b"NARYCOD";
const INDEX_MAGIC: &[u8; 7] = b"NARYIDX";

const TAG_LSQ: usize = 1;
const TAG_ITQ: usize = 2;
const TAG_PQ: usize = 3;
const TAG_CKMEANS: usize = 4;
const TAG_OKMEANS: usize = 5;

const KIND_NARY: usize = 1;
const KIND_BINARY: usize = 2;

#[derive(Default)]
struct Writer {
    buf: Vec<u8>,
}

impl Writer {
    fn u32(&mut self, v: usize) -> Result<()> {
        let v = u32::try_from(v).map_err(|_| Error::param(format!("{v} does not fit in u32")))?;
        self.buf.extend_from_slice(&v.to_le_bytes());
        Ok(())
    }

    fn matrix(&mut self, m: &DMatrix<f64>) -> Result<()> {
        self.u32(m.nrows())?;
        self.u32(m.ncols())?;
        for &v in m.iter() {
            let v = v as f32;
            if !v.is_finite() {
                return Err(Error::NonFinite("matrix block (f32 overflow)"));
            }
            self.buf.extend_from_slice(&v.to_le_bytes());
        }
        Ok(())
    }

    fn row(&mut self, values: &[f64]) -> Result<()> {
        self.matrix(&DMatrix::from_row_slice(1, values.len(), values))
    }

    fn scalar(&mut self, v: f64) -> Result<()> {
        self.row(&[v])
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
    what: &'static str,
}

impl<'a> Reader<'a> {
    fn new(bytes: &'a [u8], magic: &[u8; 7], what: &'static str) -> Result<Self> {
        if bytes.len() < 7 || &bytes[..7] != magic {
            return Err(Error::format(what, "bad magic"));
        }
        Ok(Reader { bytes, pos: 7, what })
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| Error::format(self.what, "truncated"))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<usize> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()) as usize)
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn flag(&mut self) -> Result<bool> {
        match self.u32()? {
            0 => Ok(false),
            1 => Ok(true),
            v => Err(Error::format(self.what, format!("flag value {v}"))),
        }
    }

    fn matrix(&mut self) -> Result<DMatrix<f64>> {
        let rows = self.u32()?;
        let cols = self.u32()?;
        let len = rows
            .checked_mul(cols)
            .filter(|&l| l.saturating_mul(4) <= self.bytes.len() - self.pos)
            .ok_or_else(|| Error::format(self.what, "matrix block exceeds file"))?;
        let raw = self.take(len * 4)?;
        let mut values = Vec::with_capacity(len);
        for c in raw.chunks_exact(4) {
            let v = f32::from_le_bytes(c.try_into().unwrap());
            if !v.is_finite() {
                return Err(Error::NonFinite("matrix block"));
            }
            values.push(f64::from(v));
        }
        Ok(DMatrix::from_vec(rows, cols, values))
    }

    fn shaped(&mut self, rows: usize, cols: usize) -> Result<DMatrix<f64>> {
        let m = self.matrix()?;
        if m.shape() != (rows, cols) {
            return Err(Error::format(
                self.what,
                format!("expected a {rows}x{cols} block, found {}x{}", m.nrows(), m.ncols()),
            ));
        }
        Ok(m)
    }

    fn row(&mut self) -> Result<Vec<f64>> {
        let m = self.matrix()?;
        if m.nrows() != 1 && !m.is_empty() {
            return Err(Error::format(self.what, "expected a row block"));
        }
        Ok(m.iter().copied().collect())
    }

    fn scalar(&mut self) -> Result<f64> {
        Ok(self.shaped(1, 1)?[(0, 0)])
    }

    fn finish(&self) -> Result<()> {
        if self.pos != self.bytes.len() {
            return Err(Error::format(
                self.what,
                format!("{} trailing bytes", self.bytes.len() - self.pos),
            ));
        }
        Ok(())
    }
}

fn write_subspace(w: &mut Writer, cb: &SubspaceCodebooks) -> Result<()> {
    w.u32(cb.m())?;
    w.u32(cb.arity)?;
    for &d in &cb.subspace_dims {
        w.u32(d)?;
    }
    for book in &cb.codebooks {
        w.matrix(book)?;
    }
    match &cb.rotation {
        Some(r) => {
            w.u32(1)?;
            w.matrix(r)?;
        }
        None => w.u32(0)?,
    }
    match &cb.index_values {
        Some(values) => {
            w.u32(1)?;
            for v in values {
                w.row(v)?;
            }
        }
        None => w.u32(0)?,
    }
    w.row(&cb.objective_history)
}

fn read_subspace(r: &mut Reader<'_>) -> Result<SubspaceCodebooks> {
    let m = r.u32()?;
    let arity = r.u32()?;
    if m == 0 || arity == 0 || m > r.bytes.len() {
        return Err(Error::format("model", format!("invalid subspace shape m={m} n={arity}")));
    }
    let dims = (0..m).map(|_| r.u32()).collect::<Result<Vec<_>>>()?;
    if dims.contains(&0) {
        return Err(Error::format("model", "empty subspace"));
    }
    let codebooks = dims
        .iter()
        .map(|&d| r.shaped(d, arity))
        .collect::<Result<Vec<_>>>()?;
    let d: usize = dims.iter().sum();
    let rotation = if r.flag()? { Some(r.shaped(d, d)?) } else { None };
    let index_values = if r.flag()? {
        let values = (0..m).map(|_| r.row()).collect::<Result<Vec<_>>>()?;
        if values.iter().any(|v| v.len() != arity) {
            return Err(Error::format("model", "index values length differs from arity"));
        }
        Some(values)
    } else {
        None
    };
    Ok(SubspaceCodebooks {
        subspace_dims: dims,
        arity,
        codebooks,
        rotation,
        index_values,
        objective_history: r.row()?,
    })
}

pub fn encode_model(model: &Model) -> Result<Vec<u8>> {
    let mut w = Writer::default();
    w.buf.extend_from_slice(MODEL_MAGIC);
    match model {
        Model::Lsq(m) => {
            w.u32(TAG_LSQ)?;
            w.u32(m.arity())?;
            w.scalar(m.lambda)?;
            w.matrix(&m.mapping)?;
            w.matrix(&m.reconstruction)?;
            w.row(&m.objective_history)?;
            w.u32(m.used_pseudoinverse as usize)?;
            w.u32(m.rejected_mapping_steps)?;
        }
        Model::Itq(m) => {
            w.u32(TAG_ITQ)?;
            w.matrix(&m.projection)?;
            w.matrix(&m.rotation)?;
            w.scalar(m.scale)?;
            w.row(&m.loss_history)?;
        }
        Model::Pq(cb) => {
            w.u32(TAG_PQ)?;
            write_subspace(&mut w, cb)?;
        }
        Model::Ckmeans(cb) => {
            w.u32(TAG_CKMEANS)?;
            write_subspace(&mut w, cb)?;
        }
        Model::Okmeans(cb) => {
            w.u32(TAG_OKMEANS)?;
            write_subspace(&mut w, cb)?;
        }
    }
    Ok(w.buf)
}

pub fn decode_model(bytes: &[u8]) -> Result<Model> {
    let mut r = Reader::new(bytes, MODEL_MAGIC, "model")?;
    let model = match r.u32()? {
        TAG_LSQ => {
            let arity = r.u32()?;
            let quantizer =
                UniformQuantizer::new(arity).map_err(|_| Error::format("model", format!("arity {arity}")))?;
            let lambda = r.scalar()?;
            let mapping = r.matrix()?;
            let reconstruction = r.shaped(mapping.ncols(), mapping.nrows())?;
            if mapping.is_empty() {
                return Err(Error::format("model", "empty LSQ mapping"));
            }
            Model::Lsq(LsqModel {
                mapping,
                reconstruction,
                quantizer,
                lambda,
                objective_history: r.row()?,
                used_pseudoinverse: r.flag()?,
                rejected_mapping_steps: r.u32()?,
            })
        }
        TAG_ITQ => {
            let projection = r.matrix()?;
            let bits = projection.ncols();
            if projection.is_empty() {
                return Err(Error::format("model", "empty ITQ projection"));
            }
            Model::Itq(ItqModel {
                projection,
                rotation: r.shaped(bits, bits)?,
                scale: r.scalar()?,
                loss_history: r.row()?,
            })
        }
        TAG_PQ => Model::Pq(read_subspace(&mut r)?),
        TAG_CKMEANS => Model::Ckmeans(read_subspace(&mut r)?),
        TAG_OKMEANS => {
            let cb = read_subspace(&mut r)?;
            if cb.arity != 2 {
                return Err(Error::format("model", "okmeans model must have 2 centers per subspace"));
            }
            Model::Okmeans(cb)
        }
        tag => return Err(Error::format("model", format!("unknown method tag {tag}"))),
    };
    r.finish()?;
    Ok(model)
}

fn write_codes(w: &mut Writer, codes: &Codes) -> Result<()> {
    match codes {
        Codes::Nary(c) => {
            w.u32(KIND_NARY)?;
            w.u32(c.m())?;
            w.u32(c.arity())?;
            w.u32(c.count())?;
            for &v in c.as_slice() {
                w.u32(v as usize)?;
            }
        }
        Codes::Binary(c) => {
            w.u32(KIND_BINARY)?;
            w.u32(c.bits())?;
            w.u32(c.count())?;
            for &word in c.as_words() {
                w.buf.extend_from_slice(&word.to_le_bytes());
            }
        }
    }
    Ok(())
}

fn read_codes(r: &mut Reader<'_>) -> Result<Codes> {
    let bad = |e: Error| Error::format("codes", e.to_string());
    match r.u32()? {
        KIND_NARY => {
            let m = r.u32()?;
            let n = r.u32()?;
            let count = r.u32()?;
            let len = m
                .checked_mul(count)
                .filter(|&l| l.saturating_mul(4) <= r.bytes.len() - r.pos)
                .ok_or_else(|| Error::format("codes", "payload exceeds file"))?;
            let values = (0..len).map(|_| r.u32().map(|v| v as u32)).collect::<Result<Vec<_>>>()?;
            Ok(Codes::Nary(NaryCodeSet::new(m, n, values).map_err(bad)?))
        }
        KIND_BINARY => {
            let bits = r.u32()?;
            let count = r.u32()?;
            let words = bits.div_ceil(64);
            let len = words
                .checked_mul(count)
                .filter(|&l| l.saturating_mul(8) <= r.bytes.len() - r.pos)
                .ok_or_else(|| Error::format("codes", "payload exceeds file"))?;
            let values = (0..len).map(|_| r.u64()).collect::<Result<Vec<_>>>()?;
            Ok(Codes::Binary(BinaryCodeSet::from_words(bits, values).map_err(bad)?))
        }
        k => Err(Error::format("codes", format!("unknown code kind {k}"))),
    }
}

pub fn encode_codes(codes: &Codes) -> Result<Vec<u8>> {
    let mut w = Writer::default();
    w.buf.extend_from_slice(CODES_MAGIC);
    write_codes(&mut w, codes)?;
    Ok(w.buf)
}

pub fn decode_codes(bytes: &[u8]) -> Result<Codes> {
    let mut r = Reader::new(bytes, CODES_MAGIC, "codes")?;
    let codes = read_codes(&mut r)?;
    r.finish()?;
    Ok(codes)
}

pub fn encode_index(index: &MultiIndexHash) -> Result<Vec<u8>> {
    let mut w = Writer::default();
    w.buf.extend_from_slice(INDEX_MAGIC);
    match index.kind() {
        CodeKind::Nary { arity } => {
            w.u32(KIND_NARY)?;
            w.u32(arity)?;
        }
        CodeKind::Binary { chunk_bits } => {
            w.u32(KIND_BINARY)?;
            w.u32(chunk_bits)?;
        }
    }
    w.u32(index.table_count())?;
    for table in index.tables() {
        w.u32(table.len())?;
    }
    for table in index.tables() {
        for list in table {
            w.u32(list.len())?;
            for &id in list {
                w.u32(id as usize)?;
            }
        }
    }
    let base = match index.base() {
        BaseCodes::Nary(c) => Codes::Nary(c.clone()),
        BaseCodes::Binary(c) => Codes::Binary(c.clone()),
    };
    write_codes(&mut w, &base)?;
    Ok(w.buf)
}

pub fn decode_index(bytes: &[u8]) -> Result<MultiIndexHash> {
    let mut r = Reader::new(bytes, INDEX_MAGIC, "index")?;
    let kind = match r.u32()? {
        KIND_NARY => CodeKind::Nary { arity: r.u32()? },
        KIND_BINARY => CodeKind::Binary { chunk_bits: r.u32()? },
        k => return Err(Error::format("index", format!("unknown code kind {k}"))),
    };
    let tables = r.u32()?;
    if tables > r.bytes.len() / 4 {
        return Err(Error::format("index", "table count exceeds file"));
    }
    let buckets = (0..tables).map(|_| r.u32()).collect::<Result<Vec<_>>>()?;
    let mut lists = Vec::with_capacity(tables);
    for &b in &buckets {
        if b > r.bytes.len() / 4 {
            return Err(Error::format("index", "bucket count exceeds file"));
        }
        let mut table = Vec::with_capacity(b);
        for _ in 0..b {
            let len = r.u32()?;
            if len > (r.bytes.len() - r.pos) / 4 {
                return Err(Error::format("index", "posting list exceeds file"));
            }
            table.push((0..len).map(|_| r.u32().map(|v| v as u32)).collect::<Result<Vec<_>>>()?);
        }
        lists.push(table);
    }
    let base = match read_codes(&mut r)? {
        Codes::Nary(c) => BaseCodes::Nary(c),
        Codes::Binary(c) => BaseCodes::Binary(c),
    };
    r.finish()?;
    MultiIndexHash::from_parts(kind, lists, base)
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes)?;
    Ok(())
}

pub fn save_model(model: &Model, path: impl AsRef<Path>) -> Result<()> {
    write_file(path.as_ref(), &encode_model(model)?)
}

pub fn load_model(path: impl AsRef<Path>) -> Result<Model> {
    decode_model(&fs::read(path)?)
}

pub fn save_codes(codes: &Codes, path: impl AsRef<Path>) -> Result<()> {
    write_file(path.as_ref(), &encode_codes(codes)?)
}

pub fn load_codes(path: impl AsRef<Path>) -> Result<Codes> {
    decode_codes(&fs::read(path)?)
}

pub fn save_index(index: &MultiIndexHash, path: impl AsRef<Path>) -> Result<()> {
    write_file(path.as_ref(), &encode_index(index)?)
}

pub fn load_index(path: impl AsRef<Path>) -> Result<MultiIndexHash> {
    decode_index(&fs::read(path)?)
}
