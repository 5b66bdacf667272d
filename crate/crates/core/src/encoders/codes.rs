use crate::error::{Error, Result};

/// `N` codewords of `m` entries each in `1..=n`, stored codeword-major.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NaryCodeSet {
    m: usize,
    n: usize,
    codes: Vec<u32>,
}

impl NaryCodeSet {
    pub fn new(m: usize, n: usize, codes: Vec<u32>) -> Result<Self> {
        if m == 0 || n == 0 {
            return Err(Error::param("code length and arity must be positive"));
        }
        if !codes.len().is_multiple_of(m) {
            return Err(Error::format(
                "n-ary codes",
                format!("{} entries is not a multiple of m = {m}", codes.len()),
            ));
        }
        if let Some(bad) = codes.iter().find(|&&c| c == 0 || c as usize > n) {
            return Err(Error::format("n-ary codes", format!("entry {bad} outside 1..={n}")));
        }
        Ok(NaryCodeSet { m, n, codes })
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn arity(&self) -> usize {
        self.n
    }

    pub fn count(&self) -> usize {
        self.codes.len() / self.m
    }

    pub fn code(&self, j: usize) -> &[u32] {
        &self.codes[j * self.m..(j + 1) * self.m]
    }

    pub fn as_slice(&self) -> &[u32] {
        &self.codes
    }

    pub fn iter(&self) -> impl Iterator<Item = &[u32]> {
        self.codes.chunks_exact(self.m)
    }

    /// Storage cost of one codeword, `m * log2(n)` bits.
    pub fn bits_per_code(&self) -> f64 {
        self.m as f64 * (self.n as f64).log2()
    }

    /// Reads a 2-ary code set as packed bits (level 1 -> 0, level 2 -> 1).
    pub fn to_binary(&self) -> Result<BinaryCodeSet> {
        if self.n != 2 {
            return Err(Error::Incompatible(format!(
                "only 2-ary codes convert to bits, arity is {}",
                self.n
            )));
        }
        let mut out = BinaryCodeSet::zeros(self.m, self.count());
        for (j, code) in self.iter().enumerate() {
            for (i, &c) in code.iter().enumerate() {
                if c == 2 {
                    out.set_bit(j, i);
                }
            }
        }
        Ok(out)
    }
}

/// One packed binary codeword; bit `i` lives in word `i / 64` at position
/// `i % 64`. Unused high bits of the last word are zero.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct BinaryCode {
    bits: usize,
    words: Vec<u64>,
}

pub(crate) fn words_for(bits: usize) -> usize {
    bits.div_ceil(64)
}

pub(crate) fn tail_mask(bits: usize) -> u64 {
    match bits % 64 {
        0 => u64::MAX,
        r => (1u64 << r) - 1,
    }
}

impl BinaryCode {
    pub fn from_bools(bits: &[bool]) -> Self {
        let mut words = vec![0u64; words_for(bits.len())];
        for (i, &b) in bits.iter().enumerate() {
            if b {
                words[i / 64] |= 1 << (i % 64);
            }
        }
        BinaryCode {
            bits: bits.len(),
            words,
        }
    }

    /// Parses a string of `0`/`1`, first character is bit 0.
    pub fn from_bit_str(s: &str) -> Result<Self> {
        let bools = s
            .chars()
            .map(|c| match c {
                '0' => Ok(false),
                '1' => Ok(true),
                other => Err(Error::format("bit string", format!("unexpected {other:?}"))),
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self::from_bools(&bools))
    }

    pub fn from_words(bits: usize, mut words: Vec<u64>) -> Result<Self> {
        if words.len() != words_for(bits) {
            return Err(Error::dims("binary code words", words_for(bits), words.len()));
        }
        if let Some(last) = words.last_mut() {
            *last &= tail_mask(bits);
        }
        Ok(BinaryCode { bits, words })
    }

    pub fn bits(&self) -> usize {
        self.bits
    }

    pub fn words(&self) -> &[u64] {
        &self.words
    }

    pub fn bit(&self, i: usize) -> bool {
        self.words[i / 64] >> (i % 64) & 1 == 1
    }
}

/// `N` packed codewords of `bits` bits each.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BinaryCodeSet {
    bits: usize,
    words_per_code: usize,
    words: Vec<u64>,
}

impl BinaryCodeSet {
    pub fn zeros(bits: usize, count: usize) -> Self {
        let words_per_code = words_for(bits);
        BinaryCodeSet {
            bits,
            words_per_code,
            words: vec![0; words_per_code * count],
        }
    }

    pub fn from_words(bits: usize, words: Vec<u64>) -> Result<Self> {
        if bits == 0 {
            return Err(Error::param("binary codes need at least one bit"));
        }
        let wpc = words_for(bits);
        if !words.len().is_multiple_of(wpc) {
            return Err(Error::format(
                "binary codes",
                format!("{} words is not a multiple of {wpc}", words.len()),
            ));
        }
        let mask = tail_mask(bits);
        let mut set = BinaryCodeSet {
            bits,
            words_per_code: wpc,
            words,
        };
        for chunk in set.words.chunks_exact_mut(wpc) {
            chunk[wpc - 1] &= mask;
        }
        Ok(set)
    }

    pub fn from_codes(codes: &[BinaryCode]) -> Result<Self> {
        let bits = codes.first().map(|c| c.bits).unwrap_or(0);
        if codes.iter().any(|c| c.bits != bits) {
            return Err(Error::Incompatible("binary codes of unequal length".into()));
        }
        Self::from_words(bits, codes.iter().flat_map(|c| c.words.iter().copied()).collect())
    }

    pub fn bits(&self) -> usize {
        self.bits
    }

    pub fn words_per_code(&self) -> usize {
        self.words_per_code
    }

    pub fn count(&self) -> usize {
        self.words.len() / self.words_per_code
    }

    pub fn code_words(&self, j: usize) -> &[u64] {
        &self.words[j * self.words_per_code..(j + 1) * self.words_per_code]
    }

    pub fn code(&self, j: usize) -> BinaryCode {
        BinaryCode {
            bits: self.bits,
            words: self.code_words(j).to_vec(),
        }
    }

    pub fn as_words(&self) -> &[u64] {
        &self.words
    }

    pub fn bit(&self, j: usize, i: usize) -> bool {
        self.words[j * self.words_per_code + i / 64] >> (i % 64) & 1 == 1
    }

    pub(crate) fn set_bit(&mut self, j: usize, i: usize) {
        self.words[j * self.words_per_code + i / 64] |= 1 << (i % 64);
    }

    /// Reads the bits as an n-ary code with `n = 2^chunk_bits`: consecutive
    /// `chunk_bits`-bit groups, most significant bit first, offset to `1..=n`.
    pub fn to_nary_chunks(&self, chunk_bits: usize) -> Result<NaryCodeSet> {
        if chunk_bits == 0 || chunk_bits > 31 || !self.bits.is_multiple_of(chunk_bits) {
            return Err(Error::param(format!(
                "chunk size {chunk_bits} must divide {} bits (and be <= 31)",
                self.bits
            )));
        }
        let m = self.bits / chunk_bits;
        let mut codes = Vec::with_capacity(m * self.count());
        for j in 0..self.count() {
            for t in 0..m {
                codes.push(chunk_key(self.code_words(j), t, chunk_bits) + 1);
            }
        }
        NaryCodeSet::new(m, 1 << chunk_bits, codes)
    }
}

/// Integer value of chunk `t` (bits `t*b .. t*b + b`), MSB first.
pub(crate) fn chunk_key(words: &[u64], t: usize, b: usize) -> u32 {
    let mut key = 0u32;
    for s in 0..b {
        let i = t * b + s;
        let bit = (words[i / 64] >> (i % 64) & 1) as u32;
        key = (key << 1) | bit;
    }
    key
}
