use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Method {
    LsqNary,
    LsqBinary,
    Itq,
    Pq,
    Ckmeans,
    Okmeans,
}

impl Method {
    pub const ALL: [Method; 6] = [
        Method::LsqNary,
        Method::LsqBinary,
        Method::Itq,
        Method::Pq,
        Method::Ckmeans,
        Method::Okmeans,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::LsqNary => "lsq-nary",
            Method::LsqBinary => "lsq-binary",
            Method::Itq => "itq",
            Method::Pq => "pq",
            Method::Ckmeans => "ckmeans",
            Method::Okmeans => "okmeans",
        }
    }

    /// Methods whose codes are packed bit strings.
    pub fn is_binary(self) -> bool {
        matches!(self, Method::LsqBinary | Method::Itq | Method::Okmeans)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| Error::param(format!("unknown method {s:?}")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Strategy {
    DistanceEstimation,
    SubsetIndexing,
}

impl Strategy {
    pub fn as_str(self) -> &'static str {
        match self {
            Strategy::DistanceEstimation => "distance-estimation",
            Strategy::SubsetIndexing => "subset-indexing",
        }
    }
}

impl FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "distance-estimation" => Ok(Strategy::DistanceEstimation),
            "subset-indexing" => Ok(Strategy::SubsetIndexing),
            _ => Err(Error::param(format!("unknown strategy {s:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum DataSource {
    /// One seeded draw split into train, base and query columns in that
    /// order.
    Synthetic {
        dim: usize,
        n_train: usize,
        n_base: usize,
        n_query: usize,
        clusters: usize,
        spread: f64,
    },
    Files {
        train: PathBuf,
        base: PathBuf,
        query: PathBuf,
    },
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub data: DataSource,
    pub method: Method,
    pub strategy: Strategy,
    pub bit_budget: usize,
    /// `log2 n` for n-ary codes; the index chunk width for binary codes.
    pub bits_per_dim: usize,
    pub lambda: f64,
    pub iters: usize,
    pub tol: f64,
    pub seed: u64,
    /// Candidates requested from the index under subset indexing.
    pub k: usize,
    pub r_grid: Vec<usize>,
    pub normalize: bool,
    /// Sweep axes used by `bench`; ignored by a single experiment.
    pub sweep_methods: Vec<Method>,
    pub sweep_budgets: Vec<usize>,
    pub sweep_bits_per_dim: Vec<usize>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            data: DataSource::Synthetic {
                dim: 32,
                n_train: 5000,
                n_base: 10_000,
                n_query: 500,
                clusters: 50,
                spread: 0.1,
            },
            method: Method::LsqNary,
            strategy: Strategy::DistanceEstimation,
            bit_budget: 64,
            bits_per_dim: 4,
            lambda: 1.0,
            iters: 50,
            tol: 1e-6,
            seed: 1,
            k: 100,
            r_grid: super::default_r_grid(),
            normalize: true,
            sweep_methods: vec![Method::LsqNary, Method::LsqBinary, Method::Ckmeans],
            sweep_budgets: vec![64, 128, 256],
            sweep_bits_per_dim: (1..=8).collect(),
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::param(format!("bad value {value:?} for {key}")))
}

fn parse_list<T: FromStr>(key: &str, value: &str) -> Result<Vec<T>> {
    value
        .split(',')
        .map(|v| v.trim())
        .filter(|v| !v.is_empty())
        .map(|v| parse(key, v))
        .collect()
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        _ => Err(Error::param(format!("bad value {value:?} for {key}"))),
    }
}

impl ExperimentConfig {
    /// Parses `key = value` lines; `#` starts a comment. Unset keys keep
    /// their defaults and unknown keys are rejected.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = ExperimentConfig::default();
        let (mut dim, mut n_train, mut n_base, mut n_query, mut clusters, mut spread) = match cfg.data {
            DataSource::Synthetic {
                dim,
                n_train,
                n_base,
                n_query,
                clusters,
                spread,
            } => (dim, n_train, n_base, n_query, clusters, spread),
            DataSource::Files { .. } => unreachable!(),
        };
        let (mut train, mut base, mut query) = (None, None, None);

        for (no, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::param(format!("line {}: expected key=value", no + 1)))?;
            let (key, value) = (key.trim(), value.trim());
            match key {
                "method" => cfg.method = value.parse()?,
                "strategy" => cfg.strategy = value.parse()?,
                "bit_budget" => cfg.bit_budget = parse(key, value)?,
                "bits_per_dim" => cfg.bits_per_dim = parse(key, value)?,
                "lambda" => cfg.lambda = parse(key, value)?,
                "iters" => cfg.iters = parse(key, value)?,
                "tol" => cfg.tol = parse(key, value)?,
                "seed" => cfg.seed = parse(key, value)?,
                "k" => cfg.k = parse(key, value)?,
                "r_grid" => cfg.r_grid = parse_list(key, value)?,
                "normalize" => cfg.normalize = parse_bool(key, value)?,
                "dim" => dim = parse(key, value)?,
                "n_train" => n_train = parse(key, value)?,
                "n_base" => n_base = parse(key, value)?,
                "n_query" => n_query = parse(key, value)?,
                "clusters" => clusters = parse(key, value)?,
                "spread" => spread = parse(key, value)?,
                "train_file" => train = Some(PathBuf::from(value)),
                "base_file" => base = Some(PathBuf::from(value)),
                "query_file" => query = Some(PathBuf::from(value)),
                "methods" => {
                    cfg.sweep_methods = value
                        .split(',')
                        .map(str::trim)
                        .filter(|v| !v.is_empty())
                        .map(str::parse)
                        .collect::<Result<_>>()?
                }
                "budgets" => cfg.sweep_budgets = parse_list(key, value)?,
                "bits_per_dim_list" => cfg.sweep_bits_per_dim = parse_list(key, value)?,
                _ => return Err(Error::param(format!("line {}: unknown key {key:?}", no + 1))),
            }
        }

        cfg.data = match (train, base, query) {
            (None, None, None) => DataSource::Synthetic {
                dim,
                n_train,
                n_base,
                n_query,
                clusters,
                spread,
            },
            (Some(train), Some(base), Some(query)) => DataSource::Files { train, base, query },
            _ => return Err(Error::param("train_file, base_file and query_file go together")),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.bits_per_dim == 0 || self.bits_per_dim > 16 {
            return Err(Error::param(format!("bits_per_dim must be in 1..=16, got {}", self.bits_per_dim)));
        }
        if self.code_len() == 0 {
            return Err(Error::param(format!(
                "bit budget {} leaves no room for {}-bit dimensions",
                self.bit_budget, self.bits_per_dim
            )));
        }
        if !(self.lambda.is_finite() && self.lambda >= 0.0) {
            return Err(Error::param("lambda must be >= 0"));
        }
        if self.iters == 0 || self.k == 0 {
            return Err(Error::param("iters and k must be positive"));
        }
        super::check_grid(&self.r_grid)?;
        if let DataSource::Synthetic {
            dim,
            n_train,
            n_base,
            n_query,
            clusters,
            spread,
        } = &self.data
        {
            if *dim == 0 || *n_train == 0 || *n_base == 0 || *n_query == 0 || *clusters == 0 {
                return Err(Error::param("dataset sizes must be positive"));
            }
            if !(spread.is_finite() && *spread >= 0.0) {
                return Err(Error::param("spread must be >= 0"));
            }
        }
        Ok(())
    }

    /// Code dimensions `m = floor(bit_budget / bits_per_dim)`.
    pub fn code_len(&self) -> usize {
        self.bit_budget / self.bits_per_dim
    }

    /// Bits actually stored per point, `m * bits_per_dim`.
    pub fn effective_bits(&self) -> usize {
        self.code_len() * self.bits_per_dim
    }

    /// Quantizer levels or clusters per subspace for n-ary methods.
    pub fn arity(&self) -> usize {
        1 << self.bits_per_dim
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_and_rejects() {
        let cfg = ExperimentConfig::parse(
            "# comment\nmethod = ckmeans\nstrategy=subset-indexing\nbit_budget=64\nbits_per_dim=5\n\
             r_grid=1,10,100\nn_base=300 # trailing\nmethods=pq,itq\n",
        )
        .unwrap();
        assert_eq!(cfg.method, Method::Ckmeans);
        assert_eq!(cfg.strategy, Strategy::SubsetIndexing);
        assert_eq!(cfg.code_len(), 12);
        assert_eq!(cfg.effective_bits(), 60);
        assert_eq!(cfg.r_grid, vec![1, 10, 100]);
        assert_eq!(cfg.sweep_methods, vec![Method::Pq, Method::Itq]);
        assert!(matches!(cfg.data, DataSource::Synthetic { n_base: 300, .. }));

        assert!(ExperimentConfig::parse("colour=red").is_err());
        assert!(ExperimentConfig::parse("method=lsh").is_err());
        assert!(ExperimentConfig::parse("bits_per_dim=9\nbit_budget=8").is_err());
        assert!(ExperimentConfig::parse("train_file=a").is_err());
        assert!(ExperimentConfig::parse("r_grid=4,2").is_err());
        assert!(ExperimentConfig::parse("just words").is_err());
    }
}
