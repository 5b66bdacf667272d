use std::fmt::Write as _;
use std::time::Instant;

use rayon::prelude::*;

use super::config::{DataSource, ExperimentConfig, Method, Strategy};
use super::{auc_recall, recall_at_r, RecallCurve};
use crate::dataset::{
    apply_preprocess, brute_force_knn, fit_preprocess, generate_synthetic, load_matrix, DataMatrix,
    MatrixFormat,
};
use crate::distance::{exhaustive_rank, RankedList};
use crate::encoders::{
    codes_as_features, train_ckmeans, train_itq, train_lsq, train_pq, FeatureSource, LsqModel, LsqParams,
    SubspaceCodebooks,
};
use crate::error::{Error, Result};
use crate::mih::{build_binary_index, build_nary_index, MultiIndexHash};
use crate::model::{Codes, Model};
use crate::quantcore::quantization_error;

/// Preprocessed train, base and query matrices.
#[derive(Clone, Debug)]
pub struct Split {
    pub train: DataMatrix,
    pub base: DataMatrix,
    pub query: DataMatrix,
}

impl Split {
    /// Loads or draws the data and preprocesses all three parts with the
    /// model fit on the train part.
    pub fn prepare(cfg: &ExperimentConfig) -> Result<Self> {
        let (train, base, query) = match &cfg.data {
            DataSource::Synthetic {
                dim,
                n_train,
                n_base,
                n_query,
                clusters,
                spread,
            } => {
                let all = generate_synthetic(cfg.seed, *dim, n_train + n_base + n_query, *clusters, *spread)?;
                (
                    all.columns(0, *n_train)?,
                    all.columns(*n_train, *n_base)?,
                    all.columns(n_train + n_base, *n_query)?,
                )
            }
            DataSource::Files { train, base, query } => (
                load_matrix(train, MatrixFormat::from_path(train))?,
                load_matrix(base, MatrixFormat::from_path(base))?,
                load_matrix(query, MatrixFormat::from_path(query))?,
            ),
        };
        let pre = fit_preprocess(&train, cfg.normalize);
        Ok(Split {
            train: apply_preprocess(&pre, &train)?,
            base: apply_preprocess(&pre, &base)?,
            query: apply_preprocess(&pre, &query)?,
        })
    }
}

/// Trains the configured method on `train` at the configured budget.
pub fn train_model(cfg: &ExperimentConfig, train: &DataMatrix) -> Result<Model> {
    let m = cfg.code_len();
    let bits = cfg.effective_bits();
    let lsq = |code_len, arity| {
        train_lsq(
            train,
            &LsqParams {
                code_len,
                arity,
                lambda: cfg.lambda,
                max_iters: cfg.iters,
                tol: cfg.tol,
            },
        )
    };
    Ok(match cfg.method {
        Method::LsqNary => Model::Lsq(lsq(m, cfg.arity())?),
        Method::LsqBinary => Model::Lsq(lsq(bits, 2)?),
        Method::Itq => Model::Itq(train_itq(train, bits, cfg.iters, cfg.seed)?),
        Method::Pq => Model::Pq(train_pq(train, m, cfg.arity(), cfg.seed)?),
        Method::Ckmeans => Model::Ckmeans(train_ckmeans(train, m, cfg.arity(), cfg.iters, cfg.seed)?),
        Method::Okmeans => Model::Okmeans(train_ckmeans(train, bits, 2, cfg.iters, cfg.seed)?),
    })
}

#[derive(Clone, Debug)]
pub struct ExperimentOutput {
    pub curve: RecallCurve,
    pub auc: f64,
    /// `||X - reconstruct(encode(X))||^2` on the train part.
    pub train_error: f64,
    pub report: String,
    pub csv: String,
    pub model: Model,
    pub index: Option<MultiIndexHash>,
    /// Wall-clock seconds per stage; kept out of the report.
    pub timings: Vec<(&'static str, f64)>,
}

struct Retrieval {
    lists: Vec<RankedList>,
    mean_candidates: Option<f64>,
    mean_expansions: Option<f64>,
    index: Option<MultiIndexHash>,
}

fn retrieve(cfg: &ExperimentConfig, model: &Model, split: &Split, base: &Codes, queries: &Codes) -> Result<Retrieval> {
    let ctx = model.metric_context();
    let metric = ctx.metric();
    match cfg.strategy {
        Strategy::DistanceEstimation => {
            let r_max = cfg.r_grid.last().copied().unwrap_or(1).min(base.count());
            let lists = (0..queries.count())
                .into_par_iter()
                .map(|q| exhaustive_rank(queries.code(q), base.as_set(), metric, r_max))
                .collect::<Result<Vec<_>>>()?;
            Ok(Retrieval {
                lists,
                mean_candidates: None,
                mean_expansions: None,
                index: None,
            })
        }
        Strategy::SubsetIndexing => {
            let index = match base {
                Codes::Nary(c) => build_nary_index(c)?,
                Codes::Binary(c) => build_binary_index(c, cfg.bits_per_dim)?,
            };
            let results = (0..queries.count())
                .into_par_iter()
                .map(|q| {
                    let point = split.query.column(q).into_owned();
                    let costs = model.probe_costs(&point, &index)?;
                    index.query(queries.code(q), cfg.k, costs.as_ref(), metric)
                })
                .collect::<Result<Vec<_>>>()?;
            let nq = results.len() as f64;
            let cand = results.iter().map(|r| r.candidates as f64).sum::<f64>() / nq;
            let exp = results.iter().map(|r| r.expansions as f64).sum::<f64>() / nq;
            Ok(Retrieval {
                lists: results.into_iter().map(|r| r.list).collect(),
                mean_candidates: Some(cand),
                mean_expansions: Some(exp),
                index: Some(index),
            })
        }
    }
}

pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    cfg.validate()?;
    let split = Split::prepare(cfg)?;
    run_on_split(cfg, &split)
}

/// [`run_experiment`] on already prepared data.
pub fn run_on_split(cfg: &ExperimentConfig, split: &Split) -> Result<ExperimentOutput> {
    cfg.validate()?;
    let mut timings = Vec::new();
    let clock = Instant::now();
    let model = train_model(cfg, &split.train)?;
    timings.push(("train", clock.elapsed().as_secs_f64()));

    let clock = Instant::now();
    let train_codes = model.encode(&split.train)?;
    let train_error = quantization_error(&split.train, &model.reconstruct(&train_codes)?)?;
    let base = model.encode(&split.base)?;
    let queries = model.encode(&split.query)?;
    timings.push(("encode", clock.elapsed().as_secs_f64()));

    let clock = Instant::now();
    let truth = brute_force_knn(&split.base, &split.query, 1)?;
    timings.push(("ground_truth", clock.elapsed().as_secs_f64()));

    let clock = Instant::now();
    let retrieval = retrieve(cfg, &model, split, &base, &queries)?;
    timings.push(("retrieve", clock.elapsed().as_secs_f64()));

    let recall = recall_at_r(&retrieval.lists, &truth, &cfg.r_grid)?;
    let auc = auc_recall(&cfg.r_grid, &recall)?;
    let curve = RecallCurve {
        r_grid: cfg.r_grid.clone(),
        recall,
        method: cfg.method.as_str().to_string(),
        bit_budget: cfg.bit_budget,
    };

    let report = render_report(cfg, split, &model, &base, train_error, auc, &curve, &retrieval);
    let mut csv = String::from("R,recall\n");
    for (r, v) in curve.r_grid.iter().zip(&curve.recall) {
        writeln!(csv, "{r},{v:.6}").unwrap();
    }
    Ok(ExperimentOutput {
        curve,
        auc,
        train_error,
        report,
        csv,
        model,
        index: retrieval.index,
        timings,
    })
}

#[allow(clippy::too_many_arguments)]
fn render_report(
    cfg: &ExperimentConfig,
    split: &Split,
    model: &Model,
    base: &Codes,
    train_error: f64,
    auc: f64,
    curve: &RecallCurve,
    retrieval: &Retrieval,
) -> String {
    let mut out = String::new();
    let mut kv = |k: &str, v: String| writeln!(out, "{k}={v}").unwrap();
    kv("report", "nary-eval/1".into());
    kv("method", cfg.method.as_str().into());
    kv("model", model.method_name().into());
    kv("strategy", cfg.strategy.as_str().into());
    kv("bit_budget", cfg.bit_budget.to_string());
    kv("bits_per_dim", cfg.bits_per_dim.to_string());
    kv("code_len", cfg.code_len().to_string());
    kv("bits_per_code", format!("{}", base.bits_per_code()));
    match base {
        Codes::Nary(c) => kv("arity", c.arity().to_string()),
        Codes::Binary(_) => kv("arity", "2".into()),
    }
    kv("lambda", cfg.lambda.to_string());
    kv("iters", cfg.iters.to_string());
    kv("tol", cfg.tol.to_string());
    kv("seed", cfg.seed.to_string());
    kv("k", cfg.k.to_string());
    kv("normalize", cfg.normalize.to_string());
    match &cfg.data {
        DataSource::Synthetic { clusters, spread, .. } => {
            kv("data", "synthetic".into());
            kv("clusters", clusters.to_string());
            kv("spread", spread.to_string());
        }
        DataSource::Files { train, base, query } => {
            kv("data", "files".into());
            kv("train_file", train.display().to_string());
            kv("base_file", base.display().to_string());
            kv("query_file", query.display().to_string());
        }
    }
    kv("dim", split.train.dim().to_string());
    kv("n_train", split.train.count().to_string());
    kv("n_base", split.base.count().to_string());
    kv("n_query", split.query.count().to_string());
    kv("recall_definition", "fraction of queries whose true 1-NN is within the top R".into());
    kv("auc_axis", "trapezoid over log2(R), divided by the log2 span of the grid".into());
    kv("train_error", format!("{train_error:.9e}"));
    if let Some(c) = retrieval.mean_candidates {
        kv("mean_candidates", format!("{c:.6}"));
    }
    if let Some(e) = retrieval.mean_expansions {
        kv("mean_expansions", format!("{e:.6}"));
    }
    kv("auc", format!("{auc:.6}"));
    for (r, v) in curve.r_grid.iter().zip(&curve.recall) {
        kv(&format!("recall@{r}"), format!("{v:.6}"));
    }
    out
}

/// One cell of a bench sweep.
#[derive(Clone, Debug, PartialEq)]
pub struct BenchRow {
    pub method: Method,
    pub bit_budget: usize,
    pub bits_per_dim: usize,
    pub code_len: usize,
    pub effective_bits: usize,
    /// `Err` holds the reason when the combination fails to train or evaluate.
    pub auc: std::result::Result<f64, String>,
}

/// Sweeps methods, budgets and bits per dimension on one prepared split.
/// Combinations the data cannot support (say `m > D`) are reported as
/// skipped.
pub fn bench(cfg: &ExperimentConfig) -> Result<Vec<BenchRow>> {
    cfg.validate()?;
    let split = Split::prepare(cfg)?;
    let mut rows = Vec::new();
    for &method in &cfg.sweep_methods {
        for &budget in &cfg.sweep_budgets {
            for &bpd in &cfg.sweep_bits_per_dim {
                let cell = ExperimentConfig {
                    method,
                    bit_budget: budget,
                    bits_per_dim: bpd,
                    ..cfg.clone()
                };
                let auc = match cell.validate().and_then(|_| run_on_split(&cell, &split)) {
                    Ok(out) => Ok(out.auc),
                    Err(Error::InvalidParameter(msg)) => Err(msg),
                    Err(e) => return Err(e),
                };
                rows.push(BenchRow {
                    method,
                    bit_budget: budget,
                    bits_per_dim: bpd,
                    code_len: cell.code_len(),
                    effective_bits: cell.effective_bits(),
                    auc,
                });
            }
        }
    }
    Ok(rows)
}

impl BenchRow {
    pub fn csv_header() -> &'static str {
        "method,bit_budget,bits_per_dim,code_len,effective_bits,auc,note"
    }

    pub fn csv_line(&self) -> String {
        let (auc, note) = match &self.auc {
            Ok(a) => (format!("{a:.6}"), String::new()),
            Err(msg) => (String::new(), format!("skipped: {}", msg.replace(',', ";"))),
        };
        format!(
            "{},{},{},{},{},{auc},{note}",
            self.method, self.bit_budget, self.bits_per_dim, self.code_len, self.effective_bits
        )
    }
}

/// Per-iteration training objective of a binary coder on `x`, starting
/// with the state after initialization.
///
/// LSQ reports its regularized objective after every full iteration, ITQ
/// its quantization loss in the projected space, OK-means its
/// reconstruction error.
pub fn convergence_trace(
    method: Method,
    x: &DataMatrix,
    bits: usize,
    lambda: f64,
    iters: usize,
    seed: u64,
) -> Result<Vec<(usize, f64)>> {
    match method {
        Method::LsqBinary => {
            let model = train_lsq(
                x,
                &LsqParams {
                    code_len: bits,
                    arity: 2,
                    lambda,
                    max_iters: iters,
                    tol: 0.0,
                },
            )?;
            // history alternates V, W, V, ...; a full iteration ends on a V step
            Ok(model
                .objective_history
                .iter()
                .step_by(2)
                .copied()
                .enumerate()
                .map(|(i, v)| (i + 1, v))
                .collect())
        }
        Method::Itq => Ok(train_itq(x, bits, iters, seed)?
            .loss_history
            .into_iter()
            .enumerate()
            .collect()),
        Method::Okmeans => {
            let cb = train_ckmeans(x, bits, 2, iters, seed)?;
            // start, then three sub-steps per round
            let h = &cb.objective_history;
            let rounds = (h.len() - 1) / 3;
            Ok((0..=rounds).map(|r| (r, h[3 * r])).collect())
        }
        other => Err(Error::param(format!("no convergence trace for {other}"))),
    }
}

/// How codes become feature vectors for [`embedding_classification`].
#[derive(Clone, Copy, Debug)]
pub enum FeatureEncoder<'a> {
    /// LSQ level values.
    Lsq(&'a LsqModel),
    /// CK-means codes through refined index values (the codebooks must
    /// carry them).
    CkRefined(&'a SubspaceCodebooks),
    /// CK-means cluster indices spread over `[-1, 1]` as they are.
    CkRaw(&'a SubspaceCodebooks),
    /// The input features unchanged.
    Identity,
}

impl FeatureEncoder<'_> {
    fn features(&self, x: &DataMatrix) -> Result<DataMatrix> {
        match *self {
            FeatureEncoder::Lsq(m) => codes_as_features(&m.encode(x)?, FeatureSource::LsqLevels(&m.quantizer)),
            FeatureEncoder::CkRefined(cb) => codes_as_features(&cb.encode(x)?, FeatureSource::CkRefined(cb)),
            FeatureEncoder::CkRaw(cb) => codes_as_features(&cb.encode(x)?, FeatureSource::RawIndex),
            FeatureEncoder::Identity => Ok(x.clone()),
        }
    }
}

/// 1-NN accuracy of `test` against `train` in the encoder's feature space.
pub fn embedding_classification(
    train: &DataMatrix,
    train_labels: &[usize],
    test: &DataMatrix,
    test_labels: &[usize],
    encoder: FeatureEncoder<'_>,
) -> Result<f64> {
    if train_labels.len() != train.count() {
        return Err(Error::dims("train labels", train.count(), train_labels.len()));
    }
    if test_labels.len() != test.count() {
        return Err(Error::dims("test labels", test.count(), test_labels.len()));
    }
    let f_train = encoder.features(train)?;
    let f_test = encoder.features(test)?;
    let nn = brute_force_knn(&f_train, &f_test, 1)?;
    let correct = nn
        .iter()
        .zip(test_labels)
        .filter(|(l, &label)| train_labels[l.ids[0]] == label)
        .count();
    Ok(correct as f64 / test.count() as f64)
}
