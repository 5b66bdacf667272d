use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use nary::dataset::{
    apply_preprocess, fit_preprocess, generate_labeled, load_matrix, save_matrix, DataMatrix, MatrixFormat,
};
use nary::eval::{bench, run_experiment, train_model, BenchRow, ExperimentConfig, Method};
use nary::io::{load_codes, load_index, load_model, save_codes, save_index, save_model};
use nary::mih::{build_binary_index, build_nary_index};
use nary::{Codes, Error, Result};

#[derive(Parser)]
#[command(name = "nary", version, about = "Binary and n-ary vector coding for nearest-neighbor retrieval")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum TrainMethod {
    /// LSQ with `2^bits-per-dim` levels; one bit per dimension gives binary codes.
    Lsq,
    Itq,
    Pq,
    Ckmeans,
    Okmeans,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum IndexKind {
    Nary,
    Binary,
}

#[derive(Subcommand)]
enum Command {
    /// Draw a synthetic Gaussian mixture.
    Gen {
        #[arg(long, default_value_t = 7)]
        seed: u64,
        #[arg(long, default_value_t = 32)]
        dim: usize,
        #[arg(long, default_value_t = 10_000)]
        count: usize,
        #[arg(long, default_value_t = 50)]
        clusters: usize,
        #[arg(long, default_value_t = 0.1)]
        spread: f64,
        #[arg(long)]
        out: PathBuf,
        /// Also write the cluster label of every point, one per line.
        #[arg(long)]
        labels_out: Option<PathBuf>,
    },
    /// Center (and sphere-normalize) data with statistics fit on another matrix.
    Preprocess {
        /// Matrix the mean is computed from.
        #[arg(long)]
        fit: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        no_normalize: bool,
    },
    /// Train a coder.
    Train {
        #[arg(long, value_enum)]
        method: TrainMethod,
        /// Bit budget per point.
        #[arg(long, default_value_t = 64)]
        bits: usize,
        #[arg(long, default_value_t = 1)]
        bits_per_dim: usize,
        #[arg(long, default_value_t = 1.0)]
        lambda: f64,
        #[arg(long, default_value_t = 50)]
        iters: usize,
        #[arg(long, default_value_t = 1e-6)]
        tol: f64,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        model_out: PathBuf,
    },
    /// Encode a matrix with a trained model.
    Encode {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        codes_out: PathBuf,
    },
    /// Build a multi-index hash over a code file.
    Index {
        #[arg(long)]
        codes: PathBuf,
        #[arg(long, value_enum)]
        kind: IndexKind,
        /// Bits per table for binary codes.
        #[arg(long)]
        b: Option<usize>,
        #[arg(long)]
        index_out: PathBuf,
    },
    /// Retrieve the top-k candidates of every query from an index.
    Query {
        #[arg(long)]
        index: PathBuf,
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        queries: PathBuf,
        #[arg(long, default_value_t = 100)]
        k: usize,
        /// CSV of `query,rank,id,score`.
        #[arg(long)]
        out: PathBuf,
    },
    /// Run one experiment from a key=value config; the report goes to stdout.
    Eval {
        #[arg(long)]
        config: PathBuf,
        /// Directory for the report, recall CSV, model and index.
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Sweep budgets and bits per dimension; CSV goes to stdout.
    Bench {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn load(path: &Path) -> Result<DataMatrix> {
    load_matrix(path, MatrixFormat::from_path(path))
}

fn store(m: &DataMatrix, path: &Path) -> Result<()> {
    save_matrix(m, path, MatrixFormat::from_path(path))
}

fn read_config(path: &Path) -> Result<ExperimentConfig> {
    ExperimentConfig::parse(&fs::read_to_string(path)?)
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Gen {
            seed,
            dim,
            count,
            clusters,
            spread,
            out,
            labels_out,
        } => {
            let (x, labels, _) = generate_labeled(seed, dim, count, clusters, spread)?;
            store(&x, &out)?;
            if let Some(path) = labels_out {
                let text: String = labels.iter().map(|l| format!("{l}\n")).collect();
                fs::write(path, text)?;
            }
        }
        Command::Preprocess {
            fit,
            data,
            out,
            no_normalize,
        } => {
            let model = fit_preprocess(&load(&fit)?, !no_normalize);
            store(&apply_preprocess(&model, &load(&data)?)?, &out)?;
        }
        Command::Train {
            method,
            bits,
            bits_per_dim,
            lambda,
            iters,
            tol,
            seed,
            data,
            model_out,
        } => {
            let method = match method {
                TrainMethod::Lsq if bits_per_dim == 1 => Method::LsqBinary,
                TrainMethod::Lsq => Method::LsqNary,
                TrainMethod::Itq => Method::Itq,
                TrainMethod::Pq => Method::Pq,
                TrainMethod::Ckmeans => Method::Ckmeans,
                TrainMethod::Okmeans => Method::Okmeans,
            };
            let cfg = ExperimentConfig {
                method,
                bit_budget: bits,
                bits_per_dim,
                lambda,
                iters,
                tol,
                seed,
                ..ExperimentConfig::default()
            };
            cfg.validate()?;
            let model = train_model(&cfg, &load(&data)?)?;
            save_model(&model, &model_out)?;
        }
        Command::Encode { model, data, codes_out } => {
            let model = load_model(&model)?;
            save_codes(&model.encode(&load(&data)?)?, &codes_out)?;
        }
        Command::Index {
            codes,
            kind,
            b,
            index_out,
        } => {
            let index = match (load_codes(&codes)?, kind) {
                (Codes::Nary(c), IndexKind::Nary) => build_nary_index(&c)?,
                (Codes::Binary(c), IndexKind::Binary) => {
                    let b = b.ok_or_else(|| Error::InvalidParameter("--b is required for binary indexes".into()))?;
                    build_binary_index(&c, b)?
                }
                _ => return Err(Error::Incompatible("--kind does not match the code file".into())),
            };
            save_index(&index, &index_out)?;
        }
        Command::Query {
            index,
            model,
            queries,
            k,
            out,
        } => {
            let index = load_index(&index)?;
            let model = load_model(&model)?;
            let x = load(&queries)?;
            let codes = model.encode(&x)?;
            let ctx = model.metric_context();
            let mut text = String::from("query,rank,id,score\n");
            for q in 0..x.count() {
                let point = x.column(q).into_owned();
                let costs = model.probe_costs(&point, &index)?;
                let res = index.query(codes.code(q), k, costs.as_ref(), ctx.metric())?;
                for (rank, (id, score)) in res.list.ids.iter().zip(&res.list.scores).enumerate() {
                    text.push_str(&format!("{q},{rank},{id},{score}\n"));
                }
            }
            fs::write(out, text)?;
        }
        Command::Eval { config, out_dir } => {
            let cfg = read_config(&config)?;
            let out = run_experiment(&cfg)?;
            for (stage, secs) in &out.timings {
                eprintln!("{stage}: {secs:.3}s");
            }
            if let Some(dir) = out_dir {
                fs::create_dir_all(&dir)?;
                fs::write(dir.join("report.txt"), &out.report)?;
                fs::write(dir.join("recall.csv"), &out.csv)?;
                save_model(&out.model, dir.join("model.nary"))?;
                if let Some(index) = &out.index {
                    save_index(index, dir.join("index.nary"))?;
                }
            }
            std::io::stdout().write_all(out.report.as_bytes())?;
        }
        Command::Bench { config, out } => {
            let cfg = read_config(&config)?;
            let rows = bench(&cfg)?;
            let mut text = format!("{}\n", BenchRow::csv_header());
            for row in &rows {
                text.push_str(&row.csv_line());
                text.push('\n');
            }
            match out {
                Some(path) => fs::write(path, text)?,
                None => std::io::stdout().write_all(text.as_bytes())?,
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
