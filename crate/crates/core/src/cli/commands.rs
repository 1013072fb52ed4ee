use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::config::RunConfig;
use crate::data::{build_vocab, encode, load_table, split, write_table, EncodedDataset, RawTable};
use crate::error::{Error, Result};
use crate::model::{load_params, load_params_for, save_params, ModelParams};
use crate::synthetic::{
    bayes_logloss, extract_orders, fitting_deviation, generate, order_histogram, read_sidecar, write_sidecar,
    DeviationReport, HistogramBin, OrderVector, Sidecar, SyntheticPattern, HISTOGRAM_WIDTH,
};
use crate::train::{evaluate, train_with, MetricsReport};

pub const DATA_FILE: &str = "data.csv";
pub const SIDECAR_FILE: &str = "sidecar.json";
pub const ARCHIVE_FILE: &str = "model.params";
pub const REPORT_FILE: &str = "report.json";
pub const TIMING_FILE: &str = "timing.json";

fn to_json<T: Serialize>(value: &T) -> String {
    serde_json::to_string_pretty(value).expect("report serializes")
}

fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

/// Planted probabilities for every raw row, when the data is synthetic.
#[derive(Debug, Clone)]
pub struct Truth {
    pub pattern: SyntheticPattern,
    pub probs: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct PreparedData {
    pub table: RawTable,
    pub train: EncodedDataset,
    pub valid: EncodedDataset,
    pub test: EncodedDataset,
    pub truth: Option<Truth>,
}

impl PreparedData {
    pub fn part(&self, split: &str) -> Result<&EncodedDataset> {
        match split {
            "train" => Ok(&self.train),
            "validation" => Ok(&self.valid),
            "test" => Ok(&self.test),
            other => Err(Error::InvalidArgument(format!("unknown split `{other}`"))),
        }
    }
}

/// Loads or generates the table, builds the vocabulary over all of it and
/// splits it. Deterministic in the config.
pub fn prepare_data(config: &RunConfig) -> Result<PreparedData> {
    let schema = config.schema()?;
    let (table, truth) = match &config.data.path {
        Some(path) => {
            let table = load_table(path, &schema)?;
            let truth = match &config.data.sidecar {
                Some(sc) => {
                    let sidecar = read_sidecar(sc)?;
                    let probs = sidecar.true_probs(&table)?;
                    Some(Truth {
                        pattern: sidecar.pattern,
                        probs,
                    })
                }
                None => None,
            };
            (table, truth)
        }
        None => {
            let s = config.synthetic()?;
            let data = generate(&s.resolve_pattern()?, s.n_records, s.seed)?;
            let table = data.to_table();
            (
                table,
                Some(Truth {
                    pattern: data.pattern,
                    probs: data.true_probs,
                }),
            )
        }
    };
    let vocab = Arc::new(build_vocab(&table, config.data.min_frequency));
    let encoded = encode(&table, vocab)?;
    let (train, valid, test) = split(&encoded, config.data.split, config.data.split_seed)?;
    Ok(PreparedData {
        table,
        train,
        valid,
        test,
        truth,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerateSummary {
    pub records: usize,
    pub label_mean: f64,
    pub data: PathBuf,
    pub sidecar: PathBuf,
}

/// Writes `data.csv` and `sidecar.json` under `out`.
pub fn cmd_generate(config: &RunConfig, out: &Path) -> Result<GenerateSummary> {
    let s = config.synthetic()?;
    let data = generate(&s.resolve_pattern()?, s.n_records, s.seed)?;
    ensure_dir(out)?;
    let table = data.to_table();
    let summary = GenerateSummary {
        records: table.len(),
        label_mean: table.label_mean(),
        data: out.join(DATA_FILE),
        sidecar: out.join(SIDECAR_FILE),
    };
    write_table(&summary.data, &table)?;
    write_sidecar(
        &Sidecar {
            pattern: data.pattern,
            feature_probs: data.table,
        },
        &summary.sidecar,
    )?;
    println!("records {}  label_mean {:.6}", summary.records, summary.label_mean);
    Ok(summary)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSummary {
    pub pattern: SyntheticPattern,
    /// Bayes LogLoss of the test split.
    pub bayes_logloss: f64,
    /// Absent when the first layer has fewer order vectors than pattern terms.
    pub deviation: Option<DeviationReport>,
    pub orders: Vec<OrderVector>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub config: RunConfig,
    pub parameter_count: usize,
    pub epochs: Vec<MetricsReport>,
    pub best_epoch: Option<usize>,
    pub test: MetricsReport,
    pub synthetic: Option<SyntheticSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub wall_clock_seconds: f64,
}

fn synthetic_summary(params: &ModelParams, truth: &Truth, test: &EncodedDataset) -> SyntheticSummary {
    let q: Vec<f64> = test.row_ids.iter().map(|&r| truth.probs[r]).collect();
    let orders = extract_orders(params);
    let learned: Vec<Vec<f64>> = orders.iter().map(|o| o.exponents.clone()).collect();
    SyntheticSummary {
        pattern: truth.pattern.clone(),
        bayes_logloss: bayes_logloss(&q),
        deviation: fitting_deviation(&learned, &truth.pattern).ok(),
        orders,
    }
}

/// Trains, then writes the best parameters, the run report and the timing
/// under `out`.
pub fn cmd_train(config: &RunConfig, out: &Path) -> Result<RunReport> {
    let start = Instant::now();
    let data = prepare_data(config)?;
    let outcome = train_with(&config.model, &config.train, &data.train, &data.valid, |r| {
        println!(
            "epoch {:>3}  {}  auc {:.6}  logloss {:.6}",
            r.epoch, r.split, r.auc, r.logloss
        );
    })?;
    let params = outcome.params;
    let test = evaluate(&params, &data.test, "test", outcome.best_epoch.unwrap_or(0))?;
    println!("test  auc {:.6}  logloss {:.6}", test.auc, test.logloss);
    let synthetic = data.truth.as_ref().map(|t| synthetic_summary(&params, t, &data.test));
    if let Some(s) = &synthetic {
        match &s.deviation {
            Some(d) => println!(
                "bayes_logloss {:.6}  deviation {:.6}",
                s.bayes_logloss, d.mean_deviation
            ),
            None => println!("bayes_logloss {:.6}  deviation unavailable", s.bayes_logloss),
        }
    }
    let report = RunReport {
        config: config.clone(),
        parameter_count: params.parameter_count(),
        epochs: outcome.reports,
        best_epoch: outcome.best_epoch,
        test,
        synthetic,
    };
    ensure_dir(out)?;
    save_params(&params, out.join(ARCHIVE_FILE))?;
    write_file(&out.join(REPORT_FILE), to_json(&report))?;
    let timing = Timing {
        wall_clock_seconds: start.elapsed().as_secs_f64(),
    };
    write_file(&out.join(TIMING_FILE), to_json(&timing))?;
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalSummary {
    pub metrics: MetricsReport,
    /// Label mean of the whole table before splitting.
    pub data_label_mean: f64,
}

/// Metrics of an archive on one split of the configured data.
pub fn cmd_eval(config: &RunConfig, archive: &Path, split: &str, epoch: usize) -> Result<EvalSummary> {
    let params = load_params_for(archive, &config.model)?;
    let data = prepare_data(config)?;
    let part = data.part(split)?;
    let sizes = part.vocab.sizes();
    if params.embedding.field_vocab() != sizes {
        return Err(Error::shape(
            "archive vocabulary sizes",
            sizes,
            params.embedding.field_vocab(),
        ));
    }
    let summary = EvalSummary {
        metrics: evaluate(&params, part, split, epoch)?,
        data_label_mean: data.table.label_mean(),
    };
    println!(
        "{}  auc {:.6}  logloss {:.6}  label_mean {:.6}",
        split, summary.metrics.auc, summary.metrics.logloss, summary.data_label_mean
    );
    Ok(summary)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InspectReport {
    pub orders: Vec<OrderVector>,
    pub histogram: Vec<HistogramBin>,
    pub deviation: Option<DeviationReport>,
}

/// First-layer order vectors, their total-order histogram and, given a
/// sidecar, the deviation from its pattern.
pub fn cmd_inspect(archive: &Path, sidecar: Option<&Path>) -> Result<InspectReport> {
    let params = load_params(archive)?;
    let orders = extract_orders(&params);
    let totals: Vec<f64> = orders.iter().map(|o| o.total).collect();
    let deviation = match sidecar {
        Some(path) => {
            let sc = read_sidecar(path)?;
            let learned: Vec<Vec<f64>> = orders.iter().map(|o| o.exponents.clone()).collect();
            Some(fitting_deviation(&learned, &sc.pattern)?)
        }
        None => None,
    };
    Ok(InspectReport {
        histogram: order_histogram(&totals, HISTOGRAM_WIDTH),
        orders,
        deviation,
    })
}

pub fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    write_file(path, to_json(value))
}

pub fn json_string<T: Serialize>(value: &T) -> String {
    to_json(value)
}
