//! The `webnn` command line: `train`, `eval`, `history` and `bench`.
//!
//! A training run writes `metrics.csv`, `resolved-config.json`,
//! `best.wnn`, `final.wnn` and `history.json` into its output directory.
//! Checkpoints carry the split seed, validation fraction and feature
//! statistics, so `eval` and `history` rebuild the same validation split
//! from the original data files.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::data::{load_mnist_idx, load_titanic_csv, prepare_mnist, prepare_titanic, Dataset, FeatureStats};
use crate::error::{Error, Result};
use crate::models::{
    predict_history, AnyModel, Checkpoint, Classifier, MnistArch, MnistModel, ModelSpec, TitanicModel,
};
use crate::tensor::Tensor;
use crate::training::{evaluate, fit, EpochMetrics, TrainConfig};
use crate::web::{bench_step, BenchReport, WebConfig};

pub const METRICS_HEADER: &str = "epoch,lr,train_loss,train_acc,val_loss,val_acc";

#[derive(Debug, Parser)]
#[command(name = "webnn", version, about = "Train and inspect web neural networks")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train a model and write a run directory.
    Train(TrainArgs),
    /// Report loss and accuracy of a checkpoint.
    Eval(EvalArgs),
    /// Write per-timestep outputs and prediction traces.
    History(HistoryArgs),
    /// Time the naive and vectorized web updates.
    Bench(BenchArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    Titanic,
    Mnist,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Preset {
    /// Stride-1 convs, Q=500.
    Paper,
    /// Stride-2 first conv, Q=100.
    Desk,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Split {
    Train,
    Val,
    All,
}

#[derive(Clone, Debug, Default, Args)]
pub struct DataArgs {
    /// Titanic CSV with a Survived column.
    #[arg(long, value_name = "CSV")]
    pub train: Option<PathBuf>,
    /// IDX image file.
    #[arg(long, value_name = "FILE")]
    pub images: Option<PathBuf>,
    /// IDX label file.
    #[arg(long, value_name = "FILE")]
    pub labels: Option<PathBuf>,
    /// Use only the first N images.
    #[arg(long, value_name = "N")]
    pub limit: Option<usize>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    pub task: Task,
    /// MNIST architecture preset.
    #[arg(long, value_enum, default_value_t = Preset::Paper)]
    pub preset: Preset,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub batch: Option<usize>,
    /// Neuron count Q.
    #[arg(long)]
    pub q: Option<usize>,
    #[arg(long)]
    pub timesteps: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    /// AdamW weight decay.
    #[arg(long)]
    pub wd: Option<f64>,
    /// Per-epoch learning-rate decay factor.
    #[arg(long)]
    pub sched_gamma: Option<f64>,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    #[arg(long, default_value_t = 0.2)]
    pub val_fraction: f64,
    /// Clip the global gradient norm.
    #[arg(long)]
    pub max_grad_norm: Option<f64>,
    #[arg(long, value_name = "DIR")]
    pub out: PathBuf,
    #[command(flatten)]
    pub data: DataArgs,
    /// Suppress per-epoch progress lines.
    #[arg(long)]
    pub quiet: bool,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long, value_name = "FILE")]
    pub checkpoint: PathBuf,
    #[arg(long, value_enum, default_value_t = Split::Val)]
    pub split: Split,
    /// Print a JSON object instead of text.
    #[arg(long)]
    pub json: bool,
    #[command(flatten)]
    pub data: DataArgs,
}

#[derive(Debug, Args)]
pub struct HistoryArgs {
    #[arg(long, value_name = "FILE")]
    pub checkpoint: PathBuf,
    #[arg(long, value_name = "FILE")]
    pub out: PathBuf,
    #[arg(long, value_enum, default_value_t = Split::Val)]
    pub split: Split,
    #[command(flatten)]
    pub data: DataArgs,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[arg(long, default_value_t = 100)]
    pub q: usize,
    #[arg(long, default_value_t = 64)]
    pub batch: usize,
    #[arg(long, default_value_t = 5)]
    pub timesteps: usize,
    #[arg(long, default_value_t = 10)]
    pub iters: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Where to write bench.json.
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
}

/// Settings stored in every checkpoint so the data split can be rebuilt.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunMeta {
    pub task: Task,
    pub train: TrainConfig,
    pub val_fraction: f64,
    pub limit: Option<usize>,
    pub feature_stats: Option<FeatureStats>,
    /// Epoch after which the checkpoint was taken.
    pub epoch: usize,
}

/// Every effective setting of a training run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResolvedConfig {
    pub task: Task,
    pub preset: Option<Preset>,
    pub model: ModelSpec,
    pub train: TrainConfig,
    pub val_fraction: f64,
    pub data: ResolvedData,
    pub train_samples: usize,
    pub val_samples: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResolvedData {
    pub train: Option<PathBuf>,
    pub images: Option<PathBuf>,
    pub labels: Option<PathBuf>,
    pub limit: Option<usize>,
}

/// `history.json` contents.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HistoryFile {
    #[serde(rename = "T")]
    pub t: usize,
    #[serde(rename = "O")]
    pub o: usize,
    pub samples: Vec<HistorySample>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HistorySample {
    pub label: usize,
    pub outputs: Vec<Vec<f32>>,
    pub trace: Vec<usize>,
}

/// Result of `eval`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EvalReport {
    pub split: String,
    pub samples: usize,
    pub loss: f64,
    pub accuracy: f64,
}

/// Process exit status for an error.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Config(_) | Error::Validation(_) => 2,
        Error::Io { .. } | Error::Format { .. } => 3,
        Error::Checkpoint(_) => 4,
        Error::Equivalence { .. } => 5,
        _ => 1,
    }
}

/// Parses `args` (including the program name), runs the command and
/// returns the exit status. Errors go to stderr.
pub fn main_with_args<I, S>(args: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Train(args) => cmd_train(&args).map(|_| ()),
        Command::Eval(args) => {
            let report = cmd_eval(&args)?;
            if args.json {
                println!("{}", serde_json::to_string(&report)?);
            } else {
                println!("split {} ({} samples)", report.split, report.samples);
                println!("loss {:.4}", report.loss);
                println!("accuracy {:.4}", report.accuracy);
            }
            Ok(())
        }
        Command::History(args) => {
            let file = cmd_history(&args)?;
            println!("wrote {} samples to {}", file.samples.len(), args.out.display());
            Ok(())
        }
        Command::Bench(args) => {
            let report = cmd_bench(&args)?;
            println!(
                "{:>6} {:>6} {:>4} {:>6} {:>12} {:>14} {:>8}",
                "q", "batch", "T", "iters", "naive ms", "vectorized ms", "ratio"
            );
            println!(
                "{:>6} {:>6} {:>4} {:>6} {:>12.3} {:>14.3} {:>8.2}",
                report.q,
                report.batch,
                report.timesteps,
                report.iterations,
                report.naive_ms,
                report.vectorized_ms,
                report.ratio
            );
            println!("max |naive - vectorized| = {:.3e}", report.max_abs_diff);
            Ok(())
        }
    }
}

fn required<'a>(path: &'a Option<PathBuf>, flag: &str, task: Task) -> Result<&'a Path> {
    path.as_deref()
        .ok_or_else(|| Error::Config(format!("{flag} is required for the {task:?} task").to_lowercase()))
}

struct Splits {
    train: Dataset<f32>,
    val: Dataset<f32>,
    stats: Option<FeatureStats>,
}

fn load_splits(
    task: Task,
    data: &DataArgs,
    val_fraction: f64,
    seed: u64,
    stats: Option<&FeatureStats>,
) -> Result<Splits> {
    match task {
        Task::Titanic => {
            let records = load_titanic_csv(required(&data.train, "--train", task)?)?;
            let (p, stats) = prepare_titanic(&records, val_fraction, seed, stats)?;
            Ok(Splits {
                train: p.train,
                val: p.val,
                stats: Some(stats),
            })
        }
        Task::Mnist => {
            let set = load_mnist_idx(
                required(&data.images, "--images", task)?,
                required(&data.labels, "--labels", task)?,
            )?;
            let p = prepare_mnist(set, data.limit, val_fraction, seed)?;
            Ok(Splits {
                train: p.train,
                val: p.val,
                stats: None,
            })
        }
    }
}

fn build_model(args: &TrainArgs, image_size: usize) -> Result<AnyModel> {
    match args.task {
        Task::Titanic => {
            let base = WebConfig::titanic();
            let config = WebConfig::new(
                args.q.unwrap_or(base.neurons),
                base.inputs,
                base.outputs,
                args.timesteps.unwrap_or(base.timesteps),
            )?;
            Ok(AnyModel::Titanic(TitanicModel::new(config, args.seed)?))
        }
        Task::Mnist => {
            let preset = match args.preset {
                Preset::Paper => MnistArch::paper(),
                Preset::Desk => MnistArch::desk(),
            };
            let arch = MnistArch::new(
                image_size,
                preset.convs,
                args.q.unwrap_or(preset.web.neurons),
                args.timesteps.unwrap_or(preset.web.timesteps),
            )?;
            Ok(AnyModel::Mnist(MnistModel::new(arch, args.seed)?))
        }
    }
}

fn train_config(args: &TrainArgs) -> Result<TrainConfig> {
    let base = match args.task {
        Task::Titanic => TrainConfig::titanic(),
        Task::Mnist => TrainConfig::mnist(),
    };
    let config = TrainConfig {
        epochs: args.epochs.unwrap_or(base.epochs),
        batch_size: args.batch.unwrap_or(base.batch_size),
        lr: args.lr.unwrap_or(base.lr),
        weight_decay: args.wd.unwrap_or(base.weight_decay),
        scheduler_gamma: args.sched_gamma.unwrap_or(base.scheduler_gamma),
        seed: args.seed,
        loss: base.loss,
        max_grad_norm: args.max_grad_norm,
    };
    config.validate()?;
    Ok(config)
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_file(path, text.as_bytes())
}

fn metrics_row(m: &EpochMetrics) -> String {
    format!(
        "{},{},{},{},{},{}\n",
        m.epoch, m.lr, m.train_loss, m.train_acc, m.val_loss, m.val_acc
    )
}

/// Trains and writes the run directory; returns the per-epoch metrics.
pub fn cmd_train(args: &TrainArgs) -> Result<Vec<EpochMetrics>> {
    let config = train_config(args)?;
    let splits = load_splits(args.task, &args.data, args.val_fraction, args.seed, None)?;
    let image_size = splits.train.features.shape().get(2).copied().unwrap_or(0);
    let mut model = build_model(args, image_size)?;
    model.classifier().check_input(splits.train.features.shape())?;

    fs::create_dir_all(&args.out).map_err(|e| Error::io(&args.out, e))?;
    let resolved = ResolvedConfig {
        task: args.task,
        preset: (args.task == Task::Mnist).then_some(args.preset),
        model: model.spec(),
        train: config.clone(),
        val_fraction: args.val_fraction,
        data: ResolvedData {
            train: args.data.train.clone(),
            images: args.data.images.clone(),
            labels: args.data.labels.clone(),
            limit: args.data.limit,
        },
        train_samples: splits.train.len(),
        val_samples: splits.val.len(),
    };
    write_json(&args.out.join("resolved-config.json"), &resolved)?;

    let metrics_path = args.out.join("metrics.csv");
    let mut metrics_file = fs::File::create(&metrics_path).map_err(|e| Error::io(&metrics_path, e))?;
    writeln!(metrics_file, "{METRICS_HEADER}").map_err(|e| Error::io(&metrics_path, e))?;

    let meta = |epoch| RunMeta {
        task: args.task,
        train: config.clone(),
        val_fraction: args.val_fraction,
        limit: args.data.limit,
        feature_stats: splits.stats.clone(),
        epoch,
    };
    let checkpoint =
        |model: &AnyModel, epoch| -> Result<Checkpoint> { Ok(model.to_checkpoint(serde_json::to_value(meta(epoch))?)) };

    let mut best_acc = f64::NEG_INFINITY;
    let spec = model.spec();
    let metrics = {
        let classifier = model.classifier_mut();
        fit(classifier, &splits.train, &splits.val, &config, |m, current| {
            metrics_file
                .write_all(metrics_row(m).as_bytes())
                .and_then(|()| metrics_file.flush())
                .map_err(|e| Error::io(&metrics_path, e))?;
            if !args.quiet {
                println!(
                    "epoch {:>3}  lr {:.6}  train loss {:.4} acc {:.4}  val loss {:.4} acc {:.4}",
                    m.epoch, m.lr, m.train_loss, m.train_acc, m.val_loss, m.val_acc
                );
            }
            if m.val_acc > best_acc {
                best_acc = m.val_acc;
                let ckpt = Checkpoint {
                    model: spec.clone(),
                    run: serde_json::to_value(meta(m.epoch))?,
                    tensors: spec.name_tensors(current.parameters()),
                };
                ckpt.save(args.out.join("best.wnn"))?;
            }
            Ok(())
        })?
    };
    checkpoint(&model, config.epochs)?.save(args.out.join("final.wnn"))?;
    let history = history_file(model.classifier(), &splits.val)?;
    write_json(&args.out.join("history.json"), &history)?;
    Ok(metrics)
}

/// Loads a checkpoint and the data split it was trained against.
pub fn load_run(checkpoint: &Path, data: &DataArgs, split: Split) -> Result<(AnyModel, RunMeta, Dataset<f32>)> {
    let ckpt = Checkpoint::load(checkpoint)?;
    let meta: RunMeta =
        serde_json::from_value(ckpt.run.clone()).map_err(|e| Error::Checkpoint(format!("run metadata: {e}")))?;
    let model = AnyModel::from_checkpoint(ckpt)?;
    let mut data = data.clone();
    if data.limit.is_none() {
        data.limit = meta.limit;
    }
    let splits = load_splits(
        meta.task,
        &data,
        meta.val_fraction,
        meta.train.seed,
        meta.feature_stats.as_ref(),
    )?;
    let dataset = match split {
        Split::Train => splits.train,
        Split::Val => splits.val,
        Split::All => concat(&splits.train, &splits.val)?,
    };
    model.classifier().check_input(dataset.features.shape())?;
    Ok((model, meta, dataset))
}

fn concat(a: &Dataset<f32>, b: &Dataset<f32>) -> Result<Dataset<f32>> {
    let mut shape = a.features.shape().to_vec();
    shape[0] += b.len();
    let mut data = a.features.data().to_vec();
    data.extend_from_slice(b.features.data());
    let mut labels = a.labels.clone();
    labels.extend_from_slice(&b.labels);
    Dataset::new(Tensor::new(shape, data)?, labels)
}

fn split_name(split: Split) -> &'static str {
    match split {
        Split::Train => "train",
        Split::Val => "val",
        Split::All => "all",
    }
}

pub fn cmd_eval(args: &EvalArgs) -> Result<EvalReport> {
    let (model, meta, data) = load_run(&args.checkpoint, &args.data, args.split)?;
    let e = evaluate(model.classifier(), &data, meta.train.batch_size, meta.train.loss)?;
    Ok(EvalReport {
        split: split_name(args.split).into(),
        samples: data.len(),
        loss: e.loss,
        accuracy: e.accuracy,
    })
}

fn history_file(model: &dyn Classifier<f32>, data: &Dataset<f32>) -> Result<HistoryFile> {
    let config = model.web_config();
    let (t, o) = (config.timesteps, config.outputs);
    let mut samples = Vec::with_capacity(data.len());
    for batch in data.batches(256, None)? {
        let history = model.history(&batch.features)?;
        let traces = predict_history(&history)?;
        for ((rows, trace), &label) in history.data().chunks(t * o).zip(traces).zip(&batch.labels) {
            samples.push(HistorySample {
                label,
                outputs: rows.chunks(o).map(<[f32]>::to_vec).collect(),
                trace,
            });
        }
    }
    Ok(HistoryFile { t, o, samples })
}

pub fn cmd_history(args: &HistoryArgs) -> Result<HistoryFile> {
    let (model, _, data) = load_run(&args.checkpoint, &args.data, args.split)?;
    let file = history_file(model.classifier(), &data)?;
    write_json(&args.out, &file)?;
    Ok(file)
}

pub fn cmd_bench(args: &BenchArgs) -> Result<BenchReport> {
    if args.q < 2 {
        return Err(Error::Config(format!("bench needs q >= 2, got {}", args.q)));
    }
    let config = WebConfig::new(args.q, 1, 1, args.timesteps)?;
    let report = bench_step(&config, args.batch, args.iters, args.seed)?;
    if let Some(out) = &args.out {
        write_json(out, &report)?;
    }
    Ok(report)
}
