//! Command-line front end: `gen-data`, `train-embed`, `train-comparator`,
//! `evaluate` and `embed-dump`.
//!
//! Every option can also come from a TOML file passed with `--config`, using
//! the long flag names as keys (`k-neg = 3`). Flags given on the command line
//! win over the file. Outputs are written atomically; JSON goes to stdout when
//! no output path is given.
//!
//! Seeds: `--seed` (default 0) feeds every concern unless a dedicated seed
//! (`--init-seed`, `--sample-seed`) is given. Initialization and sampling
//! draw from different ChaCha8 streams, so sharing a seed does not correlate
//! them.

use std::collections::BTreeSet;
use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::checkpoint::{
    load_comparator, load_embedding, save_comparator, save_embedding, write_atomic,
};
use crate::comparator::{
    train_comparator, train_comparator_joint, Comparator, ComparatorTrainConfig,
};
use crate::dataset::{synth_gaussian, write_labeled_rows, Label, LabeledDataset, SynthSpec};
use crate::embedding::{EmbeddingModel, DEFAULT_EMBED_DIM};
use crate::error::{Error, Result};
use crate::evaluator::{evaluate, ClassifierKind, EvalConfig};
use crate::train::{train_embedding, EmbedTrainConfig};

const INIT_STREAM: u64 = 1;
const SAMPLE_STREAM: u64 = 2;

fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

#[derive(Debug, Parser)]
#[command(
    name = "ktuplet",
    version,
    about = "K-tuplet metric learning and few-shot evaluation"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a synthetic Gaussian-blob dataset as CSV.
    GenData(GenDataArgs),
    /// Train the embedding with the K-tuplet / semi-hard losses.
    TrainEmbed(TrainEmbedArgs),
    /// Train the similarity comparator on top of a frozen embedding.
    TrainComparator(TrainComparatorArgs),
    /// Evaluate C-way K-shot episodes and print a JSON report.
    Evaluate(EvaluateArgs),
    /// Write `label,e_1,...,e_d` rows for every sample.
    EmbedDump(EmbedDumpArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ClassifierArg {
    Euclid,
    Similarity,
}

macro_rules! merge {
    ($flags:expr, $file:expr; opts: $($o:ident),*; bools: $($b:ident),*) => {{
        $( $flags.$o = $flags.$o.take().or($file.$o.take()); )*
        $( $flags.$b = $flags.$b || $file.$b; )*
    }};
}

fn read_config<T: for<'de> Deserialize<'de> + Default>(path: &Option<PathBuf>) -> Result<T> {
    match path {
        None => Ok(T::default()),
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| Error::file(p, e))?;
            toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", p.display())))
        }
    }
}

#[derive(Debug, Default, Args, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct GenDataArgs {
    /// TOML file with defaults for any of these options.
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    /// Output CSV path (stdout when omitted).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Seed for every random draw [default: 0].
    #[arg(long)]
    pub seed: Option<u64>,
    /// Overrides --seed for data generation.
    #[arg(long)]
    pub data_seed: Option<u64>,
    /// Number of classes [default: 20].
    #[arg(long)]
    pub num_classes: Option<usize>,
    /// Samples per class [default: 50].
    #[arg(long)]
    pub per_class: Option<usize>,
    /// Input dimension [default: 16].
    #[arg(long)]
    pub dim: Option<usize>,
    /// Per-class noise standard deviation [default: 0.15].
    #[arg(long)]
    pub spread: Option<f64>,
}

#[derive(Debug, Default, Args, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct DataArgs {
    /// Input CSV (`label,f_1,...,f_d`).
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Restrict to these labels, e.g. `0-13` or `1,4,7-9`.
    #[arg(long)]
    pub classes: Option<String>,
}

#[derive(Debug, Default, Args, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct TrainEmbedArgs {
    /// TOML file with defaults for any of these options.
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    #[command(flatten)]
    #[serde(flatten)]
    pub data: DataArgs,
    /// Checkpoint output path.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Loss trace JSON path (stdout when omitted).
    #[arg(long)]
    pub trace: Option<PathBuf>,
    /// Seed for every random draw [default: 0].
    #[arg(long)]
    pub seed: Option<u64>,
    /// Overrides --seed for weight initialization.
    #[arg(long)]
    pub init_seed: Option<u64>,
    /// Overrides --seed for tuplet sampling.
    #[arg(long)]
    pub sample_seed: Option<u64>,
    /// Hidden widths, comma separated [default: 64,64].
    #[arg(long)]
    pub hidden: Option<String>,
    /// Embedding dimension [default: 32].
    #[arg(long)]
    pub embed_dim: Option<usize>,
    /// Negatives per anchor [default: 5].
    #[arg(long)]
    pub k_neg: Option<usize>,
    /// Hinge margin [default: 0.5].
    #[arg(long)]
    pub margin: Option<f64>,
    /// Tuplets per batch [default: 64].
    #[arg(long)]
    pub batch_size: Option<usize>,
    /// Optimizer steps per epoch [default: ceil(N / batch-size)].
    #[arg(long)]
    pub batches_per_epoch: Option<usize>,
    /// [default: 100]
    #[arg(long)]
    pub epochs: Option<usize>,
    /// First semi-hard epoch; equal to --epochs disables mining [default: 80].
    #[arg(long)]
    pub switch_epoch: Option<usize>,
    /// [default: 0.001]
    #[arg(long)]
    pub lr: Option<f64>,
    /// [default: 40]
    #[arg(long)]
    pub decay_every: Option<usize>,
    /// [default: 0.5]
    #[arg(long)]
    pub decay_factor: Option<f64>,
    /// Keep only terms with `d_an - d_ap >= margin` in the semi-hard set.
    #[arg(long)]
    #[serde(default)]
    pub eq2_verbatim: bool,
}

#[derive(Debug, Default, Args, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct TrainComparatorArgs {
    /// TOML file with defaults for any of these options.
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    #[command(flatten)]
    #[serde(flatten)]
    pub data: DataArgs,
    /// Embedding checkpoint.
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Comparator checkpoint output path.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Where to write the fine-tuned embedding (only with --joint-fine-tune).
    #[arg(long)]
    pub embed_out: Option<PathBuf>,
    /// Loss trace JSON path (stdout when omitted).
    #[arg(long)]
    pub trace: Option<PathBuf>,
    /// Seed for every random draw [default: 0].
    #[arg(long)]
    pub seed: Option<u64>,
    /// Overrides --seed for weight initialization.
    #[arg(long)]
    pub init_seed: Option<u64>,
    /// Overrides --seed for episode sampling.
    #[arg(long)]
    pub sample_seed: Option<u64>,
    /// Comparator hidden width [default: 64].
    #[arg(long)]
    pub hidden: Option<usize>,
    /// [default: 5]
    #[arg(long)]
    pub ways: Option<usize>,
    /// [default: 1]
    #[arg(long)]
    pub shots: Option<usize>,
    /// Queries per class [default: 5].
    #[arg(long)]
    pub queries: Option<usize>,
    /// Episodes pooled per optimizer step [default: 4].
    #[arg(long)]
    pub episodes_per_batch: Option<usize>,
    /// [default: 10]
    #[arg(long)]
    pub batches_per_epoch: Option<usize>,
    /// [default: 50]
    #[arg(long)]
    pub epochs: Option<usize>,
    /// [default: 0.001]
    #[arg(long)]
    pub lr: Option<f64>,
    /// Rescale summed class features to unit length.
    #[arg(long)]
    #[serde(default)]
    pub renorm_class_feature: bool,
    /// Also update the embedding.
    #[arg(long)]
    #[serde(default)]
    pub joint_fine_tune: bool,
}

#[derive(Debug, Default, Args, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct EvaluateArgs {
    /// TOML file with defaults for any of these options.
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    #[command(flatten)]
    #[serde(flatten)]
    pub data: DataArgs,
    /// Embedding checkpoint.
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Comparator checkpoint (needed for `--classifier similarity`).
    #[arg(long)]
    pub comparator: Option<PathBuf>,
    /// [default: similarity if --comparator is given, else euclid]
    #[arg(long, value_enum)]
    pub classifier: Option<ClassifierArg>,
    /// Report output path (stdout when omitted).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Seed for every random draw [default: 0].
    #[arg(long)]
    pub seed: Option<u64>,
    /// [default: 5]
    #[arg(long)]
    pub ways: Option<usize>,
    /// [default: 1]
    #[arg(long)]
    pub shots: Option<usize>,
    /// Queries per class [default: 15].
    #[arg(long)]
    pub queries: Option<usize>,
    /// [default: 600]
    #[arg(long)]
    pub episodes: Option<usize>,
    /// Rescale summed class features to unit length.
    #[arg(long)]
    #[serde(default)]
    pub renorm_class_feature: bool,
    /// Score episodes on all cores; the report is unchanged.
    #[arg(long)]
    #[serde(default)]
    pub parallel: bool,
}

#[derive(Debug, Default, Args, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct EmbedDumpArgs {
    /// TOML file with defaults for any of these options.
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    #[command(flatten)]
    #[serde(flatten)]
    pub data: DataArgs,
    /// Embedding checkpoint.
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Output CSV path (stdout when omitted).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Parses `1,4,7-9` style label lists.
pub fn parse_classes(spec: &str) -> Result<BTreeSet<Label>> {
    let bad = || Error::Config(format!("invalid class list {spec:?}"));
    let mut out = BTreeSet::new();
    for part in spec.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        match part.split_once('-') {
            Some((a, b)) => {
                let a: Label = a.trim().parse().map_err(|_| bad())?;
                let b: Label = b.trim().parse().map_err(|_| bad())?;
                if a > b {
                    return Err(bad());
                }
                out.extend(a..=b);
            }
            None => {
                out.insert(part.parse().map_err(|_| bad())?);
            }
        }
    }
    if out.is_empty() {
        return Err(bad());
    }
    Ok(out)
}

fn parse_widths(spec: &str) -> Result<Vec<usize>> {
    spec.split(',')
        .map(|s| {
            s.trim()
                .parse::<usize>()
                .ok()
                .filter(|&w| w > 0)
                .ok_or_else(|| Error::Config(format!("invalid layer widths {spec:?}")))
        })
        .collect()
}

fn load_data(args: &DataArgs) -> Result<LabeledDataset> {
    let path = args
        .data
        .as_ref()
        .ok_or_else(|| Error::Config("--data is required".into()))?;
    let ds = LabeledDataset::load_csv(path)?;
    match &args.classes {
        None => Ok(ds),
        Some(spec) => {
            let classes = parse_classes(spec)?;
            if let Some(c) = classes.iter().find(|c| ds.rows_of(**c).is_empty()) {
                return Err(Error::Split(format!(
                    "class {c} does not occur in {}",
                    path.display()
                )));
            }
            Ok(ds.subset(&classes))
        }
    }
}

fn required<'a>(p: &'a Option<PathBuf>, flag: &str) -> Result<&'a Path> {
    p.as_deref()
        .ok_or_else(|| Error::Config(format!("--{flag} is required")))
}

fn emit_json(value: &serde_json::Value, path: Option<&Path>, stdout: &mut dyn Write) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    match path {
        Some(p) => write_atomic(p, |w| Ok(w.write_all(text.as_bytes())?)),
        None => Ok(stdout.write_all(text.as_bytes())?),
    }
}

fn positive(name: &str, v: f64) -> Result<f64> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(Error::Config(format!("--{name} must be positive")))
    }
}

pub fn cmd_gen_data(mut args: GenDataArgs, stdout: &mut dyn Write) -> Result<()> {
    let mut file: GenDataArgs = read_config(&args.config)?;
    merge!(args, file; opts: out, seed, data_seed, num_classes, per_class, dim, spread; bools: );
    let spec = SynthSpec {
        num_classes: args.num_classes.unwrap_or(20),
        per_class: args.per_class.unwrap_or(50),
        dim: args.dim.unwrap_or(16),
        spread: args.spread.unwrap_or(0.15),
        seed: args.data_seed.or(args.seed).unwrap_or(0),
    };
    let ds = synth_gaussian(&spec)?;
    match &args.out {
        Some(p) => write_atomic(p, |w| ds.write_csv(w)),
        None => ds.write_csv(stdout),
    }
}

#[derive(Debug, Serialize)]
struct TrainEmbedEcho {
    data: Option<PathBuf>,
    classes: Option<String>,
    layer_dims: Vec<usize>,
    init_seed: u64,
    sample_seed: u64,
    #[serde(flatten)]
    train: EmbedTrainConfig,
}

pub fn cmd_train_embed(mut args: TrainEmbedArgs, stdout: &mut dyn Write) -> Result<()> {
    let mut file: TrainEmbedArgs = read_config(&args.config)?;
    merge!(args, file; opts: out, trace, seed, init_seed, sample_seed, hidden, embed_dim, k_neg,
        margin, batch_size, batches_per_epoch, epochs, switch_epoch, lr, decay_every, decay_factor;
        bools: eq2_verbatim);
    merge!(args.data, file.data; opts: data, classes; bools: );
    let out = required(&args.out, "out")?.to_path_buf();
    let ds = load_data(&args.data)?;

    let defaults = EmbedTrainConfig::default();
    let epochs = args.epochs.unwrap_or(defaults.epochs);
    let cfg = EmbedTrainConfig {
        epochs,
        switch_epoch: args
            .switch_epoch
            .unwrap_or(defaults.switch_epoch.min(epochs)),
        batch_size: args.batch_size.unwrap_or(defaults.batch_size),
        k_neg: args.k_neg.unwrap_or(defaults.k_neg),
        margin: positive("margin", args.margin.unwrap_or(defaults.margin))?,
        lr: positive("lr", args.lr.unwrap_or(defaults.lr))?,
        decay_every: args.decay_every.unwrap_or(defaults.decay_every),
        decay_factor: args.decay_factor.unwrap_or(defaults.decay_factor),
        eq2_verbatim: args.eq2_verbatim,
        batches_per_epoch: args.batches_per_epoch,
    };
    cfg.validate()?;
    let mut layer_dims = vec![ds.dim()];
    layer_dims.extend(parse_widths(args.hidden.as_deref().unwrap_or("64,64"))?);
    layer_dims.push(args.embed_dim.unwrap_or(DEFAULT_EMBED_DIM));

    let seed = args.seed.unwrap_or(0);
    let init_seed = args.init_seed.unwrap_or(seed);
    let sample_seed = args.sample_seed.unwrap_or(seed);
    let mut model = EmbeddingModel::new(&layer_dims, &mut stream_rng(init_seed, INIT_STREAM))?;
    let trace = train_embedding(
        &mut model,
        &ds,
        &cfg,
        &mut stream_rng(sample_seed, SAMPLE_STREAM),
    )?;
    save_embedding(&model, &out)?;

    let echo = TrainEmbedEcho {
        data: args.data.data.clone(),
        classes: args.data.classes.clone(),
        layer_dims,
        init_seed,
        sample_seed,
        train: cfg,
    };
    let doc = json!({
        "command": "train-embed",
        "config": echo,
        "checkpoint": out,
        "epochs": trace.epochs,
        "max_norm_deviation": trace.max_norm_deviation,
    });
    emit_json(&doc, args.trace.as_deref(), stdout)
}

#[derive(Debug, Serialize)]
struct TrainComparatorEcho {
    data: Option<PathBuf>,
    classes: Option<String>,
    model: PathBuf,
    layer_dims: Vec<usize>,
    init_seed: u64,
    sample_seed: u64,
    joint_fine_tune: bool,
    #[serde(flatten)]
    train: ComparatorTrainConfig,
}

pub fn cmd_train_comparator(mut args: TrainComparatorArgs, stdout: &mut dyn Write) -> Result<()> {
    let mut file: TrainComparatorArgs = read_config(&args.config)?;
    merge!(args, file; opts: model, out, embed_out, trace, seed, init_seed, sample_seed, hidden,
        ways, shots, queries, episodes_per_batch, batches_per_epoch, epochs, lr;
        bools: renorm_class_feature, joint_fine_tune);
    merge!(args.data, file.data; opts: data, classes; bools: );
    let out = required(&args.out, "out")?.to_path_buf();
    let model_path = required(&args.model, "model")?.to_path_buf();
    if args.embed_out.is_some() && !args.joint_fine_tune {
        return Err(Error::Config(
            "--embed-out requires --joint-fine-tune".into(),
        ));
    }
    let ds = load_data(&args.data)?;
    let mut embedding = load_embedding(&model_path)?;

    let d = ComparatorTrainConfig::default();
    let cfg = ComparatorTrainConfig {
        epochs: args.epochs.unwrap_or(d.epochs),
        batches_per_epoch: args.batches_per_epoch.unwrap_or(d.batches_per_epoch),
        episodes_per_batch: args.episodes_per_batch.unwrap_or(d.episodes_per_batch),
        way: args.ways.unwrap_or(d.way),
        shot: args.shots.unwrap_or(d.shot),
        queries: args.queries.unwrap_or(d.queries),
        lr: positive("lr", args.lr.unwrap_or(d.lr))?,
        renormalize_class_feature: args.renorm_class_feature,
    };
    cfg.validate()?;
    let seed = args.seed.unwrap_or(0);
    let init_seed = args.init_seed.unwrap_or(seed);
    let sample_seed = args.sample_seed.unwrap_or(seed);
    let hidden = args.hidden.unwrap_or(crate::comparator::DEFAULT_HIDDEN);
    let mut comparator = Comparator::new(
        embedding.embed_dim(),
        hidden,
        &mut stream_rng(init_seed, INIT_STREAM),
    )?;
    let mut rng = stream_rng(sample_seed, SAMPLE_STREAM);
    let trace = if args.joint_fine_tune {
        train_comparator_joint(&mut comparator, &mut embedding, &ds, &cfg, &mut rng)?
    } else {
        train_comparator(&mut comparator, &embedding, &ds, &cfg, &mut rng)?
    };
    save_comparator(&comparator, &out)?;
    if let Some(p) = &args.embed_out {
        save_embedding(&embedding, p)?;
    }
    let echo = TrainComparatorEcho {
        data: args.data.data.clone(),
        classes: args.data.classes.clone(),
        model: model_path,
        layer_dims: comparator.layer_dims().to_vec(),
        init_seed,
        sample_seed,
        joint_fine_tune: args.joint_fine_tune,
        train: cfg,
    };
    let doc = json!({
        "command": "train-comparator",
        "config": echo,
        "checkpoint": out,
        "epochs": trace,
    });
    emit_json(&doc, args.trace.as_deref(), stdout)
}

pub fn cmd_evaluate(mut args: EvaluateArgs, stdout: &mut dyn Write) -> Result<()> {
    let mut file: EvaluateArgs = read_config(&args.config)?;
    merge!(args, file; opts: model, comparator, classifier, out, seed, ways, shots, queries,
        episodes; bools: renorm_class_feature, parallel);
    merge!(args.data, file.data; opts: data, classes; bools: );
    let model_path = required(&args.model, "model")?;
    let classifier = args.classifier.unwrap_or(if args.comparator.is_some() {
        ClassifierArg::Similarity
    } else {
        ClassifierArg::Euclid
    });
    let ds = load_data(&args.data)?;
    let embedding = load_embedding(model_path)?;
    let comparator = match classifier {
        ClassifierArg::Euclid => None,
        ClassifierArg::Similarity => {
            let p = args.comparator.as_ref().ok_or_else(|| {
                Error::Config("--classifier similarity needs --comparator".into())
            })?;
            Some(load_comparator(p)?)
        }
    };
    let d = EvalConfig::default();
    let cfg = EvalConfig {
        way: args.ways.unwrap_or(d.way),
        shot: args.shots.unwrap_or(d.shot),
        queries: args.queries.unwrap_or(d.queries),
        episodes: args.episodes.unwrap_or(d.episodes),
        renormalize_class_feature: args.renorm_class_feature,
        parallel: args.parallel,
    };
    let seed = args.seed.unwrap_or(0);
    let mut report = evaluate(&embedding, comparator.as_ref(), &ds, &cfg, seed)?;
    report.config["data"] = json!(args.data.data);
    report.config["classes"] = json!(args.data.classes);
    report.config["model"] = json!(model_path);
    if comparator.is_some() {
        report.config["comparator"] = json!(args.comparator);
    }
    debug_assert_eq!(
        report.config["classifier"],
        json!(match classifier {
            ClassifierArg::Euclid => ClassifierKind::Euclid,
            ClassifierArg::Similarity => ClassifierKind::Similarity,
        })
    );
    emit_json(&serde_json::to_value(&report)?, args.out.as_deref(), stdout)
}

pub fn cmd_embed_dump(mut args: EmbedDumpArgs, stdout: &mut dyn Write) -> Result<()> {
    let mut file: EmbedDumpArgs = read_config(&args.config)?;
    merge!(args, file; opts: model, out; bools: );
    merge!(args.data, file.data; opts: data, classes; bools: );
    let ds = load_data(&args.data)?;
    let embedding = load_embedding(required(&args.model, "model")?)?;
    let emb = embedding.forward(ds.features())?;
    let rows = ds.labels().iter().copied().zip(emb.row_iter());
    match &args.out {
        Some(p) => write_atomic(p, |w| write_labeled_rows(w, rows)),
        None => write_labeled_rows(stdout, rows),
    }
}

pub fn execute(cli: Cli, stdout: &mut dyn Write) -> Result<()> {
    match cli.command {
        Command::GenData(a) => cmd_gen_data(a, stdout),
        Command::TrainEmbed(a) => cmd_train_embed(a, stdout),
        Command::TrainComparator(a) => cmd_train_comparator(a, stdout),
        Command::Evaluate(a) => cmd_evaluate(a, stdout),
        Command::EmbedDump(a) => cmd_embed_dump(a, stdout),
    }
}

/// Parses `args` and runs the command. Returns the process exit code:
/// 0 on success, 2 for usage errors, 1 for everything else.
pub fn run_from<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    let stdout = std::io::stdout();
    let mut lock = stdout.lock();
    match execute(cli, &mut lock).and_then(|()| Ok(lock.flush()?)) {
        Ok(()) => 0,
        Err(Error::Io(e)) if e.kind() == std::io::ErrorKind::BrokenPipe => 0,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

pub fn run() -> i32 {
    run_from(std::env::args_os())
}
