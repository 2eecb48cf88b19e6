use std::collections::BTreeMap;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use fts_core::balance::{balance, record_holdout_split, single_group, BalanceConfig};
use fts_core::eval::{alpha_sweep, conditional_confusion, evaluate, SweepConfig};
use fts_core::io::{format_groups, read_dataset, read_groups, write_atomic, write_dataset};
use fts_core::model::{load_checkpoint, save_checkpoint, train, ArchitectureDescriptor, LayerShape, Model, TrainConfig};
use fts_core::report::{confusion_table, saliency_table, sweep_table};
use fts_core::rng::derive_seed;
use fts_core::saliency::{surrogate_saliency, zero_out_saliency, SaliencySpec};
use fts_core::surrogate::{epoch_surrogate_with_reports, SurrogateConfig, SurrogateKind};
use fts_core::synth::{generate_synthetic, SyntheticClassSpec};
use fts_core::{ChannelRole, Dataset, Error, Result};

pub const SEED_ENV: &str = "FTS_SEED";

#[derive(Debug, Parser)]
#[command(name = "fts", version, about = "Fourier-transform surrogates for sleep-stage epochs")]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Replace every channel of every epoch by a surrogate.
    Surrogate(SurrogateArgs),
    /// Up-sample minority classes and augment the repetitions.
    Balance(BalanceArgs),
    /// Record-holdout split into training and validation files.
    Split(SplitArgs),
    /// Train a classifier and write a checkpoint.
    Train(TrainArgs),
    /// Confusion matrix, per-class recall and macro F1.
    Evaluate(EvaluateArgs),
    /// Confusion on surrogates of correctly classified epochs.
    Condconf(CondconfArgs),
    /// Macro F1 and per-class recall over alpha values and folds.
    Sweep(SweepArgs),
    /// Class probabilities as a window of channels is replaced.
    Saliency(SaliencyArgs),
    /// Layer shapes and parameter counts of an architecture.
    Shapes(ShapesArgs),
    /// Generate a labeled synthetic dataset.
    Synth(SynthArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Kind {
    Ft,
    Iaaft,
}

impl From<Kind> for SurrogateKind {
    fn from(k: Kind) -> Self {
        match k {
            Kind::Ft => SurrogateKind::Ft,
            Kind::Iaaft => SurrogateKind::Iaaft,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Arch {
    Full,
    Reference,
}

impl Arch {
    fn descriptor(self) -> ArchitectureDescriptor {
        match self {
            Arch::Full => ArchitectureDescriptor::full(),
            Arch::Reference => ArchitectureDescriptor::reference(),
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Method {
    Surrogate,
    Zero,
}

#[derive(Debug, Args)]
struct SeedArg {
    /// Random seed; falls back to $FTS_SEED, then 0.
    #[arg(long)]
    seed: Option<u64>,
}

impl SeedArg {
    fn resolve(&self) -> Result<u64> {
        if let Some(s) = self.seed {
            return Ok(s);
        }
        match std::env::var(SEED_ENV) {
            Ok(v) => {
                let s = v
                    .trim()
                    .parse()
                    .map_err(|_| Error::InvalidInput(format!("{SEED_ENV}=`{v}` is not an unsigned integer")))?;
                eprintln!("fts: using seed {s} from {SEED_ENV}");
                Ok(s)
            }
            Err(_) => Ok(0),
        }
    }
}

#[derive(Debug, Args)]
struct SurrogateArgs {
    input: PathBuf,
    output: PathBuf,
    #[arg(long, value_enum, default_value = "ft")]
    kind: Kind,
    #[command(flatten)]
    seed: SeedArg,
    /// Maximum IAAFT iterations.
    #[arg(long, default_value_t = 100)]
    iters: usize,
    /// IAAFT relative-improvement tolerance.
    #[arg(long, default_value_t = 1e-8)]
    tol: f64,
    /// IAAFT report table (defaults to standard output).
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct BalanceArgs {
    input: PathBuf,
    output: PathBuf,
    #[arg(long, default_value_t = 0.0)]
    alpha: f64,
    #[arg(long, default_value_t = 0.9)]
    beta: f64,
    #[command(flatten)]
    seed: SeedArg,
    #[arg(long, value_enum, default_value = "ft")]
    kind: Kind,
}

#[derive(Debug, Args)]
struct GroupsArg {
    /// Two columns, record id and group id; default puts every record in one group.
    #[arg(long)]
    groups_file: Option<PathBuf>,
}

impl GroupsArg {
    fn load(&self, data: &Dataset) -> Result<BTreeMap<String, String>> {
        match &self.groups_file {
            Some(p) => read_groups(p),
            None => Ok(single_group(data)),
        }
    }
}

#[derive(Debug, Args)]
struct SplitArgs {
    input: PathBuf,
    #[arg(long, default_value_t = 5)]
    folds: usize,
    #[arg(long, default_value_t = 0)]
    fold: usize,
    #[command(flatten)]
    groups: GroupsArg,
    #[arg(long)]
    train_out: PathBuf,
    #[arg(long)]
    val_out: PathBuf,
}

#[derive(Debug, Args)]
struct TrainArgs {
    input: PathBuf,
    /// Checkpoint to write.
    weights: PathBuf,
    #[arg(long, default_value_t = 2000)]
    steps: usize,
    #[arg(long, default_value_t = 0.0016)]
    lr: f64,
    #[arg(long, default_value_t = 128)]
    batch: usize,
    #[command(flatten)]
    seed: SeedArg,
    #[arg(long, value_enum, default_value = "reference")]
    arch: Arch,
}

#[derive(Debug, Args)]
struct EvaluateArgs {
    input: PathBuf,
    weights: PathBuf,
    /// Confusion table (defaults to standard output).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct CondconfArgs {
    input: PathBuf,
    weights: PathBuf,
    #[arg(long, value_enum, default_value = "ft")]
    kind: Kind,
    #[command(flatten)]
    seed: SeedArg,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SweepArgs {
    input: PathBuf,
    /// Comma-separated alpha values.
    #[arg(long, value_delimiter = ',', default_value = "0,0.2,0.4,0.6,0.8,1")]
    alphas: Vec<f64>,
    #[arg(long, default_value_t = 0.9)]
    beta: f64,
    #[arg(long, default_value_t = 5)]
    folds: usize,
    #[command(flatten)]
    seed: SeedArg,
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    groups: GroupsArg,
    #[arg(long, default_value_t = 2000)]
    steps: usize,
    #[arg(long, default_value_t = 128)]
    batch: usize,
    #[arg(long, default_value_t = 0.0016)]
    lr: f64,
    #[arg(long, value_enum, default_value = "ft")]
    kind: Kind,
    #[arg(long, value_enum, default_value = "reference")]
    arch: Arch,
}

#[derive(Debug, Args)]
struct SaliencyArgs {
    input: PathBuf,
    weights: PathBuf,
    #[arg(long, default_value_t = 0)]
    epoch_index: usize,
    /// Comma-separated channel roles replaced together.
    #[arg(long, value_delimiter = ',', default_value = "EEG1,EEG2")]
    channels: Vec<String>,
    /// Window length in seconds.
    #[arg(long, default_value_t = 5.0)]
    window: f64,
    /// Window step in seconds.
    #[arg(long, default_value_t = 0.5)]
    step: f64,
    /// Crossfade length in seconds.
    #[arg(long, default_value_t = 0.5)]
    crossfade: f64,
    #[arg(long, default_value_t = 500)]
    reps: usize,
    #[arg(long, value_enum, default_value = "surrogate")]
    method: Method,
    #[command(flatten)]
    seed: SeedArg,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ShapesArgs {
    #[arg(long, value_enum, default_value = "full")]
    arch: Arch,
}

#[derive(Debug, Args)]
struct SynthArgs {
    /// JSON spec file, or `builtin:<name>` for a bundled spec.
    spec: String,
    output: PathBuf,
    #[arg(long, default_value_t = 600)]
    n: usize,
    #[command(flatten)]
    seed: SeedArg,
    /// Record-to-group table for `split` and `sweep`.
    #[arg(long)]
    groups_out: Option<PathBuf>,
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Surrogate(a) => surrogate(a),
        Command::Balance(a) => balance_cmd(a),
        Command::Split(a) => split(a),
        Command::Train(a) => train_cmd(a),
        Command::Evaluate(a) => evaluate_cmd(a),
        Command::Condconf(a) => condconf(a),
        Command::Sweep(a) => sweep(a),
        Command::Saliency(a) => saliency(a),
        Command::Shapes(a) => shapes(a),
        Command::Synth(a) => synth(a),
    }
}

/// Writes to `path` atomically, or to standard output.
fn emit(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => write_atomic(p, text.as_bytes()),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes())?;
            out.flush()?;
            Ok(())
        }
    }
}

fn class_counts_line(label: &str, data: &Dataset) -> String {
    let counts: Vec<String> = data
        .vocabulary()
        .iter()
        .zip(data.class_counts())
        .map(|(v, c)| format!("{v}={c}"))
        .collect();
    format!("{label}\t{}\n", counts.join("\t"))
}

fn surrogate(a: SurrogateArgs) -> Result<()> {
    let seed = a.seed.resolve()?;
    let data = read_dataset(&a.input)?;
    let cfg = SurrogateConfig {
        kind: a.kind.into(),
        iaaft_max_iters: a.iters,
        iaaft_tolerance: a.tol,
        seed,
        ..SurrogateConfig::default()
    };
    cfg.validate()?;
    let mut report = String::from("epoch\tchannel\titerations\tdiscrepancy\tstop\n");
    let mut epochs = Vec::with_capacity(data.len());
    for (i, e) in data.epochs().iter().enumerate() {
        let (s, reports) = epoch_surrogate_with_reports(e, &cfg, derive_seed(seed, &[i as u64]))?;
        for (c, r) in reports.iter().enumerate() {
            report += &format!("{i}\t{}\t{}\t{}\t{}\n", e.roles()[c], r.iterations, r.discrepancy, format!("{:?}", r.stop).to_lowercase());
        }
        epochs.push(s);
    }
    let (_, records, vocab) = data.into_parts();
    write_dataset(&a.output, &Dataset::new(epochs, records, vocab)?)?;
    if matches!(a.kind, Kind::Iaaft) {
        emit(a.report.as_deref(), &report)?;
    }
    Ok(())
}

fn balance_cmd(a: BalanceArgs) -> Result<()> {
    let cfg = BalanceConfig {
        alpha: a.alpha,
        beta: a.beta,
        seed: a.seed.resolve()?,
        surrogate_kind: a.kind.into(),
    };
    let data = read_dataset(&a.input)?;
    let out = balance(&data, &cfg)?;
    write_dataset(&a.output, &out.dataset)?;
    let text = class_counts_line("before", &data)
        + &class_counts_line("after", &out.dataset)
        + &format!("replaced_channels\t{}/{}\n", out.replaced_channels, out.flagged_channels);
    emit(None, &text)
}

fn split(a: SplitArgs) -> Result<()> {
    let data = read_dataset(&a.input)?;
    let groups = a.groups.load(&data)?;
    let (train_set, val_set) = record_holdout_split(&data, a.fold, a.folds, &groups)?;
    write_dataset(&a.train_out, &train_set)?;
    write_dataset(&a.val_out, &val_set)?;
    emit(None, &(class_counts_line("train", &train_set) + &class_counts_line("validation", &val_set)))
}

fn train_cmd(a: TrainArgs) -> Result<()> {
    let cfg = TrainConfig {
        steps: a.steps,
        learning_rate: a.lr,
        batch_size: a.batch,
        seed: a.seed.resolve()?,
        ..TrainConfig::default()
    };
    let data = read_dataset(&a.input)?;
    let descriptor = a.arch.descriptor().with_n_classes(data.n_classes());
    let outcome = train(&descriptor, &data, &cfg)?;
    let mut trace = String::from("step\tloss\n");
    for (i, l) in outcome.losses.iter().enumerate() {
        trace += &format!("{i}\t{l}\n");
    }
    let model = Model::new(descriptor, outcome.weights)?;
    save_checkpoint(&a.weights, &model, Some(&cfg))?;
    emit(None, &trace)
}

fn load_model(path: &Path, data: &Dataset) -> Result<Model> {
    let model = load_checkpoint(path)?.model;
    if model.n_classes() != data.n_classes() {
        return Err(Error::InvalidInput(format!(
            "checkpoint predicts {} classes, dataset has {}",
            model.n_classes(),
            data.n_classes()
        )));
    }
    Ok(model)
}

fn evaluate_cmd(a: EvaluateArgs) -> Result<()> {
    let data = read_dataset(&a.input)?;
    let model = load_model(&a.weights, &data)?;
    let ev = evaluate(&model, &data)?;
    emit(a.out.as_deref(), &confusion_table(&ev.confusion, data.vocabulary()))
}

fn condconf(a: CondconfArgs) -> Result<()> {
    let seed = a.seed.resolve()?;
    let data = read_dataset(&a.input)?;
    let model = load_model(&a.weights, &data)?;
    match conditional_confusion(&model, &data, a.kind.into(), seed)? {
        Some(m) => emit(a.out.as_deref(), &confusion_table(&m, data.vocabulary())),
        None => Err(Error::InvalidInput("no epoch is classified correctly, so the conditional confusion is empty".into())),
    }
}

fn sweep(a: SweepArgs) -> Result<()> {
    let data = read_dataset(&a.input)?;
    let groups = a.groups.load(&data)?;
    let mut cfg = SweepConfig::new(a.alphas, a.folds, a.seed.resolve()?);
    cfg.beta = a.beta;
    cfg.kind = a.kind.into();
    cfg.descriptor = a.arch.descriptor();
    cfg.train = TrainConfig {
        steps: a.steps,
        batch_size: a.batch,
        learning_rate: a.lr,
        ..TrainConfig::default()
    };
    let rows = alpha_sweep(&data, &groups, &cfg)?;
    emit(a.out.as_deref(), &sweep_table(&rows, data.vocabulary()))
}

fn saliency(a: SaliencyArgs) -> Result<()> {
    let data = read_dataset(&a.input)?;
    let model = load_model(&a.weights, &data)?;
    if a.epoch_index >= data.len() {
        return Err(Error::InvalidInput(format!(
            "epoch index {} out of range for {} epochs",
            a.epoch_index,
            data.len()
        )));
    }
    let spec = SaliencySpec {
        window_len_s: a.window,
        step_s: a.step,
        crossfade_s: a.crossfade,
        n_replacements: a.reps,
        target_channels: a.channels.iter().map(|c| c.parse::<ChannelRole>()).collect::<Result<_>>()?,
        seed: a.seed.resolve()?,
    };
    let epoch = data.epoch(a.epoch_index);
    let map = match a.method {
        Method::Surrogate => surrogate_saliency(&model, epoch, &spec)?,
        Method::Zero => zero_out_saliency(&model, epoch, &spec)?,
    };
    emit(a.out.as_deref(), &saliency_table(&map, data.vocabulary()))
}

/// `32936` as `32,936`.
pub fn thousands(n: usize) -> String {
    let digits = n.to_string();
    let mut out = String::new();
    for (i, ch) in digits.chars().enumerate() {
        if i > 0 && (digits.len() - i) % 3 == 0 {
            out.push(',');
        }
        out.push(ch);
    }
    out
}

fn shape_line(l: &LayerShape) -> String {
    format!("{:<10} {:<34} {:>12} {:>8}\n", l.name, l.description, l.output.to_string(), thousands(l.params))
}

fn shapes(a: ShapesArgs) -> Result<()> {
    let d = a.arch.descriptor();
    let report = d.infer_shapes()?;
    let counts = d.count_parameters()?;
    let mut text = format!("architecture: {}\ninput: {}\n", d.name, report.input);
    report.channel.iter().for_each(|l| text += &shape_line(l));
    text += &format!("joined input: {}\n", report.joined_input);
    report.joined.iter().for_each(|l| text += &shape_line(l));
    text += &format!(
        "channel pipe: {}\njoined pipe: {}\ntotal: {} ({} channel parameter groups)\n",
        thousands(counts.channel_pipe),
        thousands(counts.joined_pipe),
        thousands(counts.total),
        counts.channel_groups
    );
    emit(None, &text)
}

fn synth(a: SynthArgs) -> Result<()> {
    let spec = match a.spec.strip_prefix("builtin:") {
        Some(name) => SyntheticClassSpec::bundled(name)?,
        None => SyntheticClassSpec::from_json(&std::fs::read_to_string(&a.spec)?)?,
    };
    let s = generate_synthetic(&spec, a.n, a.seed.resolve()?)?;
    write_dataset(&a.output, &s.dataset)?;
    if let Some(p) = &a.groups_out {
        write_atomic(p, format_groups(&s.groups).as_bytes())?;
    }
    emit(None, &class_counts_line("counts", &s.dataset))
}
