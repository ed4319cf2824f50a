//! Argument definitions and the five commands.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use headmotion::dsp::SpectrumMatrix;
use headmotion::eval::{
    evaluate_classifier, evaluate_episodes, run_ablation, stratified_split, AblationConfig, AblationReport,
    AblationRow, Confusion, SplitIndices, Splits,
};
use headmotion::radar_sim::HeadMotion;
use headmotion::siamese::{
    train_cnn_baseline, train_siamese, BackboneSpec, CnnClassifier, SiameseModel, TrainHistory,
    NUM_CLASSES,
};
use serde::{Deserialize, Serialize};

use crate::checkpoint::{Checkpoint, Model, ModelKind, SplitRecord};
use crate::config::Config;
use crate::dataset::{generate, DatasetFile};
use crate::error::{CliError, CliResult};
use crate::io::write_atomic;
use crate::plot::{file_name, render_svg};
use crate::report::{metric, to_sorted_json};

#[derive(Debug, Parser)]
#[command(name = "headmotion", version, about = "Driver head-movement classification from simulated FMCW radar")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// Seed for every random choice the command makes.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// JSON config file; defaults apply to anything it leaves out.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output file (or directory for `plot`).
    #[arg(long)]
    pub out: PathBuf,
    /// Suppress the summary on stdout.
    #[arg(long)]
    pub quiet: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate a labelled dataset of spectrum matrices.
    Simulate {
        #[command(flatten)]
        common: Common,
        /// Per-class sample counts: front,nod,shake,lowered.
        #[arg(long, value_delimiter = ',')]
        counts: Option<Vec<usize>>,
    },
    /// Split a dataset and train a model on it.
    Train {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        data: PathBuf,
        #[arg(long, value_enum, default_value_t = ModelKind::Siamese)]
        model: ModelKind,
        /// Overrides `train.epochs` from the config.
        #[arg(long)]
        epochs: Option<usize>,
        /// Where to write the JSON history; next to the checkpoint by default.
        #[arg(long)]
        history: Option<PathBuf>,
    },
    /// Evaluate a checkpoint on the test split of a dataset.
    Eval {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        data: PathBuf,
        /// Overrides `eval.episodes` from the config.
        #[arg(long)]
        episodes: Option<usize>,
    },
    /// Train both models on growing fractions of the training split.
    Ablation {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        data: PathBuf,
        #[arg(long, value_delimiter = ',')]
        fractions: Option<Vec<f64>>,
        #[arg(long)]
        epochs: Option<usize>,
    },
    /// Render samples as SVG heatmaps.
    Plot {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        data: PathBuf,
        #[arg(long, value_delimiter = ',', required = true)]
        indices: Vec<usize>,
    },
}

impl Command {
    pub fn common(&self) -> &Common {
        match self {
            Command::Simulate { common, .. }
            | Command::Train { common, .. }
            | Command::Eval { common, .. }
            | Command::Ablation { common, .. }
            | Command::Plot { common, .. } => common,
        }
    }
}

/// Runs a command and returns the summary meant for stdout.
pub fn run(command: &Command) -> CliResult<String> {
    match command {
        Command::Simulate { common, counts } => simulate(common, counts.as_deref()),
        Command::Train {
            common,
            data,
            model,
            epochs,
            history,
        } => train(common, data, *model, *epochs, history.as_deref()),
        Command::Eval {
            common,
            checkpoint,
            data,
            episodes,
        } => eval(common, checkpoint, data, *episodes),
        Command::Ablation {
            common,
            data,
            fractions,
            epochs,
        } => ablation(common, data, fractions.as_deref(), *epochs),
        Command::Plot { common, data, indices } => plot(common, data, indices),
    }
}

pub fn simulate(common: &Common, counts: Option<&[usize]>) -> CliResult<String> {
    let cfg = Config::load(common.config.as_deref())?;
    let counts = counts.unwrap_or(&cfg.dataset.class_counts);
    let data = generate(&cfg, counts, common.seed)?;
    data.write(&common.out)?;
    let per_class: Vec<String> = data.class_counts().iter().map(|(k, v)| format!("{k}={v}")).collect();
    Ok(format!(
        "wrote {} samples to {} ({})",
        data.header.samples,
        common.out.display(),
        per_class.join(", ")
    ))
}

fn check_shape(data: &DatasetFile, spec: &BackboneSpec) -> CliResult<()> {
    let h = &data.header;
    if spec.input_shape != [h.bins, h.frames, 1] {
        return Err(CliError::Invalid(format!(
            "model expects {:?} inputs but the dataset holds {}×{} matrices",
            spec.input_shape, h.bins, h.frames
        )));
    }
    Ok(())
}

/// Stratified 72/8/20 split of a dataset with the config's fractions.
pub fn split_dataset(data: &DatasetFile, cfg: &Config, seed: u64) -> (SplitIndices, Splits, SplitRecord) {
    let labels: Vec<u8> = data.samples.iter().map(|m| m.label).collect();
    let idx = stratified_split(&labels, cfg.split, seed);
    let splits = Splits::new(&data.samples, &idx);
    let record = SplitRecord {
        fractions: cfg.split,
        seed,
        train: idx.train.len(),
        val: idx.val.len(),
        test: idx.test.len(),
    };
    (idx, splits, record)
}

#[derive(Debug, Serialize)]
struct EpochRow {
    epoch: usize,
    train_loss: f64,
    val_accuracy: f64,
}

#[derive(Debug, Serialize)]
struct HistoryReport {
    model: ModelKind,
    seed: u64,
    split: SplitRecord,
    split_rule: &'static str,
    param_count: usize,
    initial_loss: Option<f64>,
    epochs: Vec<EpochRow>,
    best_epoch: usize,
    best_val_accuracy: Option<f64>,
    stopped_early: bool,
}

const SPLIT_RULE: &str = "validation and test sizes are floored, the remainder goes to training";

fn history_path(out: &Path) -> PathBuf {
    let mut name = out.file_name().map(|n| n.to_os_string()).unwrap_or_default();
    name.push(".history.json");
    out.with_file_name(name)
}

/// Trains one model on a split; training failures become exit code 3.
pub fn fit(kind: ModelKind, cfg: &Config, splits: &Splits, seed: u64) -> CliResult<(Model, TrainHistory)> {
    let mut train_cfg = cfg.train.clone();
    train_cfg.seed = seed;
    let spec = BackboneSpec::default();
    Ok(match kind {
        ModelKind::Siamese => {
            let mut m = SiameseModel::new(spec, cfg.distance, seed)?;
            let h = train_siamese(&mut m, &splits.train, &splits.val, &train_cfg).map_err(CliError::training)?;
            (Model::Siamese(m), h)
        }
        ModelKind::Cnn => {
            let mut m = CnnClassifier::new(spec, NUM_CLASSES, seed)?;
            let h = train_cnn_baseline(&mut m, &splits.train, &splits.val, &train_cfg).map_err(CliError::training)?;
            (Model::Cnn(m), h)
        }
    })
}

pub fn train(
    common: &Common,
    data_path: &Path,
    kind: ModelKind,
    epochs: Option<usize>,
    history_out: Option<&Path>,
) -> CliResult<String> {
    let mut cfg = Config::load(common.config.as_deref())?;
    if let Some(e) = epochs {
        cfg.train.epochs = e;
    }
    let data = DatasetFile::read(data_path)?;
    check_shape(&data, &BackboneSpec::default())?;
    let (_, splits, record) = split_dataset(&data, &cfg, common.seed);
    let (model, history) = fit(kind, &cfg, &splits, common.seed)?;
    let mut train_cfg = cfg.train.clone();
    train_cfg.seed = common.seed;
    let ck = Checkpoint::new(model, common.seed, train_cfg, record.clone(), history.clone())?;
    let report = HistoryReport {
        model: kind,
        seed: common.seed,
        split: record,
        split_rule: SPLIT_RULE,
        param_count: ck.manifest.param_count,
        initial_loss: history.initial_loss.map(metric),
        epochs: history
            .epochs
            .iter()
            .map(|e| EpochRow {
                epoch: e.epoch,
                train_loss: metric(e.train_loss),
                val_accuracy: metric(e.val_accuracy),
            })
            .collect(),
        best_epoch: history.best_epoch,
        best_val_accuracy: history.best_val_accuracy.map(metric),
        stopped_early: history.stopped_early,
    };
    ck.write(&common.out)?;
    let hist_path = history_out.map(Path::to_path_buf).unwrap_or_else(|| history_path(&common.out));
    write_atomic(&hist_path, to_sorted_json(&report)?.as_bytes())?;
    Ok(format!(
        "trained {kind:?} for {} epochs (best {}, val accuracy {}); checkpoint {}, history {}",
        history.epochs.len(),
        history.best_epoch,
        history.best_val_accuracy.map(|a| format!("{:.4}", a)).unwrap_or_else(|| "n/a".into()),
        common.out.display(),
        hist_path.display()
    ))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingExport {
    pub dim: usize,
    pub labels: Vec<u8>,
    pub vectors: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalOutput {
    pub model: ModelKind,
    pub accuracy: f64,
    pub accuracy_std: f64,
    pub confusion: Confusion,
    pub per_class_accuracy: Vec<f64>,
    pub class_names: Vec<String>,
    pub episodes: usize,
    pub queries: u64,
    pub seed: u64,
    pub test_samples: usize,
    pub embeddings: EmbeddingExport,
}

/// Evaluates a loaded checkpoint on the test split it was trained against.
pub fn evaluate_checkpoint(ck: &Checkpoint, data: &DatasetFile, episodes: usize, seed: u64) -> CliResult<EvalOutput> {
    check_shape(data, &ck.manifest.backbone)?;
    let labels: Vec<u8> = data.samples.iter().map(|m| m.label).collect();
    let s = &ck.manifest.split;
    let idx = stratified_split(&labels, s.fractions, s.seed);
    if (idx.train.len(), idx.val.len(), idx.test.len()) != (s.train, s.val, s.test) {
        return Err(CliError::Invalid("dataset does not reproduce the checkpoint's split".into()));
    }
    let test: Vec<SpectrumMatrix> = idx.test.iter().map(|&i| data.samples[i].clone()).collect();
    let refs: Vec<&SpectrumMatrix> = test.iter().collect();
    let (report, vectors) = match &ck.model {
        Model::Siamese(m) => (evaluate_episodes(m, &test, episodes, seed)?, m.embed_many(&refs)?),
        Model::Cnn(m) => (evaluate_classifier(m, &test)?, m.embed_many(&refs)?),
    };
    Ok(EvalOutput {
        model: ck.manifest.model,
        accuracy: metric(report.accuracy),
        accuracy_std: metric(report.accuracy_std),
        confusion: report.confusion,
        per_class_accuracy: report.per_class_accuracy.into_iter().map(metric).collect(),
        class_names: HeadMotion::ALL.iter().map(|c| c.name().to_string()).collect(),
        episodes: report.episodes,
        queries: report.queries,
        seed,
        test_samples: test.len(),
        embeddings: EmbeddingExport {
            dim: vectors.first().map_or(0, Vec::len),
            labels: test.iter().map(|m| m.label).collect(),
            vectors,
        },
    })
}

pub fn eval(common: &Common, checkpoint: &Path, data_path: &Path, episodes: Option<usize>) -> CliResult<String> {
    let cfg = Config::load(common.config.as_deref())?;
    let ck = Checkpoint::read(checkpoint)?;
    let data = DatasetFile::read(data_path)?;
    let out = evaluate_checkpoint(&ck, &data, episodes.unwrap_or(cfg.eval.episodes), common.seed)?;
    write_atomic(&common.out, to_sorted_json(&out)?.as_bytes())?;
    Ok(format!(
        "{:?} accuracy {:.4} over {} queries; report {}",
        out.model,
        out.accuracy,
        out.queries,
        common.out.display()
    ))
}

#[derive(Debug, Serialize, Deserialize)]
struct CsvRow {
    fraction: f64,
    samples: usize,
    siamese_acc: f64,
    cnn_acc: f64,
    seed: u64,
}

pub fn ablation_csv(report: &AblationReport) -> CliResult<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in &report.rows {
        w.serialize(CsvRow {
            fraction: r.fraction,
            samples: r.samples,
            siamese_acc: metric(r.siamese_accuracy),
            cnn_acc: metric(r.baseline_accuracy),
            seed: report.seed,
        })
        .map_err(|e| CliError::Runtime(e.to_string()))?;
    }
    let bytes = w.into_inner().map_err(|e| CliError::Runtime(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| CliError::Runtime(e.to_string()))
}

pub fn parse_ablation_csv(text: &str) -> CliResult<AblationReport> {
    let mut rows = Vec::new();
    let mut seed = None;
    for rec in csv::Reader::from_reader(text.as_bytes()).deserialize::<CsvRow>() {
        let r = rec.map_err(|e| CliError::Invalid(format!("ablation csv: {e}")))?;
        if seed.is_some_and(|s| s != r.seed) {
            return Err(CliError::Invalid("ablation csv mixes seeds".into()));
        }
        seed = Some(r.seed);
        rows.push(AblationRow {
            fraction: r.fraction,
            samples: r.samples,
            siamese_accuracy: r.siamese_acc,
            baseline_accuracy: r.cnn_acc,
        });
    }
    let seed = seed.ok_or_else(|| CliError::Invalid("ablation csv has no rows".into()))?;
    Ok(AblationReport { rows, seed })
}

/// Runs the sweep with accuracies rounded as they are reported.
pub fn run_ablation_on(data: &DatasetFile, cfg: &Config, fractions: &[f64], seed: u64) -> CliResult<AblationReport> {
    check_shape(data, &BackboneSpec::default())?;
    if fractions.iter().any(|f| !(*f > 0.0 && *f <= 1.0)) {
        return Err(CliError::Invalid("fractions must lie in (0, 1]".into()));
    }
    if fractions.windows(2).any(|w| w[0] >= w[1]) {
        return Err(CliError::Invalid("fractions must be strictly increasing".into()));
    }
    let (_, splits, _) = split_dataset(data, cfg, seed);
    let acfg = AblationConfig {
        fractions: fractions.to_vec(),
        train: cfg.train.clone(),
        episodes: cfg.eval.episodes,
        distance: cfg.distance,
    };
    // unsatisfiable fractions are input errors, diverging training is a runtime one
    let mut report = run_ablation(&splits, &acfg, seed)?;
    for r in &mut report.rows {
        r.siamese_accuracy = metric(r.siamese_accuracy);
        r.baseline_accuracy = metric(r.baseline_accuracy);
    }
    Ok(report)
}

pub fn ablation(common: &Common, data_path: &Path, fractions: Option<&[f64]>, epochs: Option<usize>) -> CliResult<String> {
    let mut cfg = Config::load(common.config.as_deref())?;
    if let Some(e) = epochs {
        cfg.train.epochs = e;
    }
    let fractions = fractions.map(<[f64]>::to_vec).unwrap_or_else(|| cfg.ablation.fractions.clone());
    let data = DatasetFile::read(data_path)?;
    let report = run_ablation_on(&data, &cfg, &fractions, common.seed)?;
    write_atomic(&common.out, ablation_csv(&report)?.as_bytes())?;
    Ok(format!("wrote {} ablation rows to {}", report.rows.len(), common.out.display()))
}

pub fn plot(common: &Common, data_path: &Path, indices: &[usize]) -> CliResult<String> {
    let data = DatasetFile::read(data_path)?;
    if let Some(&bad) = indices.iter().find(|&&i| i >= data.samples.len()) {
        return Err(CliError::Invalid(format!(
            "sample index {bad} out of range for {} samples",
            data.samples.len()
        )));
    }
    fs::create_dir_all(&common.out).map_err(|e| CliError::io(&common.out, e))?;
    for &i in indices {
        let m = &data.samples[i];
        write_atomic(&common.out.join(file_name(i, m.label)), render_svg(m).as_bytes())?;
    }
    Ok(format!("wrote {} heatmaps to {}", indices.len(), common.out.display()))
}
