//! One-shot evaluation with a single support sample per class, accuracy and
//! confusion bookkeeping, dataset splitting and the training-size ablation.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dsp::SpectrumMatrix;
use crate::error::{invalid, Result};
use crate::radar_sim::mix_seed;
use crate::siamese::{
    argmax, class_index, train_cnn_baseline, train_siamese, BackboneSpec, CnnClassifier,
    DistanceMode, SiameseModel, TrainConfig, NUM_CLASSES,
};

/// One labelled exemplar per class, ordered by label.
#[derive(Debug, Clone)]
pub struct SupportSet<'a> {
    members: Vec<&'a SpectrumMatrix>,
}

impl<'a> SupportSet<'a> {
    pub fn new(mut members: Vec<&'a SpectrumMatrix>) -> Result<Self> {
        members.sort_by_key(|m| m.label);
        let labels: Vec<u8> = members.iter().map(|m| m.label).collect();
        let expected: Vec<u8> = (0..NUM_CLASSES as u8).collect();
        if labels != expected {
            return invalid(format!(
                "support set must hold exactly one sample of each class 0..{NUM_CLASSES}, got labels {labels:?}"
            ));
        }
        Ok(Self { members })
    }

    pub fn members(&self) -> &[&'a SpectrumMatrix] {
        &self.members
    }
}

/// Arg-max over per-class scores with ties resolved to the lowest class.
pub fn decide(scores: &[f64]) -> u8 {
    argmax(scores) as u8
}

/// Assigns `query` to the support class with the highest same-class score.
pub fn classify_one_shot(model: &SiameseModel, query: &SpectrumMatrix, support: &SupportSet<'_>) -> Result<u8> {
    let mut items = vec![query];
    items.extend(support.members());
    let emb = model.embed_many(&items)?;
    let scores: Vec<f64> = emb[1..]
        .iter()
        .map(|s| model.score_embeddings(&emb[0], s))
        .collect();
    Ok(decide(&scores))
}

/// Fraction of predictions equal to the truth.
pub fn accuracy(predictions: &[u8], truths: &[u8]) -> Result<f64> {
    if predictions.is_empty() || predictions.len() != truths.len() {
        return invalid("accuracy needs equally long, non-empty inputs");
    }
    let correct = predictions.iter().zip(truths).filter(|(p, t)| p == t).count();
    Ok(correct as f64 / predictions.len() as f64)
}

/// Rows are true classes, columns predicted classes.
pub type Confusion = Vec<Vec<u64>>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    /// Trace of the accumulated confusion matrix over its total.
    pub accuracy: f64,
    /// Standard deviation of the per-episode accuracy.
    pub accuracy_std: f64,
    pub confusion: Confusion,
    pub per_class_accuracy: Vec<f64>,
    pub episodes: usize,
    pub queries: u64,
    pub seed: u64,
}

impl EvalReport {
    fn from_confusion(confusion: Confusion, episode_acc: &[f64], seed: u64) -> Self {
        let total: u64 = confusion.iter().flatten().sum();
        let trace: u64 = (0..confusion.len()).map(|i| confusion[i][i]).sum();
        let per_class_accuracy = confusion
            .iter()
            .enumerate()
            .map(|(i, row)| {
                let n: u64 = row.iter().sum();
                if n == 0 {
                    0.0
                } else {
                    row[i] as f64 / n as f64
                }
            })
            .collect();
        let mean = episode_acc.iter().sum::<f64>() / episode_acc.len().max(1) as f64;
        let var = episode_acc.iter().map(|a| (a - mean).powi(2)).sum::<f64>()
            / episode_acc.len().max(1) as f64;
        Self {
            accuracy: if total == 0 { 0.0 } else { trace as f64 / total as f64 },
            accuracy_std: var.sqrt(),
            confusion,
            per_class_accuracy,
            episodes: episode_acc.len(),
            queries: total,
            seed,
        }
    }
}

/// Runs `episodes` one-shot episodes on `test`. Each episode draws one support
/// sample per class uniformly and classifies every remaining test sample.
pub fn evaluate_episodes(
    model: &SiameseModel,
    test: &[SpectrumMatrix],
    episodes: usize,
    seed: u64,
) -> Result<EvalReport> {
    if episodes == 0 {
        return invalid("at least one episode is required");
    }
    let by_class = class_index(test);
    if by_class.len() != NUM_CLASSES
        || by_class.keys().copied().ne(0..NUM_CLASSES as u8)
        || test.len() <= NUM_CLASSES
    {
        return invalid("the test set needs every class and at least one sample beyond the supports");
    }
    let refs: Vec<&SpectrumMatrix> = test.iter().collect();
    let emb = model.embed_many(&refs)?;
    let mut confusion = vec![vec![0u64; NUM_CLASSES]; NUM_CLASSES];
    let mut episode_acc = Vec::with_capacity(episodes);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..episodes {
        let support: Vec<usize> = by_class
            .values()
            .map(|members| members[rng.random_range(0..members.len())])
            .collect();
        let mut correct = 0u64;
        let mut count = 0u64;
        for (i, q) in test.iter().enumerate() {
            if support.contains(&i) {
                continue;
            }
            let scores: Vec<f64> = support
                .iter()
                .map(|&s| model.score_embeddings(&emb[i], &emb[s]))
                .collect();
            let pred = decide(&scores);
            confusion[q.label as usize][pred as usize] += 1;
            correct += u64::from(pred == q.label);
            count += 1;
        }
        episode_acc.push(correct as f64 / count as f64);
    }
    Ok(EvalReport::from_confusion(confusion, &episode_acc, seed))
}

/// Plain test-set evaluation of the softmax baseline.
pub fn evaluate_classifier(model: &CnnClassifier, test: &[SpectrumMatrix]) -> Result<EvalReport> {
    if test.is_empty() {
        return invalid("empty test set");
    }
    let refs: Vec<&SpectrumMatrix> = test.iter().collect();
    let pred = model.predict(&refs)?;
    let k = model.classes();
    let mut confusion = vec![vec![0u64; k]; k];
    for (p, m) in pred.iter().zip(test) {
        confusion[m.label as usize][*p as usize] += 1;
    }
    let truths: Vec<u8> = test.iter().map(|m| m.label).collect();
    let acc = accuracy(&pred, &truths)?;
    Ok(EvalReport::from_confusion(confusion, &[acc], 0))
}

/// Index lists of a train / validation / test split.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitIndices {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

/// Split proportions; the test and validation sizes are floored and the
/// remainder goes to training.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitFractions {
    pub train: f64,
    pub val: f64,
    pub test: f64,
}

impl Default for SplitFractions {
    fn default() -> Self {
        Self {
            train: 0.72,
            val: 0.08,
            test: 0.20,
        }
    }
}

impl SplitFractions {
    pub fn sizes(&self, n: usize) -> (usize, usize, usize) {
        let test = (self.test * n as f64).floor() as usize;
        let val = (self.val * n as f64).floor() as usize;
        (n - test - val, val, test)
    }
}

/// Class-interleaved ordering: members are shuffled within their class, then
/// every sample is keyed by `(rank + 0.5) / class_size`, so any prefix holds
/// each class in proportion to within one sample.
fn stratified_order(labels: &[u8], seed: u64) -> Vec<usize> {
    let mut by_class: BTreeMap<u8, Vec<usize>> = BTreeMap::new();
    for (i, &l) in labels.iter().enumerate() {
        by_class.entry(l).or_default().push(i);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut keyed = Vec::with_capacity(labels.len());
    for (label, members) in by_class.iter_mut() {
        members.shuffle(&mut rng);
        let n = members.len() as f64;
        for (rank, &i) in members.iter().enumerate() {
            keyed.push(((rank as f64 + 0.5) / n, *label, i));
        }
    }
    keyed.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    keyed.into_iter().map(|(_, _, i)| i).collect()
}

/// Seeded stratified split. Test comes first in the interleaved order, then
/// validation, then training.
pub fn stratified_split(labels: &[u8], fractions: SplitFractions, seed: u64) -> SplitIndices {
    let order = stratified_order(labels, seed);
    let (_, n_val, n_test) = fractions.sizes(labels.len());
    SplitIndices {
        test: order[..n_test].to_vec(),
        val: order[n_test..n_test + n_val].to_vec(),
        train: order[n_test + n_val..].to_vec(),
    }
}

/// Picks `round(fraction × class_total)` training samples of each class, where
/// `class_totals` counts the whole dataset.
pub fn stratified_subsample(
    train: &[SpectrumMatrix],
    class_totals: &BTreeMap<u8, usize>,
    fraction: f64,
    seed: u64,
) -> Result<Vec<SpectrumMatrix>> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return invalid(format!("fraction must lie in (0, 1], got {fraction}"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut by_class = class_index(train);
    let mut picked = Vec::new();
    for (label, &total) in class_totals {
        let want = (fraction * total as f64).round() as usize;
        let members = by_class.get_mut(label).map(std::mem::take).unwrap_or_default();
        if want > members.len() {
            return invalid(format!(
                "fraction {fraction} needs {want} samples of class {label} but the training split has {}",
                members.len()
            ));
        }
        let mut members = members;
        members.shuffle(&mut rng);
        picked.extend(members.into_iter().take(want));
    }
    picked.sort_unstable();
    Ok(picked.into_iter().map(|i| train[i].clone()).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub fraction: f64,
    pub samples: usize,
    pub siamese_accuracy: f64,
    pub baseline_accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationReport {
    pub rows: Vec<AblationRow>,
    pub seed: u64,
}

/// Settings of one ablation sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AblationConfig {
    pub fractions: Vec<f64>,
    pub train: TrainConfig,
    pub episodes: usize,
    pub distance: DistanceMode,
}

impl Default for AblationConfig {
    fn default() -> Self {
        Self {
            fractions: vec![0.10, 0.20, 0.30, 0.50],
            train: TrainConfig::default(),
            episodes: 20,
            distance: DistanceMode::AbsDiff,
        }
    }
}

/// The dataset partitioned into the three splits.
pub struct Splits {
    pub train: Vec<SpectrumMatrix>,
    pub val: Vec<SpectrumMatrix>,
    pub test: Vec<SpectrumMatrix>,
    pub class_totals: BTreeMap<u8, usize>,
}

impl Splits {
    pub fn new(dataset: &[SpectrumMatrix], idx: &SplitIndices) -> Self {
        let take = |ix: &[usize]| ix.iter().map(|&i| dataset[i].clone()).collect::<Vec<_>>();
        Self {
            train: take(&idx.train),
            val: take(&idx.val),
            test: take(&idx.test),
            class_totals: class_index(dataset)
                .into_iter()
                .map(|(k, v)| (k, v.len()))
                .collect(),
        }
    }
}

/// For each fraction, trains both models from scratch on a stratified subset of
/// the training split (validation and test stay fixed) and evaluates them.
pub fn run_ablation(splits: &Splits, cfg: &AblationConfig, seed: u64) -> Result<AblationReport> {
    if cfg.fractions.is_empty() {
        return invalid("no fractions given");
    }
    if cfg.fractions.windows(2).any(|w| w[0] >= w[1]) {
        return invalid("fractions must be strictly increasing");
    }
    // draw every subset first so an unsatisfiable fraction fails before any training
    let subsets = cfg
        .fractions
        .iter()
        .enumerate()
        .map(|(i, &f)| stratified_subsample(&splits.train, &splits.class_totals, f, mix_seed(seed, i as u64)))
        .collect::<Result<Vec<_>>>()?;
    let mut rows = Vec::with_capacity(cfg.fractions.len());
    for (&fraction, subset) in cfg.fractions.iter().zip(subsets) {
        let mut train_cfg = cfg.train.clone();
        train_cfg.seed = seed;

        let mut siamese = SiameseModel::new(BackboneSpec::default(), cfg.distance, seed)?;
        train_siamese(&mut siamese, &subset, &splits.val, &train_cfg)?;
        let siamese_accuracy =
            evaluate_episodes(&siamese, &splits.test, cfg.episodes, mix_seed(seed, 0xE7))?.accuracy;

        let mut cnn = CnnClassifier::new(BackboneSpec::default(), NUM_CLASSES, seed)?;
        train_cnn_baseline(&mut cnn, &subset, &splits.val, &train_cfg)?;
        let baseline_accuracy = evaluate_classifier(&cnn, &splits.test)?.accuracy;

        rows.push(AblationRow {
            fraction,
            samples: subset.len(),
            siamese_accuracy,
            baseline_accuracy,
        });
    }
    Ok(AblationReport { rows, seed })
}
