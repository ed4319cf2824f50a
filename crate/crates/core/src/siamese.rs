//! The twin-CNN backbone, the learned distance head, pair sampling and the
//! training loops for the Siamese model and the softmax baseline.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dsp::SpectrumMatrix;
use crate::error::{invalid, Error, Result};
use crate::nn::{
    bce_loss, sigmoid, softmax_cross_entropy, AdamConfig, AdamState, Dense, LayerSpec, Mode,
    Network, Padding, Param,
};
use crate::radar_sim::mix_seed;
use crate::tensor::Tensor;

/// Per-item input shape of the backbone: range bins × frames × 1 channel.
pub const INPUT_SHAPE: [usize; 3] = [40, 30, 1];

/// Number of head-movement classes.
pub const NUM_CLASSES: usize = 4;

/// Images per forward pass when embedding large sets in inference mode.
const INFER_CHUNK: usize = 64;

/// Layer stack of the shared feature extractor together with its input shape.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BackboneSpec {
    pub input_shape: Vec<usize>,
    pub layers: Vec<LayerSpec>,
}

impl Default for BackboneSpec {
    /// Four conv / batch-norm / dropout blocks (2×2/1×16, 5×5/2×32, 5×5/1×64,
    /// 3×3/1×128), flatten, then dense 64 and dense 32.
    fn default() -> Self {
        let block = |kernel, stride, filters| {
            [
                LayerSpec::Conv {
                    kernel,
                    stride,
                    filters,
                    padding: Padding::Same,
                    relu: true,
                },
                LayerSpec::BatchNorm,
                LayerSpec::Dropout { rate: 0.5 },
            ]
        };
        let mut layers = Vec::new();
        layers.extend(block(2, 1, 16));
        layers.extend(block(5, 2, 32));
        layers.extend(block(5, 1, 64));
        layers.extend(block(3, 1, 128));
        layers.push(LayerSpec::Flatten);
        layers.push(LayerSpec::Dense { units: 64, relu: true });
        layers.push(LayerSpec::Dense { units: 32, relu: false });
        Self {
            input_shape: INPUT_SHAPE.to_vec(),
            layers,
        }
    }
}

impl BackboneSpec {
    /// Per-item output shape after each layer.
    pub fn shape_trace(&self) -> Result<Vec<Vec<usize>>> {
        let mut shape = self.input_shape.clone();
        self.layers
            .iter()
            .map(|l| {
                shape = l.output_shape(&shape)?;
                Ok(shape.clone())
            })
            .collect()
    }

    pub fn embedding_len(&self) -> Result<usize> {
        Ok(self
            .shape_trace()?
            .last()
            .map(|s| s.iter().product())
            .unwrap_or(0))
    }
}

/// How the two embeddings are compared before the distance head.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DistanceMode {
    /// Element-wise `|f(X1) - f(X2)|`, fed to a dense layer with one weight per
    /// embedding component.
    #[default]
    AbsDiff,
    /// Scalar Euclidean norm `‖f(X1) - f(X2)‖`, fed to a 1 → 1 dense layer.
    Norm,
}

/// Output head placed on top of the backbone.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum HeadSpec {
    Distance { mode: DistanceMode },
    Softmax { classes: usize },
}

impl HeadSpec {
    fn dims(&self, embedding: usize) -> (usize, usize) {
        match *self {
            HeadSpec::Distance {
                mode: DistanceMode::AbsDiff,
            } => (embedding, 1),
            HeadSpec::Distance {
                mode: DistanceMode::Norm,
            } => (1, 1),
            HeadSpec::Softmax { classes } => (embedding, classes),
        }
    }
}

/// Trainable scalars of backbone plus head, derived from the layer specs alone.
pub fn backbone_param_count(spec: &BackboneSpec, head: HeadSpec) -> Result<usize> {
    let mut shape = spec.input_shape.clone();
    let mut total = 0;
    for layer in &spec.layers {
        total += layer.param_count(&shape)?;
        shape = layer.output_shape(&shape)?;
    }
    let (i, o) = head.dims(shape.iter().product());
    Ok(total + i * o + o)
}

fn he_dense(inputs: usize, outputs: usize, rng: &mut ChaCha8Rng) -> Result<Dense> {
    let limit = (6.0 / inputs as f64).sqrt();
    let w: Vec<f64> = (0..inputs * outputs)
        .map(|_| rng.random_range(-limit..limit))
        .collect();
    Dense::new(
        Tensor::new(vec![inputs, outputs], w)?,
        Tensor::zeros(&[outputs]),
        false,
    )
}

fn batch_tensor(items: &[&SpectrumMatrix], input_shape: &[usize]) -> Result<Tensor> {
    let expected: usize = input_shape.iter().product();
    for m in items {
        if m.bins != input_shape[0] || m.frames != input_shape[1] || m.data.len() != expected {
            return Err(Error::ShapeMismatch {
                expected: input_shape.to_vec(),
                actual: vec![m.bins, m.frames, 1],
            });
        }
    }
    let images: Vec<Vec<f64>> = items.iter().map(|m| m.to_image()).collect();
    let refs: Vec<&[f64]> = images.iter().map(|v| v.as_slice()).collect();
    Tensor::stack(&refs, input_shape)
}

/// Gradient of the flat embeddings handed back from a head.
fn split_rows(t: &Tensor) -> Vec<&[f64]> {
    (0..t.batch()).map(|i| t.item(i)).collect()
}

/// Shared backbone with a learned distance head.
///
/// Both twins run through the same [`Network`] value, so weight sharing is exact.
#[derive(Debug, Clone, PartialEq)]
pub struct SiameseModel {
    pub spec: BackboneSpec,
    pub distance: DistanceMode,
    pub backbone: Network,
    pub head: Dense,
}

impl SiameseModel {
    pub fn new(spec: BackboneSpec, distance: DistanceMode, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let backbone = Network::build(&spec.layers, &spec.input_shape, &mut rng)?;
        let (i, o) = HeadSpec::Distance { mode: distance }.dims(backbone.output_len());
        let head = he_dense(i, o, &mut rng)?;
        Ok(Self {
            spec,
            distance,
            backbone,
            head,
        })
    }

    pub fn head_spec(&self) -> HeadSpec {
        HeadSpec::Distance {
            mode: self.distance,
        }
    }

    /// Inference-mode embeddings for any number of matrices.
    pub fn embed_many(&self, items: &[&SpectrumMatrix]) -> Result<Vec<Vec<f64>>> {
        embed_with(&self.backbone, &self.spec.input_shape, items)
    }

    pub fn embed(&self, x: &SpectrumMatrix) -> Result<Vec<f64>> {
        Ok(self.embed_many(&[x])?.remove(0))
    }

    fn distance_features(&self, e1: &[f64], e2: &[f64]) -> Vec<f64> {
        match self.distance {
            DistanceMode::AbsDiff => e1.iter().zip(e2).map(|(a, b)| (a - b).abs()).collect(),
            DistanceMode::Norm => {
                vec![e1.iter().zip(e2).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt()]
            }
        }
    }

    /// Same-class probability for two precomputed embeddings.
    pub fn score_embeddings(&self, e1: &[f64], e2: &[f64]) -> f64 {
        let d = self.distance_features(e1, e2);
        let w = self.head.weight.value.data();
        let z = self.head.bias.value.data()[0] + d.iter().zip(w).map(|(x, w)| x * w).sum::<f64>();
        sigmoid(z)
    }

    /// Same-class probability `σ(FC(d(f(X1), f(X2))))` in inference mode.
    pub fn pair_score(&self, x1: &SpectrumMatrix, x2: &SpectrumMatrix) -> Result<f64> {
        let e = self.embed_many(&[x1, x2])?;
        Ok(self.score_embeddings(&e[0], &e[1]))
    }

    /// Forward pass over a batch of pairs, returning the pre-sigmoid logits and
    /// everything needed to backpropagate. Both twins draw their dropout masks
    /// from the same seed.
    fn forward_pairs(
        &mut self,
        xa: &Tensor,
        xb: &Tensor,
        mode: Mode,
        mask_seed: u64,
    ) -> Result<PairPass> {
        let (ea, ta) = self
            .backbone
            .forward(xa, mode, &mut ChaCha8Rng::seed_from_u64(mask_seed))?;
        let (eb, tb) = self
            .backbone
            .forward(xb, mode, &mut ChaCha8Rng::seed_from_u64(mask_seed))?;
        let rows: Vec<Vec<f64>> = split_rows(&ea)
            .into_iter()
            .zip(split_rows(&eb))
            .map(|(a, b)| self.distance_features(a, b))
            .collect();
        let refs: Vec<&[f64]> = rows.iter().map(|r| r.as_slice()).collect();
        let d = Tensor::stack(&refs, &[rows[0].len()])?;
        let (z, th) = self.head.forward(&d)?;
        Ok(PairPass {
            ea,
            eb,
            ta,
            tb,
            d,
            th,
            logits: z.into_data(),
        })
    }

    /// Same-class probabilities over a batch of pairs in the given mode.
    pub fn pair_scores(
        &mut self,
        x1: &[&SpectrumMatrix],
        x2: &[&SpectrumMatrix],
        mode: Mode,
        mask_seed: u64,
    ) -> Result<Vec<f64>> {
        if x1.len() != x2.len() {
            return invalid("pair batches must have equal length");
        }
        let xa = batch_tensor(x1, &self.spec.input_shape)?;
        let xb = batch_tensor(x2, &self.spec.input_shape)?;
        let pass = self.forward_pairs(&xa, &xb, mode, mask_seed)?;
        Ok(pass.logits.iter().map(|&z| sigmoid(z)).collect())
    }

    /// One minibatch of binary cross-entropy followed by an Adam update.
    /// Returns the mean loss of the batch before the update.
    pub fn train_step(
        &mut self,
        x1: &[&SpectrumMatrix],
        x2: &[&SpectrumMatrix],
        targets: &[f64],
        adam: &mut AdamState,
        mask_seed: u64,
    ) -> Result<f64> {
        let loss = self.loss_and_grad(x1, x2, targets, mask_seed)?;
        adam.step(&mut self.params_mut())?;
        Ok(loss)
    }

    /// Mean batch loss with gradients accumulated into the parameters (after
    /// zeroing them).
    pub fn loss_and_grad(
        &mut self,
        x1: &[&SpectrumMatrix],
        x2: &[&SpectrumMatrix],
        targets: &[f64],
        mask_seed: u64,
    ) -> Result<f64> {
        let n = targets.len();
        if x1.len() != n || x2.len() != n || n == 0 {
            return invalid("pair batch and targets must be non-empty and equally long");
        }
        self.zero_grad();
        let xa = batch_tensor(x1, &self.spec.input_shape)?;
        let xb = batch_tensor(x2, &self.spec.input_shape)?;
        let pass = self.forward_pairs(&xa, &xb, Mode::Train, mask_seed)?;
        let mut loss = 0.0;
        let mut dz = Vec::with_capacity(n);
        for (&z, &b) in pass.logits.iter().zip(targets) {
            let p = sigmoid(z);
            loss += bce_loss(p, b)?;
            // d(bce ∘ σ)/dz
            dz.push((p - b) / n as f64);
        }
        let dd = self
            .head
            .backward(&pass.th, Tensor::new(vec![n, 1], dz)?, true)?
            .expect("input gradient requested");
        let k = pass.ea.len() / n;
        let mut dea = vec![0.0; n * k];
        for i in 0..n {
            let a = pass.ea.item(i);
            let b = pass.eb.item(i);
            let g = dd.item(i);
            let out = &mut dea[i * k..(i + 1) * k];
            match self.distance {
                DistanceMode::AbsDiff => {
                    for j in 0..k {
                        let diff = a[j] - b[j];
                        out[j] = if diff > 0.0 {
                            g[j]
                        } else if diff < 0.0 {
                            -g[j]
                        } else {
                            0.0
                        };
                    }
                }
                DistanceMode::Norm => {
                    let norm = pass.d.item(i)[0];
                    if norm > 0.0 {
                        for j in 0..k {
                            out[j] = g[0] * (a[j] - b[j]) / norm;
                        }
                    }
                }
            }
        }
        let deb: Vec<f64> = dea.iter().map(|v| -v).collect();
        self.backbone
            .backward(&pass.ta, Tensor::new(vec![n, k], dea)?, false)?;
        self.backbone
            .backward(&pass.tb, Tensor::new(vec![n, k], deb)?, false)?;
        Ok(loss / n as f64)
    }

    pub fn params(&self) -> Vec<&Param> {
        let mut p = self.backbone.params();
        p.extend([&self.head.weight, &self.head.bias]);
        p
    }

    pub fn params_mut(&mut self) -> Vec<&mut Param> {
        let mut p = self.backbone.params_mut();
        p.extend([&mut self.head.weight, &mut self.head.bias]);
        p
    }

    pub fn param_names(&self) -> Vec<String> {
        let mut n = self.backbone.param_names();
        n.extend(["head.weight".to_string(), "head.bias".to_string()]);
        n
    }

    pub fn zero_grad(&mut self) {
        self.params_mut().into_iter().for_each(Param::zero_grad);
    }

    pub fn param_count(&self) -> usize {
        self.params().iter().map(|p| p.len()).sum()
    }
}

struct PairPass {
    ea: Tensor,
    eb: Tensor,
    ta: crate::nn::Trace,
    tb: crate::nn::Trace,
    d: Tensor,
    th: crate::nn::DenseCache,
    logits: Vec<f64>,
}

fn embed_with(net: &Network, input_shape: &[usize], items: &[&SpectrumMatrix]) -> Result<Vec<Vec<f64>>> {
    let mut out = Vec::with_capacity(items.len());
    for chunk in items.chunks(INFER_CHUNK) {
        let x = batch_tensor(chunk, input_shape)?;
        let e = net.infer(&x)?;
        out.extend(split_rows(&e).into_iter().map(|r| r.to_vec()));
    }
    Ok(out)
}

/// The same backbone ending in a softmax over the four classes.
#[derive(Debug, Clone, PartialEq)]
pub struct CnnClassifier {
    pub spec: BackboneSpec,
    pub backbone: Network,
    pub head: Dense,
}

impl CnnClassifier {
    pub fn new(spec: BackboneSpec, classes: usize, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let backbone = Network::build(&spec.layers, &spec.input_shape, &mut rng)?;
        let head = he_dense(backbone.output_len(), classes, &mut rng)?;
        Ok(Self {
            spec,
            backbone,
            head,
        })
    }

    pub fn classes(&self) -> usize {
        self.head.outputs
    }

    pub fn head_spec(&self) -> HeadSpec {
        HeadSpec::Softmax {
            classes: self.classes(),
        }
    }

    /// Inference-mode class logits.
    pub fn logits(&self, items: &[&SpectrumMatrix]) -> Result<Vec<Vec<f64>>> {
        let emb = embed_with(&self.backbone, &self.spec.input_shape, items)?;
        let refs: Vec<&[f64]> = emb.iter().map(|r| r.as_slice()).collect();
        if refs.is_empty() {
            return Ok(Vec::new());
        }
        let z = self.head.infer(&Tensor::stack(&refs, &[refs[0].len()])?)?;
        Ok(split_rows(&z).into_iter().map(|r| r.to_vec()).collect())
    }

    /// Last hidden layer (the 32-d embedding) in inference mode.
    pub fn embed_many(&self, items: &[&SpectrumMatrix]) -> Result<Vec<Vec<f64>>> {
        embed_with(&self.backbone, &self.spec.input_shape, items)
    }

    pub fn predict(&self, items: &[&SpectrumMatrix]) -> Result<Vec<u8>> {
        Ok(self
            .logits(items)?
            .iter()
            .map(|z| argmax(z) as u8)
            .collect())
    }

    pub fn train_step(
        &mut self,
        items: &[&SpectrumMatrix],
        adam: &mut AdamState,
        mask_seed: u64,
    ) -> Result<f64> {
        let loss = self.loss_and_grad(items, mask_seed)?;
        adam.step(&mut self.params_mut())?;
        Ok(loss)
    }

    pub fn loss_and_grad(&mut self, items: &[&SpectrumMatrix], mask_seed: u64) -> Result<f64> {
        let n = items.len();
        self.zero_grad();
        let x = batch_tensor(items, &self.spec.input_shape)?;
        let (e, trace) = self
            .backbone
            .forward(&x, Mode::Train, &mut ChaCha8Rng::seed_from_u64(mask_seed))?;
        let (z, th) = self.head.forward(&e)?;
        let c = self.classes();
        let mut loss = 0.0;
        let mut dz = Vec::with_capacity(n * c);
        for (row, m) in split_rows(&z).into_iter().zip(items) {
            let (l, g) = softmax_cross_entropy(row, m.label as usize)?;
            loss += l;
            dz.extend(g.into_iter().map(|v| v / n as f64));
        }
        let de = self
            .head
            .backward(&th, Tensor::new(vec![n, c], dz)?, true)?
            .expect("input gradient requested");
        self.backbone.backward(&trace, de, false)?;
        Ok(loss / n as f64)
    }

    pub fn params(&self) -> Vec<&Param> {
        let mut p = self.backbone.params();
        p.extend([&self.head.weight, &self.head.bias]);
        p
    }

    pub fn params_mut(&mut self) -> Vec<&mut Param> {
        let mut p = self.backbone.params_mut();
        p.extend([&mut self.head.weight, &mut self.head.bias]);
        p
    }

    pub fn param_names(&self) -> Vec<String> {
        let mut n = self.backbone.param_names();
        n.extend(["head.weight".to_string(), "head.bias".to_string()]);
        n
    }

    pub fn zero_grad(&mut self) {
        self.params_mut().into_iter().for_each(Param::zero_grad);
    }

    pub fn param_count(&self) -> usize {
        self.params().iter().map(|p| p.len()).sum()
    }
}

/// Index of the largest value; ties go to the lowest index.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// One training pair, as indices into the dataset it was drawn from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Pair {
    pub first: usize,
    pub second: usize,
    pub same: bool,
}

impl Pair {
    pub fn target(&self) -> f64 {
        if self.same {
            1.0
        } else {
            0.0
        }
    }
}

/// Sample indices grouped by class label, in ascending label order.
pub fn class_index(dataset: &[SpectrumMatrix]) -> BTreeMap<u8, Vec<usize>> {
    let mut by_class: BTreeMap<u8, Vec<usize>> = BTreeMap::new();
    for (i, m) in dataset.iter().enumerate() {
        by_class.entry(m.label).or_default().push(i);
    }
    by_class
}

/// Draws `ceil(count/2)` same-class and `floor(count/2)` different-class pairs in
/// shuffled order. Classes are picked uniformly, members uniformly and distinct.
pub fn sample_pairs(dataset: &[SpectrumMatrix], count: usize, seed: u64) -> Result<Vec<Pair>> {
    let by_class = class_index(dataset);
    let classes: Vec<&Vec<usize>> = by_class.values().collect();
    if classes.len() < 2 || classes.iter().any(|c| c.len() < 2) {
        return invalid("pair sampling needs at least 2 classes with at least 2 samples each");
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let same_count = count.div_ceil(2);
    let mut pairs = Vec::with_capacity(count);
    for i in 0..count {
        let pair = if i < same_count {
            let members = classes[rng.random_range(0..classes.len())];
            let a = rng.random_range(0..members.len());
            let mut b = rng.random_range(0..members.len() - 1);
            if b >= a {
                b += 1;
            }
            Pair {
                first: members[a],
                second: members[b],
                same: true,
            }
        } else {
            let ca = rng.random_range(0..classes.len());
            let mut cb = rng.random_range(0..classes.len() - 1);
            if cb >= ca {
                cb += 1;
            }
            let a = classes[ca][rng.random_range(0..classes[ca].len())];
            let b = classes[cb][rng.random_range(0..classes[cb].len())];
            Pair {
                first: a,
                second: b,
                same: false,
            }
        };
        pairs.push(pair);
    }
    pairs.shuffle(&mut rng);
    Ok(pairs)
}

/// Optimisation settings shared by both models.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub learning_rate: f64,
    pub epochs: usize,
    /// Pairs drawn per Siamese epoch; the training-set size when absent.
    pub pairs_per_epoch: Option<usize>,
    /// Epochs without validation improvement before stopping.
    pub patience: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            batch_size: 64,
            learning_rate: 0.006,
            epochs: 50,
            pairs_per_epoch: None,
            patience: 10,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size < 2 {
            return invalid("batch_size must be at least 2");
        }
        if !(self.learning_rate.is_finite() && self.learning_rate >= 0.0) {
            return invalid("learning_rate must be finite and non-negative");
        }
        Ok(())
    }

    pub fn adam(&self) -> AdamConfig {
        AdamConfig {
            learning_rate: self.learning_rate,
            ..AdamConfig::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_accuracy: f64,
}

/// Loss and validation curve of one training run.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainHistory {
    /// Loss of the first minibatch, before any update.
    pub initial_loss: Option<f64>,
    pub epochs: Vec<EpochRecord>,
    /// 1-based epoch whose parameters were kept; 0 means the initial weights.
    pub best_epoch: usize,
    pub best_val_accuracy: Option<f64>,
    pub stopped_early: bool,
}

impl TrainHistory {
    pub fn losses(&self) -> Vec<f64> {
        self.epochs.iter().map(|e| e.train_loss).collect()
    }
}

fn minibatches(len: usize, batch: usize) -> impl Iterator<Item = std::ops::Range<usize>> {
    (0..len)
        .step_by(batch)
        .map(move |s| s..(s + batch).min(len))
        // batch statistics need at least two items
        .filter(|r| r.len() >= 2)
}

fn ensure_finite(loss: f64) -> Result<f64> {
    if loss.is_finite() {
        Ok(loss)
    } else {
        Err(Error::Training("loss became non-finite".into()))
    }
}

/// Fraction of pairs whose score lands on the correct side of 0.5.
pub fn pair_accuracy(model: &SiameseModel, dataset: &[SpectrumMatrix], pairs: &[Pair]) -> Result<f64> {
    if pairs.is_empty() {
        return invalid("no pairs to evaluate");
    }
    let refs: Vec<&SpectrumMatrix> = dataset.iter().collect();
    let emb = model.embed_many(&refs)?;
    let correct = pairs
        .iter()
        .filter(|p| (model.score_embeddings(&emb[p.first], &emb[p.second]) > 0.5) == p.same)
        .count();
    Ok(correct as f64 / pairs.len() as f64)
}

/// Trains the Siamese model on freshly sampled pairs each epoch, keeping the
/// parameters with the best validation pair accuracy and stopping after
/// `patience` epochs without improvement.
pub fn train_siamese(
    model: &mut SiameseModel,
    train: &[SpectrumMatrix],
    val: &[SpectrumMatrix],
    cfg: &TrainConfig,
) -> Result<TrainHistory> {
    cfg.validate()?;
    let mut adam = AdamState::for_params(cfg.adam(), &model.params_mut());
    let per_epoch = cfg.pairs_per_epoch.unwrap_or(train.len());
    if per_epoch < 2 {
        return invalid("an epoch needs at least 2 pairs");
    }
    let val_pairs = if cfg.epochs > 0 {
        sample_pairs(val, val.len().max(2), mix_seed(cfg.seed, 0xAA))?
    } else {
        Vec::new()
    };
    let mut history = TrainHistory::default();
    let mut best: Option<(f64, SiameseModel)> = None;
    let mut stale = 0;
    let mut step = 0u64;
    for epoch in 1..=cfg.epochs {
        let pairs = sample_pairs(train, per_epoch, mix_seed(cfg.seed, epoch as u64))?;
        let mut total = 0.0;
        let mut batches = 0;
        for r in minibatches(pairs.len(), cfg.batch_size) {
            let chunk = &pairs[r];
            let x1: Vec<&SpectrumMatrix> = chunk.iter().map(|p| &train[p.first]).collect();
            let x2: Vec<&SpectrumMatrix> = chunk.iter().map(|p| &train[p.second]).collect();
            let t: Vec<f64> = chunk.iter().map(Pair::target).collect();
            step += 1;
            let loss = ensure_finite(model.train_step(&x1, &x2, &t, &mut adam, mix_seed(cfg.seed ^ 0x5EED, step))?)?;
            history.initial_loss.get_or_insert(loss);
            total += loss;
            batches += 1;
        }
        let val_accuracy = pair_accuracy(model, val, &val_pairs)?;
        history.epochs.push(EpochRecord {
            epoch,
            train_loss: total / batches as f64,
            val_accuracy,
        });
        if best.as_ref().is_none_or(|(b, _)| val_accuracy > *b) {
            best = Some((val_accuracy, model.clone()));
            history.best_epoch = epoch;
            history.best_val_accuracy = Some(val_accuracy);
            stale = 0;
        } else {
            stale += 1;
            if stale >= cfg.patience {
                history.stopped_early = true;
                break;
            }
        }
    }
    if let Some((_, m)) = best {
        *model = m;
    }
    Ok(history)
}

/// Fraction of correctly classified samples.
pub fn classifier_accuracy(model: &CnnClassifier, dataset: &[SpectrumMatrix]) -> Result<f64> {
    if dataset.is_empty() {
        return invalid("no samples to evaluate");
    }
    let refs: Vec<&SpectrumMatrix> = dataset.iter().collect();
    let pred = model.predict(&refs)?;
    let correct = pred.iter().zip(dataset).filter(|(p, m)| **p == m.label).count();
    Ok(correct as f64 / dataset.len() as f64)
}

/// Trains the softmax baseline with categorical cross-entropy, one shuffled pass
/// over the training set per epoch, with the same selection and stopping rules
/// as [`train_siamese`].
pub fn train_cnn_baseline(
    model: &mut CnnClassifier,
    train: &[SpectrumMatrix],
    val: &[SpectrumMatrix],
    cfg: &TrainConfig,
) -> Result<TrainHistory> {
    cfg.validate()?;
    if train.len() < 2 {
        return invalid("training set needs at least 2 samples");
    }
    let mut adam = AdamState::for_params(cfg.adam(), &model.params_mut());
    let mut history = TrainHistory::default();
    let mut best: Option<(f64, CnnClassifier)> = None;
    let mut stale = 0;
    let mut step = 0u64;
    let mut order: Vec<usize> = (0..train.len()).collect();
    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(mix_seed(cfg.seed, epoch as u64)));
        let mut total = 0.0;
        let mut batches = 0;
        for r in minibatches(order.len(), cfg.batch_size) {
            let items: Vec<&SpectrumMatrix> = order[r].iter().map(|&i| &train[i]).collect();
            step += 1;
            let loss = ensure_finite(model.train_step(&items, &mut adam, mix_seed(cfg.seed ^ 0x5EED, step))?)?;
            history.initial_loss.get_or_insert(loss);
            total += loss;
            batches += 1;
        }
        let val_accuracy = classifier_accuracy(model, val)?;
        history.epochs.push(EpochRecord {
            epoch,
            train_loss: total / batches as f64,
            val_accuracy,
        });
        if best.as_ref().is_none_or(|(b, _)| val_accuracy > *b) {
            best = Some((val_accuracy, model.clone()));
            history.best_epoch = epoch;
            history.best_val_accuracy = Some(val_accuracy);
            stale = 0;
        } else {
            stale += 1;
            if stale >= cfg.patience {
                history.stopped_early = true;
                break;
            }
        }
    }
    if let Some((_, m)) = best {
        *model = m;
    }
    Ok(history)
}
