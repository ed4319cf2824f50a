//! The `RHMCKP01` checkpoint format.
//!
//! Layout: 8-byte magic, `u32` LE manifest length, sorted JSON manifest, then
//! every trainable parameter as `f64` LE in manifest order, followed by the
//! batch-norm running statistics in manifest order.

use std::path::Path;

use headmotion::nn::Param;
use headmotion::siamese::{
    backbone_param_count, BackboneSpec, CnnClassifier, HeadSpec, SiameseModel, TrainConfig,
    TrainHistory,
};
use headmotion::eval::SplitFractions;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};
use crate::io::{read_file, read_framed_header, write_atomic, write_framed_header};
use crate::report::to_sorted_compact_json;

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"RHMCKP01";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Siamese,
    Cnn,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TensorEntry {
    pub name: String,
    pub shape: Vec<usize>,
}

/// How the dataset was partitioned, so evaluation can rebuild the test split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitRecord {
    pub fractions: SplitFractions,
    pub seed: u64,
    pub train: usize,
    pub val: usize,
    pub test: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub format_version: u32,
    pub model: ModelKind,
    pub backbone: BackboneSpec,
    pub head: HeadSpec,
    pub init_seed: u64,
    pub train: TrainConfig,
    pub split: SplitRecord,
    pub history: TrainHistory,
    pub param_count: usize,
    pub params: Vec<TensorEntry>,
    pub buffers: Vec<TensorEntry>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Model {
    Siamese(SiameseModel),
    Cnn(CnnClassifier),
}

impl Model {
    pub fn new(spec: BackboneSpec, head: HeadSpec, seed: u64) -> CliResult<Self> {
        Ok(match head {
            HeadSpec::Distance { mode } => Model::Siamese(SiameseModel::new(spec, mode, seed)?),
            HeadSpec::Softmax { classes } => Model::Cnn(CnnClassifier::new(spec, classes, seed)?),
        })
    }

    pub fn kind(&self) -> ModelKind {
        match self {
            Model::Siamese(_) => ModelKind::Siamese,
            Model::Cnn(_) => ModelKind::Cnn,
        }
    }

    pub fn spec(&self) -> &BackboneSpec {
        match self {
            Model::Siamese(m) => &m.spec,
            Model::Cnn(m) => &m.spec,
        }
    }

    pub fn head_spec(&self) -> HeadSpec {
        match self {
            Model::Siamese(m) => m.head_spec(),
            Model::Cnn(m) => m.head_spec(),
        }
    }

    fn params(&self) -> Vec<&Param> {
        match self {
            Model::Siamese(m) => m.params(),
            Model::Cnn(m) => m.params(),
        }
    }

    fn params_mut(&mut self) -> Vec<&mut Param> {
        match self {
            Model::Siamese(m) => m.params_mut(),
            Model::Cnn(m) => m.params_mut(),
        }
    }

    fn param_names(&self) -> Vec<String> {
        match self {
            Model::Siamese(m) => m.param_names(),
            Model::Cnn(m) => m.param_names(),
        }
    }

    fn network(&self) -> &headmotion::nn::Network {
        match self {
            Model::Siamese(m) => &m.backbone,
            Model::Cnn(m) => &m.backbone,
        }
    }

    fn network_mut(&mut self) -> &mut headmotion::nn::Network {
        match self {
            Model::Siamese(m) => &mut m.backbone,
            Model::Cnn(m) => &mut m.backbone,
        }
    }

    fn param_entries(&self) -> Vec<TensorEntry> {
        self.param_names()
            .into_iter()
            .zip(self.params())
            .map(|(name, p)| TensorEntry {
                name,
                shape: p.value.shape().to_vec(),
            })
            .collect()
    }

    fn buffer_entries(&self) -> Vec<TensorEntry> {
        let net = self.network();
        net.buffer_names()
            .into_iter()
            .zip(net.buffers())
            .map(|(name, b)| TensorEntry {
                name,
                shape: vec![b.len()],
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub manifest: Manifest,
    pub model: Model,
}

impl Checkpoint {
    pub fn new(model: Model, init_seed: u64, train: TrainConfig, split: SplitRecord, history: TrainHistory) -> CliResult<Self> {
        let manifest = Manifest {
            format_version: CHECKPOINT_VERSION,
            model: model.kind(),
            backbone: model.spec().clone(),
            head: model.head_spec(),
            init_seed,
            train,
            split,
            history,
            param_count: backbone_param_count(model.spec(), model.head_spec())?,
            params: model.param_entries(),
            buffers: model.buffer_entries(),
        };
        Ok(Self { manifest, model })
    }

    pub fn to_bytes(&self) -> CliResult<Vec<u8>> {
        let mut out = Vec::new();
        write_framed_header(&mut out, CHECKPOINT_MAGIC, &to_sorted_compact_json(&self.manifest)?);
        for p in self.model.params() {
            for v in p.value.data() {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        for b in self.model.network().buffers() {
            for v in b {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> CliResult<Self> {
        let (json, payload) = read_framed_header(bytes, CHECKPOINT_MAGIC, "checkpoint")?;
        let manifest: Manifest =
            serde_json::from_slice(json).map_err(|e| CliError::Invalid(format!("checkpoint manifest: {e}")))?;
        if manifest.format_version != CHECKPOINT_VERSION {
            return Err(CliError::Invalid(format!(
                "unsupported checkpoint version {}",
                manifest.format_version
            )));
        }
        let kind_matches = matches!(
            (manifest.model, manifest.head),
            (ModelKind::Siamese, HeadSpec::Distance { .. }) | (ModelKind::Cnn, HeadSpec::Softmax { .. })
        );
        if !kind_matches {
            return Err(CliError::Invalid("checkpoint head does not match its model kind".into()));
        }
        let mut model = Model::new(manifest.backbone.clone(), manifest.head, manifest.init_seed)?;
        if model.param_entries() != manifest.params || model.buffer_entries() != manifest.buffers {
            return Err(CliError::Invalid("checkpoint tensors do not match its architecture".into()));
        }
        if backbone_param_count(&manifest.backbone, manifest.head)? != manifest.param_count {
            return Err(CliError::Invalid("checkpoint parameter count is inconsistent".into()));
        }
        let mut values = payload.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")));
        let scalars: usize = manifest
            .params
            .iter()
            .chain(&manifest.buffers)
            .map(|e| e.shape.iter().product::<usize>())
            .sum();
        if payload.len() != scalars * 8 {
            return Err(CliError::Invalid(format!(
                "checkpoint payload holds {} bytes, manifest implies {}",
                payload.len(),
                scalars * 8
            )));
        }
        for p in model.params_mut() {
            p.value.data_mut().iter_mut().for_each(|v| *v = values.next().expect("length checked"));
        }
        for b in model.network_mut().buffers_mut() {
            b.iter_mut().for_each(|v| *v = values.next().expect("length checked"));
        }
        Ok(Self { manifest, model })
    }

    pub fn write(&self, path: &Path) -> CliResult<()> {
        write_atomic(path, &self.to_bytes()?)
    }

    pub fn read(path: &Path) -> CliResult<Self> {
        Self::from_bytes(&read_file(path)?)
    }
}
