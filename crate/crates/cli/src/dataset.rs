//! Synthetic dataset generation and the `RHMDAT01` file format.
//!
//! Layout: 8-byte magic, `u32` LE header length, sorted JSON header, one label
//! byte per sample, then every matrix as `f32` LE, frame-major within a sample.

use std::collections::BTreeMap;
use std::path::Path;

use headmotion::dsp::{build_matrix, MagnitudeScale, SpectrumMatrix};
use headmotion::radar_sim::{draw_scene, mix_seed, simulate_sample, HeadMotion};
use headmotion::siamese::NUM_CLASSES;
use serde::{Deserialize, Serialize};

use crate::config::Config;
use crate::error::{CliError, CliResult};
use crate::io::{read_file, read_framed_header, write_atomic, write_framed_header};
use crate::report::to_sorted_compact_json;

pub const DATASET_MAGIC: &[u8; 8] = b"RHMDAT01";
pub const DATASET_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetHeader {
    pub format_version: u32,
    pub samples: usize,
    pub frames: usize,
    pub bins: usize,
    pub classes: usize,
    pub class_counts: Vec<usize>,
    pub scale: MagnitudeScale,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetFile {
    pub header: DatasetHeader,
    pub samples: Vec<SpectrumMatrix>,
}

fn counts(samples: &[SpectrumMatrix]) -> Vec<usize> {
    let mut c = vec![0; NUM_CLASSES];
    for m in samples {
        c[m.label as usize] += 1;
    }
    c
}

impl DatasetFile {
    /// Wraps matrices for storage. Values are rounded to `f32` here so the
    /// in-memory dataset equals what a reader of the file sees.
    pub fn new(mut samples: Vec<SpectrumMatrix>, scale: MagnitudeScale, seed: u64) -> CliResult<Self> {
        let (frames, bins) = match samples.first() {
            Some(m) => (m.frames, m.bins),
            None => return Err(CliError::Invalid("dataset has no samples".into())),
        };
        for m in &mut samples {
            if m.frames != frames || m.bins != bins {
                return Err(CliError::Invalid("all matrices must share one shape".into()));
            }
            if m.label as usize >= NUM_CLASSES {
                return Err(CliError::Invalid(format!("label {} out of range", m.label)));
            }
            m.data.iter_mut().for_each(|v| *v = *v as f32 as f64);
            m.normalization = None;
        }
        Ok(Self {
            header: DatasetHeader {
                format_version: DATASET_VERSION,
                samples: samples.len(),
                frames,
                bins,
                classes: NUM_CLASSES,
                class_counts: counts(&samples),
                scale,
                seed,
            },
            samples,
        })
    }

    pub fn to_bytes(&self) -> CliResult<Vec<u8>> {
        let h = &self.header;
        let mut out = Vec::with_capacity(64 + h.samples * (1 + 4 * h.frames * h.bins));
        write_framed_header(&mut out, DATASET_MAGIC, &to_sorted_compact_json(h)?);
        out.extend(self.samples.iter().map(|m| m.label));
        for m in &self.samples {
            for &v in &m.data {
                out.extend_from_slice(&(v as f32).to_le_bytes());
            }
        }
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> CliResult<Self> {
        let (json, payload) = read_framed_header(bytes, DATASET_MAGIC, "dataset")?;
        let header: DatasetHeader =
            serde_json::from_slice(json).map_err(|e| CliError::Invalid(format!("dataset header: {e}")))?;
        if header.format_version != DATASET_VERSION {
            return Err(CliError::Invalid(format!(
                "unsupported dataset version {}",
                header.format_version
            )));
        }
        if header.classes != NUM_CLASSES || header.class_counts.len() != NUM_CLASSES {
            return Err(CliError::Invalid("dataset must describe 4 classes".into()));
        }
        let n = header.samples;
        let cells = header.frames * header.bins;
        if n == 0 || cells == 0 {
            return Err(CliError::Invalid("empty dataset".into()));
        }
        let expected = n
            .checked_mul(1 + 4 * cells)
            .ok_or_else(|| CliError::Invalid("dataset header sizes overflow".into()))?;
        if payload.len() != expected {
            return Err(CliError::Invalid(format!(
                "dataset payload holds {} bytes, header implies {expected}",
                payload.len()
            )));
        }
        let (labels, values) = payload.split_at(n);
        let mut samples = Vec::with_capacity(n);
        for (i, &label) in labels.iter().enumerate() {
            if label as usize >= NUM_CLASSES {
                return Err(CliError::Invalid(format!("sample {i} has label {label}")));
            }
            let data = values[i * cells * 4..(i + 1) * cells * 4]
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")) as f64)
                .collect();
            samples.push(SpectrumMatrix::new(header.frames, header.bins, data, label)?);
        }
        if counts(&samples) != header.class_counts {
            return Err(CliError::Invalid("class counts in header do not match labels".into()));
        }
        Ok(Self { header, samples })
    }

    pub fn write(&self, path: &Path) -> CliResult<()> {
        write_atomic(path, &self.to_bytes()?)
    }

    pub fn read(path: &Path) -> CliResult<Self> {
        Self::from_bytes(&read_file(path)?)
    }

    pub fn class_counts(&self) -> BTreeMap<&'static str, usize> {
        HeadMotion::ALL
            .iter()
            .map(|c| (c.name(), self.header.class_counts[c.label() as usize]))
            .collect()
    }
}

/// Simulates `counts[c]` samples of each class, class by class. Sample `i`
/// (in file order) draws its scene from `mix_seed(seed, i)`.
pub fn generate(cfg: &Config, counts: &[usize], seed: u64) -> CliResult<DatasetFile> {
    if counts.len() != NUM_CLASSES {
        return Err(CliError::Invalid(format!("need {NUM_CLASSES} class counts")));
    }
    let total: usize = counts.iter().sum();
    let mut samples = Vec::with_capacity(total);
    for (class, &count) in HeadMotion::ALL.iter().zip(counts) {
        for _ in 0..count {
            let s = mix_seed(seed, samples.len() as u64);
            let scene = draw_scene(*class, &cfg.scene, &cfg.radar, s)?;
            let frames = simulate_sample(&cfg.radar, &scene)?;
            samples.push(build_matrix(&frames, &cfg.radar, class.label(), cfg.dataset.scale)?);
        }
    }
    DatasetFile::new(samples, cfg.dataset.scale, seed)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> DatasetFile {
        generate(&Config::default(), &[2, 1, 1, 2], 9).unwrap()
    }

    #[test]
    fn round_trip_is_identical() {
        let d = tiny();
        let bytes = d.to_bytes().unwrap();
        let back = DatasetFile::from_bytes(&bytes).unwrap();
        assert_eq!(back, d);
        assert_eq!(back.to_bytes().unwrap(), bytes);
        assert_eq!(d.header.samples, 6);
        assert_eq!(d.header.class_counts, vec![2, 1, 1, 2]);
        assert_eq!(bytes.len(), 12 + u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize + 6 * (1 + 4800));
    }

    #[test]
    fn corrupt_files_are_rejected() {
        let bytes = tiny().to_bytes().unwrap();
        assert!(DatasetFile::from_bytes(&bytes[..bytes.len() - 1]).is_err());
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(DatasetFile::from_bytes(&bad).is_err());
        let hlen = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
        let mut bad = bytes.clone();
        bad[12 + hlen] = 7;
        assert!(matches!(DatasetFile::from_bytes(&bad), Err(CliError::Invalid(_))));
        // a valid label of the wrong class breaks the recorded counts
        let mut bad = bytes;
        bad[12 + hlen] = 1;
        assert!(DatasetFile::from_bytes(&bad).is_err());
    }

    #[test]
    fn generation_is_deterministic() {
        assert_eq!(tiny().to_bytes().unwrap(), tiny().to_bytes().unwrap());
        let other = generate(&Config::default(), &[2, 1, 1, 2], 10).unwrap();
        assert_ne!(other.samples, tiny().samples);
    }
}
