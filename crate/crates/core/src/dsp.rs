//! Range processing: DFT, half-spectrum magnitude, clutter removal and the
//! normalised frames × range-bins spectrum matrix.

use std::cell::RefCell;
use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::radar_sim::{FrameSignal, RadarConfig, SPEED_OF_LIGHT};

/// DFT of one frame; conjugate-symmetric for real input.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexSpectrum(pub Vec<Complex64>);

impl ComplexSpectrum {
    pub fn values(&self) -> &[Complex64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

fn plan(len: usize) -> Arc<dyn Fft<f64>> {
    PLANNER.with(|p| p.borrow_mut().plan_fft_forward(len))
}

/// `M[k] = Σ_n m[n] exp(-j 2π k n / N)` for a power-of-two frame length.
pub fn dft(frame: &FrameSignal) -> Result<ComplexSpectrum> {
    let n = frame.len();
    if n == 0 || !n.is_power_of_two() {
        return invalid(format!("frame length must be a power of two, got {n}"));
    }
    let mut buf: Vec<Complex64> = frame
        .samples()
        .iter()
        .map(|&x| Complex64::new(x, 0.0))
        .collect();
    plan(n).process(&mut buf);
    Ok(ComplexSpectrum(buf))
}

/// `[|M[0]|, …, |M[N/2 - 1]|]`.
pub fn half_magnitude(spectrum: &ComplexSpectrum) -> Vec<f64> {
    spectrum.0[..spectrum.len() / 2].iter().map(|c| c.norm()).collect()
}

/// Distance of range bin `k`: `(c ΔT / 2ΔB) · (k / N_s) · f_s`.
pub fn bin_to_range(k: usize, config: &RadarConfig) -> Result<f64> {
    let half = config.samples_per_chirp / 2;
    if k >= half {
        return invalid(format!("bin {k} outside the half spectrum 0..{half}"));
    }
    // ordered so that canonical bins land on exact decimal ranges
    Ok(SPEED_OF_LIGHT * config.chirp_duration_s * k as f64 * config.sample_rate_hz
        / (2.0 * config.bandwidth_hz * config.samples_per_chirp as f64))
}

/// Removes the per-sample-position mean over frames (static clutter).
pub fn mean_subtract(frames: &[FrameSignal]) -> Result<Vec<FrameSignal>> {
    if frames.len() < 2 {
        return invalid(format!("mean subtraction needs at least 2 frames, got {}", frames.len()));
    }
    let len = frames[0].len();
    if frames.iter().any(|f| f.len() != len) {
        return invalid("frames must all have the same length");
    }
    // averaging offsets from the first frame keeps identical frames exactly
    // identical to their mean
    let count = frames.len() as f64;
    let reference = frames[0].samples();
    let mut offset = vec![0.0; len];
    for f in &frames[1..] {
        for ((o, s), r) in offset.iter_mut().zip(f.samples()).zip(reference) {
            *o += s - r;
        }
    }
    let mean: Vec<f64> = offset.iter().zip(reference).map(|(o, r)| r + o / count).collect();
    Ok(frames
        .iter()
        .map(|f| FrameSignal(f.samples().iter().zip(&mean).map(|(s, m)| s - m).collect()))
        .collect())
}

/// Amplitude scale applied to magnitudes before normalisation.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MagnitudeScale {
    #[default]
    Linear,
    /// `ln(1 + |M|)`.
    Log,
}

/// Bounds used by the min-max normalisation of one matrix.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Normalization {
    pub min: f64,
    pub max: f64,
}

/// Normalised `frames × bins` magnitude image of one labelled sample, stored
/// frame-major.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumMatrix {
    pub frames: usize,
    pub bins: usize,
    pub data: Vec<f64>,
    pub label: u8,
    /// Absent when the matrix was loaded from storage.
    pub normalization: Option<Normalization>,
}

impl SpectrumMatrix {
    pub fn new(frames: usize, bins: usize, data: Vec<f64>, label: u8) -> Result<Self> {
        if data.len() != frames * bins {
            return invalid(format!(
                "matrix of {frames}×{bins} needs {} values, got {}",
                frames * bins,
                data.len()
            ));
        }
        Ok(Self {
            frames,
            bins,
            data,
            label,
            normalization: None,
        })
    }

    pub fn get(&self, frame: usize, bin: usize) -> f64 {
        self.data[frame * self.bins + bin]
    }

    /// Row-major `bins × frames × 1` view (range on the first axis), the layout the
    /// backbone consumes.
    pub fn to_image(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.data.len());
        for b in 0..self.bins {
            for f in 0..self.frames {
                out.push(self.get(f, b));
            }
        }
        out
    }
}

/// Cropped half-spectrum magnitudes of each frame, frame-major, without clutter
/// removal or normalisation.
pub fn range_profile(frames: &[FrameSignal], config: &RadarConfig) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(frames.len() * config.used_bins);
    for f in frames {
        if f.len() != config.samples_per_chirp {
            return invalid(format!(
                "frame has {} samples, expected {}",
                f.len(),
                config.samples_per_chirp
            ));
        }
        let mag = half_magnitude(&dft(f)?);
        out.extend_from_slice(&mag[..config.used_bins]);
    }
    Ok(out)
}

/// Min-max normalises `values` to `[0, 1]` in place. Constant input maps to all
/// zeros.
pub fn min_max_normalize(values: &mut [f64]) -> Normalization {
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max > min {
        let span = max - min;
        values.iter_mut().for_each(|v| *v = (*v - min) / span);
    } else {
        values.iter_mut().for_each(|v| *v = 0.0);
    }
    Normalization { min, max }
}

/// Full pipeline for one sample: mean subtraction, per-frame DFT magnitude,
/// crop to the used bins, then min-max normalisation of the whole matrix.
pub fn build_matrix(
    frames: &[FrameSignal],
    config: &RadarConfig,
    label: u8,
    scale: MagnitudeScale,
) -> Result<SpectrumMatrix> {
    if frames.len() != config.frames_per_sample {
        return invalid(format!(
            "expected {} frames, got {}",
            config.frames_per_sample,
            frames.len()
        ));
    }
    let clean = mean_subtract(frames)?;
    let mut data = range_profile(&clean, config)?;
    if scale == MagnitudeScale::Log {
        data.iter_mut().for_each(|v| *v = v.ln_1p());
    }
    let norm = min_max_normalize(&mut data);
    let mut m = SpectrumMatrix::new(config.frames_per_sample, config.used_bins, data, label)?;
    m.normalization = Some(norm);
    Ok(m)
}
