//! FMCW beat-signal synthesis for a moving head target in front of static clutter.

use std::f64::consts::TAU;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Propagation speed of the radar signal, m/s.
pub const SPEED_OF_LIGHT: f64 = 3e8;

/// Largest range the sensor resolves, m.
pub const MAX_RANGE_M: f64 = 2.0;

/// Range window that motion trajectories stay inside, m.
pub const MOTION_WINDOW_M: (f64, f64) = (0.2, 1.0);

/// Radar and framing parameters. Defaults are the 61 GHz sensor settings: one
/// 128 µs chirp per 50 ms frame, 256 samples at 2 MHz, 30 frames per sample and
/// the first 40 range bins kept.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RadarConfig {
    pub carrier_freq_hz: f64,
    pub bandwidth_hz: f64,
    pub chirp_duration_s: f64,
    pub sample_rate_hz: f64,
    pub samples_per_chirp: usize,
    pub frame_interval_s: f64,
    pub frames_per_sample: usize,
    pub used_bins: usize,
}

impl Default for RadarConfig {
    fn default() -> Self {
        Self {
            carrier_freq_hz: 61e9,
            bandwidth_hz: 6e9,
            chirp_duration_s: 128e-6,
            sample_rate_hz: 2e6,
            samples_per_chirp: 256,
            frame_interval_s: 50e-3,
            frames_per_sample: 30,
            used_bins: 40,
        }
    }
}

impl RadarConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("carrier_freq_hz", self.carrier_freq_hz),
            ("bandwidth_hz", self.bandwidth_hz),
            ("chirp_duration_s", self.chirp_duration_s),
            ("sample_rate_hz", self.sample_rate_hz),
            ("frame_interval_s", self.frame_interval_s),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return invalid(format!("{name} must be positive and finite, got {v}"));
            }
        }
        let expected = (self.chirp_duration_s * self.sample_rate_hz).round() as usize;
        if self.samples_per_chirp != expected {
            return invalid(format!(
                "samples_per_chirp {} disagrees with chirp_duration_s × sample_rate_hz = {expected}",
                self.samples_per_chirp
            ));
        }
        if !self.samples_per_chirp.is_power_of_two() {
            return invalid("samples_per_chirp must be a power of two");
        }
        if self.frames_per_sample < 2 {
            return invalid("frames_per_sample must be at least 2");
        }
        if self.used_bins == 0 || self.used_bins > self.samples_per_chirp / 2 {
            return invalid(format!(
                "used_bins must lie in 1..={}, got {}",
                self.samples_per_chirp / 2,
                self.used_bins
            ));
        }
        Ok(())
    }

    pub fn sample_period_s(&self) -> f64 {
        1.0 / self.sample_rate_hz
    }

    /// Chirp slope ΔB/ΔT in Hz/s.
    pub fn chirp_slope(&self) -> f64 {
        self.bandwidth_hz / self.chirp_duration_s
    }

    /// Beat frequency of a reflector at `range_m`.
    pub fn beat_frequency_hz(&self, range_m: f64) -> f64 {
        2.0 * self.bandwidth_hz * range_m / (self.chirp_duration_s * SPEED_OF_LIGHT)
    }

    /// Distance covered by one range bin.
    pub fn bin_spacing_m(&self) -> f64 {
        SPEED_OF_LIGHT * self.chirp_duration_s * self.sample_rate_hz
            / (2.0 * self.bandwidth_hz * self.samples_per_chirp as f64)
    }

    pub fn observation_time_s(&self) -> f64 {
        self.frames_per_sample as f64 * self.frame_interval_s
    }
}

/// A point reflector seen by one chirp.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Reflector {
    pub range_m: f64,
    pub amplitude: f64,
    #[serde(default)]
    pub phase_rad: f64,
}

impl Reflector {
    pub fn new(range_m: f64, amplitude: f64, phase_rad: f64) -> Result<Self> {
        let r = Self {
            range_m,
            amplitude,
            phase_rad,
        };
        r.validate()?;
        Ok(r)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.amplitude.is_finite() && self.amplitude > 0.0) {
            return invalid(format!("reflector amplitude must be positive, got {}", self.amplitude));
        }
        if !(0.0..=MAX_RANGE_M).contains(&self.range_m) {
            return invalid(format!(
                "reflector range {} m outside [0, {MAX_RANGE_M}] m",
                self.range_m
            ));
        }
        if !self.phase_rad.is_finite() {
            return invalid("reflector phase must be finite");
        }
        Ok(())
    }
}

/// The sampled beat signal of one chirp.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameSignal(pub Vec<f64>);

impl FrameSignal {
    pub fn samples(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Sampled beat signal of a set of reflectors:
/// `Σ (α/2) cos(2π f_b n T_s + 2π (2 f_c R / c) + φ)` for `n = 0..N_s`.
pub fn beat_frame(config: &RadarConfig, reflectors: &[Reflector]) -> Result<FrameSignal> {
    for r in reflectors {
        r.validate()?;
    }
    let ts = config.sample_period_s();
    let mut samples = vec![0.0; config.samples_per_chirp];
    for r in reflectors {
        let fb = config.beat_frequency_hz(r.range_m);
        let phase0 = TAU * (2.0 * config.carrier_freq_hz * r.range_m / SPEED_OF_LIGHT) + r.phase_rad;
        for (n, s) in samples.iter_mut().enumerate() {
            *s += 0.5 * r.amplitude * (TAU * fb * n as f64 * ts + phase0).cos();
        }
    }
    Ok(FrameSignal(samples))
}

/// The four head-movement classes, labelled 0..=3.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HeadMotion {
    /// Staring at the front: static head near the nominal range.
    Front = 0,
    /// Shaking up and down: sinusoidal range oscillation.
    Nod = 1,
    /// Shaking side to side: sinusoidal reflection strength, small range wobble.
    Shake = 2,
    /// Lowered head: static, displaced from the nominal range.
    Lowered = 3,
}

impl HeadMotion {
    pub const ALL: [HeadMotion; 4] = [
        HeadMotion::Front,
        HeadMotion::Nod,
        HeadMotion::Shake,
        HeadMotion::Lowered,
    ];

    pub fn label(self) -> u8 {
        self as u8
    }

    pub fn name(self) -> &'static str {
        match self {
            HeadMotion::Front => "front",
            HeadMotion::Nod => "nod",
            HeadMotion::Shake => "shake",
            HeadMotion::Lowered => "lowered",
        }
    }
}

impl TryFrom<u8> for HeadMotion {
    type Error = Error;

    fn try_from(v: u8) -> Result<Self> {
        HeadMotion::ALL
            .get(v as usize)
            .copied()
            .ok_or_else(|| Error::InvalidArgument(format!("unknown class label {v}")))
    }
}

/// Closed interval that per-sample parameters are drawn from uniformly.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Span(pub f64, pub f64);

impl Span {
    pub fn fixed(v: f64) -> Self {
        Span(v, v)
    }

    fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let u: f64 = rng.random();
        self.0 + (self.1 - self.0) * u
    }

    fn validate(&self, name: &str) -> Result<()> {
        if !(self.0.is_finite() && self.1.is_finite() && self.0 <= self.1) {
            return invalid(format!("{name} must be an ordered finite interval, got {self:?}"));
        }
        Ok(())
    }
}

/// Parameter ranges of the synthetic head-motion models.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MotionParams {
    pub base_range_m: f64,
    pub target_amplitude: f64,
    pub static_jitter_m: f64,
    pub nod_amplitude_m: Span,
    pub nod_freq_hz: Span,
    pub shake_depth: f64,
    pub shake_freq_hz: Span,
    pub shake_wobble_m: f64,
    pub lowered_offset_m: Span,
    pub lowered_jitter_m: f64,
    /// Starting phase of the periodic motions.
    pub motion_phase_rad: Span,
}

impl Default for MotionParams {
    fn default() -> Self {
        Self {
            base_range_m: 0.40,
            target_amplitude: 1.0,
            static_jitter_m: 0.005,
            nod_amplitude_m: Span(0.03, 0.07),
            nod_freq_hz: Span(0.5, 1.5),
            shake_depth: 0.5,
            shake_freq_hz: Span(0.5, 1.5),
            shake_wobble_m: 0.01,
            lowered_offset_m: Span(0.10, 0.20),
            lowered_jitter_m: 0.005,
            motion_phase_rad: Span(0.0, TAU),
        }
    }
}

impl MotionParams {
    pub fn validate(&self) -> Result<()> {
        for (name, span) in [
            ("nod_amplitude_m", self.nod_amplitude_m),
            ("nod_freq_hz", self.nod_freq_hz),
            ("shake_freq_hz", self.shake_freq_hz),
            ("lowered_offset_m", self.lowered_offset_m),
            ("motion_phase_rad", self.motion_phase_rad),
        ] {
            span.validate(name)?;
        }
        for (name, v) in [
            ("static_jitter_m", self.static_jitter_m),
            ("shake_wobble_m", self.shake_wobble_m),
            ("lowered_jitter_m", self.lowered_jitter_m),
            ("nod_amplitude_m", self.nod_amplitude_m.0),
            ("nod_freq_hz", self.nod_freq_hz.0),
            ("shake_freq_hz", self.shake_freq_hz.0),
        ] {
            if v < 0.0 {
                return invalid(format!("{name} must be non-negative"));
            }
        }
        if !(0.0..1.0).contains(&self.shake_depth) {
            return invalid("shake_depth must lie in [0, 1)");
        }
        if !(self.target_amplitude.is_finite() && self.target_amplitude > 0.0) {
            return invalid("target_amplitude must be positive");
        }
        let (lo, hi) = MOTION_WINDOW_M;
        let reach_lo = self.base_range_m - self.nod_amplitude_m.1;
        let reach_hi = (self.base_range_m + self.nod_amplitude_m.1)
            .max(self.base_range_m + self.lowered_offset_m.1);
        if reach_lo < lo || reach_hi > hi || self.base_range_m + self.lowered_offset_m.0 < lo {
            return invalid(format!(
                "motion parameters reach outside the [{lo}, {hi}] m window"
            ));
        }
        Ok(())
    }
}

/// Per-frame target range and strength for one labelled sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MotionProfile {
    pub class: HeadMotion,
    pub range_m: Vec<f64>,
    pub amplitude: Vec<f64>,
}

/// Draws a motion trajectory for `class` over the configured frames.
///
/// Ranges are clamped to [`MOTION_WINDOW_M`] so Gaussian jitter can never leave
/// the observed region.
pub fn motion_trajectory(
    class: HeadMotion,
    params: &MotionParams,
    config: &RadarConfig,
    seed: u64,
) -> Result<MotionProfile> {
    params.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = config.frames_per_sample;
    let dt = config.frame_interval_s;
    let jitter = |sigma: f64, rng: &mut ChaCha8Rng| -> Result<Vec<f64>> {
        if sigma == 0.0 {
            return Ok(vec![0.0; n]);
        }
        let d = Normal::new(0.0, sigma).map_err(|e| Error::InvalidArgument(e.to_string()))?;
        Ok((0..n).map(|_| d.sample(rng)).collect())
    };
    let base = params.base_range_m;
    let amp = params.target_amplitude;
    let (range, amplitude): (Vec<f64>, Vec<f64>) = match class {
        HeadMotion::Front => {
            let j = jitter(params.static_jitter_m, &mut rng)?;
            (j.iter().map(|d| base + d).collect(), vec![amp; n])
        }
        HeadMotion::Nod => {
            let a = params.nod_amplitude_m.draw(&mut rng);
            let f = params.nod_freq_hz.draw(&mut rng);
            let p = params.motion_phase_rad.draw(&mut rng);
            let r = (0..n)
                .map(|k| base + a * (TAU * f * k as f64 * dt + p).sin())
                .collect();
            (r, vec![amp; n])
        }
        HeadMotion::Shake => {
            let f = params.shake_freq_hz.draw(&mut rng);
            let p = params.motion_phase_rad.draw(&mut rng);
            let j = jitter(params.shake_wobble_m, &mut rng)?;
            let a = (0..n)
                .map(|k| amp * (1.0 + params.shake_depth * (TAU * f * k as f64 * dt + p).sin()))
                .collect();
            (j.iter().map(|d| base + d).collect(), a)
        }
        HeadMotion::Lowered => {
            let off = params.lowered_offset_m.draw(&mut rng);
            let j = jitter(params.lowered_jitter_m, &mut rng)?;
            (j.iter().map(|d| base + off + d).collect(), vec![amp; n])
        }
    };
    let (lo, hi) = MOTION_WINDOW_M;
    Ok(MotionProfile {
        class,
        range_m: range.into_iter().map(|r| r.clamp(lo, hi)).collect(),
        amplitude,
    })
}

/// Everything needed to synthesise one labelled sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneSpec {
    pub motion: MotionProfile,
    pub clutter: Vec<Reflector>,
    pub noise_std: f64,
    pub seed: u64,
}

/// Static cabin reflectors and receiver noise shared by all generated scenes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SceneDefaults {
    pub clutter: Vec<Reflector>,
    pub noise_std: f64,
    pub motion: MotionParams,
}

impl Default for SceneDefaults {
    fn default() -> Self {
        Self {
            clutter: vec![
                Reflector {
                    range_m: 0.25,
                    amplitude: 0.8,
                    phase_rad: 0.0,
                },
                Reflector {
                    range_m: 0.70,
                    amplitude: 0.5,
                    phase_rad: 1.3,
                },
                Reflector {
                    range_m: 0.95,
                    amplitude: 0.3,
                    phase_rad: 2.1,
                },
            ],
            noise_std: 0.02,
            motion: MotionParams::default(),
        }
    }
}

/// SplitMix64 finaliser, used to derive independent per-sample seeds.
pub fn mix_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Draws a complete scene for `class` from the shared defaults.
pub fn draw_scene(
    class: HeadMotion,
    defaults: &SceneDefaults,
    config: &RadarConfig,
    seed: u64,
) -> Result<SceneSpec> {
    let motion = motion_trajectory(class, &defaults.motion, config, mix_seed(seed, 1))?;
    Ok(SceneSpec {
        motion,
        clutter: defaults.clutter.clone(),
        noise_std: defaults.noise_std,
        seed: mix_seed(seed, 2),
    })
}

/// Synthesises all frames of a scene: the target at its per-frame range and
/// strength, the static clutter, and i.i.d. Gaussian noise.
pub fn simulate_sample(config: &RadarConfig, scene: &SceneSpec) -> Result<Vec<FrameSignal>> {
    config.validate()?;
    let n = config.frames_per_sample;
    if scene.motion.range_m.len() != n || scene.motion.amplitude.len() != n {
        return invalid(format!(
            "motion profile must have {n} frames, got {} ranges and {} amplitudes",
            scene.motion.range_m.len(),
            scene.motion.amplitude.len()
        ));
    }
    if !(scene.noise_std.is_finite() && scene.noise_std >= 0.0) {
        return invalid("noise_std must be non-negative");
    }
    let noise = Normal::new(0.0, scene.noise_std).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    let clutter = beat_frame(config, &scene.clutter)?;
    let mut rng = ChaCha8Rng::seed_from_u64(scene.seed);
    let mut frames = Vec::with_capacity(n);
    for k in 0..n {
        let amplitude = scene.motion.amplitude[k];
        let mut frame = if amplitude > 0.0 {
            beat_frame(config, &[Reflector::new(scene.motion.range_m[k], amplitude, 0.0)?])?
        } else {
            FrameSignal(vec![0.0; config.samples_per_chirp])
        };
        for (s, c) in frame.0.iter_mut().zip(clutter.samples()) {
            *s += c;
        }
        if scene.noise_std > 0.0 {
            frame.0.iter_mut().for_each(|s| *s += noise.sample(&mut rng));
        }
        frames.push(frame);
    }
    Ok(frames)
}
