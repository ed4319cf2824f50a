#![allow(dead_code)]

use headmotion::dsp::{build_matrix, MagnitudeScale, SpectrumMatrix};
use headmotion::radar_sim::{draw_scene, simulate_sample, HeadMotion};
use headmotion_cli::config::Config;
use headmotion_cli::plot::intensity_levels;

pub fn matrix(cfg: &Config, class: HeadMotion, seed: u64) -> SpectrumMatrix {
    let scene = draw_scene(class, &cfg.scene, &cfg.radar, seed).unwrap();
    let frames = simulate_sample(&cfg.radar, &scene).unwrap();
    build_matrix(&frames, &cfg.radar, class.label(), MagnitudeScale::Linear).unwrap()
}

/// Brightest rendered bin of every frame.
pub fn argmax_trace(m: &SpectrumMatrix) -> Vec<f64> {
    let levels = intensity_levels(m);
    (0..m.frames)
        .map(|f| {
            let mut best = 0;
            for b in 0..m.bins {
                if levels[b][f] > levels[best][f] {
                    best = b;
                }
            }
            best as f64
        })
        .collect()
}

pub fn variance(xs: &[f64]) -> f64 {
    let mean = xs.iter().sum::<f64>() / xs.len() as f64;
    xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / xs.len() as f64
}

/// Frequency on a fine grid whose sinusoid (with offset) explains most of the
/// trace in the least-squares sense.
pub fn dominant_frequency(trace: &[f64], dt: f64) -> f64 {
    let n = trace.len();
    let t: Vec<f64> = (0..n).map(|k| k as f64 * dt).collect();
    let mut best = (0.0, f64::INFINITY);
    let mut f = 0.2;
    while f <= 5.0 {
        let w = std::f64::consts::TAU * f;
        // normal equations for [1, sin, cos]
        let basis: Vec<[f64; 3]> = t.iter().map(|&x| [1.0, (w * x).sin(), (w * x).cos()]).collect();
        let mut a = [[0.0; 3]; 3];
        let mut rhs = [0.0; 3];
        for (row, &y) in basis.iter().zip(trace) {
            for i in 0..3 {
                rhs[i] += row[i] * y;
                for j in 0..3 {
                    a[i][j] += row[i] * row[j];
                }
            }
        }
        if let Some(c) = solve3(a, rhs) {
            let resid: f64 = basis
                .iter()
                .zip(trace)
                .map(|(row, &y)| (y - (0..3).map(|i| c[i] * row[i]).sum::<f64>()).powi(2))
                .sum();
            if resid < best.1 {
                best = (f, resid);
            }
        }
        f += 0.005;
    }
    best.0
}

fn solve3(mut a: [[f64; 3]; 3], mut b: [f64; 3]) -> Option<[f64; 3]> {
    for col in 0..3 {
        let pivot = (col..3).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[pivot][col].abs() < 1e-12 {
            return None;
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        for r in col + 1..3 {
            let k = a[r][col] / a[col][col];
            let pivot_row = a[col];
            for (x, p) in a[r][col..].iter_mut().zip(&pivot_row[col..]) {
                *x -= k * p;
            }
            b[r] -= k * b[col];
        }
    }
    let mut x = [0.0; 3];
    for r in (0..3).rev() {
        x[r] = (b[r] - (r + 1..3).map(|c| a[r][c] * x[c]).sum::<f64>()) / a[r][r];
    }
    Some(x)
}
