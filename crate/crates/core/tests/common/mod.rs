#![allow(dead_code)]

pub mod gradcheck;

use headmotion::tensor::Tensor;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rustfft::num_complex::Complex64;

pub const FD_STEP: f64 = 1e-5;

/// Straight O(N²) evaluation of `Σ x[n] exp(-j 2π k n / N)`.
pub fn naive_dft(x: &[f64]) -> Vec<Complex64> {
    let n = x.len();
    (0..n)
        .map(|k| {
            x.iter().enumerate().fold(Complex64::new(0.0, 0.0), |acc, (i, &v)| {
                // reduce k*i mod n first so the angle stays small and exact
                let theta = -std::f64::consts::TAU * ((k * i) % n) as f64 / n as f64;
                acc + Complex64::from_polar(v, theta)
            })
        })
        .collect()
}

pub fn random_tensor(shape: &[usize], seed: u64, lo: f64, hi: f64) -> Tensor {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut t = Tensor::zeros(shape);
    t.data_mut().iter_mut().for_each(|v| *v = rng.random_range(lo..hi));
    t
}

/// Central differences of `f` with respect to every entry of `x`.
pub fn numeric_grad(x: &mut [f64], mut f: impl FnMut(&[f64]) -> f64) -> Vec<f64> {
    let mut g = Vec::with_capacity(x.len());
    for i in 0..x.len() {
        let orig = x[i];
        x[i] = orig + FD_STEP;
        let up = f(x);
        x[i] = orig - FD_STEP;
        let down = f(x);
        x[i] = orig;
        g.push((up - down) / (2.0 * FD_STEP));
    }
    g
}

/// `‖a − b‖ / max(‖a‖, ‖b‖, 1e-6)`. The floor keeps gradients that are zero
/// by construction (an embedding bias cancelled by the pair difference) from
/// turning finite-difference round-off into a relative error of one.
pub fn rel_error(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    let diff: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    diff / na.max(nb).max(1e-6)
}

/// Weighted sum `Σ r_i y_i`, a scalar loss whose output gradient is `r`.
pub fn project(y: &[f64], r: &[f64]) -> f64 {
    y.iter().zip(r).map(|(a, b)| a * b).sum()
}
