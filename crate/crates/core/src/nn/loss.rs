use crate::error::{invalid, Result};

/// Probability clamp used by the binary cross-entropy.
pub const BCE_EPS: f64 = 1e-12;

pub fn relu(x: f64) -> f64 {
    x.max(0.0)
}

/// Derivative of [`relu`] at `x` (zero at the kink).
pub fn relu_grad(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else {
        0.0
    }
}

/// Logistic function, evaluated on the branch that cannot overflow. Deep in
/// the negative tail the result is held at the smallest normal `f64` instead
/// of underflowing to zero.
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        let s = e / (1.0 + e);
        // a comparison rather than f64::max, which would swallow NaN
        if s < f64::MIN_POSITIVE {
            f64::MIN_POSITIVE
        } else {
            s
        }
    }
}

pub fn sigmoid_grad(x: f64) -> f64 {
    let s = sigmoid(x);
    s * (1.0 - s)
}

fn check_target(b: f64) -> Result<()> {
    if b != 0.0 && b != 1.0 {
        return invalid(format!("binary target must be 0 or 1, got {b}"));
    }
    Ok(())
}

/// `-[b ln P + (1 - b) ln(1 - P)]` with `P` clamped to `[BCE_EPS, 1 - BCE_EPS]`.
pub fn bce_loss(p: f64, b: f64) -> Result<f64> {
    check_target(b)?;
    let p = p.clamp(BCE_EPS, 1.0 - BCE_EPS);
    Ok(-(b * p.ln() + (1.0 - b) * (1.0 - p).ln()))
}

/// `dLoss/dP` of [`bce_loss`].
pub fn bce_loss_grad(p: f64, b: f64) -> Result<f64> {
    check_target(b)?;
    let p = p.clamp(BCE_EPS, 1.0 - BCE_EPS);
    Ok(-b / p + (1.0 - b) / (1.0 - p))
}

pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|z| (z - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

/// Categorical cross-entropy of `softmax(logits)` against `target`, and its
/// gradient with respect to the logits.
pub fn softmax_cross_entropy(logits: &[f64], target: usize) -> Result<(f64, Vec<f64>)> {
    if target >= logits.len() {
        return invalid(format!(
            "target class {target} out of range for {} logits",
            logits.len()
        ));
    }
    let mut p = softmax(logits);
    let loss = -p[target].max(BCE_EPS).ln();
    p[target] -= 1.0;
    Ok((loss, p))
}
