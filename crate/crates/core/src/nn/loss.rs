use crate::error::{ensure_len, Error, Result};

/// Mean squared error `(1/D) Σ (p − t)²` and its gradient w.r.t. `pred`.
pub fn mse_loss(pred: &[f64], target: &[f64]) -> Result<(f64, Vec<f64>)> {
    ensure_len("mse target", pred.len(), target.len())?;
    if pred.is_empty() {
        return Err(Error::Empty("mse over zero-length vectors".into()));
    }
    let n = pred.len() as f64;
    let mut loss = 0.0;
    let grad = pred
        .iter()
        .zip(target)
        .map(|(p, t)| {
            let r = p - t;
            loss += r * r;
            2.0 * r / n
        })
        .collect();
    Ok((loss / n, grad))
}

pub fn log_softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + logits.iter().map(|&z| (z - max).exp()).sum::<f64>().ln();
    logits.iter().map(|&z| z - lse).collect()
}

pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&z| (z - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

/// `−log softmax(logits)[target]` and its gradient `softmax − onehot`.
pub fn softmax_cross_entropy(logits: &[f64], target: usize) -> Result<(f64, Vec<f64>)> {
    if target >= logits.len() {
        return Err(Error::InvalidArgument(format!(
            "target index {target} out of range for {} logits",
            logits.len()
        )));
    }
    let log_probs = log_softmax(logits);
    let loss = -log_probs[target];
    if !loss.is_finite() {
        return Err(Error::NonFinite("cross-entropy".into()));
    }
    let mut grad: Vec<f64> = log_probs.iter().map(|lp| lp.exp()).collect();
    grad[target] -= 1.0;
    Ok((loss, grad))
}
