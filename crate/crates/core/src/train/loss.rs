use crate::model::ModelParams;

/// Predictions are clamped to `[PRED_CLAMP, 1 - PRED_CLAMP]` inside logs.
pub const PRED_CLAMP: f64 = 1e-7;

#[inline]
fn clamp_pred(p: f64) -> f64 {
    p.clamp(PRED_CLAMP, 1.0 - PRED_CLAMP)
}

/// Mean binary cross entropy with clamped predictions.
pub fn log_loss(preds: &[f64], labels: &[u8]) -> f64 {
    assert_eq!(preds.len(), labels.len(), "preds and labels differ in length");
    let n = preds.len().max(1) as f64;
    preds
        .iter()
        .zip(labels)
        .map(|(&p, &y)| {
            let p = clamp_pred(p);
            if y == 1 {
                -p.ln()
            } else {
                -(1.0 - p).ln()
            }
        })
        .sum::<f64>()
        / n
}

/// Binary entropy of a click probability, clamped like [`log_loss`].
pub fn binary_entropy(q: f64) -> f64 {
    let q = clamp_pred(q);
    -(q * q.ln() + (1.0 - q) * (1.0 - q).ln())
}

/// Training objective: mean BCE plus `gamma` times the squared L2 norm of
/// every parameter.
pub fn bce_l2_loss(preds: &[f64], labels: &[u8], params: &ModelParams, gamma: f64) -> f64 {
    log_loss(preds, labels) + gamma * params.squared_norm()
}

/// dL/dz for each logit of the mean BCE, where `preds = sigmoid(z)`.
///
/// Zero where the clamp is active.
pub fn logit_grads(preds: &[f64], labels: &[u8]) -> Vec<f64> {
    let n = preds.len().max(1) as f64;
    preds
        .iter()
        .zip(labels)
        .map(|(&p, &y)| {
            if !(PRED_CLAMP..=1.0 - PRED_CLAMP).contains(&p) {
                0.0
            } else {
                (p - y as f64) / n
            }
        })
        .collect()
}
