use super::gcn::{gcn_backward, GcnModel, Gradients, Head};
use crate::error::{Error, Result};
use crate::training::Transition;

/// Probabilities are clamped into `[BCE_CLAMP, 1 - BCE_CLAMP]` before logs.
pub const BCE_CLAMP: f64 = 1e-7;

/// Mean binary cross-entropy and its gradient with respect to `outputs`.
pub fn bce_loss(outputs: &[f64], target: &[f64]) -> Result<(f64, Vec<f64>)> {
    if outputs.len() != target.len() || outputs.is_empty() {
        return Err(Error::Contract(format!(
            "bce over {} outputs and {} targets",
            outputs.len(),
            target.len()
        )));
    }
    let n = outputs.len() as f64;
    let mut loss = 0.0;
    let mut grad = Vec::with_capacity(outputs.len());
    for (&o, &t) in outputs.iter().zip(target) {
        let p = o.clamp(BCE_CLAMP, 1.0 - BCE_CLAMP);
        loss -= t * p.ln() + (1.0 - t) * (1.0 - p).ln();
        // The clamp is flat outside its range.
        let g = if p != o {
            0.0
        } else {
            -(t / p - (1.0 - t) / (1.0 - p)) / n
        };
        grad.push(g);
    }
    Ok((loss / n, grad))
}

/// Temporal-difference targets for a batch: `r` for terminal transitions,
/// `r + V_target(s')` otherwise (no discount).
pub fn td_targets(batch: &[&Transition], target_model: &GcnModel) -> Result<Vec<f64>> {
    batch
        .iter()
        .map(|t| {
            if t.terminal {
                Ok(t.reward)
            } else {
                Ok(t.reward + target_model.value(&t.next_features, &t.adjacency)?)
            }
        })
        .collect()
}

/// Mean squared TD error over the batch with gradients for `model` only.
pub fn td_loss(
    batch: &[&Transition],
    model: &GcnModel,
    target_model: &GcnModel,
) -> Result<(f64, Gradients)> {
    if batch.is_empty() {
        return Err(Error::Contract("empty TD batch".into()));
    }
    model.require_head(Head::Value)?;
    target_model.require_head(Head::Value)?;
    let targets = td_targets(batch, target_model)?;
    let m = batch.len() as f64;
    let mut loss = 0.0;
    let mut grads = Gradients::zeros_like(model);
    for (t, y) in batch.iter().zip(targets) {
        let pass = model.forward(&t.features, &t.adjacency)?;
        let err = y - pass.output[0];
        loss += err * err;
        let g = gcn_backward(model, &t.adjacency, &pass, &[-2.0 * err / m])?;
        grads.add_assign(&g);
    }
    Ok((loss / m, grads))
}
