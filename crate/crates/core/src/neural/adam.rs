use serde::{Deserialize, Serialize};

use super::gcn::{GcnModel, Gradients};
use super::matrix::DenseMatrix;
use crate::error::{Error, Result};

/// Bias-corrected Adam moments for every parameter tensor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub step: u64,
    pub first_moment: Vec<DenseMatrix>,
    pub second_moment: Vec<DenseMatrix>,
}

impl AdamState {
    pub fn new(model: &GcnModel) -> Self {
        let zeros: Vec<DenseMatrix> = model
            .params()
            .iter()
            .map(|p| DenseMatrix::zeros(p.rows(), p.cols()))
            .collect();
        AdamState {
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            step: 0,
            first_moment: zeros.clone(),
            second_moment: zeros,
        }
    }
}

pub fn adam_step(
    model: &mut GcnModel,
    grads: &Gradients,
    state: &mut AdamState,
    lr: f64,
) -> Result<()> {
    let shapes_ok = grads.tensors.len() == model.params().len()
        && state.first_moment.len() == model.params().len()
        && model
            .params()
            .iter()
            .zip(&grads.tensors)
            .zip(&state.first_moment)
            .all(|((p, g), m)| p.shape() == g.shape() && p.shape() == m.shape());
    if !shapes_ok {
        return Err(Error::Contract(
            "adam: gradient or moment shapes do not match parameters".into(),
        ));
    }
    state.step += 1;
    let (b1, b2, eps) = (state.beta1, state.beta2, state.epsilon);
    let c1 = 1.0 - b1.powi(state.step as i32);
    let c2 = 1.0 - b2.powi(state.step as i32);
    let params = model.params_mut();
    for (i, p) in params.iter_mut().enumerate() {
        let g = grads.tensors[i].data();
        let m = state.first_moment[i].data_mut();
        let v = state.second_moment[i].data_mut();
        for (j, w) in p.data_mut().iter_mut().enumerate() {
            m[j] = b1 * m[j] + (1.0 - b1) * g[j];
            v[j] = b2 * v[j] + (1.0 - b2) * g[j] * g[j];
            let m_hat = m[j] / c1;
            let v_hat = v[j] / c2;
            *w -= lr * m_hat / (v_hat.sqrt() + eps);
        }
    }
    Ok(())
}
