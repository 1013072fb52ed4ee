use ndarray::Array2;

use crate::error::{Error, Result};
use crate::model::ModelParams;

pub const BETA1: f64 = 0.9;
pub const BETA2: f64 = 0.999;
pub const EPSILON: f64 = 1e-8;

/// Moment estimates aligned with [`ModelParams::tensors`].
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    first: Vec<Array2<f64>>,
    second: Vec<Array2<f64>>,
    step: u64,
}

impl AdamState {
    pub fn new(params: &ModelParams) -> Self {
        let zeros: Vec<Array2<f64>> = params
            .tensors()
            .into_iter()
            .map(|(_, a)| Array2::zeros(a.raw_dim()))
            .collect();
        Self {
            first: zeros.clone(),
            second: zeros,
            step: 0,
        }
    }

    pub fn step(&self) -> u64 {
        self.step
    }
}

/// One bias-corrected Adam update of `params` with `grads` (same structure).
///
/// Fails without touching anything if a gradient entry is not finite.
pub fn adam_step(params: &mut ModelParams, grads: &ModelParams, state: &mut AdamState, lr: f64) -> Result<()> {
    let named = grads.tensors();
    if named.len() != state.first.len() {
        return Err(Error::shape("adam state", state.first.len(), named.len()));
    }
    for (name, g) in &named {
        if g.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteGradient { name: name.clone() });
        }
    }
    state.step += 1;
    let t = state.step as i32;
    let bc1 = 1.0 - BETA1.powi(t);
    let bc2 = 1.0 - BETA2.powi(t);
    for (i, p) in params.tensors_mut().into_iter().enumerate() {
        let g = named[i].1;
        let (m, v) = (&mut state.first[i], &mut state.second[i]);
        if p.dim() != g.dim() || m.dim() != g.dim() {
            return Err(Error::shape(format!("adam `{}`", named[i].0), p.dim(), g.dim()));
        }
        ndarray::Zip::from(p).and(g).and(m).and(v).for_each(|p, &g, m, v| {
            *m = BETA1 * *m + (1.0 - BETA1) * g;
            *v = BETA2 * *v + (1.0 - BETA2) * g * g;
            let m_hat = *m / bc1;
            let v_hat = *v / bc2;
            *p -= lr * m_hat / (v_hat.sqrt() + EPSILON);
        });
    }
    Ok(())
}
