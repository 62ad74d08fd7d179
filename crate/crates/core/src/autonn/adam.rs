use super::tensor::ParamSet;
use super::NnError;
use crate::surgery::GradVector;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 5e-4,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

impl AdamConfig {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(format!("lr must be positive, got {}", self.lr));
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return Err("betas must lie in [0, 1)".into());
        }
        if !(self.eps > 0.0) {
            return Err("eps must be positive".into());
        }
        Ok(())
    }
}

/// Per-coordinate first/second moments, flattened in parameter order.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub config: AdamConfig,
    pub step: u64,
    pub m: Vec<f64>,
    pub v: Vec<f64>,
}

impl AdamState {
    pub fn new(config: AdamConfig, params: &ParamSet) -> Self {
        let n = params.numel();
        Self {
            config,
            step: 0,
            m: vec![0.0; n],
            v: vec![0.0; n],
        }
    }
}

/// One bias-corrected Adam update along `direction`, which need not be a
/// raw gradient.
pub fn adam_step(p: &mut ParamSet, direction: &GradVector, st: &mut AdamState) -> Result<(), NnError> {
    let n = p.numel();
    if direction.len() != n || st.m.len() != n || st.v.len() != n {
        return Err(NnError::LengthMismatch {
            expected: n,
            got: direction.len(),
        });
    }
    let AdamConfig { lr, beta1, beta2, eps } = st.config;
    st.step += 1;
    let t = st.step as i32;
    let bc1 = 1.0 - beta1.powi(t);
    let bc2 = 1.0 - beta2.powi(t);
    let g = direction.as_slice();
    let mut offset = 0;
    for i in 0..p.len() {
        let tensor = p.tensor_at_mut(i);
        for (j, x) in tensor.data.iter_mut().enumerate() {
            let k = offset + j;
            st.m[k] = beta1 * st.m[k] + (1.0 - beta1) * g[k];
            st.v[k] = beta2 * st.v[k] + (1.0 - beta2) * g[k] * g[k];
            let m_hat = st.m[k] / bc1;
            let v_hat = st.v[k] / bc2;
            *x -= lr * m_hat / (v_hat.sqrt() + eps);
        }
        offset += tensor.numel();
    }
    if p.flat_values().iter().any(|v| !v.is_finite()) {
        return Err(NnError::NonFinite("adam_step"));
    }
    Ok(())
}
