use serde::{Deserialize, Serialize};

use super::{ParamGrads, ParamStore};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// One bias-corrected Adam update. Missing gradients count as zero.
pub fn adam_step(store: &mut ParamStore, grads: &ParamGrads, cfg: &AdamConfig) -> Result<()> {
    if grads.grads.len() != store.params.len() {
        return Err(Error::Config(format!(
            "{} gradients for {} parameters",
            grads.grads.len(),
            store.params.len()
        )));
    }
    for (p, g) in store.params.iter().zip(&grads.grads) {
        if let Some(g) = g {
            if g.len() != p.value.len() {
                return Err(Error::Config(format!(
                    "gradient for {:?} has {} values, parameter has {}",
                    p.name,
                    g.len(),
                    p.value.len()
                )));
            }
        }
    }
    store.step += 1;
    let t = store.step as i32;
    let c1 = 1.0 - cfg.beta1.powi(t);
    let c2 = 1.0 - cfg.beta2.powi(t);
    for (p, g) in store.params.iter_mut().zip(&grads.grads) {
        let value = p.value.data_mut();
        for i in 0..value.len() {
            let gi = g.as_ref().map_or(0.0, |g| g[i]);
            p.m[i] = cfg.beta1 * p.m[i] + (1.0 - cfg.beta1) * gi;
            p.v[i] = cfg.beta2 * p.v[i] + (1.0 - cfg.beta2) * gi * gi;
            let mhat = p.m[i] / c1;
            let vhat = p.v[i] / c2;
            value[i] -= cfg.lr * mhat / (vhat.sqrt() + cfg.eps);
        }
    }
    Ok(())
}
