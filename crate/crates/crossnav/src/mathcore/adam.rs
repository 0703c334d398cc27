//! Bias-corrected Adam over named parameter sets.

use crate::error::Result;
use crate::mathcore::tensor::ParamSet;

/// Adam moment estimates mirroring a tracked parameter set.
#[derive(Clone, Debug, PartialEq)]
pub struct AdamState {
    pub step: u64,
    /// First moments.
    pub m: ParamSet,
    /// Second moments (entry-wise ≥ 0).
    pub v: ParamSet,
}

impl AdamState {
    /// Fresh zero-moment state for `params`.
    pub fn new(params: &ParamSet) -> Self {
        Self {
            step: 0,
            m: params.zeros_like(),
            v: params.zeros_like(),
        }
    }
}

/// Adam hyperparameters.
#[derive(Clone, Copy, Debug)]
pub struct AdamHyper {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    /// L2 weight decay, applied as `grad += weight_decay · param` before
    /// the moment updates (classic Adam-with-L2 coupling).
    pub weight_decay: f64,
}

impl AdamHyper {
    pub fn with_lr(lr: f64) -> Self {
        Self {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay: 0.0,
        }
    }
}

/// One Adam update. Pure: returns the new parameters and state, inputs
/// untouched.
pub fn adam_step(
    params: &ParamSet,
    grads: &ParamSet,
    state: &AdamState,
    hyper: &AdamHyper,
) -> Result<(ParamSet, AdamState)> {
    params.check_mirrors(grads)?;
    params.check_mirrors(&state.m)?;
    params.check_mirrors(&state.v)?;
    let step = state.step + 1;
    let bc1 = 1.0 - hyper.beta1.powi(step as i32);
    let bc2 = 1.0 - hyper.beta2.powi(step as i32);
    let mut out = params.clone();
    let mut m = state.m.clone();
    let mut v = state.v.clone();
    for (name, p) in out.iter_mut() {
        let g = grads.get(name)?;
        let mt = m.get_mut(name)?;
        let vt = v.get_mut(name)?;
        let pv = p.values_mut();
        for i in 0..pv.len() {
            let grad = g.values()[i] + hyper.weight_decay * pv[i];
            let mi = hyper.beta1 * mt.values()[i] + (1.0 - hyper.beta1) * grad;
            let vi = hyper.beta2 * vt.values()[i] + (1.0 - hyper.beta2) * grad * grad;
            mt.values_mut()[i] = mi;
            vt.values_mut()[i] = vi;
            let m_hat = mi / bc1;
            let v_hat = vi / bc2;
            pv[i] -= hyper.lr * m_hat / (v_hat.sqrt() + hyper.eps);
        }
    }
    Ok((out, AdamState { step, m, v }))
}
