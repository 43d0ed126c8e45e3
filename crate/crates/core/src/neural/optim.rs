use super::{ModelParameters, Trainable};

/// L2 norm over every trainable coordinate of a gradient set.
pub fn global_norm(grads: &ModelParameters) -> f64 {
    grads
        .tensors()
        .iter()
        .map(|t| {
            t.tensor
                .data()
                .iter()
                .enumerate()
                .filter(|(i, _)| t.trainable.allows(t.tensor, *i))
                .map(|(_, g)| g * g)
                .sum::<f64>()
        })
        .sum::<f64>()
        .sqrt()
}

/// Rescales all gradients together when their global norm exceeds
/// `max_norm`. Returns the norm before clipping.
pub fn clip_gradients(grads: &mut ModelParameters, max_norm: f64) -> f64 {
    let norm = global_norm(grads);
    if norm > max_norm {
        grads.scale(max_norm / norm);
    }
    norm
}

/// First and second moment estimates for every parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub m: ModelParameters,
    pub v: ModelParameters,
    pub t: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamState {
    pub fn new(params: &ModelParameters) -> Self {
        AdamState {
            m: params.zeros_like(),
            v: params.zeros_like(),
            t: 0,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// One bias-corrected Adam update. Frozen tensors and PAD rows are left
/// untouched, moments included.
pub fn adam_step(
    params: &mut ModelParameters,
    grads: &ModelParameters,
    state: &mut AdamState,
    lr: f64,
) {
    state.t += 1;
    let (b1, b2, eps) = (state.beta1, state.beta2, state.eps);
    let c1 = 1.0 - b1.powi(state.t as i32);
    let c2 = 1.0 - b2.powi(state.t as i32);
    let tensors = params
        .tensors_mut()
        .into_iter()
        .zip(grads.tensors())
        .zip(state.m.tensors_mut())
        .zip(state.v.tensors_mut());
    for (((p, g), m), v) in tensors {
        if p.trainable == Trainable::Frozen {
            continue;
        }
        let trainable = p.trainable;
        let shape_ref = g.tensor;
        let (pd, gd) = (p.tensor.data_mut(), g.tensor.data());
        let (md, vd) = (m.tensor.data_mut(), v.tensor.data_mut());
        for i in 0..pd.len() {
            if !trainable.allows(shape_ref, i) {
                continue;
            }
            md[i] = b1 * md[i] + (1.0 - b1) * gd[i];
            vd[i] = b2 * vd[i] + (1.0 - b2) * gd[i] * gd[i];
            let m_hat = md[i] / c1;
            let v_hat = vd[i] / c2;
            pd[i] -= lr * m_hat / (v_hat.sqrt() + eps);
        }
    }
}
