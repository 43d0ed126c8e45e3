use rand::Rng;

use crate::features::FeatureMatrix;
use crate::tensor::{sigmoid, Tensor};

/// One GRU direction. Update convention: `h = (1 - z) * h_prev + z * h~`.
#[derive(Debug, Clone, PartialEq)]
pub struct GruDirectionParams {
    pub w_z: Tensor,
    pub w_r: Tensor,
    pub w_h: Tensor,
    pub u_z: Tensor,
    pub u_r: Tensor,
    pub u_h: Tensor,
    pub b_z: Tensor,
    pub b_r: Tensor,
    pub b_h: Tensor,
}

impl GruDirectionParams {
    pub fn init<R: Rng + ?Sized>(input: usize, hidden: usize, rng: &mut R) -> Self {
        GruDirectionParams {
            w_z: Tensor::glorot(hidden, input, rng),
            w_r: Tensor::glorot(hidden, input, rng),
            w_h: Tensor::glorot(hidden, input, rng),
            u_z: Tensor::glorot(hidden, hidden, rng),
            u_r: Tensor::glorot(hidden, hidden, rng),
            u_h: Tensor::glorot(hidden, hidden, rng),
            b_z: Tensor::zeros(hidden, 1),
            b_r: Tensor::zeros(hidden, 1),
            b_h: Tensor::zeros(hidden, 1),
        }
    }

    pub fn zeros(input: usize, hidden: usize) -> Self {
        GruDirectionParams {
            w_z: Tensor::zeros(hidden, input),
            w_r: Tensor::zeros(hidden, input),
            w_h: Tensor::zeros(hidden, input),
            u_z: Tensor::zeros(hidden, hidden),
            u_r: Tensor::zeros(hidden, hidden),
            u_h: Tensor::zeros(hidden, hidden),
            b_z: Tensor::zeros(hidden, 1),
            b_r: Tensor::zeros(hidden, 1),
            b_h: Tensor::zeros(hidden, 1),
        }
    }

    pub fn hidden(&self) -> usize {
        self.w_z.rows()
    }

    pub fn input(&self) -> usize {
        self.w_z.cols()
    }

    pub fn named(&self) -> [(&'static str, &Tensor); 9] {
        [
            ("w_z", &self.w_z),
            ("w_r", &self.w_r),
            ("w_h", &self.w_h),
            ("u_z", &self.u_z),
            ("u_r", &self.u_r),
            ("u_h", &self.u_h),
            ("b_z", &self.b_z),
            ("b_r", &self.b_r),
            ("b_h", &self.b_h),
        ]
    }

    pub fn named_mut(&mut self) -> [(&'static str, &mut Tensor); 9] {
        [
            ("w_z", &mut self.w_z),
            ("w_r", &mut self.w_r),
            ("w_h", &mut self.w_h),
            ("u_z", &mut self.u_z),
            ("u_r", &mut self.u_r),
            ("u_h", &mut self.u_h),
            ("b_z", &mut self.b_z),
            ("b_r", &mut self.b_r),
            ("b_h", &mut self.b_h),
        ]
    }
}

/// Activations of one time step, kept for backprop.
#[derive(Debug, Clone, PartialEq)]
pub struct GruStep {
    pub x: Vec<f64>,
    pub h_prev: Vec<f64>,
    /// `h_prev` after the recurrent dropout mask.
    pub h_dropped: Vec<f64>,
    pub z: Vec<f64>,
    pub r: Vec<f64>,
    pub candidate: Vec<f64>,
    pub h: Vec<f64>,
}

pub(crate) fn gru_step(
    x: &[f64],
    h_prev: &[f64],
    recurrent_mask: Option<&[f64]>,
    p: &GruDirectionParams,
) -> GruStep {
    let h_dropped: Vec<f64> = match recurrent_mask {
        Some(m) => h_prev.iter().zip(m).map(|(h, m)| h * m).collect(),
        None => h_prev.to_vec(),
    };
    let gate = |w: &Tensor, u: &Tensor, b: &Tensor, hidden_in: &[f64]| {
        let mut a = b.data().to_vec();
        w.matvec_acc(x, &mut a);
        u.matvec_acc(hidden_in, &mut a);
        a
    };
    let z: Vec<f64> = gate(&p.w_z, &p.u_z, &p.b_z, &h_dropped)
        .into_iter()
        .map(sigmoid)
        .collect();
    let r: Vec<f64> = gate(&p.w_r, &p.u_r, &p.b_r, &h_dropped)
        .into_iter()
        .map(sigmoid)
        .collect();
    let reset: Vec<f64> = r.iter().zip(&h_dropped).map(|(r, h)| r * h).collect();
    let candidate: Vec<f64> = gate(&p.w_h, &p.u_h, &p.b_h, &reset)
        .into_iter()
        .map(f64::tanh)
        .collect();
    let h = (0..h_prev.len())
        .map(|i| (1.0 - z[i]) * h_prev[i] + z[i] * candidate[i])
        .collect();
    GruStep {
        x: x.to_vec(),
        h_prev: h_prev.to_vec(),
        h_dropped,
        z,
        r,
        candidate,
        h,
    }
}

/// Backprop through one step. Accumulates parameter gradients into
/// `grads` and returns `(dL/dx, dL/dh_prev)`.
pub(crate) fn gru_step_backward(
    step: &GruStep,
    dh: &[f64],
    recurrent_mask: Option<&[f64]>,
    p: &GruDirectionParams,
    grads: &mut GruDirectionParams,
) -> (Vec<f64>, Vec<f64>) {
    let n = dh.len();
    let mut dh_prev: Vec<f64> = (0..n).map(|i| dh[i] * (1.0 - step.z[i])).collect();
    let da_z: Vec<f64> = (0..n)
        .map(|i| dh[i] * (step.candidate[i] - step.h_prev[i]) * step.z[i] * (1.0 - step.z[i]))
        .collect();
    let da_h: Vec<f64> = (0..n)
        .map(|i| dh[i] * step.z[i] * (1.0 - step.candidate[i] * step.candidate[i]))
        .collect();
    let reset: Vec<f64> = step
        .r
        .iter()
        .zip(&step.h_dropped)
        .map(|(r, h)| r * h)
        .collect();

    grads.w_h.add_outer(&da_h, &step.x);
    grads.u_h.add_outer(&da_h, &reset);
    grads.b_h.data_mut().iter_mut().zip(&da_h).for_each(|(g, d)| *g += d);
    let mut d_reset = vec![0.0; n];
    p.u_h.matvec_t_acc(&da_h, &mut d_reset);

    let da_r: Vec<f64> = (0..n)
        .map(|i| d_reset[i] * step.h_dropped[i] * step.r[i] * (1.0 - step.r[i]))
        .collect();
    let mut dh_dropped: Vec<f64> = (0..n).map(|i| d_reset[i] * step.r[i]).collect();

    grads.w_r.add_outer(&da_r, &step.x);
    grads.u_r.add_outer(&da_r, &step.h_dropped);
    grads.b_r.data_mut().iter_mut().zip(&da_r).for_each(|(g, d)| *g += d);
    grads.w_z.add_outer(&da_z, &step.x);
    grads.u_z.add_outer(&da_z, &step.h_dropped);
    grads.b_z.data_mut().iter_mut().zip(&da_z).for_each(|(g, d)| *g += d);

    p.u_r.matvec_t_acc(&da_r, &mut dh_dropped);
    p.u_z.matvec_t_acc(&da_z, &mut dh_dropped);

    let mut dx = vec![0.0; step.x.len()];
    p.w_h.matvec_t_acc(&da_h, &mut dx);
    p.w_r.matvec_t_acc(&da_r, &mut dx);
    p.w_z.matvec_t_acc(&da_z, &mut dx);

    match recurrent_mask {
        Some(m) => (0..n).for_each(|i| dh_prev[i] += dh_dropped[i] * m[i]),
        None => (0..n).for_each(|i| dh_prev[i] += dh_dropped[i]),
    }
    (dx, dh_prev)
}

/// Standard GRU cell:
///
/// ```text
/// z  = σ(W_z x + U_z h_prev + b_z)
/// r  = σ(W_r x + U_r h_prev + b_r)
/// h~ = tanh(W_h x + U_h (r ⊙ h_prev) + b_h)
/// h  = (1 - z) ⊙ h_prev + z ⊙ h~
/// ```
pub fn gru_cell_forward(x: &[f64], h_prev: &[f64], p: &GruDirectionParams) -> Vec<f64> {
    gru_step(x, h_prev, None, p).h
}

/// Runs one direction over `inputs` starting from a zero state. Steps are
/// returned in processing order.
pub(crate) fn run_direction(
    inputs: &[Vec<f64>],
    p: &GruDirectionParams,
    reverse: bool,
    recurrent_mask: Option<&[f64]>,
) -> Vec<GruStep> {
    let mut h = vec![0.0; p.hidden()];
    let mut steps = Vec::with_capacity(inputs.len());
    let order: Box<dyn Iterator<Item = usize>> = if reverse {
        Box::new((0..inputs.len()).rev())
    } else {
        Box::new(0..inputs.len())
    };
    for t in order {
        let step = gru_step(&inputs[t], &h, recurrent_mask, p);
        h.clone_from(&step.h);
        steps.push(step);
    }
    steps
}

/// Concatenated forward/backward states for every slot of the chunk. Only
/// the real prefix is processed; pad rows come back as zeros.
pub fn bigru_forward(
    features: &FeatureMatrix,
    p_fwd: &GruDirectionParams,
    p_bwd: &GruDirectionParams,
) -> Vec<Vec<f64>> {
    let real = features.real_len();
    let inputs: Vec<Vec<f64>> = (0..real).map(|t| features.rows.row(t).to_vec()).collect();
    let fwd = run_direction(&inputs, p_fwd, false, None);
    let bwd = run_direction(&inputs, p_bwd, true, None);
    let width = p_fwd.hidden() + p_bwd.hidden();
    let mut out = vec![vec![0.0; width]; features.mask.len()];
    for t in 0..real {
        out[t][..p_fwd.hidden()].copy_from_slice(&fwd[t].h);
        out[t][p_fwd.hidden()..].copy_from_slice(&bwd[real - 1 - t].h);
    }
    out
}
