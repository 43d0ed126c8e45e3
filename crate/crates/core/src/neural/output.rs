use rand::Rng;

use crate::corpus::Label;
use crate::tensor::{dot, Tensor};

/// Probabilities over (B, I, O), one row per real token.
pub type TagDistribution = Vec<[f64; 3]>;

const PROB_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct DenseParams {
    /// `3 x 2H`
    pub weights: Tensor,
    /// `3 x 1`
    pub bias: Tensor,
}

impl DenseParams {
    pub fn init<R: Rng + ?Sized>(input: usize, rng: &mut R) -> Self {
        DenseParams {
            weights: Tensor::glorot(3, input, rng),
            bias: Tensor::zeros(3, 1),
        }
    }

    pub fn zeros(input: usize) -> Self {
        DenseParams {
            weights: Tensor::zeros(3, input),
            bias: Tensor::zeros(3, 1),
        }
    }
}

/// Max-subtracted softmax.
pub fn softmax(logits: [f64; 3]) -> [f64; 3] {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e = logits.map(|l| (l - max).exp());
    let sum: f64 = e.iter().sum();
    e.map(|x| x / sum)
}

pub fn dense_softmax(h: &[f64], p: &DenseParams) -> [f64; 3] {
    let mut logits = [0.0; 3];
    for (k, l) in logits.iter_mut().enumerate() {
        *l = dot(p.weights.row(k), h) + p.bias.get(k, 0);
    }
    softmax(logits)
}

/// Summed negative log-likelihood of the gold tags over real slots.
/// `dist` holds one row per real slot, in slot order.
pub fn masked_cross_entropy(dist: &[[f64; 3]], gold: &[Label], mask: &[bool]) -> f64 {
    dist.iter()
        .zip(gold)
        .zip(mask)
        .filter(|(_, &m)| m)
        .map(|((p, y), _)| -p[y.index()].max(PROB_FLOOR).ln())
        .sum()
}
