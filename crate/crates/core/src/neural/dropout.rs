use rand::Rng;

/// Inverted-dropout mask: each entry is 0 with probability `rate`,
/// otherwise `1 / (1 - rate)`.
pub fn dropout_mask<R: Rng + ?Sized>(len: usize, rate: f64, rng: &mut R) -> Vec<f64> {
    assert!((0.0..1.0).contains(&rate), "dropout rate must be in [0, 1)");
    if rate == 0.0 {
        return vec![1.0; len];
    }
    let keep = 1.0 / (1.0 - rate);
    (0..len)
        .map(|_| if rng.gen::<f64>() < rate { 0.0 } else { keep })
        .collect()
}

/// Inverted dropout on one vector; identity when `training` is false.
pub fn apply_dropout<R: Rng + ?Sized>(
    row: &[f64],
    rate: f64,
    rng: &mut R,
    training: bool,
) -> Vec<f64> {
    if !training || rate == 0.0 {
        return row.to_vec();
    }
    row.iter()
        .zip(dropout_mask(row.len(), rate, rng))
        .map(|(x, m)| x * m)
        .collect()
}

/// Masks for one training chunk: a fresh input mask per token, and one
/// recurrent mask per direction reused at every time step.
#[derive(Debug, Clone, PartialEq)]
pub struct DropoutMasks {
    pub input: Vec<Vec<f64>>,
    pub recurrent_fwd: Vec<f64>,
    pub recurrent_bwd: Vec<f64>,
}

impl DropoutMasks {
    pub fn sample<R: Rng + ?Sized>(
        tokens: usize,
        input_dim: usize,
        hidden: usize,
        rate: f64,
        rng: &mut R,
    ) -> Self {
        DropoutMasks {
            input: (0..tokens)
                .map(|_| dropout_mask(input_dim, rate, rng))
                .collect(),
            recurrent_fwd: dropout_mask(hidden, rate, rng),
            recurrent_bwd: dropout_mask(hidden, rate, rng),
        }
    }
}
