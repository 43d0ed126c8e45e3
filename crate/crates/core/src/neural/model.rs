use super::dropout::DropoutMasks;
use super::gru::{gru_step_backward, run_direction, GruStep};
use super::output::{dense_softmax, masked_cross_entropy, TagDistribution};
use super::ModelParameters;
use crate::chunking::PaddedChunk;
use crate::corpus::PAD;
use crate::features::{char_cnn_backward, featurize_chunk_traced, CharTrace, FeatureMatrix};

/// Everything the backward pass needs from one forward pass.
#[derive(Debug, Clone)]
pub struct ChunkPass {
    pub features: FeatureMatrix,
    char_traces: Vec<CharTrace>,
    /// GRU inputs after input dropout, one per real slot.
    inputs: Vec<Vec<f64>>,
    fwd: Vec<GruStep>,
    /// Processing order, i.e. last slot first.
    bwd: Vec<GruStep>,
    /// `[h_fwd ; h_bwd]` per real slot.
    pub hidden: Vec<Vec<f64>>,
    pub probs: TagDistribution,
}

impl ChunkPass {
    pub fn real_len(&self) -> usize {
        self.probs.len()
    }
}

/// Forward pass over the real prefix of a chunk. `masks` enables dropout;
/// `None` is inference mode.
pub fn forward_chunk(
    params: &ModelParameters,
    chunk: &PaddedChunk,
    masks: Option<&DropoutMasks>,
) -> ChunkPass {
    let (features, char_traces) =
        featurize_chunk_traced(chunk, &params.word, &params.pos, &params.chars);
    let real = chunk.real_len();
    let inputs: Vec<Vec<f64>> = (0..real)
        .map(|t| {
            let row = features.rows.row(t);
            match masks {
                Some(m) => row.iter().zip(&m.input[t]).map(|(x, k)| x * k).collect(),
                None => row.to_vec(),
            }
        })
        .collect();
    let fwd = run_direction(
        &inputs,
        &params.forward,
        false,
        masks.map(|m| m.recurrent_fwd.as_slice()),
    );
    let bwd = run_direction(
        &inputs,
        &params.backward,
        true,
        masks.map(|m| m.recurrent_bwd.as_slice()),
    );
    let hidden: Vec<Vec<f64>> = (0..real)
        .map(|t| {
            let mut h = fwd[t].h.clone();
            h.extend_from_slice(&bwd[real - 1 - t].h);
            h
        })
        .collect();
    let probs = hidden.iter().map(|h| dense_softmax(h, &params.dense)).collect();
    ChunkPass {
        features,
        char_traces,
        inputs,
        fwd,
        bwd,
        hidden,
        probs,
    }
}

/// Summed cross-entropy of the chunk's gold labels.
pub fn chunk_loss(pass: &ChunkPass, chunk: &PaddedChunk) -> f64 {
    masked_cross_entropy(&pass.probs, &chunk.labels, &chunk.mask)
}

/// Reverse-mode gradients of [`chunk_loss`], accumulated into `grads`.
/// Frozen tensors and PAD rows receive nothing.
pub fn backward_chunk(
    params: &ModelParameters,
    chunk: &PaddedChunk,
    pass: &ChunkPass,
    masks: Option<&DropoutMasks>,
    grads: &mut ModelParameters,
) {
    let real = pass.real_len();
    let hidden = params.forward.hidden();

    // softmax + cross-entropy: dlogits = p - onehot(y)
    let mut dh_fwd = vec![vec![0.0; hidden]; real];
    let mut dh_bwd = vec![vec![0.0; hidden]; real];
    for t in 0..real {
        let mut dl = pass.probs[t];
        dl[chunk.labels[t].index()] -= 1.0;
        grads.dense.weights.add_outer(&dl, &pass.hidden[t]);
        for (k, d) in dl.iter().enumerate() {
            grads.dense.bias.data_mut()[k] += d;
        }
        let mut dh = vec![0.0; 2 * hidden];
        params.dense.weights.matvec_t_acc(&dl, &mut dh);
        dh_fwd[t].copy_from_slice(&dh[..hidden]);
        dh_bwd[t].copy_from_slice(&dh[hidden..]);
    }

    let mut dx = vec![vec![0.0; params.forward.input()]; real];
    let mut carry = vec![0.0; hidden];
    for t in (0..real).rev() {
        let dh: Vec<f64> = dh_fwd[t].iter().zip(&carry).map(|(a, b)| a + b).collect();
        let (dxt, dprev) = gru_step_backward(
            &pass.fwd[t],
            &dh,
            masks.map(|m| m.recurrent_fwd.as_slice()),
            &params.forward,
            &mut grads.forward,
        );
        dx[t].iter_mut().zip(dxt).for_each(|(a, b)| *a += b);
        carry = dprev;
    }
    let mut carry = vec![0.0; hidden];
    for k in (0..real).rev() {
        let t = real - 1 - k;
        let dh: Vec<f64> = dh_bwd[t].iter().zip(&carry).map(|(a, b)| a + b).collect();
        let (dxt, dprev) = gru_step_backward(
            &pass.bwd[k],
            &dh,
            masks.map(|m| m.recurrent_bwd.as_slice()),
            &params.backward,
            &mut grads.backward,
        );
        dx[t].iter_mut().zip(dxt).for_each(|(a, b)| *a += b);
        carry = dprev;
    }
    debug_assert_eq!(pass.inputs.len(), real);

    let dw = params.word.dim();
    let dp = params.pos.dim();
    for t in 0..real {
        let mut dv = std::mem::take(&mut dx[t]);
        if let Some(m) = masks {
            dv.iter_mut().zip(&m.input[t]).for_each(|(g, k)| *g *= k);
        }
        let w = chunk.words[t];
        if params.word.trainable && w != PAD {
            grads
                .word
                .matrix
                .row_mut(w)
                .iter_mut()
                .zip(&dv[..dw])
                .for_each(|(g, d)| *g += d);
        }
        let p = chunk.pos[t];
        if p != PAD {
            grads
                .pos
                .matrix
                .row_mut(p)
                .iter_mut()
                .zip(&dv[dw..dw + dp])
                .for_each(|(g, d)| *g += d);
        }
        char_cnn_backward(&pass.char_traces[t], &dv[dw + dp..], &params.chars, &mut grads.chars);
    }
    grads.chars.table.row_mut(PAD).fill(0.0);
}

/// Forward and backward on one chunk: `(loss, gradients)`.
pub fn backward(
    params: &ModelParameters,
    chunk: &PaddedChunk,
    masks: Option<&DropoutMasks>,
) -> (f64, ModelParameters) {
    let pass = forward_chunk(params, chunk, masks);
    let loss = chunk_loss(&pass, chunk);
    let mut grads = params.zeros_like();
    backward_chunk(params, chunk, &pass, masks, &mut grads);
    (loss, grads)
}
