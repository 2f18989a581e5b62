//! Stacked bidirectional LSTM argument encoder.

use rand::Rng;

use super::lstm::{backward_sequence, run_sequence, LstmParams, StepCache};
use crate::corpus::Token;
use crate::embeddings::EmbeddingTable;
use crate::error::{Error, Result};

/// Sequences longer than this are truncated before encoding.
pub const MAX_SEQUENCE_LEN: usize = 80;

#[derive(Clone, Debug, PartialEq)]
pub struct BiLayer {
    pub forward: LstmParams,
    pub backward: LstmParams,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EncoderParams {
    pub layers: Vec<BiLayer>,
}

/// Which end of an argument survives truncation.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum KeepEnd {
    Head,
    Tail,
}

pub fn truncate<T>(seq: &[T], max_len: usize, keep: KeepEnd) -> &[T] {
    if seq.len() <= max_len {
        return seq;
    }
    match keep {
        KeepEnd::Head => &seq[..max_len],
        KeepEnd::Tail => &seq[seq.len() - max_len..],
    }
}

impl EncoderParams {
    /// Layer `l` reads `input_dim` for `l = 0`, else `2 × hidden[l − 1]`.
    pub fn init<R: Rng>(input_dim: usize, hidden: &[usize], rng: &mut R) -> Self {
        let mut layers = Vec::with_capacity(hidden.len());
        let mut dim = input_dim;
        for &h in hidden {
            let forward = LstmParams::init(dim, h, rng);
            let backward = LstmParams::init(dim, h, rng);
            layers.push(BiLayer { forward, backward });
            dim = 2 * h;
        }
        EncoderParams { layers }
    }

    pub fn zeros(input_dim: usize, hidden: &[usize]) -> Self {
        let mut layers = Vec::with_capacity(hidden.len());
        let mut dim = input_dim;
        for &h in hidden {
            layers.push(BiLayer {
                forward: LstmParams::zeros(dim, h),
                backward: LstmParams::zeros(dim, h),
            });
            dim = 2 * h;
        }
        EncoderParams { layers }
    }

    pub fn zeros_like(&self) -> Self {
        EncoderParams {
            layers: self
                .layers
                .iter()
                .map(|l| BiLayer {
                    forward: l.forward.zeros_like(),
                    backward: l.backward.zeros_like(),
                })
                .collect(),
        }
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].forward.input_dim
    }

    pub fn hidden_sizes(&self) -> Vec<usize> {
        self.layers.iter().map(|l| l.forward.hidden_dim).collect()
    }

    /// Length of the encoding: twice the top layer's hidden size.
    pub fn output_dim(&self) -> usize {
        2 * self.layers.last().map_or(0, |l| l.forward.hidden_dim)
    }

    pub fn validate(&self) -> Result<()> {
        if self.layers.is_empty() {
            return Err(Error::Dimension("encoder has no layers".into()));
        }
        let mut dim = self.input_dim();
        for (i, l) in self.layers.iter().enumerate() {
            let h = l.forward.hidden_dim;
            if l.forward.input_dim != dim || l.backward.input_dim != dim || l.backward.hidden_dim != h {
                return Err(Error::Dimension(format!("encoder layer {i} does not chain")));
            }
            dim = 2 * h;
        }
        Ok(())
    }
}

/// Forward state needed for backpropagation.
#[derive(Clone, Debug)]
pub struct EncoderCache {
    /// Per layer: forward-direction steps, and backward-direction steps in
    /// processing (reversed) order.
    layers: Vec<(Vec<StepCache>, Vec<StepCache>)>,
}

/// Encode an embedded sequence: the top layer's final forward state followed
/// by its final backward state.
pub fn encode(enc: &EncoderParams, xs: &[Vec<f64>]) -> Result<(Vec<f64>, EncoderCache)> {
    if xs.is_empty() {
        return Err(Error::Dimension("cannot encode an empty sequence".into()));
    }
    let t_len = xs.len();
    let mut input: Vec<Vec<f64>> = xs.to_vec();
    let mut caches = Vec::with_capacity(enc.layers.len());
    for layer in &enc.layers {
        let fwd = run_sequence(&layer.forward, &input)?;
        let reversed: Vec<Vec<f64>> = input.iter().rev().cloned().collect();
        let bwd = run_sequence(&layer.backward, &reversed)?;
        input = (0..t_len)
            .map(|t| {
                let mut v = fwd[t].h.clone();
                v.extend_from_slice(&bwd[t_len - 1 - t].h);
                v
            })
            .collect();
        caches.push((fwd, bwd));
    }
    let (fwd, bwd) = caches.last().expect("at least one layer");
    let mut out = fwd[t_len - 1].h.clone();
    out.extend_from_slice(&bwd[t_len - 1].h);
    Ok((out, EncoderCache { layers: caches }))
}

/// Backpropagate `d_out` (gradient w.r.t. the encoding) into `grads`.
/// Input embeddings are frozen, so no gradient is returned for them.
pub fn encode_backward(enc: &EncoderParams, cache: &EncoderCache, d_out: &[f64], grads: &mut EncoderParams) {
    let t_len = cache.layers[0].0.len();
    let top_h = enc.layers.last().expect("layers").forward.hidden_dim;
    let mut dh_f = vec![vec![0.0; top_h]; t_len];
    let mut dh_b = vec![vec![0.0; top_h]; t_len];
    dh_f[t_len - 1].copy_from_slice(&d_out[..top_h]);
    dh_b[t_len - 1].copy_from_slice(&d_out[top_h..]);
    for l in (0..enc.layers.len()).rev() {
        let layer = &enc.layers[l];
        let (fwd, bwd) = &cache.layers[l];
        let dx_f = backward_sequence(&layer.forward, fwd, &dh_f, &mut grads.layers[l].forward);
        let dx_b = backward_sequence(&layer.backward, bwd, &dh_b, &mut grads.layers[l].backward);
        if l == 0 {
            break;
        }
        let below = enc.layers[l - 1].forward.hidden_dim;
        dh_f = vec![vec![0.0; below]; t_len];
        dh_b = vec![vec![0.0; below]; t_len];
        for t in 0..t_len {
            let s = t_len - 1 - t;
            for j in 0..2 * below {
                let d = dx_f[t][j] + dx_b[s][j];
                if j < below {
                    dh_f[t][j] = d;
                } else {
                    dh_b[s][j - below] = d;
                }
            }
        }
    }
}

/// Map tokens to embedding vectors (frozen, OOV policy of the table).
pub fn embed_tokens(tokens: &[Token], table: &EmbeddingTable) -> Vec<Vec<f64>> {
    tokens
        .iter()
        .map(|t| table.lookup(&t.surface).iter().map(|&x| x as f64).collect())
        .collect()
}

/// Embed and encode one argument, truncating to `max_len` tokens from the
/// given end.
pub fn encode_argument(
    tokens: &[Token],
    table: &EmbeddingTable,
    enc: &EncoderParams,
    max_len: usize,
    keep: KeepEnd,
) -> Result<Vec<f64>> {
    let kept = truncate(tokens, max_len, keep);
    let xs = embed_tokens(kept, table);
    Ok(encode(enc, &xs)?.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::neural::lstm::lstm_step;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_seq(rng: &mut ChaCha8Rng, len: usize, dim: usize) -> Vec<Vec<f64>> {
        (0..len)
            .map(|_| (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect())
            .collect()
    }

    #[test]
    fn single_token_uses_one_step_per_direction() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let enc = EncoderParams::init(3, &[4], &mut rng);
        let x = random_seq(&mut rng, 1, 3);
        let (out, _) = encode(&enc, &x).unwrap();
        let (hf, _) = lstm_step(&x[0], &[0.0; 4], &[0.0; 4], &enc.layers[0].forward).unwrap();
        let (hb, _) = lstm_step(&x[0], &[0.0; 4], &[0.0; 4], &enc.layers[0].backward).unwrap();
        assert_eq!(&out[..4], &hf[..]);
        assert_eq!(&out[4..], &hb[..]);
    }

    #[test]
    fn reversal_with_swapped_directions_swaps_halves() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let enc = EncoderParams::init(3, &[5], &mut rng);
        let xs = random_seq(&mut rng, 6, 3);
        let rev: Vec<Vec<f64>> = xs.iter().rev().cloned().collect();
        let swapped = EncoderParams {
            layers: vec![BiLayer {
                forward: enc.layers[0].backward.clone(),
                backward: enc.layers[0].forward.clone(),
            }],
        };
        let (a, _) = encode(&enc, &xs).unwrap();
        let (b, _) = encode(&swapped, &rev).unwrap();
        assert_eq!(&a[..5], &b[5..]);
        assert_eq!(&a[5..], &b[..5]);
    }

    #[test]
    fn reversal_symmetry_through_stacked_layers() {
        // Upper layers read [forward; backward]; swapping directions must also
        // swap the two column blocks of their input weights.
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let hidden = [3, 2, 4];
        let enc = EncoderParams::init(2, &hidden, &mut rng);
        let xs = random_seq(&mut rng, 5, 2);
        let rev: Vec<Vec<f64>> = xs.iter().rev().cloned().collect();
        let swap_cols = |p: &LstmParams, below: usize| -> LstmParams {
            let mut q = p.clone();
            for r in 0..p.w.rows {
                for j in 0..2 * below {
                    let src = if j < below { j + below } else { j - below };
                    q.w.data[r * p.w.cols + j] = p.w.data[r * p.w.cols + src];
                }
            }
            q
        };
        let mut layers = Vec::new();
        for (l, layer) in enc.layers.iter().enumerate() {
            let (f, b) = if l == 0 {
                (layer.backward.clone(), layer.forward.clone())
            } else {
                let below = hidden[l - 1];
                (swap_cols(&layer.backward, below), swap_cols(&layer.forward, below))
            };
            layers.push(BiLayer {
                forward: f,
                backward: b,
            });
        }
        let swapped = EncoderParams { layers };
        let (a, _) = encode(&enc, &xs).unwrap();
        let (b, _) = encode(&swapped, &rev).unwrap();
        // Swapped column blocks change the summation order, so allow rounding.
        let close = |x: &[f64], y: &[f64]| x.iter().zip(y).all(|(p, q)| (p - q).abs() < 1e-13);
        assert!(close(&a[..4], &b[4..]));
        assert!(close(&a[4..], &b[..4]));
    }

    #[test]
    fn zero_encoder_on_zero_input() {
        let enc = EncoderParams::zeros(4, &[3, 3, 3]);
        let xs = vec![vec![0.0; 4]; 7];
        let (out, _) = encode(&enc, &xs).unwrap();
        assert_eq!(out, vec![0.0; 6]);
    }

    #[test]
    fn truncation_keeps_requested_end() {
        let v: Vec<usize> = (0..100).collect();
        assert_eq!(truncate(&v, 80, KeepEnd::Tail)[0], 20);
        assert_eq!(truncate(&v, 80, KeepEnd::Head)[79], 79);
        assert_eq!(truncate(&v[..5], 80, KeepEnd::Head).len(), 5);
    }

    #[test]
    fn encode_argument_with_table() {
        let table = EmbeddingTable::from_entries(2, vec![("a".to_string(), vec![1.0, 0.0])]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let enc = EncoderParams::init(2, &[3, 2, 2], &mut rng);
        let toks: Vec<Token> = (0..3)
            .map(|i| Token::new(if i == 1 { "a" } else { "zz" }, "", 0, i))
            .collect();
        let out = encode_argument(&toks, &table, &enc, MAX_SEQUENCE_LEN, KeepEnd::Head).unwrap();
        assert_eq!(out.len(), 4);
        assert_eq!(
            out,
            encode_argument(&toks, &table, &enc, MAX_SEQUENCE_LEN, KeepEnd::Head).unwrap()
        );
        enc.validate().unwrap();
    }
}
