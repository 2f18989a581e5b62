//! Feed-forward classifier head: two ReLU dense layers with inverted
//! dropout, then a softmax output layer.

use rand::Rng;

use super::tensor::{axpy, Tensor};

#[derive(Clone, Debug, PartialEq)]
pub struct Dense {
    pub w: Tensor,
    pub b: Tensor,
}

impl Dense {
    pub fn init<R: Rng>(input: usize, output: usize, rng: &mut R) -> Self {
        Dense {
            w: Tensor::glorot(output, input, input, output, rng),
            b: Tensor::zeros(output, 1),
        }
    }

    pub fn zeros(input: usize, output: usize) -> Self {
        Dense {
            w: Tensor::zeros(output, input),
            b: Tensor::zeros(output, 1),
        }
    }

    pub fn zeros_like(&self) -> Self {
        Dense::zeros(self.w.cols, self.w.rows)
    }

    pub fn input_dim(&self) -> usize {
        self.w.cols
    }

    pub fn output_dim(&self) -> usize {
        self.w.rows
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct HeadParams {
    /// Reads `[arg1 encoding; arg2 encoding; surface features]`.
    pub dense1: Dense,
    pub dense2: Dense,
    pub out: Dense,
    /// Applied after dense1's activation.
    pub dropout1: f64,
    /// Applied after dense2's activation.
    pub dropout2: f64,
}

impl HeadParams {
    pub fn init<R: Rng>(
        input_dim: usize,
        dense1: usize,
        dense2: usize,
        labels: usize,
        dropout1: f64,
        dropout2: f64,
        rng: &mut R,
    ) -> Self {
        HeadParams {
            dense1: Dense::init(input_dim, dense1, rng),
            dense2: Dense::init(dense1, dense2, rng),
            out: Dense::init(dense2, labels, rng),
            dropout1,
            dropout2,
        }
    }

    pub fn zeros(input_dim: usize, dense1: usize, dense2: usize, labels: usize) -> Self {
        HeadParams {
            dense1: Dense::zeros(input_dim, dense1),
            dense2: Dense::zeros(dense1, dense2),
            out: Dense::zeros(dense2, labels),
            dropout1: 0.0,
            dropout2: 0.0,
        }
    }

    pub fn zeros_like(&self) -> Self {
        HeadParams {
            dense1: self.dense1.zeros_like(),
            dense2: self.dense2.zeros_like(),
            out: self.out.zeros_like(),
            dropout1: self.dropout1,
            dropout2: self.dropout2,
        }
    }

    pub fn num_labels(&self) -> usize {
        self.out.output_dim()
    }
}

/// Head input: a dense prefix (the argument encodings) followed by a sparse
/// surface-feature block given as (column, value) pairs relative to the end
/// of the dense prefix.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct HeadInput {
    pub dense: Vec<f64>,
    pub sparse: Vec<(usize, f64)>,
}

impl HeadInput {
    /// Build from the two encodings and a dense surface vector.
    pub fn from_parts(arg1: &[f64], arg2: &[f64], surface: &[f64]) -> Self {
        let mut dense = arg1.to_vec();
        dense.extend_from_slice(arg2);
        let sparse = surface
            .iter()
            .enumerate()
            .filter(|(_, &v)| v != 0.0)
            .map(|(i, &v)| (i, v))
            .collect();
        HeadInput { dense, sparse }
    }
}

pub enum Mode<'a, R: Rng> {
    Train(&'a mut R),
    Eval,
}

#[derive(Clone, Debug)]
pub struct HeadCache {
    a1: Vec<f64>,
    mask1: Vec<f64>,
    d1: Vec<f64>,
    a2: Vec<f64>,
    mask2: Vec<f64>,
    d2: Vec<f64>,
    pub logits: Vec<f64>,
    pub probs: Vec<f64>,
}

/// Numerically stable softmax.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&z| (z - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

/// −log softmax(logits)[gold] via log-sum-exp.
pub fn cross_entropy(logits: &[f64], gold: usize) -> f64 {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + logits.iter().map(|&z| (z - max).exp()).sum::<f64>().ln();
    lse - logits[gold]
}

fn dropout_mask<R: Rng>(n: usize, p: f64, mode: &mut Mode<'_, R>) -> Vec<f64> {
    match mode {
        Mode::Train(rng) if p > 0.0 => {
            let keep = 1.0 / (1.0 - p);
            (0..n).map(|_| if rng.gen::<f64>() < p { 0.0 } else { keep }).collect()
        }
        _ => vec![1.0; n],
    }
}

fn dense_relu(layer: &Dense, x: &[f64]) -> Vec<f64> {
    let mut a = layer.b.data.clone();
    layer.w.matvec_add(x, &mut a);
    a
}

pub fn head_forward<R: Rng>(head: &HeadParams, input: &HeadInput, mut mode: Mode<'_, R>) -> HeadCache {
    let d = &head.dense1;
    let enc_dim = input.dense.len();
    let mut a1 = d.b.data.clone();
    d.w.matvec_cols_add(0, &input.dense, &mut a1);
    for &(c, v) in &input.sparse {
        let col = enc_dim + c;
        for (r, a) in a1.iter_mut().enumerate() {
            *a += d.w.data[r * d.w.cols + col] * v;
        }
    }
    let mask1 = dropout_mask(a1.len(), head.dropout1, &mut mode);
    let d1: Vec<f64> = a1.iter().zip(&mask1).map(|(&a, &m)| a.max(0.0) * m).collect();
    let a2 = dense_relu(&head.dense2, &d1);
    let mask2 = dropout_mask(a2.len(), head.dropout2, &mut mode);
    let d2: Vec<f64> = a2.iter().zip(&mask2).map(|(&a, &m)| a.max(0.0) * m).collect();
    let logits = dense_relu(&head.out, &d2);
    let probs = softmax(&logits);
    HeadCache {
        a1,
        mask1,
        d1,
        a2,
        mask2,
        d2,
        logits,
        probs,
    }
}

/// Backpropagate `scale · (−log p[gold])` through the head. Returns the
/// gradient with respect to the dense input prefix.
pub fn head_backward(
    head: &HeadParams,
    input: &HeadInput,
    cache: &HeadCache,
    gold: usize,
    scale: f64,
    grads: &mut HeadParams,
) -> Vec<f64> {
    let mut dlogits: Vec<f64> = cache.probs.iter().map(|p| p * scale).collect();
    dlogits[gold] -= scale;
    grads.out.w.add_outer(&dlogits, &cache.d2);
    grads.out.b.add_assign(&dlogits);

    let mut dd2 = vec![0.0; cache.d2.len()];
    head.out.w.matvec_t_add(&dlogits, &mut dd2);
    let da2: Vec<f64> = dd2
        .iter()
        .zip(&cache.mask2)
        .zip(&cache.a2)
        .map(|((g, m), &a)| if a > 0.0 { g * m } else { 0.0 })
        .collect();
    grads.dense2.w.add_outer(&da2, &cache.d1);
    grads.dense2.b.add_assign(&da2);

    let mut dd1 = vec![0.0; cache.d1.len()];
    head.dense2.w.matvec_t_add(&da2, &mut dd1);
    let da1: Vec<f64> = dd1
        .iter()
        .zip(&cache.mask1)
        .zip(&cache.a1)
        .map(|((g, m), &a)| if a > 0.0 { g * m } else { 0.0 })
        .collect();

    let enc_dim = input.dense.len();
    let w1 = &head.dense1.w;
    let cols = w1.cols;
    let gw1 = &mut grads.dense1.w.data;
    let mut d_input = vec![0.0; enc_dim];
    for (r, &g) in da1.iter().enumerate() {
        if g == 0.0 {
            continue;
        }
        let row = r * cols;
        axpy(g, &input.dense, &mut gw1[row..row + enc_dim]);
        for &(c, v) in &input.sparse {
            gw1[row + enc_dim + c] += g * v;
        }
        axpy(g, &w1.data[row..row + enc_dim], &mut d_input);
    }
    grads.dense1.b.add_assign(&da1);
    d_input
}
