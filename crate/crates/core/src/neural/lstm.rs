//! LSTM cell with a forget gate, forward and reverse-mode.
//!
//! Gate blocks are stacked in the order input, forget, output, candidate:
//! `w` is `4H × input_dim`, `u` is `4H × H` and `b` is `4H × 1`.

use rand::Rng;

use super::tensor::{sigmoid, Tensor};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Gate {
    Input = 0,
    Forget = 1,
    Output = 2,
    Candidate = 3,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LstmParams {
    pub input_dim: usize,
    pub hidden_dim: usize,
    pub w: Tensor,
    pub u: Tensor,
    pub b: Tensor,
}

impl LstmParams {
    pub fn zeros(input_dim: usize, hidden_dim: usize) -> Self {
        LstmParams {
            input_dim,
            hidden_dim,
            w: Tensor::zeros(4 * hidden_dim, input_dim),
            u: Tensor::zeros(4 * hidden_dim, hidden_dim),
            b: Tensor::zeros(4 * hidden_dim, 1),
        }
    }

    /// Glorot-uniform weights per gate block, forget bias 1, other biases 0.
    pub fn init<R: Rng>(input_dim: usize, hidden_dim: usize, rng: &mut R) -> Self {
        let h = hidden_dim;
        let mut p = LstmParams {
            input_dim,
            hidden_dim,
            w: Tensor::glorot(4 * h, input_dim, input_dim, h, rng),
            u: Tensor::glorot(4 * h, h, h, h, rng),
            b: Tensor::zeros(4 * h, 1),
        };
        p.gate_bias_mut(Gate::Forget).fill(1.0);
        p
    }

    pub fn gate_bias_mut(&mut self, gate: Gate) -> &mut [f64] {
        let h = self.hidden_dim;
        let g = gate as usize;
        &mut self.b.data[g * h..(g + 1) * h]
    }

    pub fn zeros_like(&self) -> Self {
        LstmParams::zeros(self.input_dim, self.hidden_dim)
    }

    fn check(&self, x: &[f64], h_prev: &[f64], c_prev: &[f64]) -> Result<()> {
        if x.len() != self.input_dim || h_prev.len() != self.hidden_dim || c_prev.len() != self.hidden_dim {
            return Err(Error::Dimension(format!(
                "lstm step expects x[{}], h[{}], c[{}]; got x[{}], h[{}], c[{}]",
                self.input_dim,
                self.hidden_dim,
                self.hidden_dim,
                x.len(),
                h_prev.len(),
                c_prev.len()
            )));
        }
        Ok(())
    }
}

/// Everything the backward pass needs from one step.
#[derive(Clone, Debug)]
pub struct StepCache {
    pub x: Vec<f64>,
    pub h_prev: Vec<f64>,
    pub c_prev: Vec<f64>,
    /// Activated gates, stacked i, f, o, c̃.
    pub gates: Vec<f64>,
    pub c: Vec<f64>,
    pub tanh_c: Vec<f64>,
    pub h: Vec<f64>,
}

fn step_cached(p: &LstmParams, x: &[f64], h_prev: &[f64], c_prev: &[f64]) -> StepCache {
    let h = p.hidden_dim;
    let mut gates = p.b.data.clone();
    p.w.matvec_add(x, &mut gates);
    p.u.matvec_add(h_prev, &mut gates);
    for v in &mut gates[..3 * h] {
        *v = sigmoid(*v);
    }
    for v in &mut gates[3 * h..] {
        *v = v.tanh();
    }
    let mut c = vec![0.0; h];
    let mut tanh_c = vec![0.0; h];
    let mut hv = vec![0.0; h];
    for j in 0..h {
        let (i, f, o, g) = (gates[j], gates[h + j], gates[2 * h + j], gates[3 * h + j]);
        c[j] = f * c_prev[j] + i * g;
        tanh_c[j] = c[j].tanh();
        hv[j] = o * tanh_c[j];
    }
    StepCache {
        x: x.to_vec(),
        h_prev: h_prev.to_vec(),
        c_prev: c_prev.to_vec(),
        gates,
        c,
        tanh_c,
        h: hv,
    }
}

/// One LSTM step: returns `(h, c)`.
pub fn lstm_step(x: &[f64], h_prev: &[f64], c_prev: &[f64], p: &LstmParams) -> Result<(Vec<f64>, Vec<f64>)> {
    p.check(x, h_prev, c_prev)?;
    let cache = step_cached(p, x, h_prev, c_prev);
    Ok((cache.h, cache.c))
}

/// Run over a sequence from zero initial state.
pub fn run_sequence(p: &LstmParams, xs: &[Vec<f64>]) -> Result<Vec<StepCache>> {
    let mut h = vec![0.0; p.hidden_dim];
    let mut c = vec![0.0; p.hidden_dim];
    let mut caches = Vec::with_capacity(xs.len());
    for x in xs {
        p.check(x, &h, &c)?;
        let cache = step_cached(p, x, &h, &c);
        h.clone_from(&cache.h);
        c.clone_from(&cache.c);
        caches.push(cache);
    }
    Ok(caches)
}

/// Backpropagate through a sequence run. `dh[t]` is the loss gradient with
/// respect to the hidden output at step `t` from outside the recurrence.
/// Parameter gradients are accumulated into `grads`; returns dL/dx per step.
pub fn backward_sequence(
    p: &LstmParams,
    caches: &[StepCache],
    dh: &[Vec<f64>],
    grads: &mut LstmParams,
) -> Vec<Vec<f64>> {
    let h = p.hidden_dim;
    let mut dxs = vec![Vec::new(); caches.len()];
    let mut dh_next = vec![0.0; h];
    let mut dc_next = vec![0.0; h];
    let mut da = vec![0.0; 4 * h];
    for t in (0..caches.len()).rev() {
        let cache = &caches[t];
        let g = &cache.gates;
        let mut dc_prev = vec![0.0; h];
        for j in 0..h {
            let dh_j = dh[t][j] + dh_next[j];
            let (i, f, o, cand) = (g[j], g[h + j], g[2 * h + j], g[3 * h + j]);
            let tc = cache.tanh_c[j];
            let d_o = dh_j * tc;
            let dc = dc_next[j] + dh_j * o * (1.0 - tc * tc);
            let d_i = dc * cand;
            let d_cand = dc * i;
            let d_f = dc * cache.c_prev[j];
            dc_prev[j] = dc * f;
            da[j] = d_i * i * (1.0 - i);
            da[h + j] = d_f * f * (1.0 - f);
            da[2 * h + j] = d_o * o * (1.0 - o);
            da[3 * h + j] = d_cand * (1.0 - cand * cand);
        }
        grads.w.add_outer(&da, &cache.x);
        grads.u.add_outer(&da, &cache.h_prev);
        grads.b.add_assign(&da);
        let mut dx = vec![0.0; p.input_dim];
        p.w.matvec_t_add(&da, &mut dx);
        dxs[t] = dx;
        dh_next.iter_mut().for_each(|v| *v = 0.0);
        p.u.matvec_t_add(&da, &mut dh_next);
        dc_next = dc_prev;
    }
    dxs
}
