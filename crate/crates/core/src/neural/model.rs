//! The full classifier: two argument encoders feeding the dense head.

use std::io::{Read, Write};

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::encoder::{encode, encode_backward, EncoderParams};
use super::head::{cross_entropy, head_backward, head_forward, HeadInput, HeadParams, Mode};
use super::tensor::Tensor;
use crate::corpus::Branch;
use crate::embeddings::EmbeddingTable;
use crate::error::{Error, Result};
use crate::features::{FeatureFamily, FeatureVocab};

/// Marks a token absent from the embedding table.
pub const OOV: u32 = u32::MAX;

/// One training or prediction instance with precomputed inputs.
#[derive(Clone, Debug, PartialEq)]
pub struct Example {
    /// Embedding-table rows of the (truncated) arg1 tokens; [`OOV`] for
    /// unknown words.
    pub arg1: Vec<u32>,
    pub arg2: Vec<u32>,
    /// Active surface-feature columns (all binary).
    pub surface: Vec<usize>,
    pub gold: usize,
}

fn embed(ids: &[u32], table: &EmbeddingTable) -> Vec<Vec<f64>> {
    ids.iter()
        .map(|&i| {
            let v = if i == OOV {
                table.oov_vector()
            } else {
                table.vector(i as usize)
            };
            v.iter().map(|&x| x as f64).collect()
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct Architecture {
    pub embedding_dim: usize,
    pub arg1_hidden: Vec<usize>,
    pub arg2_hidden: Vec<usize>,
    pub surface_dim: usize,
    pub dense1: usize,
    pub dense2: usize,
    pub labels: usize,
    pub dropout1: f64,
    pub dropout2: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Network {
    pub arg1: EncoderParams,
    pub arg2: EncoderParams,
    pub head: HeadParams,
}

impl Network {
    pub fn init<R: Rng>(arch: &Architecture, rng: &mut R) -> Self {
        let arg1 = EncoderParams::init(arch.embedding_dim, &arch.arg1_hidden, rng);
        let arg2 = EncoderParams::init(arch.embedding_dim, &arch.arg2_hidden, rng);
        let input = arg1.output_dim() + arg2.output_dim() + arch.surface_dim;
        let head = HeadParams::init(
            input,
            arch.dense1,
            arch.dense2,
            arch.labels,
            arch.dropout1,
            arch.dropout2,
            rng,
        );
        Network { arg1, arg2, head }
    }

    pub fn zeros(arch: &Architecture) -> Self {
        let arg1 = EncoderParams::zeros(arch.embedding_dim, &arch.arg1_hidden);
        let arg2 = EncoderParams::zeros(arch.embedding_dim, &arch.arg2_hidden);
        let input = arg1.output_dim() + arg2.output_dim() + arch.surface_dim;
        let mut head = HeadParams::zeros(input, arch.dense1, arch.dense2, arch.labels);
        head.dropout1 = arch.dropout1;
        head.dropout2 = arch.dropout2;
        Network { arg1, arg2, head }
    }

    pub fn zeros_like(&self) -> Self {
        Network {
            arg1: self.arg1.zeros_like(),
            arg2: self.arg2.zeros_like(),
            head: self.head.zeros_like(),
        }
    }

    pub fn architecture(&self) -> Architecture {
        Architecture {
            embedding_dim: self.arg1.input_dim(),
            arg1_hidden: self.arg1.hidden_sizes(),
            arg2_hidden: self.arg2.hidden_sizes(),
            surface_dim: self.surface_dim(),
            dense1: self.head.dense1.output_dim(),
            dense2: self.head.dense2.output_dim(),
            labels: self.head.num_labels(),
            dropout1: self.head.dropout1,
            dropout2: self.head.dropout2,
        }
    }

    pub fn surface_dim(&self) -> usize {
        self.head.dense1.input_dim() - self.arg1.output_dim() - self.arg2.output_dim()
    }

    /// Every trainable tensor with a stable name, in serialization order.
    pub fn named_tensors(&self) -> Vec<(String, &Tensor)> {
        let mut out = Vec::new();
        for (arg, enc) in [("arg1", &self.arg1), ("arg2", &self.arg2)] {
            for (l, layer) in enc.layers.iter().enumerate() {
                for (dir, p) in [("fwd", &layer.forward), ("bwd", &layer.backward)] {
                    out.push((format!("{arg}.l{l}.{dir}.W"), &p.w));
                    out.push((format!("{arg}.l{l}.{dir}.U"), &p.u));
                    out.push((format!("{arg}.l{l}.{dir}.b"), &p.b));
                }
            }
        }
        for (name, d) in [
            ("dense1", &self.head.dense1),
            ("dense2", &self.head.dense2),
            ("out", &self.head.out),
        ] {
            out.push((format!("{name}.W"), &d.w));
            out.push((format!("{name}.b"), &d.b));
        }
        out
    }

    /// Same order as [`Network::named_tensors`].
    pub fn tensors_mut(&mut self) -> Vec<&mut Tensor> {
        let mut out = Vec::new();
        for enc in [&mut self.arg1, &mut self.arg2] {
            for layer in enc.layers.iter_mut() {
                for p in [&mut layer.forward, &mut layer.backward] {
                    out.push(&mut p.w);
                    out.push(&mut p.u);
                    out.push(&mut p.b);
                }
            }
        }
        let h = &mut self.head;
        for d in [&mut h.dense1, &mut h.dense2, &mut h.out] {
            out.push(&mut d.w);
            out.push(&mut d.b);
        }
        out
    }

    pub fn num_params(&self) -> usize {
        self.named_tensors().iter().map(|(_, t)| t.len()).sum()
    }

    fn head_input(
        &self,
        ex: &Example,
        table: &EmbeddingTable,
    ) -> Result<(HeadInput, [super::encoder::EncoderCache; 2])> {
        let (e1, c1) = encode(&self.arg1, &embed(&ex.arg1, table))?;
        let (e2, c2) = encode(&self.arg2, &embed(&ex.arg2, table))?;
        let mut dense = e1;
        dense.extend_from_slice(&e2);
        let sparse = ex.surface.iter().map(|&c| (c, 1.0)).collect();
        Ok((HeadInput { dense, sparse }, [c1, c2]))
    }

    /// Eval-mode label distribution.
    pub fn predict_proba(&self, ex: &Example, table: &EmbeddingTable) -> Result<Vec<f64>> {
        let (input, _) = self.head_input(ex, table)?;
        Ok(head_forward::<rand_chacha::ChaCha8Rng>(&self.head, &input, Mode::Eval).probs)
    }

    /// Eval-mode argmax label (lowest index on ties).
    pub fn predict(&self, ex: &Example, table: &EmbeddingTable) -> Result<usize> {
        let p = self.predict_proba(ex, table)?;
        let mut best = 0;
        for (i, &v) in p.iter().enumerate() {
            if v > p[best] {
                best = i;
            }
        }
        Ok(best)
    }

    /// Eval-mode mean cross-entropy.
    pub fn mean_loss(&self, examples: &[Example], table: &EmbeddingTable) -> Result<f64> {
        if examples.is_empty() {
            return Ok(0.0);
        }
        let mut total = 0.0;
        for ex in examples {
            let (input, _) = self.head_input(ex, table)?;
            let cache = head_forward::<rand_chacha::ChaCha8Rng>(&self.head, &input, Mode::Eval);
            total += cross_entropy(&cache.logits, ex.gold);
        }
        Ok(total / examples.len() as f64)
    }
}

/// Mean cross-entropy over the batch and its exact gradient for every
/// parameter. Dropout masks are drawn from `rng` once per example and shared
/// by the forward and backward pass. Embeddings are frozen.
pub fn loss_and_gradients<R: Rng>(
    net: &Network,
    batch: &[Example],
    table: &EmbeddingTable,
    rng: &mut R,
) -> Result<(f64, Network)> {
    let mut grads = net.zeros_like();
    if batch.is_empty() {
        return Ok((0.0, grads));
    }
    let scale = 1.0 / batch.len() as f64;
    let mut total = 0.0;
    let enc1 = net.arg1.output_dim();
    for ex in batch {
        if ex.gold >= net.head.num_labels() {
            return Err(Error::Dimension(format!("gold label {} out of range", ex.gold)));
        }
        let (input, [c1, c2]) = net.head_input(ex, table)?;
        let cache = head_forward(&net.head, &input, Mode::Train(rng));
        total += cross_entropy(&cache.logits, ex.gold);
        let d_input = head_backward(&net.head, &input, &cache, ex.gold, scale, &mut grads.head);
        encode_backward(&net.arg1, &c1, &d_input[..enc1], &mut grads.arg1);
        encode_backward(&net.arg2, &c2, &d_input[enc1..], &mut grads.arg2);
    }
    Ok((total * scale, grads))
}

/// `w ← w − lr·g` for every tensor. Fails with [`Error::Diverged`] before
/// touching any parameter if a gradient is non-finite.
pub fn sgd_step(net: &mut Network, grads: &Network, lr: f64) -> Result<()> {
    if !(lr > 0.0) || !lr.is_finite() {
        return Err(Error::Config(format!("learning rate must be positive, got {lr}")));
    }
    let named = grads.named_tensors();
    if named.iter().any(|(_, g)| !g.is_finite()) {
        return Err(Error::Diverged);
    }
    for (w, (_, g)) in net.tensors_mut().into_iter().zip(named) {
        for (wi, gi) in w.data.iter_mut().zip(&g.data) {
            *wi -= lr * gi;
        }
    }
    Ok(())
}

const MAGIC: &[u8; 16] = b"discsense-model\n";
const FORMAT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct Header {
    branch: String,
    labels: Vec<String>,
    features: Vec<String>,
    min_count: usize,
    families: Vec<String>,
    max_len: usize,
    embedding_dim: usize,
    arg1_hidden: Vec<usize>,
    arg2_hidden: Vec<usize>,
    dense1: usize,
    dense2: usize,
    dropout1: f64,
    dropout2: f64,
}

/// A trained classifier for one branch with everything needed to map
/// relations to its inputs and outputs.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelParams {
    pub branch: Branch,
    pub network: Network,
    pub label_set: Vec<String>,
    pub feature_vocab: FeatureVocab,
    pub families: Vec<FeatureFamily>,
    pub max_len: usize,
}

impl ModelParams {
    /// Binary layout: magic line, u32 version, u64 length + JSON header,
    /// u32 tensor count, then per tensor a length-prefixed name, u64 rows,
    /// u64 cols and row-major little-endian f64 values.
    pub fn save<W: Write>(&self, mut w: W) -> Result<()> {
        let arch = self.network.architecture();
        let header = Header {
            branch: self.branch.as_str().to_string(),
            labels: self.label_set.clone(),
            features: self.feature_vocab.names().to_vec(),
            min_count: self.feature_vocab.min_count(),
            families: self.families.iter().map(|f| f.name().to_string()).collect(),
            max_len: self.max_len,
            embedding_dim: arch.embedding_dim,
            arg1_hidden: arch.arg1_hidden,
            arg2_hidden: arch.arg2_hidden,
            dense1: arch.dense1,
            dense2: arch.dense2,
            dropout1: arch.dropout1,
            dropout2: arch.dropout2,
        };
        let json = serde_json::to_vec(&header)?;
        w.write_all(MAGIC)?;
        w.write_u32::<LittleEndian>(FORMAT_VERSION)?;
        w.write_u64::<LittleEndian>(json.len() as u64)?;
        w.write_all(&json)?;
        let tensors = self.network.named_tensors();
        w.write_u32::<LittleEndian>(tensors.len() as u32)?;
        for (name, t) in tensors {
            w.write_u32::<LittleEndian>(name.len() as u32)?;
            w.write_all(name.as_bytes())?;
            w.write_u64::<LittleEndian>(t.rows as u64)?;
            w.write_u64::<LittleEndian>(t.cols as u64)?;
            for &x in &t.data {
                w.write_f64::<LittleEndian>(x)?;
            }
        }
        w.flush()?;
        Ok(())
    }

    pub fn load<R: Read>(mut r: R) -> Result<Self> {
        let bad = |m: &str| Error::ModelFormat(m.to_string());
        let mut magic = [0u8; 16];
        r.read_exact(&mut magic).map_err(|_| bad("missing magic"))?;
        if &magic != MAGIC {
            return Err(bad("not a model file"));
        }
        let version = r.read_u32::<LittleEndian>()?;
        if version != FORMAT_VERSION {
            return Err(Error::ModelFormat(format!("unsupported version {version}")));
        }
        let len = r.read_u64::<LittleEndian>()? as usize;
        let mut json = vec![0u8; len];
        r.read_exact(&mut json)?;
        let h: Header = serde_json::from_slice(&json)?;
        let branch = Branch::parse(&h.branch).ok_or_else(|| bad("unknown branch"))?;
        if h.labels.is_empty() {
            return Err(bad("empty label set"));
        }
        let families = h
            .families
            .iter()
            .map(|s| s.parse::<FeatureFamily>())
            .collect::<Result<Vec<_>>>()?;
        let feature_vocab = FeatureVocab::from_names(h.features, h.min_count)?;
        let arch = Architecture {
            embedding_dim: h.embedding_dim,
            arg1_hidden: h.arg1_hidden,
            arg2_hidden: h.arg2_hidden,
            surface_dim: feature_vocab.dim(),
            dense1: h.dense1,
            dense2: h.dense2,
            labels: h.labels.len(),
            dropout1: h.dropout1,
            dropout2: h.dropout2,
        };
        let mut network = Network::zeros(&arch);
        let names: Vec<(String, usize, usize)> = network
            .named_tensors()
            .into_iter()
            .map(|(n, t)| (n, t.rows, t.cols))
            .collect();
        let count = r.read_u32::<LittleEndian>()? as usize;
        if count != names.len() {
            return Err(Error::ModelFormat(format!(
                "expected {} tensors, found {count}",
                names.len()
            )));
        }
        for (t, (name, rows, cols)) in network.tensors_mut().into_iter().zip(names) {
            let n = r.read_u32::<LittleEndian>()? as usize;
            let mut buf = vec![0u8; n];
            r.read_exact(&mut buf)?;
            if buf != name.as_bytes() {
                return Err(Error::ModelFormat(format!("expected tensor {name}")));
            }
            let (fr, fc) = (
                r.read_u64::<LittleEndian>()? as usize,
                r.read_u64::<LittleEndian>()? as usize,
            );
            if (fr, fc) != (rows, cols) {
                return Err(Error::ModelFormat(format!(
                    "tensor {name}: shape {fr}x{fc}, expected {rows}x{cols}"
                )));
            }
            r.read_f64_into::<LittleEndian>(&mut t.data)?;
        }
        Ok(ModelParams {
            branch,
            network,
            label_set: h.labels,
            feature_vocab,
            families,
            max_len: h.max_len,
        })
    }
}
