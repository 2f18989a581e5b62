use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::config::Hyperparams;
use super::encoder::MAX_SEQUENCE_LEN;
use super::model::{loss_and_gradients, sgd_step, Architecture, Example, Network};
use crate::embeddings::EmbeddingTable;
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct TrainOptions {
    pub batch_size: usize,
    pub patience: usize,
    pub max_epochs: usize,
    pub max_len: usize,
    /// Upper bound applied to every LSTM and dense size; used to keep
    /// search trials small.
    pub hidden_cap: Option<usize>,
}

impl Default for TrainOptions {
    fn default() -> Self {
        TrainOptions {
            batch_size: 32,
            patience: 5,
            max_epochs: 50,
            max_len: MAX_SEQUENCE_LEN,
            hidden_cap: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub train_loss: f64,
    pub dev_loss: f64,
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub network: Network,
    pub trace: Vec<EpochLog>,
    /// 1-based epoch whose parameters were kept.
    pub best_epoch: usize,
    pub best_dev_loss: f64,
}

/// Network shape for the given data dimensions and hyperparameters.
pub fn architecture(
    config: &Hyperparams,
    embedding_dim: usize,
    surface_dim: usize,
    labels: usize,
    hidden_cap: Option<usize>,
) -> Architecture {
    let cap = |n: usize| hidden_cap.map_or(n, |c| n.min(c.max(1)));
    Architecture {
        embedding_dim,
        arg1_hidden: config.arg1_hidden().iter().map(|&h| cap(h)).collect(),
        arg2_hidden: config.arg2_hidden().iter().map(|&h| cap(h)).collect(),
        surface_dim,
        dense1: cap(config.dense1),
        dense2: cap(config.dense2),
        labels,
        dropout1: config.dropout1,
        dropout2: config.dropout2,
    }
}

/// Mini-batch SGD with per-epoch shuffling and early stopping on dev
/// cross-entropy. When `dev` is empty the training set doubles as dev.
pub fn train(
    arch: &Architecture,
    train_set: &[Example],
    dev_set: &[Example],
    table: &EmbeddingTable,
    learning_rate: f64,
    opts: &TrainOptions,
    seed: u64,
) -> Result<TrainOutcome> {
    if train_set.is_empty() {
        return Err(Error::EmptyCorpus("no training examples".into()));
    }
    if opts.batch_size == 0 || opts.max_epochs == 0 {
        return Err(Error::Config("batch size and epoch limit must be positive".into()));
    }
    let dev = if dev_set.is_empty() { train_set } else { dev_set };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut net = Network::init(arch, &mut rng);
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let mut best = (net.clone(), f64::INFINITY, 0usize);
    let mut trace = Vec::new();
    let mut stale = 0;
    for epoch in 1..=opts.max_epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for chunk in order.chunks(opts.batch_size) {
            let batch: Vec<Example> = chunk.iter().map(|&i| train_set[i].clone()).collect();
            let (loss, grads) = loss_and_gradients(&net, &batch, table, &mut rng)?;
            if !loss.is_finite() {
                return Err(Error::Diverged);
            }
            sgd_step(&mut net, &grads, learning_rate)?;
            total += loss * batch.len() as f64;
        }
        let dev_loss = net.mean_loss(dev, table)?;
        if !dev_loss.is_finite() {
            return Err(Error::Diverged);
        }
        trace.push(EpochLog {
            epoch,
            train_loss: total / train_set.len() as f64,
            dev_loss,
        });
        if dev_loss < best.1 {
            best = (net.clone(), dev_loss, epoch);
            stale = 0;
        } else {
            stale += 1;
            if stale >= opts.patience {
                break;
            }
        }
    }
    Ok(TrainOutcome {
        network: best.0,
        trace,
        best_epoch: best.2,
        best_dev_loss: best.1,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table() -> EmbeddingTable {
        EmbeddingTable::from_entries(
            2,
            vec![
                ("x".to_string(), vec![1.0, 0.0]),
                ("y".to_string(), vec![0.0, 1.0]),
                ("z".to_string(), vec![0.3, 0.3]),
            ],
        )
        .unwrap()
    }

    fn data() -> Vec<Example> {
        (0..12)
            .map(|i| Example {
                arg1: vec![2, (i % 2) as u32],
                arg2: vec![2],
                surface: vec![],
                gold: i % 2,
            })
            .collect()
    }

    fn arch() -> Architecture {
        let h = Hyperparams {
            dropout1: 0.0,
            dropout2: 0.0,
            ..Hyperparams::default()
        };
        architecture(&h, 2, 0, 2, Some(4))
    }

    #[test]
    fn deterministic_and_learns() {
        let opts = TrainOptions {
            batch_size: 4,
            max_epochs: 30,
            ..TrainOptions::default()
        };
        let a = train(&arch(), &data(), &[], &table(), 0.3, &opts, 5).unwrap();
        let b = train(&arch(), &data(), &[], &table(), 0.3, &opts, 5).unwrap();
        assert_eq!(a.trace, b.trace);
        assert_eq!(a.network, b.network);
        assert!(a.best_dev_loss < a.trace[0].dev_loss);
        let min = a.trace.iter().map(|e| e.dev_loss).fold(f64::INFINITY, f64::min);
        assert_eq!(min, a.best_dev_loss);
    }

    #[test]
    fn huge_learning_rate_never_silently_nan() {
        let opts = TrainOptions {
            max_epochs: 5,
            ..TrainOptions::default()
        };
        match train(&arch(), &data(), &[], &table(), 1e6, &opts, 1) {
            Ok(out) => assert!(out.trace.iter().all(|e| e.dev_loss.is_finite())),
            Err(e) => assert!(matches!(e, Error::Diverged)),
        }
    }

    #[test]
    fn empty_training_set_is_an_error() {
        assert!(train(&arch(), &[], &[], &table(), 0.1, &TrainOptions::default(), 0).is_err());
    }

    #[test]
    fn cap_limits_sizes() {
        let a = architecture(&Hyperparams::default(), 3, 7, 4, Some(8));
        assert_eq!(a.arg1_hidden, vec![8, 8, 8]);
        assert_eq!(a.dense2, 8);
        let full = architecture(&Hyperparams::default(), 3, 7, 4, None);
        assert_eq!(full.arg2_hidden, vec![127, 89, 150]);
    }
}
