//! LSTM encoders, the dense classifier head, backpropagation and SGD.

pub mod config;
pub mod encoder;
pub mod head;
pub mod lstm;
pub mod model;
pub mod tensor;
pub mod train;

pub use config::Hyperparams;
pub use encoder::{encode, encode_argument, EncoderParams, KeepEnd, MAX_SEQUENCE_LEN};
pub use head::{cross_entropy, softmax, HeadParams};
pub use lstm::{lstm_step, LstmParams};
pub use model::{loss_and_gradients, sgd_step, Architecture, Example, ModelParams, Network, OOV};
pub use tensor::Tensor;
pub use train::{architecture, train, EpochLog, TrainOptions, TrainOutcome};
