pub mod cli;
pub mod corpus;
pub mod embeddings;
pub mod error;
pub mod evalscore;
pub mod features;
pub mod hyperopt;
pub mod neural;
pub mod pipeline;

pub use error::{Error, Result};
