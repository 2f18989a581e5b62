//! Bayesian optimization over a box-bounded hyperparameter space.

pub mod acquisition;
pub mod gp;
pub mod search;
pub mod slice;
mod space;

pub use acquisition::expected_improvement;
pub use gp::{gp_posterior, matern52, GpFit, GpHyper};
pub use search::{latin_hypercube, run_search, run_search_with, suggest_next, SearchResult, Trial, DEFAULT_BUDGET};
pub use slice::{sample_kernel_hyperparams, HyperPrior};
pub use space::*;
