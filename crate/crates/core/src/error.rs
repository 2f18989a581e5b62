use std::io;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error: {0}")]
    Io(#[from] io::Error),

    #[error("line {line}: malformed relation: {message}")]
    MalformedLine { line: usize, message: String },

    #[error("relation {rel_id}: empty argument span ({which})")]
    EmptyArgument { rel_id: i64, which: &'static str },

    #[error("relation {rel_id}: explicit relation without connective tokens")]
    MissingConnective { rel_id: i64 },

    #[error("malformed parses document: {0}")]
    MalformedParses(String),

    #[error("parse error in document {doc_id}, sentence {sentence}: {source}")]
    SentenceParse {
        doc_id: String,
        sentence: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("bracketed tree error at offset {offset}: {message}")]
    Tree { offset: usize, message: String },

    #[error("invalid embedding header: {0}")]
    EmbeddingHeader(String),

    #[error("truncated at entry {0}")]
    Truncated(usize),

    #[error("invalid cluster count: {0}")]
    ClusterCount(String),

    #[error("malformed cluster file: {0}")]
    ClusterFile(String),

    #[error("malformed lexicon line {line}: {message}")]
    Lexicon { line: usize, message: String },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("diverged")]
    Diverged,

    #[error("wrong branch: {0}")]
    WrongBranch(String),

    #[error("empty corpus: {0}")]
    EmptyCorpus(String),

    #[error("hyperparameter {name} = {value} outside [{lower}, {upper}]")]
    OutOfBounds {
        name: String,
        value: f64,
        lower: f64,
        upper: f64,
    },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("ill-conditioned")]
    IllConditioned,

    #[error("model file: {0}")]
    ModelFormat(String),

    #[error("scoring: {0}")]
    Scoring(String),

    #[error("report table: {0}")]
    Report(String),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}
