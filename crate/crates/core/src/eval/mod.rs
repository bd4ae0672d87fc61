//! Batch evaluation against gold corpora.

pub mod conll;
pub mod corpus;
pub mod score;
pub mod tune;

use thiserror::Error;

pub use conll::load_conll;
pub use corpus::{load_corpus, save_corpus, Corpus, CorpusDocument, LabelInventory};
pub use score::{score_task, Prf, ScoreReport};
pub use tune::{tune_threshold, TuneResult, DEFAULT_STEP};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("corpus parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("CoNLL line {line}: {message}")]
    Conll { line: usize, message: String },
    #[error("invalid corpus: {0}")]
    Invalid(String),
    #[error("predictions do not match the gold corpus: {0}")]
    DocumentMismatch(String),
    #[error("development set is empty")]
    EmptyDevSet,
}
