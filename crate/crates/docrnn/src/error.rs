use std::fmt;

/// Everything that can go wrong inside the library.
///
/// Dimension mismatches between a matrix and a vector handed to it are
/// treated as programming errors and panic; the variants here cover data
/// problems a caller can actually run into (bad files, bad configs,
/// diverged training) and are meant to be matched on.
#[derive(Debug)]
pub enum Error {
    /// A corpus with zero sentences.
    EmptyCorpus,
    /// A requested class count that cannot partition the vocabulary.
    InvalidClassCount { requested: usize, vocab_size: usize },
    /// A malformed vocabulary or configuration value.
    InvalidValue(String),
    /// A sentence that violates the encoding contract (too short, interior
    /// start/end markers, out-of-range word ids).
    MalformedSentence(String),
    /// A dataset whose word ids do not fit the model's vocabulary.
    VocabMismatch(String),
    /// A document-vector operation on a model with no document vector (D = 0).
    NoDocVector,
    /// A non-finite loss or probability during training or evaluation.
    NonFiniteLoss(String),
    /// The objective returned a non-finite value while probing the given
    /// coordinate during finite differencing.
    NonFiniteObjective { coordinate: usize },
    /// Dev perplexity blew past the divergence threshold during training.
    Diverged { epoch: usize, dev_ppl: f64, initial_ppl: f64 },
    /// A model file that does not start with the expected magic bytes.
    BadMagic,
    /// A model file that ends before its declared payload does.
    Truncated,
    /// A model file whose payload disagrees with its declared dimensions.
    DimensionMismatch(String),
    /// A vocabulary file that cannot be parsed; `line` is 1-based.
    VocabParse { line: usize, message: String },
    /// A sentence-vector query that cannot be answered.
    BadQuery(String),
    Io(std::io::Error),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::EmptyCorpus => write!(f, "corpus contains no sentences"),
            Error::InvalidClassCount { requested, vocab_size } => write!(
                f,
                "cannot split a vocabulary of {vocab_size} words into {requested} non-empty classes"
            ),
            Error::InvalidValue(msg) => write!(f, "invalid value: {msg}"),
            Error::MalformedSentence(msg) => write!(f, "malformed sentence: {msg}"),
            Error::VocabMismatch(msg) => write!(f, "vocabulary mismatch: {msg}"),
            Error::NoDocVector => {
                write!(f, "model has no document vector (D = 0)")
            }
            Error::NonFiniteLoss(msg) => write!(f, "non-finite loss: {msg}"),
            Error::NonFiniteObjective { coordinate } => write!(
                f,
                "objective returned a non-finite value while probing coordinate {coordinate}"
            ),
            Error::Diverged { epoch, dev_ppl, initial_ppl } => write!(
                f,
                "training diverged at epoch {epoch}: dev perplexity {dev_ppl:.3} exceeds 10x the initial {initial_ppl:.3}"
            ),
            Error::BadMagic => write!(f, "not a model file (bad magic bytes)"),
            Error::Truncated => write!(f, "model file is truncated"),
            Error::DimensionMismatch(msg) => write!(f, "dimension mismatch: {msg}"),
            Error::VocabParse { line, message } => {
                write!(f, "vocabulary file, line {line}: {message}")
            }
            Error::BadQuery(msg) => write!(f, "bad query: {msg}"),
            Error::Io(e) => write!(f, "io error: {e}"),
        }
    }
}

impl std::error::Error for Error {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        match self {
            Error::Io(e) => Some(e),
            _ => None,
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e)
    }
}

pub type Result<T> = std::result::Result<T, Error>;
