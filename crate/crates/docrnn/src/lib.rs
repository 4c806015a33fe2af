//! A recurrent neural network language model whose output layer is
//! conditioned on a per-sentence *document vector* that adapts online —
//! by gradient steps on the words just seen — while the model reads, both
//! at training and at test time.
//!
//! The crate covers the full pipeline:
//!
//! * [`corpus`] — vocabulary construction with frequency-threshold
//!   cutoff, square-root-frequency word classes, and sentence encoding;
//! * [`model`] — the class-factored recurrent LM with optional document
//!   blocks, forward scoring, and binary model files;
//! * [`training`] — the online document update, whole-sentence BPTT, and
//!   the epoch loop with learning-rate decay;
//! * [`evaluation`] — perplexity, the added-parameter/operation cost
//!   accounting for comparing against wider plain models, and
//!   sentence-vector cosine similarity;
//! * [`numerics`] — the small dense-matrix and RNG toolkit everything
//!   else is built on, hand-rolled for cross-platform reproducibility.

pub mod corpus;
pub mod error;
pub mod evaluation;
pub mod model;
pub mod numerics;
pub mod training;

pub use corpus::{
    assign_classes, read_corpus, tokenize_line, ClassAssignment, Dataset, Vocabulary, END_TOKEN,
    START_TOKEN, UNKNOWN_TOKEN,
};
pub use error::{Error, Result};
pub use evaluation::{
    added_ops_doc, added_ops_hidden, added_params_doc, added_params_hidden, cosine,
    nearest_sentences, perplexity, sentence_vectors, CostReport, EvalReport, Neighbors,
    SentenceVector,
};
pub use model::{
    load_model, save_model, DocParams, ModelParams, SentenceTrace, StepOutput, StepState,
};
pub use numerics::{finite_diff_grad, sigmoid, softmax, Matrix, Rng};
pub use training::{
    bptt_sentence, doc_online_update, output_error, train, train_sentence, DocGradients,
    EpochStats, Gradients, OnlinePolicy, TrainConfig, TrainReport,
};
