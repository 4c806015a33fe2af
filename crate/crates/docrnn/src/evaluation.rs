//! Evaluation: perplexity, the parameter/operation cost accounting used to
//! compare a document-vector model against a plain model of enlarged
//! hidden size, and sentence-vector similarity.

use crate::corpus::Dataset;
use crate::error::{Error, Result};
use crate::model::ModelParams;
use crate::numerics::dot;
use crate::training::OnlinePolicy;

/// Perplexity over a dataset.
#[derive(Clone, Debug)]
pub struct EvalReport {
    pub total_nll: f64,
    /// Tokens actually scored: everything after each start marker,
    /// end markers included.
    pub scorable_tokens: usize,
    /// `exp(total_nll / scorable_tokens)` (natural log throughout).
    pub perplexity: f64,
    /// Per-sentence negative log-likelihoods, in dataset order.
    pub per_sentence: Vec<f64>,
}

/// Corpus-level perplexity. The model is read-only; when `online` is
/// enabled the document vector adapts within each sentence and resets at
/// the next, exactly as during training.
pub fn perplexity(
    params: &ModelParams,
    data: &Dataset,
    online: &OnlinePolicy,
) -> Result<EvalReport> {
    if data.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let mut total_nll = 0.0f64;
    let mut per_sentence = Vec::with_capacity(data.len());
    for sentence in data.sentences() {
        let trace = params.sentence_forward(sentence, online)?;
        if !trace.nll.is_finite() {
            return Err(Error::NonFiniteLoss("sentence loss is not finite".into()));
        }
        total_nll += trace.nll;
        per_sentence.push(trace.nll);
    }
    let scorable_tokens = data.scorable_tokens();
    let perplexity = (total_nll / scorable_tokens as f64).exp();
    Ok(EvalReport { total_nll, scorable_tokens, perplexity, per_sentence })
}

/// Parameters added by growing the hidden layer of a class-factored model
/// from `M` to `M + X`: `X*C + 2*X*V + 2*X*M + X^2`.
pub fn added_params_hidden(x: u64, m: u64, v: u64, c: u64) -> u64 {
    x * c + 2 * x * v + 2 * x * m + x * x
}

/// Per-position operations added by the same growth:
/// `2*X*M + X^2 + X*C + X*E[O]`, where `E[O]` is the expected size of the
/// class block that must be evaluated; the result is rounded to the
/// nearest integer.
pub fn added_ops_hidden(x: u64, m: u64, c: u64, expected_class_size: f64) -> u64 {
    let exact = (2 * x * m + x * x + x * c) as f64 + x as f64 * expected_class_size;
    exact.round() as u64
}

/// Parameters added by attaching a document vector of size `D`:
/// `D + D*V + D*C` (the learned initial vector plus both projections).
pub fn added_params_doc(d: u64, v: u64, c: u64) -> u64 {
    d + d * v + d * c
}

/// Per-position operations added by a document vector of size `D`:
/// `2*D*E[O] + 2*D*C` — each projection is used once in the forward
/// direction for logits and once transposed for the online update;
/// rounded to the nearest integer.
pub fn added_ops_doc(d: u64, c: u64, expected_class_size: f64) -> u64 {
    let exact = 2.0 * d as f64 * expected_class_size + (2 * d * c) as f64;
    exact.round() as u64
}

/// One row of a cost/perplexity comparison table.
#[derive(Clone, Debug)]
pub struct CostReport {
    pub label: String,
    pub m: u64,
    pub d: u64,
    pub added_params: i64,
    pub added_ops: i64,
    pub test_ppl: Option<f64>,
}

/// The per-sentence document state after reading a whole sentence.
#[derive(Clone, Debug)]
pub struct SentenceVector {
    pub index: usize,
    pub vector: Vec<f64>,
}

/// Read every sentence with the document vector adapting online and keep
/// its final state — the model's summary of that sentence.
pub fn sentence_vectors(
    params: &ModelParams,
    data: &Dataset,
    doc_lr: f64,
) -> Result<Vec<SentenceVector>> {
    if params.d == 0 {
        return Err(Error::NoDocVector);
    }
    let policy = OnlinePolicy::enabled(doc_lr);
    let mut out = Vec::with_capacity(data.len());
    for (index, sentence) in data.sentences().iter().enumerate() {
        let trace = params.sentence_forward(sentence, &policy)?;
        out.push(SentenceVector { index, vector: trace.final_doc });
    }
    Ok(out)
}

/// Cosine similarity; zero whenever either vector has zero norm (callers
/// that care filter those out explicitly).
pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let na = dot(a, a).sqrt();
    let nb = dot(b, b).sqrt();
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    dot(a, b) / (na * nb)
}

/// Neighbors of one sentence vector, most similar first.
#[derive(Clone, Debug)]
pub struct Neighbors {
    /// `(sentence index, cosine similarity)`, descending similarity,
    /// ties broken by ascending index.
    pub ranked: Vec<(usize, f64)>,
    /// Candidates dropped because their vector had zero norm.
    pub zero_norm_skipped: usize,
}

/// Rank all other sentences by cosine similarity to the query sentence.
pub fn nearest_sentences(
    vectors: &[SentenceVector],
    query: usize,
    k: usize,
) -> Result<Neighbors> {
    let query_vec = vectors
        .iter()
        .find(|sv| sv.index == query)
        .ok_or_else(|| Error::BadQuery(format!("no sentence vector with index {query}")))?;
    if dot(&query_vec.vector, &query_vec.vector) == 0.0 {
        return Err(Error::BadQuery(format!(
            "sentence {query} has a zero-norm vector; similarities are undefined"
        )));
    }
    let mut ranked = Vec::with_capacity(vectors.len().saturating_sub(1));
    let mut zero_norm_skipped = 0usize;
    for sv in vectors {
        if sv.index == query {
            continue;
        }
        if dot(&sv.vector, &sv.vector) == 0.0 {
            zero_norm_skipped += 1;
            continue;
        }
        ranked.push((sv.index, cosine(&query_vec.vector, &sv.vector)));
    }
    ranked.sort_by(|a, b| {
        b.1.partial_cmp(&a.1)
            .expect("cosine of finite nonzero vectors is finite")
            .then(a.0.cmp(&b.0))
    });
    ranked.truncate(k);
    Ok(Neighbors { ranked, zero_norm_skipped })
}
