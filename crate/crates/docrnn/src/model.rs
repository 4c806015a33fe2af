//! The model: a recurrent language model with a class-factored output
//! layer and an optional per-sentence document vector.
//!
//! At step `t` the hidden state is
//!
//! ```text
//! h_t = sigmoid(E[:, w_t] + W_h h_{t-1})
//! ```
//!
//! and the next word is predicted in two stages, both of which may be
//! steered by the current document vector `doc`:
//!
//! ```text
//! P(class)          = softmax(W_c h_t + W_dc doc)
//! P(word | class c) = softmax(W_o[c] h_t + W_do[c] doc)    (rows of class c)
//! P(word)           = P(class(word)) * P(word | class(word))
//! ```
//!
//! `W_o` and `W_do` store their rows grouped by class so each class is a
//! contiguous block and only the target's block ever needs computing while
//! scoring. With `D = 0` the document blocks are absent and the model is a
//! plain class-factored recurrent LM.
//!
//! The document vector starts every sentence at the learned `d0` and, when
//! online updates are enabled, takes a gradient step after each position is
//! scored — prediction at step `t` always uses the state from before step
//! `t`'s update, so no information about the scored word leaks into its own
//! prediction.

use std::fs;
use std::io::Write as _;
use std::path::Path;

use crate::corpus::{ClassAssignment, Vocabulary};
use crate::error::{Error, Result};
use crate::numerics::{add_scaled_vec, sigmoid, softmax, Matrix, Rng};
use crate::training::{doc_online_update, OnlinePolicy};

const MODEL_MAGIC: &[u8; 8] = b"DVRNNLM1";

/// The document-vector blocks; present exactly when `D > 0`.
#[derive(Clone, Debug, PartialEq)]
pub struct DocParams {
    /// C x D: document contribution to class logits.
    pub w_dc: Matrix,
    /// V x D, class-grouped rows: document contribution to word logits.
    pub w_do: Matrix,
    /// Learned per-sentence initial document vector.
    pub d0: Vec<f64>,
}

/// All model weights plus the class layout that gives `w_o`/`w_do` rows
/// their meaning.
///
/// Fields are public for direct inspection and surgery; the blocks are
/// plain numbers and carry no invariant beyond their shapes.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelParams {
    pub m: usize,
    pub d: usize,
    pub v: usize,
    pub c: usize,
    /// M x V: input embeddings, one column per word.
    pub e: Matrix,
    /// M x M: hidden-to-hidden recurrence.
    pub w_h: Matrix,
    /// C x M: hidden contribution to class logits.
    pub w_c: Matrix,
    /// V x M, class-grouped rows: hidden contribution to word logits.
    pub w_o: Matrix,
    /// Learned initial hidden state.
    pub h0: Vec<f64>,
    pub doc: Option<DocParams>,
    pub classes: ClassAssignment,
}

/// Recurrent state carried from one step to the next.
#[derive(Clone, Debug)]
pub struct StepState {
    pub hidden: Vec<f64>,
    /// Empty when the model has no document vector.
    pub doc: Vec<f64>,
    pub prev_word: u32,
}

/// Distributions produced by one step: the class distribution always, and
/// per-class word distributions for whichever classes were in scope.
#[derive(Clone, Debug)]
pub struct StepOutput {
    pub class_probs: Vec<f64>,
    /// Indexed by class; `None` for classes left uncomputed.
    pub word_probs: Vec<Option<Vec<f64>>>,
}

impl StepOutput {
    /// `P(word) = P(class(word)) * P(word | class(word))`.
    ///
    /// Panics if the word's class was not in scope for this step — that is
    /// a logic error, not a data error.
    pub fn next_word_prob(&self, word: u32, classes: &ClassAssignment) -> f64 {
        let c = classes.class_of(word);
        let within = self.word_probs[c as usize]
            .as_ref()
            .expect("word probability requested for a class that was not computed");
        self.class_probs[c as usize] * within[classes.index_in_class(word)]
    }
}

/// Everything recorded while scoring one sentence, in step order; enough
/// to run truncation-free backpropagation through time afterwards.
#[derive(Clone, Debug)]
pub struct SentenceTrace {
    pub inputs: Vec<u32>,
    pub targets: Vec<u32>,
    /// Hidden state *after* each step's recurrence.
    pub hiddens: Vec<Vec<f64>>,
    /// Document vector *used* at each step (pre-update); empty when D = 0.
    pub docs: Vec<Vec<f64>>,
    pub outputs: Vec<StepOutput>,
    /// Document state after the final position's update; the sentence
    /// vector used for similarity. Empty when D = 0.
    pub final_doc: Vec<f64>,
    pub nll: f64,
}

impl ModelParams {
    /// Freshly initialized model, every weight uniform in
    /// `[-init_scale, init_scale]`. Blocks are drawn in declaration order
    /// (E, W_h, W_c, W_o, h0, then W_dc, W_do, d0) so a seed pins the
    /// entire parameter vector.
    pub fn init(
        m: usize,
        d: usize,
        classes: &ClassAssignment,
        init_scale: f64,
        rng: &mut Rng,
    ) -> Result<ModelParams> {
        let v = classes.vocab_size();
        let c = classes.num_classes();
        if m == 0 {
            return Err(Error::InvalidValue("hidden size M must be at least 1".into()));
        }
        if v < 3 {
            return Err(Error::InvalidValue(format!(
                "vocabulary of size {v} cannot hold the three special tokens"
            )));
        }
        if !init_scale.is_finite() || init_scale < 0.0 {
            return Err(Error::InvalidValue(format!("bad init_scale {init_scale}")));
        }
        let e = Matrix::uniform(m, v, init_scale, rng);
        let w_h = Matrix::uniform(m, m, init_scale, rng);
        let w_c = Matrix::uniform(c, m, init_scale, rng);
        let w_o = Matrix::uniform(v, m, init_scale, rng);
        let h0: Vec<f64> = (0..m).map(|_| rng.uniform(-init_scale, init_scale)).collect();
        let doc = if d > 0 {
            Some(DocParams {
                w_dc: Matrix::uniform(c, d, init_scale, rng),
                w_do: Matrix::uniform(v, d, init_scale, rng),
                d0: (0..d).map(|_| rng.uniform(-init_scale, init_scale)).collect(),
            })
        } else {
            None
        };
        Ok(ModelParams { m, d, v, c, e, w_h, w_c, w_o, h0, doc, classes: classes.clone() })
    }

    /// Total number of learned scalars across all blocks.
    pub fn param_count(&self) -> usize {
        let mut n = self.m * self.v   // E
            + self.m * self.m        // W_h
            + self.c * self.m        // W_c
            + self.v * self.m        // W_o
            + self.m; // h0
        if let Some(doc) = &self.doc {
            n += doc.w_dc.rows() * doc.w_dc.cols()
                + doc.w_do.rows() * doc.w_do.cols()
                + doc.d0.len();
        }
        n
    }

    /// Fresh per-sentence state: learned initial hidden and document
    /// vectors, positioned on `first_word` (normally the start token).
    pub fn initial_state(&self, first_word: u32) -> StepState {
        StepState {
            hidden: self.h0.clone(),
            doc: self.doc.as_ref().map(|d| d.d0.clone()).unwrap_or_default(),
            prev_word: first_word,
        }
    }

    fn advance_hidden(&self, prev_word: u32, hidden: &[f64]) -> Vec<f64> {
        let mut z = self.w_h.matvec(hidden);
        for (i, zi) in z.iter_mut().enumerate() {
            *zi = sigmoid(*zi + self.e.get(i, prev_word as usize));
        }
        z
    }

    fn step_impl(&self, state: &StepState, scope: Option<u32>) -> (Vec<f64>, StepOutput) {
        assert_eq!(state.hidden.len(), self.m, "hidden state size mismatch");
        assert_eq!(state.doc.len(), self.d, "document vector size mismatch");
        assert!((state.prev_word as usize) < self.v, "input word out of vocabulary");
        let hidden = self.advance_hidden(state.prev_word, &state.hidden);

        let mut class_logits = self.w_c.matvec(&hidden);
        if let Some(doc) = &self.doc {
            add_scaled_vec(&mut class_logits, &doc.w_dc.matvec(&state.doc), 1.0);
        }
        let class_probs = softmax(&class_logits);

        let mut word_probs: Vec<Option<Vec<f64>>> = vec![None; self.c];
        let classes_in_scope: Vec<u32> = match scope {
            Some(c) => vec![c],
            None => (0..self.c as u32).collect(),
        };
        for c in classes_in_scope {
            let (off, len) = self.classes.block(c);
            let mut logits = self.w_o.block_matvec(off, len, &hidden);
            if let Some(doc) = &self.doc {
                add_scaled_vec(&mut logits, &doc.w_do.block_matvec(off, len, &state.doc), 1.0);
            }
            word_probs[c as usize] = Some(softmax(&logits));
        }
        (hidden, StepOutput { class_probs, word_probs })
    }

    /// One step with word distributions for every class — the full
    /// next-word distribution.
    pub fn forward_step(&self, state: &StepState) -> (Vec<f64>, StepOutput) {
        self.step_impl(state, None)
    }

    /// One step computing only the given class's word distribution, which
    /// is all scoring a known target needs.
    pub fn forward_step_for_class(&self, state: &StepState, class: u32) -> (Vec<f64>, StepOutput) {
        assert!((class as usize) < self.c, "class out of range");
        self.step_impl(state, Some(class))
    }

    /// Score a full sentence, recording the trace BPTT needs.
    ///
    /// The sentence must be encoded: at least `[start, end]`, with the
    /// start marker appearing only at position 0 (it is never a prediction
    /// target). When `online` is enabled the document vector takes its
    /// gradient step after each position is scored; the model itself is
    /// never mutated.
    pub fn sentence_forward(
        &self,
        sentence: &[u32],
        online: &OnlinePolicy,
    ) -> Result<SentenceTrace> {
        if sentence.len() < 2 {
            return Err(Error::MalformedSentence(format!(
                "{} tokens; need at least start + end",
                sentence.len()
            )));
        }
        if let Some(&w) = sentence.iter().find(|&&w| w as usize >= self.v) {
            return Err(Error::VocabMismatch(format!(
                "word id {w} out of range for vocabulary of size {}",
                self.v
            )));
        }
        if sentence[1..].contains(&sentence[0]) {
            return Err(Error::MalformedSentence(
                "start marker appears as a prediction target".into(),
            ));
        }
        if online.enabled && self.d == 0 {
            return Err(Error::NoDocVector);
        }

        let steps = sentence.len() - 1;
        let mut trace = SentenceTrace {
            inputs: Vec::with_capacity(steps),
            targets: Vec::with_capacity(steps),
            hiddens: Vec::with_capacity(steps),
            docs: Vec::with_capacity(if self.d > 0 { steps } else { 0 }),
            outputs: Vec::with_capacity(steps),
            final_doc: Vec::new(),
            nll: 0.0,
        };
        let mut state = self.initial_state(sentence[0]);
        for t in 0..steps {
            let target = sentence[t + 1];
            let class = self.classes.class_of(target);
            let (hidden, out) = self.forward_step_for_class(&state, class);
            trace.nll -= out.next_word_prob(target, &self.classes).ln();
            trace.inputs.push(state.prev_word);
            trace.targets.push(target);
            trace.hiddens.push(hidden.clone());
            if self.d > 0 {
                trace.docs.push(state.doc.clone());
            }
            if online.enabled {
                state.doc = doc_online_update(self, &out, target, &state.doc, online.doc_lr)?;
            }
            trace.outputs.push(out);
            state.hidden = hidden;
            state.prev_word = target;
        }
        trace.final_doc = state.doc;
        Ok(trace)
    }
}

/// Write a model and its vocabulary to one self-contained binary file.
///
/// Layout: 8 magic bytes, four little-endian `u32` dimensions (M, D, V, C),
/// the parameter blocks as raw little-endian `f64` in declaration order
/// (E, W_h, W_c, W_o, h0, then W_dc, W_do, d0 when D > 0), and finally the
/// vocabulary in its text format, length-prefixed with a `u64`.
pub fn save_model(params: &ModelParams, vocab: &Vocabulary, path: &Path) -> Result<()> {
    if vocab.size() != params.v || vocab.num_classes() != params.c {
        return Err(Error::DimensionMismatch(format!(
            "model is {}x{} (V x C) but vocabulary is {}x{}",
            params.v,
            params.c,
            vocab.size(),
            vocab.num_classes()
        )));
    }
    if vocab.classes() != &params.classes {
        return Err(Error::DimensionMismatch(
            "model and vocabulary disagree on the class partition".into(),
        ));
    }
    let mut buf: Vec<u8> = Vec::new();
    buf.extend_from_slice(MODEL_MAGIC);
    for dim in [params.m, params.d, params.v, params.c] {
        buf.extend_from_slice(&(dim as u32).to_le_bytes());
    }
    let mut write_block = |xs: &[f64]| {
        for x in xs {
            buf.extend_from_slice(&x.to_le_bytes());
        }
    };
    write_block(params.e.data());
    write_block(params.w_h.data());
    write_block(params.w_c.data());
    write_block(params.w_o.data());
    write_block(&params.h0);
    if let Some(doc) = &params.doc {
        write_block(doc.w_dc.data());
        write_block(doc.w_do.data());
        write_block(&doc.d0);
    }
    let vocab_text = vocab.to_text();
    buf.extend_from_slice(&(vocab_text.len() as u64).to_le_bytes());
    buf.extend_from_slice(vocab_text.as_bytes());

    let mut file = fs::File::create(path)?;
    file.write_all(&buf)?;
    Ok(())
}

/// Read back a file written by [`save_model`].
///
/// Distinguishes three failure modes: wrong magic bytes, a file shorter
/// than its own declared contents, and contents whose sizes contradict the
/// declared dimensions.
pub fn load_model(path: &Path) -> Result<(ModelParams, Vocabulary)> {
    let bytes = fs::read(path)?;
    if bytes.len() < MODEL_MAGIC.len() {
        return Err(Error::Truncated);
    }
    if &bytes[..MODEL_MAGIC.len()] != MODEL_MAGIC {
        return Err(Error::BadMagic);
    }
    let mut pos = MODEL_MAGIC.len();
    let mut read_u32 = || -> Result<usize> {
        if pos + 4 > bytes.len() {
            return Err(Error::Truncated);
        }
        let x = u32::from_le_bytes(bytes[pos..pos + 4].try_into().unwrap());
        pos += 4;
        Ok(x as usize)
    };
    let m = read_u32()?;
    let d = read_u32()?;
    let v = read_u32()?;
    let c = read_u32()?;
    if m == 0 || v == 0 || c == 0 || c > v {
        return Err(Error::DimensionMismatch(format!(
            "declared dimensions M={m} D={d} V={v} C={c} are not a valid model shape"
        )));
    }

    let mut read_block = |len: usize| -> Result<Vec<f64>> {
        let nbytes = len * 8;
        if pos + nbytes > bytes.len() {
            return Err(Error::Truncated);
        }
        let mut out = Vec::with_capacity(len);
        for k in 0..len {
            let off = pos + k * 8;
            out.push(f64::from_le_bytes(bytes[off..off + 8].try_into().unwrap()));
        }
        pos += nbytes;
        Ok(out)
    };
    let into_matrix = |rows: usize, cols: usize, data: Vec<f64>| {
        let mut mat = Matrix::zeros(rows, cols);
        mat.data_mut().copy_from_slice(&data);
        mat
    };
    let e = into_matrix(m, v, read_block(m * v)?);
    let w_h = into_matrix(m, m, read_block(m * m)?);
    let w_c = into_matrix(c, m, read_block(c * m)?);
    let w_o = into_matrix(v, m, read_block(v * m)?);
    let h0 = read_block(m)?;
    let doc = if d > 0 {
        let w_dc = into_matrix(c, d, read_block(c * d)?);
        let w_do = into_matrix(v, d, read_block(v * d)?);
        let d0 = read_block(d)?;
        Some(DocParams { w_dc, w_do, d0 })
    } else {
        None
    };

    if pos + 8 > bytes.len() {
        return Err(Error::Truncated);
    }
    let vocab_len = u64::from_le_bytes(bytes[pos..pos + 8].try_into().unwrap()) as usize;
    pos += 8;
    if pos + vocab_len > bytes.len() {
        return Err(Error::Truncated);
    }
    if pos + vocab_len != bytes.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} trailing bytes after the vocabulary blob",
            bytes.len() - pos - vocab_len
        )));
    }
    let vocab_text = std::str::from_utf8(&bytes[pos..pos + vocab_len])
        .map_err(|_| Error::DimensionMismatch("vocabulary blob is not UTF-8".into()))?;
    let vocab = Vocabulary::from_text(vocab_text)?;
    if vocab.size() != v || vocab.num_classes() != c {
        return Err(Error::DimensionMismatch(format!(
            "header declares V={v} C={c} but embedded vocabulary is {}x{}",
            vocab.size(),
            vocab.num_classes()
        )));
    }

    let params = ModelParams {
        m,
        d,
        v,
        c,
        e,
        w_h,
        w_c,
        w_o,
        h0,
        doc,
        classes: vocab.classes().clone(),
    };
    if params.e.data().iter().any(|x| !x.is_finite()) {
        return Err(Error::DimensionMismatch("non-finite value in parameter block".into()));
    }
    Ok((params, vocab))
}
