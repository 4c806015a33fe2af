//! Training: the per-step document-vector update, whole-sentence
//! backpropagation through time, and the epoch loop with its learning-rate
//! schedule.
//!
//! Two different gradient steps happen here and it pays to keep them
//! apart. The *online* update touches only the document vector: after a
//! position is scored, the document vector moves one step down the
//! gradient of that position's loss. It runs during training *and*
//! evaluation — it is how the model adapts to the sentence it is reading,
//! not how it learns. The *weight* update is ordinary SGD from
//! whole-sentence BPTT and runs only during training. BPTT treats the
//! recorded document values as constants (their dependence on earlier
//! weights through the online updates is deliberately not unrolled); the
//! document gradient at step 0 is taken as the gradient for the learned
//! initial vector `d0`.

use crate::corpus::{ClassAssignment, Dataset};
use crate::error::{Error, Result};
use crate::evaluation::perplexity;
use crate::model::{ModelParams, SentenceTrace, StepOutput};
use crate::numerics::{add_scaled_vec, Matrix};

/// Whether (and how fast) the document vector adapts while a sentence is
/// being scored.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OnlinePolicy {
    pub enabled: bool,
    pub doc_lr: f64,
}

impl OnlinePolicy {
    pub fn enabled(doc_lr: f64) -> OnlinePolicy {
        OnlinePolicy { enabled: true, doc_lr }
    }

    pub fn disabled() -> OnlinePolicy {
        OnlinePolicy { enabled: false, doc_lr: 0.0 }
    }

    /// Online updates whenever the model has a document vector — the
    /// standard policy for both training and evaluation.
    pub fn for_model(params: &ModelParams, doc_lr: f64) -> OnlinePolicy {
        if params.d > 0 {
            OnlinePolicy::enabled(doc_lr)
        } else {
            OnlinePolicy::disabled()
        }
    }
}

/// Hyperparameters for [`train`].
#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    /// SGD step size for the weights; decays over training.
    pub general_lr: f64,
    /// Step size for the online document update; never decays.
    pub doc_lr: f64,
    /// Multiplier applied to `general_lr` when dev improvement stalls.
    pub lr_decay_factor: f64,
    /// Relative dev-perplexity improvement below which the rate decays.
    pub decay_trigger: f64,
    pub max_epochs: usize,
    /// Seed for parameter initialization (and corpus shuffling upstream).
    pub seed: u64,
    /// Half-width of the uniform initialization interval.
    pub init_scale: f64,
    /// Optional elementwise clamp on gradients before each SGD step.
    pub gradient_clip: Option<f64>,
}

impl Default for TrainConfig {
    fn default() -> TrainConfig {
        TrainConfig {
            general_lr: 0.1,
            doc_lr: 0.1,
            lr_decay_factor: 0.5,
            decay_trigger: 0.003,
            max_epochs: 20,
            seed: 1,
            init_scale: 0.1,
            gradient_clip: None,
        }
    }
}

/// General learning rates below this stop training once improvement is gone.
const MIN_GENERAL_LR: f64 = 1e-4;
/// Dev perplexity beyond this multiple of its starting value aborts training.
const DIVERGENCE_FACTOR: f64 = 10.0;

/// Accumulated loss gradients, one block per parameter block.
#[derive(Clone, Debug)]
pub struct Gradients {
    pub e: Matrix,
    pub w_h: Matrix,
    pub w_c: Matrix,
    pub w_o: Matrix,
    pub h0: Vec<f64>,
    pub doc: Option<DocGradients>,
}

#[derive(Clone, Debug)]
pub struct DocGradients {
    pub w_dc: Matrix,
    pub w_do: Matrix,
    pub d0: Vec<f64>,
}

impl Gradients {
    pub fn zeros_like(params: &ModelParams) -> Gradients {
        Gradients {
            e: Matrix::zeros(params.m, params.v),
            w_h: Matrix::zeros(params.m, params.m),
            w_c: Matrix::zeros(params.c, params.m),
            w_o: Matrix::zeros(params.v, params.m),
            h0: vec![0.0; params.m],
            doc: params.doc.as_ref().map(|_| DocGradients {
                w_dc: Matrix::zeros(params.c, params.d),
                w_do: Matrix::zeros(params.v, params.d),
                d0: vec![0.0; params.d],
            }),
        }
    }

    /// Clamp every gradient entry into `[-limit, limit]`.
    pub fn clamp(&mut self, limit: f64) {
        self.e.clamp(limit);
        self.w_h.clamp(limit);
        self.w_c.clamp(limit);
        self.w_o.clamp(limit);
        for x in self.h0.iter_mut() {
            *x = x.clamp(-limit, limit);
        }
        if let Some(doc) = &mut self.doc {
            doc.w_dc.clamp(limit);
            doc.w_do.clamp(limit);
            for x in doc.d0.iter_mut() {
                *x = x.clamp(-limit, limit);
            }
        }
    }
}

impl ModelParams {
    /// One SGD step: `theta -= lr * grad` on every block.
    pub fn apply_gradients(&mut self, grads: &Gradients, lr: f64) {
        self.e.add_scaled(&grads.e, -lr);
        self.w_h.add_scaled(&grads.w_h, -lr);
        self.w_c.add_scaled(&grads.w_c, -lr);
        self.w_o.add_scaled(&grads.w_o, -lr);
        add_scaled_vec(&mut self.h0, &grads.h0, -lr);
        if let (Some(doc), Some(gdoc)) = (self.doc.as_mut(), grads.doc.as_ref()) {
            doc.w_dc.add_scaled(&gdoc.w_dc, -lr);
            doc.w_do.add_scaled(&gdoc.w_do, -lr);
            add_scaled_vec(&mut doc.d0, &gdoc.d0, -lr);
        }
    }
}

/// Softmax-cross-entropy error signals at one step:
/// `(class_probs - onehot(class(target)), word_probs - onehot(target))`,
/// the word part over the target's class block only.
pub fn output_error(
    out: &StepOutput,
    target: u32,
    classes: &ClassAssignment,
) -> (Vec<f64>, Vec<f64>) {
    let c = classes.class_of(target);
    let mut class_delta = out.class_probs.clone();
    class_delta[c as usize] -= 1.0;
    let mut word_delta = out.word_probs[c as usize]
        .as_ref()
        .expect("output_error needs the target class's word distribution")
        .clone();
    word_delta[classes.index_in_class(target)] -= 1.0;
    (class_delta, word_delta)
}

/// Gradient of one position's loss with respect to the document vector:
/// `W_dc^T class_delta + W_do[c]^T word_delta` for the target's class `c`.
fn doc_loss_grad(
    params: &ModelParams,
    out: &StepOutput,
    target: u32,
) -> Result<Vec<f64>> {
    let doc = params.doc.as_ref().ok_or(Error::NoDocVector)?;
    let (class_delta, word_delta) = output_error(out, target, &params.classes);
    let (off, len) = params.classes.block(params.classes.class_of(target));
    let mut g = doc.w_dc.matvec_t(&class_delta);
    add_scaled_vec(&mut g, &doc.w_do.block_matvec_t(off, len, &word_delta), 1.0);
    Ok(g)
}

/// The online document step: one gradient move of the document vector on
/// the loss of the position just scored. Pure — returns the new vector.
pub fn doc_online_update(
    params: &ModelParams,
    out: &StepOutput,
    target: u32,
    doc: &[f64],
    doc_lr: f64,
) -> Result<Vec<f64>> {
    let g = doc_loss_grad(params, out, target)?;
    let mut updated = doc.to_vec();
    add_scaled_vec(&mut updated, &g, -doc_lr);
    Ok(updated)
}

/// Whole-sentence backpropagation through time over a recorded trace.
///
/// Walks from the last position to the first, sending the hidden error
/// back through the logistic nonlinearity (`h * (1 - h)`) and the
/// recurrence at every step. The recorded document values enter output
/// gradients as constants; the document error at step 0 becomes the
/// gradient of the learned initial vector `d0`.
pub fn bptt_sentence(params: &ModelParams, trace: &SentenceTrace) -> Result<Gradients> {
    let steps = trace.targets.len();
    if steps == 0
        || trace.inputs.len() != steps
        || trace.hiddens.len() != steps
        || trace.outputs.len() != steps
        || (params.d > 0 && trace.docs.len() != steps)
    {
        return Err(Error::MalformedSentence(
            "trace is empty or its per-step records disagree in length".into(),
        ));
    }
    let mut grads = Gradients::zeros_like(params);
    // dLoss/dh_t flowing back from steps after t.
    let mut carry = vec![0.0; params.m];
    for t in (0..steps).rev() {
        let target = trace.targets[t];
        let class = params.classes.class_of(target);
        let (off, len) = params.classes.block(class);
        let (class_delta, word_delta) = output_error(&trace.outputs[t], target, &params.classes);
        let hidden = &trace.hiddens[t];

        grads.w_c.add_outer(0, &class_delta, hidden);
        grads.w_o.add_outer(off, &word_delta, hidden);
        if let Some(gdoc) = &mut grads.doc {
            let doc_t = &trace.docs[t];
            gdoc.w_dc.add_outer(0, &class_delta, doc_t);
            gdoc.w_do.add_outer(off, &word_delta, doc_t);
        }

        let mut dh = params.w_c.matvec_t(&class_delta);
        add_scaled_vec(&mut dh, &params.w_o.block_matvec_t(off, len, &word_delta), 1.0);
        add_scaled_vec(&mut dh, &carry, 1.0);
        // Through the logistic: dz = dh * h * (1 - h).
        let dz: Vec<f64> =
            dh.iter().zip(hidden).map(|(&g, &h)| g * h * (1.0 - h)).collect();

        grads.e.add_to_col(trace.inputs[t] as usize, &dz);
        let h_prev = if t == 0 { &params.h0 } else { &trace.hiddens[t - 1] };
        grads.w_h.add_outer(0, &dz, h_prev);
        carry = params.w_h.matvec_t(&dz);

        if t == 0 {
            add_scaled_vec(&mut grads.h0, &carry, 1.0);
            if let Some(gdoc) = &mut grads.doc {
                let g0 = doc_loss_grad(params, &trace.outputs[0], target)?;
                add_scaled_vec(&mut gdoc.d0, &g0, 1.0);
            }
        }
    }
    Ok(grads)
}

/// Score one sentence (document vector adapting online when present),
/// backpropagate, and apply a single SGD step. Returns the sentence's
/// negative log-likelihood under the pre-update weights.
pub fn train_sentence(
    params: &mut ModelParams,
    sentence: &[u32],
    cfg: &TrainConfig,
) -> Result<f64> {
    let policy = OnlinePolicy::for_model(params, cfg.doc_lr);
    let trace = params.sentence_forward(sentence, &policy)?;
    if !trace.nll.is_finite() {
        return Err(Error::NonFiniteLoss(format!(
            "sentence loss is {} under the current weights",
            trace.nll
        )));
    }
    let mut grads = bptt_sentence(params, &trace)?;
    if let Some(limit) = cfg.gradient_clip {
        grads.clamp(limit);
    }
    params.apply_gradients(&grads, cfg.general_lr);
    Ok(trace.nll)
}

/// One epoch's summary line.
#[derive(Clone, Debug, PartialEq)]
pub struct EpochStats {
    pub epoch: usize,
    /// Perplexity over the training pass itself (weights moving).
    pub train_ppl: f64,
    pub dev_ppl: f64,
    /// General learning rate the epoch was run with.
    pub lr: f64,
}

/// What [`train`] did, epoch by epoch.
#[derive(Clone, Debug)]
pub struct TrainReport {
    /// Dev perplexity of the initial weights, before any epoch.
    pub initial_dev_ppl: f64,
    pub epochs: Vec<EpochStats>,
    /// Epoch whose weights were returned; 0 means the initial weights.
    pub best_epoch: usize,
}

/// Run the full training loop and return the weights from the best dev
/// epoch.
///
/// Each epoch makes one pass over `train_set` in order (shuffle upstream
/// if desired), then measures dev perplexity with the document vector
/// adapting online whenever the model has one. When the relative dev
/// improvement falls below `cfg.decay_trigger` the general rate is halved
/// (by `cfg.lr_decay_factor`); training stops after `cfg.max_epochs`, or
/// earlier once the rate has decayed below 1e-4 and improvement is gone,
/// or aborts with an error if dev perplexity exceeds ten times its
/// starting value.
pub fn train(
    params: ModelParams,
    train_set: &Dataset,
    dev_set: &Dataset,
    cfg: &TrainConfig,
) -> Result<(ModelParams, TrainReport)> {
    if train_set.is_empty() || dev_set.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let mut params = params;
    let policy = OnlinePolicy::for_model(&params, cfg.doc_lr);
    let initial_dev_ppl = perplexity(&params, dev_set, &policy)?.perplexity;

    let mut best = params.clone();
    let mut best_ppl = initial_dev_ppl;
    let mut best_epoch = 0usize;
    let mut report = TrainReport { initial_dev_ppl, epochs: Vec::new(), best_epoch: 0 };

    let mut lr = cfg.general_lr;
    let mut prev_dev_ppl = initial_dev_ppl;
    for epoch in 1..=cfg.max_epochs {
        let epoch_cfg = TrainConfig { general_lr: lr, ..cfg.clone() };
        let mut nll_sum = 0.0f64;
        for sentence in train_set.sentences() {
            nll_sum += train_sentence(&mut params, sentence, &epoch_cfg)?;
        }
        let train_ppl = (nll_sum / train_set.scorable_tokens() as f64).exp();
        let dev_ppl = perplexity(&params, dev_set, &policy)?.perplexity;
        if !dev_ppl.is_finite() || dev_ppl > DIVERGENCE_FACTOR * initial_dev_ppl {
            return Err(Error::Diverged { epoch, dev_ppl, initial_ppl: initial_dev_ppl });
        }
        report.epochs.push(EpochStats { epoch, train_ppl, dev_ppl, lr });

        if dev_ppl < best_ppl {
            best_ppl = dev_ppl;
            best = params.clone();
            best_epoch = epoch;
        }
        let improvement = (prev_dev_ppl - dev_ppl) / prev_dev_ppl;
        prev_dev_ppl = dev_ppl;
        if improvement < cfg.decay_trigger {
            lr *= cfg.lr_decay_factor;
            if lr < MIN_GENERAL_LR {
                break;
            }
        }
    }
    report.best_epoch = best_epoch;
    Ok((best, report))
}
