//! Helpers shared by the integration-test targets: a finite-difference
//! oracle for the sentence loss, random model instances, and the synthetic
//! topical corpus used by the end-to-end checks.
//!
//! BPTT differentiates the sentence loss with the per-step document values
//! held at whatever the forward pass recorded (their dependence on the
//! weights through the online updates is deliberately not unrolled, and the
//! step-0 document value — the learned initial vector itself — carries the
//! gradient for `d0`). The finite-difference oracle therefore evaluates
//! exactly that function: a replay of the sentence with the recorded
//! document sequence pinned, built here from single-step calls so it shares
//! no code with `sentence_forward`.
#![allow(dead_code)] // each test target uses its own subset of these helpers

use docrnn::{
    bptt_sentence, doc_online_update, finite_diff_grad, train, ClassAssignment, Dataset,
    Gradients, ModelParams, OnlinePolicy, Rng, StepState, TrainConfig, Vocabulary,
};

pub const EPS: f64 = 1e-5;
pub const TOL: f64 = 1e-4;

/// Relative L2 error between an analytic and a finite-difference block.
pub fn rel_err(analytic: &[f64], fd: &[f64]) -> f64 {
    assert_eq!(analytic.len(), fd.len());
    let norm = |xs: &[f64]| xs.iter().map(|x| x * x).sum::<f64>().sqrt();
    let diff: Vec<f64> = analytic.iter().zip(fd).map(|(a, b)| a - b).collect();
    // The floor only matters for blocks that are genuinely zero on both
    // sides, where finite-difference rounding noise would otherwise divide
    // by almost nothing.
    norm(&diff) / norm(analytic).max(norm(fd)).max(1e-3)
}

/// Sentence loss replayed with a pinned per-step document sequence.
pub fn replay_nll(params: &ModelParams, sentence: &[u32], docs: &[Vec<f64>]) -> f64 {
    let mut state = params.initial_state(sentence[0]);
    let mut nll = 0.0;
    for t in 0..sentence.len() - 1 {
        if params.d > 0 {
            state.doc = docs[t].clone();
        }
        let target = sentence[t + 1];
        let (hidden, out) = params.forward_step_for_class(&state, params.classes.class_of(target));
        nll -= out.next_word_prob(target, &params.classes).ln();
        state.hidden = hidden;
        state.prev_word = target;
    }
    nll
}

pub struct Instance {
    pub params: ModelParams,
    pub sentence: Vec<u32>,
}

pub fn random_instance(rng: &mut Rng, force_d: Option<usize>) -> Instance {
    let v = 4 + rng.below(5); // 4..=8
    let c = 1 + rng.below(3.min(v)); // 1..=3
    let m = 1 + rng.below(4); // 1..=4
    let d = force_d.unwrap_or_else(|| 1 + rng.below(3)); // 1..=3 unless forced
    // A random partition with every class inhabited.
    let mut class_of: Vec<u32> = (0..v).map(|w| (w % c) as u32).collect();
    rng.shuffle(&mut class_of);
    let classes = ClassAssignment::from_class_of(class_of, c).unwrap();
    let params = ModelParams::init(m, d, &classes, 0.5, rng).unwrap();
    // Word 0 plays the start marker; targets avoid it (it is never scored).
    let len = 2 + rng.below(4); // 2..=5 tokens
    let mut sentence = vec![0u32];
    for _ in 0..len - 1 {
        sentence.push(1 + rng.below(v - 1) as u32);
    }
    Instance { params, sentence }
}

/// Worst relative error across every gradient block of one instance,
/// returned as `(block name, error)` for the caller to judge.
pub fn worst_block_error(inst: &Instance, doc_lr: f64) -> (String, f64) {
    let params = &inst.params;
    let sentence = &inst.sentence;
    // A large online rate makes the per-step document values genuinely
    // different, so the check exercises the pinned-sequence semantics.
    let policy = OnlinePolicy::for_model(params, doc_lr);
    let trace = params.sentence_forward(sentence, &policy).unwrap();
    let docs = trace.docs.clone();
    assert!(
        (replay_nll(params, sentence, &docs) - trace.nll).abs() < 1e-12,
        "replay disagrees with the traced loss"
    );
    let grads: Gradients = bptt_sentence(params, &trace).unwrap();

    let mut worst = (String::new(), 0.0f64);
    let mut record = |name: &str, analytic: &[f64], fd: Vec<f64>| {
        let err = rel_err(analytic, &fd);
        if err > worst.1 {
            worst = (name.to_string(), err);
        }
    };

    let fd_matrix = |write: &dyn Fn(&mut ModelParams, &[f64]), theta: &[f64]| -> Vec<f64> {
        finite_diff_grad(
            |probe: &[f64]| {
                let mut p = params.clone();
                write(&mut p, probe);
                replay_nll(&p, sentence, &docs)
            },
            theta,
            EPS,
        )
        .unwrap()
    };

    record(
        "E",
        grads.e.data(),
        fd_matrix(&|p, probe| p.e.data_mut().copy_from_slice(probe), params.e.data()),
    );
    record(
        "W_h",
        grads.w_h.data(),
        fd_matrix(&|p, probe| p.w_h.data_mut().copy_from_slice(probe), params.w_h.data()),
    );
    record(
        "W_c",
        grads.w_c.data(),
        fd_matrix(&|p, probe| p.w_c.data_mut().copy_from_slice(probe), params.w_c.data()),
    );
    record(
        "W_o",
        grads.w_o.data(),
        fd_matrix(&|p, probe| p.w_o.data_mut().copy_from_slice(probe), params.w_o.data()),
    );
    record(
        "h0",
        &grads.h0,
        fd_matrix(&|p, probe| p.h0.copy_from_slice(probe), &params.h0),
    );

    if params.d > 0 {
        let doc = params.doc.as_ref().unwrap();
        let gdoc = grads.doc.as_ref().unwrap();
        record(
            "W_dc",
            gdoc.w_dc.data(),
            fd_matrix(
                &|p, probe| p.doc.as_mut().unwrap().w_dc.data_mut().copy_from_slice(probe),
                doc.w_dc.data(),
            ),
        );
        record(
            "W_do",
            gdoc.w_do.data(),
            fd_matrix(
                &|p, probe| p.doc.as_mut().unwrap().w_do.data_mut().copy_from_slice(probe),
                doc.w_do.data(),
            ),
        );
        // d0 feeds the loss as the step-0 document value; later steps keep
        // their recorded values.
        let fd_d0 = finite_diff_grad(
            |probe: &[f64]| {
                let mut pinned = docs.clone();
                pinned[0] = probe.to_vec();
                replay_nll(params, sentence, &pinned)
            },
            &doc.d0,
            EPS,
        )
        .unwrap();
        record("d0", &gdoc.d0, fd_d0);
    }
    worst
}

/// Worst relative error, over every position of one instance, between the
/// gradient the online update descends and finite differences of that
/// position's own loss in the document vector.
pub fn worst_online_update_error(inst: &Instance, rate: f64) -> f64 {
    let params = &inst.params;
    let trace = params
        .sentence_forward(&inst.sentence, &OnlinePolicy::for_model(params, rate))
        .unwrap();
    let mut worst = 0.0f64;
    for t in 0..trace.targets.len() {
        let state = StepState {
            hidden: if t == 0 { params.h0.clone() } else { trace.hiddens[t - 1].clone() },
            doc: trace.docs[t].clone(),
            prev_word: trace.inputs[t],
        };
        let target = trace.targets[t];
        let class = params.classes.class_of(target);
        let (_, out) = params.forward_step_for_class(&state, class);
        // Recover the gradient the update used by running it at rate 1 and
        // differencing.
        let updated = doc_online_update(params, &out, target, &state.doc, 1.0).unwrap();
        let analytic: Vec<f64> = state.doc.iter().zip(&updated).map(|(d, u)| d - u).collect();

        let fd = finite_diff_grad(
            |probe: &[f64]| {
                let s = StepState {
                    hidden: state.hidden.clone(),
                    doc: probe.to_vec(),
                    prev_word: state.prev_word,
                };
                let (_, o) = params.forward_step_for_class(&s, class);
                -o.next_word_prob(target, &params.classes).ln()
            },
            &state.doc,
            EPS,
        )
        .unwrap();
        worst = worst.max(rel_err(&analytic, &fd));
    }
    worst
}

// ---------------------------------------------------------------------------
// Synthetic topical corpus: three disjoint topic vocabularies mixed with a
// shared pool. Within a sentence every topic token comes from one topic, so
// the only long-range structure is which topic the sentence is about —
// exactly the signal a per-sentence document vector can accumulate and a
// fixed-size recurrence struggles to hold across 16–28 tokens.
// ---------------------------------------------------------------------------

pub const TOPICS: usize = 3;
const TOPIC_WORDS: usize = 10;
const SHARED_WORDS: usize = 8;
/// Probability that a token is drawn from the shared pool rather than the
/// sentence's topic distribution.
const SHARED_P: f64 = 0.8;
/// Online adaptation rate used throughout the topical-corpus checks.
pub const TOPIC_DOC_LR: f64 = 0.1;

fn weighted(rng: &mut Rng, cum: &[f64]) -> usize {
    let x = rng.uniform(0.0, *cum.last().unwrap());
    cum.iter().position(|&c| x < c).unwrap_or(cum.len() - 1)
}

fn cum_weights(n: usize) -> Vec<f64> {
    let mut acc = 0.0;
    (0..n)
        .map(|j| {
            acc += 1.0 / (j + 1) as f64;
            acc
        })
        .collect()
}

/// Sentences whose topic tokens follow one of three disjoint rank-weighted
/// distributions (topic = sentence index mod 3); shared tokens are uniform.
pub fn synth_topic_corpus(n: usize, seed: u64) -> (Vec<Vec<String>>, Vec<usize>) {
    let mut rng = Rng::new(seed);
    let topic_cum = cum_weights(TOPIC_WORDS);
    let mut sentences = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let topic = i % TOPICS;
        let len = 16 + rng.below(13); // 16..=28 tokens
        let mut s = Vec::with_capacity(len);
        for _ in 0..len {
            if rng.next_f64() < SHARED_P {
                s.push(format!("f{}", rng.below(SHARED_WORDS)));
            } else {
                s.push(format!("t{}w{}", topic, weighted(&mut rng, &topic_cum)));
            }
        }
        sentences.push(s);
        labels.push(topic);
    }
    (sentences, labels)
}

pub struct TopicData {
    pub vocab: Vocabulary,
    pub train_set: Dataset,
    pub dev_set: Dataset,
    pub test_set: Dataset,
    pub test_labels: Vec<usize>,
}

/// The frozen train/dev/test split every topical-corpus check shares.
pub fn build_topic_data() -> TopicData {
    let (train_raw, _) = synth_topic_corpus(2400, 101);
    let (dev_raw, _) = synth_topic_corpus(300, 202);
    let (test_raw, test_labels) = synth_topic_corpus(300, 303);
    let vocab = Vocabulary::build(&train_raw, 1, 3).unwrap();
    let train_set = vocab.encode(&train_raw);
    let dev_set = vocab.encode(&dev_raw);
    let test_set = vocab.encode(&test_raw);
    TopicData { vocab, train_set, dev_set, test_set, test_labels }
}

/// Train an (M, D) model on the topical corpus with the shared recipe.
pub fn train_topic_model(data: &TopicData, m: usize, d: usize, seed: u64) -> ModelParams {
    let params = ModelParams::init(m, d, data.vocab.classes(), 0.1, &mut Rng::new(seed)).unwrap();
    let cfg = TrainConfig { max_epochs: 40, doc_lr: TOPIC_DOC_LR, seed, ..TrainConfig::default() };
    let (best, _) = train(params, &data.train_set, &data.dev_set, &cfg).unwrap();
    best
}
