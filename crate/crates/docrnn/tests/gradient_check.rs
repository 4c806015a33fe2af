//! Finite-difference verification of every analytic gradient. The oracle
//! and its pinned-document-sequence semantics live in `common`.

mod common;

use common::{
    random_instance, rel_err, replay_nll, worst_block_error, worst_online_update_error, EPS, TOL,
};
use docrnn::{bptt_sentence, finite_diff_grad, OnlinePolicy, Rng};

#[test]
fn bptt_matches_finite_differences_on_random_instances() {
    let mut rng = Rng::new(20_240_101);
    for i in 0..24 {
        // Every fourth instance is a plain model with no document vector.
        let force_d = if i % 4 == 3 { Some(0) } else { None };
        let inst = random_instance(&mut rng, force_d);
        let (block, err) = worst_block_error(&inst, 0.5);
        assert!(
            err < TOL,
            "instance {i} (M={} D={} V={} C={} len={}): {block} gradient off by \
             relative {err:.3e} (tolerance {TOL:.0e})",
            inst.params.m,
            inst.params.d,
            inst.params.v,
            inst.params.c,
            inst.sentence.len()
        );
    }
}

#[test]
fn bptt_matches_finite_differences_with_updates_disabled() {
    // With the online update off, the document sequence is constant d0 and
    // the same pinned-replay oracle applies verbatim.
    let mut rng = Rng::new(777);
    for i in 0..4 {
        let inst = random_instance(&mut rng, None);
        let trace = inst.params.sentence_forward(&inst.sentence, &OnlinePolicy::disabled()).unwrap();
        let grads = bptt_sentence(&inst.params, &trace).unwrap();
        let docs = trace.docs.clone();
        let fd = finite_diff_grad(
            |probe: &[f64]| {
                let mut p = inst.params.clone();
                p.w_c.data_mut().copy_from_slice(probe);
                replay_nll(&p, &inst.sentence, &docs)
            },
            inst.params.w_c.data(),
            EPS,
        )
        .unwrap();
        let err = rel_err(grads.w_c.data(), &fd);
        assert!(err < TOL, "instance {i}: W_c off by {err:.3e} with updates disabled");
    }
}

#[test]
fn online_doc_update_direction_matches_finite_differences() {
    // The online step must move the document vector down the gradient of
    // the position's own loss.
    let mut rng = Rng::new(31_337);
    for i in 0..8 {
        let inst = random_instance(&mut rng, None);
        let err = worst_online_update_error(&inst, 0.5);
        assert!(err < TOL, "instance {i}: online update gradient off by {err:.3e}");
    }
}
