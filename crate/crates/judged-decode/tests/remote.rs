mod common;

use std::sync::atomic::Ordering;
use std::time::Duration;

use common::{serve, toy_table, Mode};
use judged_decode::RemoteSource;
use judged_decode_core::{
    generate, Error, JudgeConfig, PreferenceAssignment, PreferenceDescription, PrefixTemplate, ProbabilitySource,
    RoleSchedule, TokenId,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn connect(url: &str) -> RemoteSource {
    RemoteSource::connect_with_timeout(url, Duration::from_secs(5)).unwrap()
}

fn ctxs() -> Vec<Vec<TokenId>> {
    vec![vec![], vec![TokenId(0)], vec![TokenId(3), TokenId(1)]]
}

#[test]
fn model_info_is_read_on_connect() {
    let server = serve(toy_table(), Mode::Dense);
    let remote = connect(&server.url);
    assert_eq!(remote.vocab_size(), 4);
    assert_eq!(remote.max_context(), 64);
    assert_eq!(remote.eos_token(), None);
    assert_eq!(remote.info().name, "toy-table");
}

#[test]
fn dense_vectors_match_the_table() {
    let table = toy_table();
    let server = serve(table.clone(), Mode::Dense);
    let remote = connect(&server.url);
    for ctx in ctxs() {
        let local = table.next_distribution(&ctx).unwrap();
        let wire = remote.next_distribution(&ctx).unwrap();
        for (a, b) in local.probs().iter().zip(wire.probs()) {
            assert!((a - b).abs() < 1e-12);
        }
    }
}

#[test]
fn batch_is_one_round_trip_and_matches_singles() {
    let server = serve(toy_table(), Mode::Dense);
    let remote = connect(&server.url);
    let batch = remote.next_distributions_batch(&ctxs()).unwrap();
    assert_eq!(server.logprob_calls.load(Ordering::SeqCst), 1);
    for (ctx, d) in ctxs().iter().zip(&batch) {
        assert_eq!(&remote.next_distribution(ctx).unwrap(), d);
    }
    let dup = remote.next_distributions_batch(&[vec![TokenId(2)], vec![TokenId(2)]]).unwrap();
    assert_eq!(dup[0], dup[1]);
}

#[test]
fn large_batches_are_split() {
    let server = serve(toy_table(), Mode::Dense);
    let remote = connect(&server.url);
    let many: Vec<Vec<TokenId>> = (0..130).map(|i| vec![TokenId(i % 4)]).collect();
    let out = remote.next_distributions_batch(&many).unwrap();
    assert_eq!(out.len(), 130);
    assert_eq!(server.logprob_calls.load(Ordering::SeqCst), 3);
}

#[test]
fn sparse_vectors_drop_missing_mass() {
    let server = serve(toy_table(), Mode::Sparse(2));
    let remote = connect(&server.url);
    let d = remote.next_distribution(&[TokenId(0)]).unwrap();
    // top two of [0.5, 0.25, 0.125, 0.125], renormalized
    assert!((d.probs()[0] - 2.0 / 3.0).abs() < 1e-12);
    assert!((d.probs()[1] - 1.0 / 3.0).abs() < 1e-12);
    assert_eq!(&d.probs()[2..], &[0.0, 0.0]);
}

#[test]
fn status_codes_map_to_errors() {
    let server = serve(toy_table(), Mode::Dense);
    let remote = connect(&server.url);
    for (code, check) in [
        (400u16, (|e: &Error| matches!(e, Error::Protocol(_))) as fn(&Error) -> bool),
        (413, |e| matches!(e, Error::Protocol(_))),
        (422, |e| matches!(e, Error::ContextTooLong { .. })),
        (503, |e| matches!(e, Error::BackendUnavailable(_))),
        (500, |e| matches!(e, Error::Protocol(_))),
    ] {
        *server.mode.lock().unwrap() = Mode::Status(code);
        let err = remote.next_distribution(&[]).unwrap_err();
        assert!(check(&err), "status {code} gave {err:?}");
    }
}

#[test]
fn long_contexts_are_refused_before_sending() {
    let server = serve(toy_table(), Mode::Dense);
    let remote = connect(&server.url);
    let err = remote.next_distribution(&vec![TokenId(0); 65]).unwrap_err();
    assert_eq!(err, Error::ContextTooLong { len: 65, max: 64 });
    assert_eq!(server.logprob_calls.load(Ordering::SeqCst), 0);
}

#[test]
fn unnormalized_dense_vectors_are_rejected() {
    let server = serve(toy_table(), Mode::Skewed(1e-3));
    let remote = connect(&server.url);
    assert!(matches!(remote.next_distribution(&[]), Err(Error::Protocol(_))));
    *server.mode.lock().unwrap() = Mode::Skewed(1e-6);
    let d = remote.next_distribution(&[]).unwrap();
    assert!((d.probs().iter().sum::<f64>() - 1.0).abs() < 1e-12);
}

#[test]
fn unreachable_server_is_unavailable() {
    let url = {
        let server = serve(toy_table(), Mode::Dense);
        server.url.clone()
    };
    let err = RemoteSource::connect_with_timeout(&url, Duration::from_millis(500)).unwrap_err();
    assert!(matches!(err, Error::BackendUnavailable(_)), "{err:?}");
}

#[test]
fn tokenize_and_detokenize() {
    let table = toy_table();
    let server = serve(table.clone(), Mode::Dense);
    let remote = connect(&server.url);
    assert_eq!(remote.tokenize("harmless helpful").unwrap(), vec![TokenId(0), TokenId(1)]);
    assert_eq!(remote.tokenize("some words").unwrap(), table.tokenize("some words").unwrap());
    assert_eq!(remote.detokenize(&[TokenId(2), TokenId(3)]).unwrap().as_deref(), Some("<2><3>"));
}

#[test]
fn served_table_reproduces_in_process_tokens() {
    let table = toy_table();
    let server = serve(table.clone(), Mode::Dense);
    let remote = connect(&server.url);
    let assignment = PreferenceAssignment::new(
        vec![PreferenceDescription::new("a", "harmless").unwrap()],
        vec![PreferenceDescription::new("b", "helpful").unwrap()],
        RoleSchedule::Alternate,
    )
    .unwrap();
    let cfg = JudgeConfig {
        lambda: 3,
        max_new_tokens: 24,
        template: PrefixTemplate::new("{prefs}", "; ").unwrap(),
        ..Default::default()
    };
    for seed in 0..5 {
        let local = generate(&table, &assignment, &[TokenId(2)], &cfg, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
        let wire = generate(&remote, &assignment, &[TokenId(2)], &cfg, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
        assert_eq!(local.output, wire.output);
        let reserved =
            |r: &judged_decode_core::GenerationResult| r.traces.iter().map(|t| t.reserved).collect::<Vec<_>>();
        assert_eq!(reserved(&local), reserved(&wire));
    }
}
