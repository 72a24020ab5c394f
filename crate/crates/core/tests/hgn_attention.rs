mod common;

use common::{random_store, small_spec, synth_corpus};
use drem::corpus::{Corpus, EntityType};
use drem::hgn::{user_vector, DEFAULT_HISTORY_CAP};
use drem::model::{encode_query, ModelKind};
use rand::Rng;

#[test]
fn traces_are_normalized() {
    let corpus = synth_corpus(&small_spec(), 5);
    let mut rng = drem::rng::fork(5, "fuzz");
    for _ in 0..50 {
        let store = random_store(&corpus, ModelKind::DremHgn, 6, 2, &mut rng);
        for _ in 0..20 {
            let u = rng.gen_range(0..corpus.count(EntityType::User));
            let q = rng.gen_range(0..corpus.queries().len());
            let query = encode_query(&corpus.query(q).words, &store);
            let (_, trace) = user_vector(u, &query, &corpus, &store, DEFAULT_HISTORY_CAP);
            assert!(trace.normalization_error() < 1e-9);
            assert!(trace.all_nonnegative());
        }
    }
}

#[test]
fn cold_user_gets_zero_vector() {
    let synth = drem::corpus::generate_synthetic(&small_spec(), 3).unwrap();
    let purchases = format!("{}ucold\tcategory0 style0\ti0\ttest\n", synth.purchases);
    let corpus = Corpus::from_strs(&synth.triples, &purchases, 1).unwrap();
    let cold = corpus.registry(EntityType::User).get("ucold").unwrap();
    let mut rng = drem::rng::fork(3, "cold");
    let store = random_store(&corpus, ModelKind::DremHgn, 8, 2, &mut rng);
    let query = encode_query(&corpus.query(0).words, &store);
    let (u, trace) = user_vector(cold, &query, &corpus, &store, DEFAULT_HISTORY_CAP);
    assert!(u.iter().all(|&x| x == 0.0));
    for w in trace.domain_weights.iter().chain([&trace.zero_weight]) {
        assert!((w - 0.25).abs() < 1e-12);
    }
}
