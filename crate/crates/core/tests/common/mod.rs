#![allow(dead_code)]

use drem::corpus::{generate_synthetic, Corpus, EntityType, SynthSpec, Triple};
use drem::model::{loss_and_grad, Example, ModelConfig, ModelKind, SampledExample};
use drem::store::{EmbeddingStore, RegistrySizes, StoreSpec};
use rand::Rng;

pub fn synth_corpus(spec: &SynthSpec, seed: u64) -> Corpus {
    let s = generate_synthetic(spec, seed).unwrap();
    Corpus::from_strs(&s.triples, &s.purchases, 1).unwrap()
}

pub fn small_spec() -> SynthSpec {
    SynthSpec {
        users: 12,
        items: 16,
        brands: 4,
        categories: 2,
        queries: 6,
        sessions_per_user: 3,
        test_fraction: 0.3,
    }
}

/// Store with every parameter drawn uniformly from ±scale, biases included,
/// so that every tanh and softmax operates away from its trivial regime.
pub fn random_store(corpus: &Corpus, kind: ModelKind, dim: usize, heads: usize, rng: &mut impl Rng) -> EmbeddingStore {
    let mut store = EmbeddingStore::init(
        StoreSpec {
            kind,
            dim,
            heads,
            sizes: RegistrySizes::of(corpus),
        },
        rng.gen(),
    )
    .unwrap();
    let ids: Vec<_> = store.tables().map(|(id, _)| id).collect();
    for id in ids {
        for v in store.table_mut(id).values.iter_mut() {
            *v = rng.gen_range(-0.8..0.8);
        }
    }
    store
}

pub fn random_batch(corpus: &Corpus, size: usize, k: usize, rng: &mut impl Rng) -> Vec<SampledExample> {
    let purchases: Vec<_> = corpus.train_purchases().copied().collect();
    let triples = corpus.triples();
    (0..size)
        .map(|_| {
            if rng.gen_bool(0.6) {
                let p = purchases[rng.gen_range(0..purchases.len())];
                SampledExample {
                    example: Example::Purchase {
                        user: p.user,
                        query: p.query,
                        item: p.item,
                    },
                    negatives: (0..k).map(|_| rng.gen_range(0..corpus.count(EntityType::Item))).collect(),
                }
            } else {
                let t: Triple = triples[rng.gen_range(0..triples.len())];
                let n = corpus.count(t.tail.kind);
                SampledExample {
                    example: Example::Triple(t),
                    negatives: (0..k).map(|_| rng.gen_range(0..n)).collect(),
                }
            }
        })
        .collect()
}

/// Largest relative error between the analytic gradient and central finite
/// differences over every coordinate the batch touches. Relative error is
/// |a − n| / max(|a|, |n|, 1e-6).
pub fn max_gradient_error(
    batch: &[SampledExample],
    corpus: &Corpus,
    store: &EmbeddingStore,
    config: &ModelConfig,
    h: f64,
) -> f64 {
    let (_, grads) = loss_and_grad(batch, corpus, store, config).unwrap();
    let mut probe = store.clone();
    let mut worst: f64 = 0.0;
    for ((id, row), analytic) in grads.iter() {
        for (c, &a) in analytic.iter().enumerate() {
            let orig = probe.row(id, row)[c];
            probe.row_mut(id, row)[c] = orig + h;
            let plus = loss_and_grad(batch, corpus, &probe, config).unwrap().0;
            probe.row_mut(id, row)[c] = orig - h;
            let minus = loss_and_grad(batch, corpus, &probe, config).unwrap().0;
            probe.row_mut(id, row)[c] = orig;
            let numeric = (plus - minus) / (2.0 * h);
            let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-6);
            worst = worst.max(rel);
        }
    }
    worst
}

// Independent reference implementations. They follow the textbook
// definitions literally (prefix scans, explicit loops) and share no code with
// the library.

pub fn brute_ap(ranked: &[usize], relevant: &std::collections::BTreeSet<usize>) -> f64 {
    let mut total = 0.0;
    for r in 1..=ranked.len() {
        if relevant.contains(&ranked[r - 1]) {
            let hits = ranked[..r].iter().filter(|i| relevant.contains(i)).count();
            total += hits as f64 / r as f64;
        }
    }
    total / relevant.len() as f64
}

pub fn brute_rr(ranked: &[usize], relevant: &std::collections::BTreeSet<usize>) -> f64 {
    for r in 1..=ranked.len() {
        if relevant.contains(&ranked[r - 1]) {
            return 1.0 / r as f64;
        }
    }
    0.0
}

pub fn brute_ndcg(ranked: &[usize], relevant: &std::collections::BTreeSet<usize>, k: usize) -> f64 {
    let gains: Vec<f64> = (0..k)
        .map(|i| match ranked.get(i) {
            Some(item) if relevant.contains(item) => 1.0,
            _ => 0.0,
        })
        .collect();
    let dcg: f64 = gains.iter().enumerate().map(|(i, g)| g / ((i + 2) as f64).log2()).sum();
    let mut ideal_gains = vec![0.0; k];
    for g in ideal_gains.iter_mut().take(relevant.len()) {
        *g = 1.0;
    }
    let idcg: f64 = ideal_gains.iter().enumerate().map(|(i, g)| g / ((i + 2) as f64).log2()).sum();
    if idcg == 0.0 {
        0.0
    } else {
        dcg / idcg
    }
}

/// Exhaustive schema walk: every sequence over the six relations with at
/// most `max_len` hops past search_purchase on the user side and at most
/// `max_len` on the item side, kept when both walks type-check and end at
/// the same type.
pub fn brute_path_count(max_len: usize) -> usize {
    use drem::corpus::{EntityType, Relation};
    fn sequences(max_len: usize) -> Vec<Vec<Relation>> {
        let mut out = vec![vec![]];
        let mut layer = vec![vec![]];
        for _ in 0..max_len {
            let mut next = Vec::new();
            for s in &layer {
                for r in Relation::ALL {
                    let mut e: Vec<Relation> = s.clone();
                    e.push(r);
                    next.push(e);
                }
            }
            out.extend(next.iter().cloned());
            layer = next;
        }
        out
    }
    fn end(start: EntityType, seq: &[Relation]) -> Option<EntityType> {
        let mut t = start;
        for r in seq {
            if r.head_type() != t {
                return None;
            }
            t = r.tail_type();
        }
        Some(t)
    }
    let all = sequences(max_len);
    let mut count = 0;
    for u in &all {
        let mut user = vec![Relation::SearchPurchase];
        user.extend(u.iter().copied());
        let Some(ut) = end(EntityType::User, &user) else { continue };
        if u.contains(&Relation::SearchPurchase) {
            continue;
        }
        for i in &all {
            if i.contains(&Relation::SearchPurchase) {
                continue;
            }
            if end(EntityType::Item, i) == Some(ut) {
                count += 1;
            }
        }
    }
    count
}

/// Soft-match score written out term by term.
pub fn brute_soft_match(user_end: &[f64], item_end: &[f64], candidates: &[Vec<f64>], target: usize, j: usize, m: usize, gamma: f64) -> f64 {
    let d = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
    let side = |end: &[f64], hops: usize| {
        let z: f64 = candidates.iter().map(|c| d(end, c).exp()).sum();
        d(end, &candidates[target]) - gamma * hops as f64 - z.ln()
    };
    side(user_end, j) + side(item_end, m)
}
