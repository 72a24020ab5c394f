use crate::corpus::{Corpus, EntityType};
use crate::hgn::{AttentionTrace, HgnForward};
use crate::store::{EmbeddingStore, ModelKind, TableId};
use crate::vecmath::dot;

/// Intermediate values of a query encoding, kept for backpropagation.
#[derive(Clone, Debug, PartialEq)]
pub(crate) struct QueryEncoding {
    pub mean: Vec<f64>,
    pub vector: Vec<f64>,
}

pub(crate) fn encode_query_cached(words: &[usize], store: &EmbeddingStore) -> QueryEncoding {
    let a = store.dim();
    let mut mean = vec![0.0; a];
    for &w in words {
        crate::vecmath::add_assign(&mut mean, store.entity(EntityType::Word, w));
    }
    if !words.is_empty() {
        let n = words.len() as f64;
        mean.iter_mut().for_each(|v| *v /= n);
    }
    let w = store.row(TableId::QueryProjection, 0);
    let b = store.row(TableId::QueryBias, 0);
    let vector = (0..a)
        .map(|p| (dot(&w[p * a..(p + 1) * a], &mean) + b[p]).tanh())
        .collect();
    QueryEncoding { mean, vector }
}

/// `tanh(W · mean(word vectors) + b)`; an empty word list encodes as `tanh(b)`.
pub fn encode_query(words: &[usize], store: &EmbeddingStore) -> Vec<f64> {
    encode_query_cached(words, store).vector
}

/// `(h + r)·t`.
pub fn triple_logit(head: &[f64], relation: &[f64], tail: &[f64]) -> f64 {
    head.iter()
        .zip(relation)
        .zip(tail)
        .map(|((h, r), t)| (h + r) * t)
        .sum()
}

/// `(u + q)·i`.
pub fn purchase_logit(user: &[f64], query: &[f64], item: &[f64]) -> f64 {
    triple_logit(user, query, item)
}

/// Purchase intent of one (user, query): query vector, user vector, and for
/// the gated model the attention trace that produced the user vector.
#[derive(Clone, Debug, PartialEq)]
pub struct Intent {
    pub query: Vec<f64>,
    pub user: Vec<f64>,
    pub trace: Option<AttentionTrace>,
}

impl Intent {
    /// `u + q`.
    pub fn combined(&self) -> Vec<f64> {
        self.user.iter().zip(&self.query).map(|(u, q)| u + q).collect()
    }
}

pub fn purchase_intent(
    user: usize,
    query: usize,
    corpus: &Corpus,
    store: &EmbeddingStore,
    history_cap: usize,
) -> Intent {
    let q = encode_query(&corpus.query(query).words, store);
    match store.kind() {
        ModelKind::Drem => Intent {
            user: store.entity(EntityType::User, user).to_vec(),
            query: q,
            trace: None,
        },
        ModelKind::DremHgn => {
            let fwd = HgnForward::run(user, &q, corpus, store, history_cap);
            Intent {
                user: fwd.user_vector().to_vec(),
                trace: Some(fwd.trace()),
                query: q,
            }
        }
    }
}
