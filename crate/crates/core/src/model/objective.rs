//! Negative-sampling objective and its analytic gradient.
//!
//! Each positive example contributes
//! `-[ln σ(s⁺) + Σₖ ln σ(-sₖ⁻)]`; the batch loss is the mean over examples.

use super::scoring::{encode_query_cached, QueryEncoding};
use super::ModelConfig;
use crate::corpus::{Corpus, EntityType, Triple};
use crate::error::{Error, Result};
use crate::hgn::HgnForward;
use crate::store::{EmbeddingStore, Gradients, ModelKind, TableId};
use crate::vecmath::{add_assign, axpy, dot, log_sigmoid, sigmoid};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Example {
    Purchase { user: usize, query: usize, item: usize },
    Triple(Triple),
}

/// A positive example with its drawn negatives (items for purchases, tail
/// entities for triples).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SampledExample {
    pub example: Example,
    pub negatives: Vec<usize>,
}

/// Scores `positive` and `negatives` against `context`, adds the loss terms,
/// and accumulates gradients into the candidate rows. Returns (loss, ∂/∂context).
fn contrast(
    context: &[f64],
    table: TableId,
    positive: usize,
    negatives: &[usize],
    store: &EmbeddingStore,
    grads: &mut Gradients,
) -> (f64, Vec<f64>) {
    let a = context.len();
    let mut grad_context = vec![0.0; a];
    let mut loss = 0.0;
    let mut term = |id: usize, sign: f64, grads: &mut Gradients| {
        let cand = store.row(table, id);
        let s = dot(context, cand);
        loss -= log_sigmoid(sign * s);
        // d/ds of -ln σ(sign·s)
        let g = if sign > 0.0 { sigmoid(s) - 1.0 } else { sigmoid(s) };
        axpy(&mut grad_context, g, cand);
        axpy(grads.row_mut(table, id, a), g, context);
    };
    term(positive, 1.0, grads);
    for &n in negatives {
        term(n, -1.0, grads);
    }
    (loss, grad_context)
}

fn query_backward(
    enc: &QueryEncoding,
    words: &[usize],
    grad_q: &[f64],
    store: &EmbeddingStore,
    grads: &mut Gradients,
) {
    let a = store.dim();
    let grad_z: Vec<f64> = grad_q
        .iter()
        .zip(&enc.vector)
        .map(|(g, q)| g * (1.0 - q * q))
        .collect();
    add_assign(grads.row_mut(TableId::QueryBias, 0, a), &grad_z);
    {
        let gw = grads.row_mut(TableId::QueryProjection, 0, a * a);
        for (p, &gz) in grad_z.iter().enumerate() {
            axpy(&mut gw[p * a..(p + 1) * a], gz, &enc.mean);
        }
    }
    if words.is_empty() {
        return;
    }
    let w = store.row(TableId::QueryProjection, 0);
    let mut grad_mean = vec![0.0; a];
    for (p, &gz) in grad_z.iter().enumerate() {
        axpy(&mut grad_mean, gz, &w[p * a..(p + 1) * a]);
    }
    let share = 1.0 / words.len() as f64;
    for &word in words {
        axpy(grads.row_mut(TableId::Word, word, a), share, &grad_mean);
    }
}

fn example_loss(
    ex: &SampledExample,
    corpus: &Corpus,
    store: &EmbeddingStore,
    config: &ModelConfig,
    grads: &mut Gradients,
) -> f64 {
    let a = store.dim();
    match ex.example {
        Example::Purchase { user, query, item } => {
            let words = &corpus.query(query).words;
            let enc = encode_query_cached(words, store);
            let hgn = match store.kind() {
                ModelKind::DremHgn => Some(HgnForward::run_excluding(
                    user,
                    &enc.vector,
                    corpus,
                    store,
                    config.history_cap,
                    Some(item),
                )),
                ModelKind::Drem => None,
            };
            let user_vec = match &hgn {
                Some(f) => f.user_vector(),
                None => store.entity(EntityType::User, user),
            };
            let intent: Vec<f64> = user_vec.iter().zip(&enc.vector).map(|(u, q)| u + q).collect();
            let (loss, grad_intent) = contrast(&intent, TableId::Item, item, &ex.negatives, store, grads);
            let mut grad_q = grad_intent.clone();
            match &hgn {
                Some(f) => {
                    let via_user = f.backward(&grad_intent, &enc.vector, store, grads);
                    add_assign(&mut grad_q, &via_user);
                }
                None => add_assign(grads.row_mut(TableId::User, user, a), &grad_intent),
            }
            query_backward(&enc, words, &grad_q, store, grads);
            loss
        }
        Example::Triple(t) => {
            let head_table = TableId::for_entity(t.head.kind);
            let tail_table = TableId::for_entity(t.tail.kind);
            let rel_row = t
                .relation
                .knowledge_index()
                .expect("triples carry knowledge relations only");
            let context: Vec<f64> = store
                .row(head_table, t.head.id)
                .iter()
                .zip(store.row(TableId::Relation, rel_row))
                .map(|(h, r)| h + r)
                .collect();
            let (loss, grad_context) = contrast(&context, tail_table, t.tail.id, &ex.negatives, store, grads);
            add_assign(grads.row_mut(head_table, t.head.id, a), &grad_context);
            add_assign(grads.row_mut(TableId::Relation, rel_row, a), &grad_context);
            loss
        }
    }
}

/// Summed loss and unscaled gradients of a slice of examples.
pub(crate) fn accumulate(
    batch: &[SampledExample],
    corpus: &Corpus,
    store: &EmbeddingStore,
    config: &ModelConfig,
) -> (f64, Gradients) {
    let mut grads = Gradients::new();
    let loss = batch
        .iter()
        .map(|ex| example_loss(ex, corpus, store, config, &mut grads))
        .sum();
    (loss, grads)
}

/// Mean negated log-likelihood of `batch` and its gradient with respect to
/// every parameter the batch touches.
pub fn loss_and_grad(
    batch: &[SampledExample],
    corpus: &Corpus,
    store: &EmbeddingStore,
    config: &ModelConfig,
) -> Result<(f64, Gradients)> {
    if batch.is_empty() {
        return Err(Error::InvalidArgument("empty batch".into()));
    }
    let (loss, mut grads) = accumulate(batch, corpus, store, config);
    let n = batch.len() as f64;
    grads.scale(1.0 / n);
    let loss = loss / n;
    if !loss.is_finite() {
        return Err(Error::NonFinite(format!("batch loss {loss}")));
    }
    Ok((loss, grads))
}
