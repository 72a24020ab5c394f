use std::collections::{BTreeMap, BTreeSet, HashMap};

use crate::corpus::{Corpus, EntityRef, EntityType, Relation};
use crate::eval::retrieve_topk;
use crate::explain::{observed_meetings, Explanation, ExplanationGroup, Source, MAX_GROUP_SIZE};
use crate::store::EmbeddingStore;
use crate::vecmath::{dot, log_sum_exp};

/// Entity-level features, in layout order.
pub const ENTITY_FEATURES: [&str; 7] = [
    "exist_confidence",
    "existence_rate",
    "entity_iuf",
    "entity_iif",
    "user_entity_mutual_info",
    "item_entity_mutual_info",
    "relation_info_entropy",
];

pub const AGGREGATES: [&str; 3] = ["max", "min", "mean"];

pub const GROUP_FEATURES: [&str; 2] = ["model_mrr", "log_purchase_prob"];

/// 3 slots × 7 features × 3 aggregates, a presence flag per slot, then the
/// group-level features.
pub const GROUP_VECTOR_LEN: usize =
    MAX_GROUP_SIZE * ENTITY_FEATURES.len() * AGGREGATES.len() + MAX_GROUP_SIZE + GROUP_FEATURES.len();

/// Column names of [`build_group_vector`] output.
pub fn group_layout() -> Vec<String> {
    let mut names = Vec::with_capacity(GROUP_VECTOR_LEN);
    for slot in 0..MAX_GROUP_SIZE {
        for f in ENTITY_FEATURES {
            for a in AGGREGATES {
                names.push(format!("s{slot}_{f}_{a}"));
            }
        }
    }
    names.extend((0..MAX_GROUP_SIZE).map(|s| format!("s{s}_present")));
    names.extend(GROUP_FEATURES.iter().map(|s| s.to_string()));
    names
}

/// Undirected association counts between corpus entities: every training
/// purchase links its user to the item and to the item's brands and
/// categories; every triple links its head and tail.
#[derive(Clone, Debug)]
pub struct AssociationIndex {
    pair: HashMap<(EntityRef, EntityRef), u64>,
    degree: HashMap<EntityRef, u64>,
    neighbors: HashMap<EntityRef, BTreeMap<EntityRef, u64>>,
    total: u64,
    users: usize,
    items: usize,
}

fn ordered(a: EntityRef, b: EntityRef) -> (EntityRef, EntityRef) {
    if a <= b {
        (a, b)
    } else {
        (b, a)
    }
}

impl AssociationIndex {
    pub fn build(corpus: &Corpus) -> Self {
        let mut idx = AssociationIndex {
            pair: HashMap::new(),
            degree: HashMap::new(),
            neighbors: HashMap::new(),
            total: 0,
            users: corpus.count(EntityType::User),
            items: corpus.count(EntityType::Item),
        };
        for p in corpus.train_purchases() {
            let u = EntityRef::new(EntityType::User, p.user);
            idx.link(u, EntityRef::new(EntityType::Item, p.item));
            for r in [Relation::Brand, Relation::Category] {
                for &t in corpus.tails(r, p.item) {
                    idx.link(u, EntityRef::new(r.tail_type(), t));
                }
            }
        }
        for t in corpus.triples() {
            idx.link(t.head, t.tail);
        }
        idx
    }

    fn link(&mut self, a: EntityRef, b: EntityRef) {
        *self.pair.entry(ordered(a, b)).or_default() += 1;
        *self.degree.entry(a).or_default() += 1;
        *self.degree.entry(b).or_default() += 1;
        *self.neighbors.entry(a).or_default().entry(b).or_default() += 1;
        if a != b {
            *self.neighbors.entry(b).or_default().entry(a).or_default() += 1;
        }
        self.total += 1;
    }

    pub fn count(&self, a: EntityRef, b: EntityRef) -> u64 {
        self.pair.get(&ordered(a, b)).copied().unwrap_or(0)
    }

    pub fn degree(&self, e: EntityRef) -> u64 {
        self.degree.get(&e).copied().unwrap_or(0)
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    fn linked(&self, e: EntityRef, kind: EntityType) -> impl Iterator<Item = (EntityRef, u64)> + '_ {
        self.neighbors
            .get(&e)
            .into_iter()
            .flatten()
            .filter(move |(n, _)| n.kind == kind)
            .map(|(&n, &c)| (n, c))
    }

    /// `ln(|U| / (1 + users associated with e))`.
    pub fn iuf(&self, e: EntityRef) -> f64 {
        let n = self.linked(e, EntityType::User).count();
        (self.users as f64 / (1 + n) as f64).ln()
    }

    /// `ln(|I| / (1 + items associated with e))`.
    pub fn iif(&self, e: EntityRef) -> f64 {
        let n = self.linked(e, EntityType::Item).count();
        (self.items as f64 / (1 + n) as f64).ln()
    }

    /// `ln(N·(c(a,e) + 1) / (c(a)·c(e)))`; zero marginals count as one so
    /// the value stays finite.
    pub fn pmi(&self, a: EntityRef, e: EntityRef) -> f64 {
        let n = self.total.max(1) as f64;
        let joint = (self.count(a, e) + 1) as f64;
        let ca = self.degree(a).max(1) as f64;
        let ce = self.degree(e).max(1) as f64;
        (n * joint / (ca * ce)).ln()
    }

    /// Entropy of the users holding an association with `e`, weighted by
    /// association count.
    pub fn relation_entropy(&self, e: EntityRef) -> f64 {
        let counts: Vec<u64> = self.linked(e, EntityType::User).map(|(_, c)| c).collect();
        entropy(&counts)
    }
}

/// `−Σ p ln p` of a count vector.
pub fn entropy(counts: &[u64]) -> f64 {
    let total: u64 = counts.iter().sum();
    if total == 0 {
        return 0.0;
    }
    counts
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / total as f64;
            -p * p.ln()
        })
        .sum::<f64>()
        .max(0.0)
}

/// Model confidence per entity: `M(e|u,i)` for path explanations, 1 for
/// attention explanations.
pub fn feature_exist_confidence(e: &Explanation) -> Vec<f64> {
    match e.source {
        Source::Path if e.entities.is_empty() => vec![e.score],
        Source::Path => e.entity_scores.clone(),
        _ => vec![1.0; e.entities.len().max(1)],
    }
}

/// Per entity, whether the claimed relation chain is observed in the corpus.
/// Entity-free explanations claim nothing and count as observed.
pub fn feature_existence(e: &Explanation, group: &ExplanationGroup, corpus: &Corpus) -> Vec<f64> {
    if e.entities.is_empty() {
        return vec![1.0];
    }
    let observed: BTreeSet<usize> = match (&e.path, e.domain) {
        (Some(path), _) => observed_meetings(path, group.user, group.item, corpus),
        (None, Some(d)) => corpus.user_domain(group.user, d).iter().copied().collect(),
        (None, None) => BTreeSet::new(),
    };
    e.entities
        .iter()
        .map(|r| f64::from(u8::from(observed.contains(&r.id))))
        .collect()
}

/// Fraction of an explanation's entity claims observed in the corpus.
pub fn feature_existence_rate(e: &Explanation, group: &ExplanationGroup, corpus: &Corpus) -> f64 {
    let v = feature_existence(e, group, corpus);
    v.iter().sum::<f64>() / v.len() as f64
}

fn aggregate(values: &[f64]) -> [f64; 3] {
    if values.is_empty() {
        return [0.0; 3];
    }
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    [max, min, values.iter().sum::<f64>() / values.len() as f64]
}

/// Group-level inputs that depend on the generating model.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GroupContext {
    /// Held-out MRR of the model that produced the group.
    pub model_mrr: f64,
    pub log_purchase_prob: f64,
}

/// `ln P(i|u,q)` with the softmax restricted to the top-`k` retrieved items
/// (plus the item itself when it was not retrieved).
pub fn log_purchase_prob(
    user: usize,
    query: usize,
    item: usize,
    corpus: &Corpus,
    store: &EmbeddingStore,
    k: usize,
    history_cap: usize,
) -> f64 {
    let list = retrieve_topk(user, query, store, corpus, k, history_cap);
    let mut scores: Vec<f64> = list.items.iter().map(|&(_, s)| s).collect();
    let own = match list.items.iter().find(|&&(i, _)| i == item) {
        Some(&(_, s)) => s,
        None => {
            let intent = crate::model::purchase_intent(user, query, corpus, store, history_cap).combined();
            let s = dot(&intent, store.entity(EntityType::Item, item));
            scores.push(s);
            s
        }
    };
    own - log_sum_exp(&scores)
}

/// Fixed-layout feature vector of one explanation group; see
/// [`group_layout`] for the column names.
pub fn build_group_vector(group: &ExplanationGroup, ctx: GroupContext, corpus: &Corpus, assoc: &AssociationIndex) -> Vec<f64> {
    let mut out = Vec::with_capacity(GROUP_VECTOR_LEN);
    let user = EntityRef::new(EntityType::User, group.user);
    let item = EntityRef::new(EntityType::Item, group.item);
    for slot in 0..MAX_GROUP_SIZE {
        let Some(e) = group.explanations.get(slot) else {
            out.extend(std::iter::repeat_n(0.0, ENTITY_FEATURES.len() * AGGREGATES.len()));
            continue;
        };
        let per_entity = |f: &dyn Fn(EntityRef) -> f64| -> Vec<f64> {
            if e.entities.is_empty() {
                vec![0.0]
            } else {
                e.entities.iter().map(|&r| f(r)).collect()
            }
        };
        let columns: [Vec<f64>; 7] = [
            feature_exist_confidence(e),
            feature_existence(e, group, corpus),
            per_entity(&|r| assoc.iuf(r)),
            per_entity(&|r| assoc.iif(r)),
            per_entity(&|r| assoc.pmi(user, r)),
            per_entity(&|r| assoc.pmi(item, r)),
            per_entity(&|r| assoc.relation_entropy(r)),
        ];
        for c in &columns {
            out.extend(aggregate(c));
        }
    }
    out.extend((0..MAX_GROUP_SIZE).map(|s| f64::from(u8::from(s < group.explanations.len()))));
    out.push(ctx.model_mrr);
    out.push(ctx.log_purchase_prob);
    debug_assert_eq!(out.len(), GROUP_VECTOR_LEN);
    out
}
