use std::collections::BTreeSet;

use serde::Serialize;

use crate::corpus::{Corpus, Domain, EntityType, Relation};
use crate::model::purchase_intent;
use crate::store::EmbeddingStore;
use crate::vecmath::{add_assign, dot, log_sum_exp};
use crate::{Error, Result};

/// A pair of relation walks, one from the user (always opening with
/// search_purchase) and one from the item, ending at the same entity type.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct RelationPath {
    pub user: Vec<Relation>,
    pub item: Vec<Relation>,
    pub meeting: EntityType,
}

impl RelationPath {
    /// User-side hops beyond search_purchase.
    pub fn j(&self) -> usize {
        self.user.len() - 1
    }

    /// Item-side hops.
    pub fn m(&self) -> usize {
        self.item.len()
    }

    pub fn len(&self) -> usize {
        self.j() + self.m()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// The zero-hop path: the item is matched by the query directly.
    pub fn is_direct(&self) -> bool {
        self.is_empty()
    }

    pub fn type_checks(&self) -> bool {
        fn walk(start: EntityType, rels: &[Relation]) -> Option<EntityType> {
            rels.iter()
                .try_fold(start, |t, r| (r.head_type() == t).then(|| r.tail_type()))
        }
        self.user.first() == Some(&Relation::SearchPurchase)
            && !self.user[1..].contains(&Relation::SearchPurchase)
            && !self.item.contains(&Relation::SearchPurchase)
            && walk(EntityType::User, &self.user) == Some(self.meeting)
            && walk(EntityType::Item, &self.item) == Some(self.meeting)
    }

    pub fn describe(&self) -> String {
        let side = |rels: &[Relation]| rels.iter().map(|r| r.name()).collect::<Vec<_>>().join(",");
        format!("{}|{}", side(&self.user), side(&self.item))
    }
}

// Knowledge-relation walks from an item, grouped by length, with their end type.
fn item_walks(max_len: usize) -> Vec<(Vec<Relation>, EntityType)> {
    let mut all = vec![(Vec::new(), EntityType::Item)];
    let mut frontier = all.clone();
    for _ in 0..max_len {
        let mut next = Vec::new();
        for (rels, end) in &frontier {
            for r in Relation::KNOWLEDGE {
                if r.head_type() == *end {
                    let mut ext = rels.clone();
                    ext.push(r);
                    next.push((ext, r.tail_type()));
                }
            }
        }
        all.extend(next.iter().cloned());
        frontier = next;
    }
    all
}

/// Every schema-valid path pair with at most `max_len` knowledge hops per
/// side, shortest first.
pub fn enumerate_paths(max_len: usize) -> Result<Vec<RelationPath>> {
    if !(1..=2).contains(&max_len) {
        return Err(Error::InvalidArgument(format!("path length bound must be 1 or 2, got {max_len}")));
    }
    let walks = item_walks(max_len);
    let mut out = Vec::new();
    for (u, ut) in &walks {
        for (i, it) in &walks {
            if ut == it {
                let mut user = vec![Relation::SearchPurchase];
                user.extend(u);
                out.push(RelationPath {
                    user,
                    item: i.clone(),
                    meeting: *ut,
                });
            }
        }
    }
    out.sort_by(|a, b| a.len().cmp(&b.len()).then_with(|| a.cmp(b)));
    out.dedup();
    Ok(out)
}

/// Translated endpoints of a path: `e_u = u + q + Σ r_u` and `e_i = i + Σ r_i`.
#[derive(Clone, Debug, PartialEq)]
pub struct PathEnds {
    pub user_end: Vec<f64>,
    pub item_end: Vec<f64>,
}

impl PathEnds {
    /// `intent` is `u + q` for the (user, query) being explained.
    pub fn new(path: &RelationPath, intent: &[f64], item: usize, store: &EmbeddingStore) -> Self {
        let mut user_end = intent.to_vec();
        for &r in &path.user[1..] {
            add_assign(&mut user_end, store.relation(r));
        }
        let mut item_end = store.entity(EntityType::Item, item).to_vec();
        for &r in &path.item {
            add_assign(&mut item_end, store.relation(r));
        }
        PathEnds { user_end, item_end }
    }
}

/// `M(e|u,i)` for every entity of the meeting type, indexed by entity id.
pub fn soft_match_scores(path: &RelationPath, ends: &PathEnds, store: &EmbeddingStore, gamma: f64) -> Result<Vec<f64>> {
    let n = store.table(crate::store::TableId::for_entity(path.meeting)).rows;
    if n == 0 {
        return Err(Error::Degenerate(format!("no {} entities to meet at", path.meeting.name())));
    }
    let u_logits: Vec<f64> = (0..n).map(|e| dot(&ends.user_end, store.entity(path.meeting, e))).collect();
    let i_logits: Vec<f64> = (0..n).map(|e| dot(&ends.item_end, store.entity(path.meeting, e))).collect();
    let (u_norm, i_norm) = (log_sum_exp(&u_logits), log_sum_exp(&i_logits));
    let (pj, pm) = (gamma * path.j() as f64, gamma * path.m() as f64);
    Ok((0..n)
        .map(|e| (u_logits[e] - pj - u_norm) + (i_logits[e] - pm - i_norm))
        .collect())
}

/// `M(e|u,i)` of one meeting entity.
#[allow(clippy::too_many_arguments)]
pub fn soft_match(
    path: &RelationPath,
    user: usize,
    query: usize,
    item: usize,
    entity: usize,
    corpus: &Corpus,
    store: &EmbeddingStore,
    gamma: f64,
    history_cap: usize,
) -> Result<f64> {
    let intent = purchase_intent(user, query, corpus, store, history_cap).combined();
    let ends = PathEnds::new(path, &intent, item, store);
    let scores = soft_match_scores(path, &ends, store, gamma)?;
    scores
        .get(entity)
        .copied()
        .ok_or_else(|| Error::InvalidArgument(format!("{} id {entity} out of range", path.meeting.name())))
}

/// A scored path with its best meeting entities.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct InferencePath {
    pub path: RelationPath,
    /// Up to three best meeting entities with their `M`, best first.
    pub entities: Vec<(usize, f64)>,
    /// `M` of the best entity.
    pub score: f64,
}

/// Ranks paths by the `M` of their best meeting entity. Ties go to the
/// shorter path, then the smaller entity id, then enumeration order.
pub fn top_paths(paths: &[RelationPath], intent: &[f64], item: usize, store: &EmbeddingStore, gamma: f64, topk: usize) -> Result<Vec<InferencePath>> {
    if topk == 0 {
        return Err(Error::InvalidArgument("topk must be at least 1".into()));
    }
    let mut scored = Vec::with_capacity(paths.len());
    for (order, path) in paths.iter().enumerate() {
        let ends = PathEnds::new(path, intent, item, store);
        let scores = soft_match_scores(path, &ends, store, gamma)?;
        let mut ranked: Vec<(usize, f64)> = scores.into_iter().enumerate().collect();
        ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        ranked.truncate(3);
        scored.push((order, InferencePath {
            path: path.clone(),
            score: ranked[0].1,
            entities: ranked,
        }));
    }
    scored.sort_by(|(oa, a), (ob, b)| {
        b.score
            .total_cmp(&a.score)
            .then(a.path.len().cmp(&b.path.len()))
            .then(a.entities[0].0.cmp(&b.entities[0].0))
            .then(oa.cmp(ob))
    });
    Ok(scored.into_iter().take(topk).map(|(_, p)| p).collect())
}

fn follow(corpus: &Corpus, start: impl IntoIterator<Item = usize>, rels: &[Relation]) -> BTreeSet<usize> {
    let mut frontier: BTreeSet<usize> = start.into_iter().collect();
    for &r in rels {
        frontier = frontier.iter().flat_map(|&h| corpus.tails(r, h).iter().copied()).collect();
    }
    frontier
}

/// Entities the corpus actually reaches from the user along the user side
/// (starting from training purchases) and from the item along the item side.
pub fn observed_meetings(path: &RelationPath, user: usize, item: usize, corpus: &Corpus) -> BTreeSet<usize> {
    let purchased = corpus.user_domain(user, Domain::Item).iter().copied();
    let from_user = follow(corpus, purchased, &path.user[1..]);
    let from_item = follow(corpus, [item], &path.item);
    from_user.intersection(&from_item).copied().collect()
}
