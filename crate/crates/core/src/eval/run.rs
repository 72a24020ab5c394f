use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use rayon::prelude::*;

use crate::corpus::{Corpus, EntityType, Split};
use crate::model::purchase_intent;
use crate::store::EmbeddingStore;
use crate::vecmath::dot;
use crate::{Error, Result};

/// Judged query key → relevant item ids.
pub type Qrels = BTreeMap<String, BTreeSet<usize>>;

/// Items in rank order with their scores.
#[derive(Clone, Debug, PartialEq)]
pub struct RankedList {
    pub query_key: String,
    pub items: Vec<(usize, f64)>,
}

impl RankedList {
    pub fn item_ids(&self) -> Vec<usize> {
        self.items.iter().map(|&(i, _)| i).collect()
    }
}

// Descending score, then ascending id.
fn rank_order(a: &(usize, f64), b: &(usize, f64)) -> Ordering {
    b.1.total_cmp(&a.1).then(a.0.cmp(&b.0))
}

/// Scores every item by `(u + q)·i` and keeps the best `k`.
pub fn retrieve_topk(
    user: usize,
    query: usize,
    store: &EmbeddingStore,
    corpus: &Corpus,
    k: usize,
    history_cap: usize,
) -> RankedList {
    let intent = purchase_intent(user, query, corpus, store, history_cap).combined();
    let mut scored: Vec<(usize, f64)> = (0..corpus.count(EntityType::Item))
        .map(|i| (i, dot(&intent, store.entity(EntityType::Item, i))))
        .collect();
    if k < scored.len() && k > 0 {
        scored.select_nth_unstable_by(k - 1, rank_order);
        scored.truncate(k);
    }
    scored.truncate(k);
    scored.sort_by(rank_order);
    RankedList {
        query_key: corpus.query_key(user, query),
        items: scored,
    }
}

/// Retrieves every (user, query) pair in parallel; output follows input order.
pub fn retrieve_run(
    pairs: &[(usize, usize)],
    store: &EmbeddingStore,
    corpus: &Corpus,
    k: usize,
    history_cap: usize,
) -> Vec<RankedList> {
    pairs
        .par_iter()
        .map(|&(u, q)| retrieve_topk(u, q, store, corpus, k, history_cap))
        .collect()
}

pub fn qrels_from_corpus(corpus: &Corpus, split: Split) -> Qrels {
    corpus
        .judged_pairs(split)
        .into_iter()
        .map(|((u, q), items)| (corpus.query_key(u, q), items.into_iter().collect()))
        .collect()
}

pub fn write_run(run: &[RankedList], corpus: &Corpus, tag: &str) -> String {
    let items = corpus.registry(EntityType::Item);
    let mut out = String::new();
    for list in run {
        for (rank, &(item, score)) in list.items.iter().enumerate() {
            let _ = writeln!(out, "{} Q0 {} {} {:.9} {}", list.query_key, items.name(item), rank + 1, score, tag);
        }
    }
    out
}

pub fn write_qrels(qrels: &Qrels, corpus: &Corpus) -> String {
    let items = corpus.registry(EntityType::Item);
    let mut out = String::new();
    for (key, relevant) in qrels {
        for &item in relevant {
            let _ = writeln!(out, "{key} 0 {} 1", items.name(item));
        }
    }
    out
}

fn item_id(corpus: &Corpus, name: &str, file: &str, line: usize) -> Result<usize> {
    corpus.registry(EntityType::Item).get(name).ok_or_else(|| Error::Schema {
        file: file.into(),
        line,
        message: format!("unknown item {name:?}"),
    })
}

/// Reads a six-column run file. Lists are re-sorted by rank.
pub fn parse_run(text: &str, corpus: &Corpus, file: &str) -> Result<Vec<RankedList>> {
    let mut lists: Vec<(String, Vec<(u64, usize, f64)>)> = Vec::new();
    let mut index: BTreeMap<String, usize> = BTreeMap::new();
    for (n, raw) in text.lines().enumerate() {
        let line = n + 1;
        if raw.trim().is_empty() {
            continue;
        }
        let cols: Vec<&str> = raw.split_whitespace().collect();
        let parse_err = |message: String| Error::Parse {
            file: file.into(),
            line,
            message,
        };
        if cols.len() != 6 {
            return Err(parse_err(format!("expected 6 columns, found {}", cols.len())));
        }
        let rank: u64 = cols[3].parse().map_err(|_| parse_err(format!("bad rank {:?}", cols[3])))?;
        let score: f64 = cols[4].parse().map_err(|_| parse_err(format!("bad score {:?}", cols[4])))?;
        let item = item_id(corpus, cols[2], file, line)?;
        let slot = *index.entry(cols[0].to_string()).or_insert_with(|| {
            lists.push((cols[0].to_string(), Vec::new()));
            lists.len() - 1
        });
        lists[slot].1.push((rank, item, score));
    }
    Ok(lists
        .into_iter()
        .map(|(query_key, mut rows)| {
            rows.sort_by_key(|r| r.0);
            RankedList {
                query_key,
                items: rows.into_iter().map(|(_, i, s)| (i, s)).collect(),
            }
        })
        .collect())
}

/// Reads a four-column qrels file; rows with relevance 0 are skipped.
pub fn parse_qrels(text: &str, corpus: &Corpus, file: &str) -> Result<Qrels> {
    let mut qrels = Qrels::new();
    for (n, raw) in text.lines().enumerate() {
        let line = n + 1;
        if raw.trim().is_empty() {
            continue;
        }
        let cols: Vec<&str> = raw.split_whitespace().collect();
        if cols.len() != 4 {
            return Err(Error::Parse {
                file: file.into(),
                line,
                message: format!("expected 4 columns, found {}", cols.len()),
            });
        }
        let rel: i64 = cols[3].parse().map_err(|_| Error::Parse {
            file: file.into(),
            line,
            message: format!("bad relevance {:?}", cols[3]),
        })?;
        let item = item_id(corpus, cols[2], file, line)?;
        let entry = qrels.entry(cols[0].to_string()).or_default();
        if rel > 0 {
            entry.insert(item);
        }
    }
    qrels.retain(|_, v| !v.is_empty());
    Ok(qrels)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::store::{ModelKind, RegistrySizes, StoreSpec, TableId};

    fn corpus() -> Corpus {
        Corpus::from_strs(
            "item\ti0\tbrand\tbrand\tb0\nitem\ti1\tbrand\tbrand\tb0\nitem\ti2\tbrand\tbrand\tb0\nitem\ti0\tcategory\tcategory\tc0\n",
            "u0\tred shoe\ti0\ttrain\nu0\tblue shoe\ti1\ttest\n",
            1,
        )
        .unwrap()
    }

    fn store(c: &Corpus) -> EmbeddingStore {
        EmbeddingStore::init(
            StoreSpec {
                kind: ModelKind::Drem,
                dim: 2,
                heads: 1,
                sizes: RegistrySizes::of(c),
            },
            1,
        )
        .unwrap()
    }

    #[test]
    fn ties_break_by_item_id_and_k_clamps() {
        let c = corpus();
        let mut s = store(&c);
        for i in 0..3 {
            s.row_mut(TableId::Item, i).copy_from_slice(&[0.0, 0.0]);
        }
        let full = retrieve_topk(0, 0, &s, &c, 10, 64);
        assert_eq!(full.item_ids(), vec![0, 1, 2]);
        let top = retrieve_topk(0, 0, &s, &c, 2, 64);
        assert_eq!(top.item_ids(), vec![0, 1]);
    }

    #[test]
    fn scores_nonincreasing() {
        let c = corpus();
        let s = store(&c);
        let l = retrieve_topk(0, 1, &s, &c, 3, 64);
        assert!(l.items.windows(2).all(|w| w[0].1 >= w[1].1));
    }

    #[test]
    fn run_and_qrels_round_trip() {
        let c = corpus();
        let s = store(&c);
        let run = retrieve_run(&[(0, 0), (0, 1)], &s, &c, 3, 64);
        let text = write_run(&run, &c, "drem");
        let back = parse_run(&text, &c, "run").unwrap();
        assert_eq!(back.len(), 2);
        assert_eq!(back[1].item_ids(), run[1].item_ids());

        let q = qrels_from_corpus(&c, Split::Test);
        assert_eq!(q.get("u0:q1").unwrap().iter().copied().collect::<Vec<_>>(), vec![1]);
        assert_eq!(parse_qrels(&write_qrels(&q, &c), &c, "qrels").unwrap(), q);
    }

    #[test]
    fn malformed_run_rejected() {
        let c = corpus();
        assert!(matches!(parse_run("a Q0 i0 1 0.5\n", &c, "r"), Err(Error::Parse { line: 1, .. })));
        assert!(matches!(parse_run("a Q0 nope 1 0.5 t\n", &c, "r"), Err(Error::Schema { .. })));
    }
}
