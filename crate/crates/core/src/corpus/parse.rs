use std::collections::{HashMap, HashSet};
use std::path::Path;

use indexmap::IndexMap;

use super::{Corpus, EntityRef, EntityType, PurchaseRecord, Query, Registry, Relation, Split, Triple};
use crate::error::{Error, Result};

/// Corpora are assumed to be 5-core filtered already.
pub const DEFAULT_VOCAB_MIN_COUNT: u64 = 1;

struct RawPurchase {
    user: usize,
    item: usize,
    tokens: Vec<String>,
    split: Option<Split>,
    line: usize,
}

/// Accumulates triples and purchases, then freezes them into a [`Corpus`].
///
/// Entity ids are assigned per type in first-seen order across all inputs,
/// in the order they were parsed.
pub struct CorpusBuilder {
    registries: [Registry; 5],
    triples: Vec<Triple>,
    seen: HashSet<Triple>,
    duplicates: usize,
    purchases: Vec<RawPurchase>,
    purchase_file: String,
    vocab_min_count: u64,
}

impl Default for CorpusBuilder {
    fn default() -> Self {
        Self {
            registries: Default::default(),
            triples: Vec::new(),
            seen: HashSet::new(),
            duplicates: 0,
            purchases: Vec::new(),
            purchase_file: String::new(),
            vocab_min_count: DEFAULT_VOCAB_MIN_COUNT,
        }
    }
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.strip_suffix('\r').unwrap_or(l)))
        .filter(|(_, l)| !l.trim().is_empty())
}

impl CorpusBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    /// Words occurring fewer times than this across all purchase queries are dropped.
    pub fn vocab_min_count(&mut self, min_count: u64) -> &mut Self {
        self.vocab_min_count = min_count;
        self
    }

    pub fn parse_triples(&mut self, path: &Path) -> Result<&mut Self> {
        let text = read(path)?;
        self.parse_triples_str(&text, &path.display().to_string())
    }

    /// Parses `head_type  head_id  relation  tail_type  tail_id` rows.
    pub fn parse_triples_str(&mut self, text: &str, file: &str) -> Result<&mut Self> {
        let parse_err = |line: usize, message: String| Error::Parse {
            file: file.to_owned(),
            line,
            message,
        };
        for (line, row) in lines(text) {
            let cols: Vec<&str> = row.split('\t').collect();
            let [head_type, head_id, relation, tail_type, tail_id] = cols[..] else {
                return Err(parse_err(
                    line,
                    format!("expected 5 tab-separated columns, found {}", cols.len()),
                ));
            };
            let relation = Relation::parse(relation).ok_or_else(|| Error::UnknownRelation {
                file: file.to_owned(),
                line,
                name: relation.to_owned(),
            })?;
            let head_type = EntityType::parse(head_type)
                .ok_or_else(|| parse_err(line, format!("unknown entity type `{head_type}`")))?;
            let tail_type = EntityType::parse(tail_type)
                .ok_or_else(|| parse_err(line, format!("unknown entity type `{tail_type}`")))?;
            if head_id.is_empty() || tail_id.is_empty() {
                return Err(parse_err(line, "empty entity id".into()));
            }
            let schema_err = |message: String| Error::Schema {
                file: file.to_owned(),
                line,
                message,
            };
            if relation == Relation::SearchPurchase {
                return Err(schema_err(
                    "search_purchase edges come from the purchases file".into(),
                ));
            }
            if head_type != relation.head_type() || tail_type != relation.tail_type() {
                return Err(schema_err(format!(
                    "{} expects {} -> {}, found {} -> {}",
                    relation.name(),
                    relation.head_type().name(),
                    relation.tail_type().name(),
                    head_type.name(),
                    tail_type.name()
                )));
            }
            let head = EntityRef::new(head_type, self.registries[head_type.index()].intern(head_id));
            let tail = EntityRef::new(tail_type, self.registries[tail_type.index()].intern(tail_id));
            let triple = Triple {
                head,
                relation,
                tail,
            };
            if self.seen.insert(triple) {
                self.triples.push(triple);
            } else {
                self.duplicates += 1;
            }
        }
        Ok(self)
    }

    pub fn parse_purchases(&mut self, path: &Path) -> Result<&mut Self> {
        let text = read(path)?;
        self.parse_purchases_str(&text, &path.display().to_string())
    }

    /// Parses `user_id  query_text  item_id [split]` rows.
    pub fn parse_purchases_str(&mut self, text: &str, file: &str) -> Result<&mut Self> {
        let start = self.purchases.len();
        for (line, row) in lines(text) {
            let parse_err = |message: String| Error::Parse {
                file: file.to_owned(),
                line,
                message,
            };
            let cols: Vec<&str> = row.split('\t').collect();
            let (user, query, item, split) = match cols[..] {
                [u, q, i] => (u, q, i, None),
                [u, q, i, s] => {
                    let split = match s {
                        "train" => Split::Train,
                        "test" => Split::Test,
                        other => {
                            return Err(Error::UnknownSplit {
                                file: file.to_owned(),
                                line,
                                tag: other.to_owned(),
                            })
                        }
                    };
                    (u, q, i, Some(split))
                }
                _ => {
                    return Err(parse_err(format!(
                        "expected 3 or 4 tab-separated columns, found {}",
                        cols.len()
                    )))
                }
            };
            if user.is_empty() || item.is_empty() {
                return Err(parse_err("empty user or item id".into()));
            }
            if let Some(first) = self.purchases.get(start) {
                if first.split.is_some() != split.is_some() {
                    return Err(parse_err(
                        "split column must be present on every row or on none".into(),
                    ));
                }
            }
            let tokens = query
                .split_ascii_whitespace()
                .map(str::to_lowercase)
                .collect();
            let user = self.registries[EntityType::User.index()].intern(user);
            let item = self.registries[EntityType::Item.index()].intern(item);
            self.purchases.push(RawPurchase {
                user,
                item,
                tokens,
                split,
                line,
            });
        }
        if self.purchases.len() == start {
            return Err(Error::EmptyFile(file.to_owned()));
        }
        self.purchase_file = file.to_owned();
        Ok(self)
    }

    pub fn build(self) -> Result<Corpus> {
        let CorpusBuilder {
            mut registries,
            triples,
            duplicates,
            purchases,
            purchase_file,
            vocab_min_count,
            ..
        } = self;
        if purchases.is_empty() {
            return Err(Error::EmptyFile("purchases".into()));
        }

        let mut counts: IndexMap<&str, u64> = IndexMap::new();
        for p in &purchases {
            for t in &p.tokens {
                *counts.entry(t.as_str()).or_default() += 1;
            }
        }
        let words = &mut registries[EntityType::Word.index()];
        let mut word_freq = Vec::new();
        for (&w, &c) in counts.iter().filter(|(_, &c)| c >= vocab_min_count) {
            words.intern(w);
            word_freq.push(c);
        }

        let explicit_split = purchases[0].split.is_some();
        let mut query_ids: HashMap<String, usize> = HashMap::new();
        let mut queries = Vec::new();
        let mut records = Vec::with_capacity(purchases.len());
        for p in &purchases {
            let text = p.tokens.join(" ");
            let query = match query_ids.get(&text) {
                Some(&id) => id,
                None => {
                    let ids = p.tokens.iter().filter_map(|t| words.get(t)).collect();
                    queries.push(Query {
                        text: text.clone(),
                        words: ids,
                    });
                    query_ids.insert(text, queries.len() - 1);
                    queries.len() - 1
                }
            };
            if explicit_split != p.split.is_some() {
                return Err(Error::Parse {
                    file: purchase_file.clone(),
                    line: p.line,
                    message: "split column must be present on every row or on none".into(),
                });
            }
            records.push(PurchaseRecord {
                user: p.user,
                query,
                item: p.item,
                split: p.split.unwrap_or(Split::Train),
            });
        }

        Ok(Corpus::from_parts(
            registries,
            word_freq,
            triples,
            duplicates,
            queries,
            records,
            explicit_split,
        ))
    }
}

impl Corpus {
    /// Parses a triples file and a purchases file, in that order.
    pub fn load(triples: &Path, purchases: &Path, vocab_min_count: u64) -> Result<Corpus> {
        let mut b = CorpusBuilder::new();
        b.vocab_min_count(vocab_min_count);
        b.parse_triples(triples)?;
        b.parse_purchases(purchases)?;
        b.build()
    }

    pub fn from_strs(triples: &str, purchases: &str, vocab_min_count: u64) -> Result<Corpus> {
        let mut b = CorpusBuilder::new();
        b.vocab_min_count(vocab_min_count);
        b.parse_triples_str(triples, "triples")?;
        b.parse_purchases_str(purchases, "purchases")?;
        b.build()
    }
}
