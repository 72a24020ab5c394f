//! Heterogeneous product corpus: typed entity registries, knowledge-graph
//! triples, and (user, query, item) purchase records with a train/test split.
//!
//! A [`Corpus`] is immutable once built. Derived indices (per-user knowledge
//! domains, relation adjacency, entity frequencies) are computed from the
//! train split at build time.

mod parse;
mod split;
mod synth;

pub use parse::{CorpusBuilder, DEFAULT_VOCAB_MIN_COUNT};
pub use split::split_corpus;
pub use synth::{generate_synthetic, GroundTruth, SynthCorpus, SynthSpec};

use std::collections::{HashMap, HashSet};
use std::fmt::Write as _;

use indexmap::IndexSet;
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EntityType {
    User,
    Item,
    Word,
    Brand,
    Category,
}

impl EntityType {
    pub const ALL: [EntityType; 5] = [
        EntityType::User,
        EntityType::Item,
        EntityType::Word,
        EntityType::Brand,
        EntityType::Category,
    ];

    pub fn name(self) -> &'static str {
        match self {
            EntityType::User => "user",
            EntityType::Item => "item",
            EntityType::Word => "word",
            EntityType::Brand => "brand",
            EntityType::Category => "category",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|t| t.name() == s)
    }

    pub(crate) fn index(self) -> usize {
        self as usize
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct EntityRef {
    pub kind: EntityType,
    pub id: usize,
}

impl EntityRef {
    pub fn new(kind: EntityType, id: usize) -> Self {
        Self { kind, id }
    }
}

/// Relation schema. `SearchPurchase` is the query-dependent user→item
/// relation; the other five are static knowledge-graph relations.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Relation {
    SearchPurchase,
    AlsoBought,
    AlsoViewed,
    BoughtTogether,
    Brand,
    Category,
}

impl Relation {
    pub const ALL: [Relation; 6] = [
        Relation::SearchPurchase,
        Relation::AlsoBought,
        Relation::AlsoViewed,
        Relation::BoughtTogether,
        Relation::Brand,
        Relation::Category,
    ];

    /// Relations with a learned static vector (everything but search_purchase).
    pub const KNOWLEDGE: [Relation; 5] = [
        Relation::AlsoBought,
        Relation::AlsoViewed,
        Relation::BoughtTogether,
        Relation::Brand,
        Relation::Category,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Relation::SearchPurchase => "search_purchase",
            Relation::AlsoBought => "also_bought",
            Relation::AlsoViewed => "also_viewed",
            Relation::BoughtTogether => "bought_together",
            Relation::Brand => "brand",
            Relation::Category => "category",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|r| r.name() == s)
    }

    pub fn head_type(self) -> EntityType {
        match self {
            Relation::SearchPurchase => EntityType::User,
            _ => EntityType::Item,
        }
    }

    pub fn tail_type(self) -> EntityType {
        match self {
            Relation::SearchPurchase
            | Relation::AlsoBought
            | Relation::AlsoViewed
            | Relation::BoughtTogether => EntityType::Item,
            Relation::Brand => EntityType::Brand,
            Relation::Category => EntityType::Category,
        }
    }

    /// Row of this relation in the relation embedding table.
    pub fn knowledge_index(self) -> Option<usize> {
        Self::KNOWLEDGE.iter().position(|&r| r == self)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Triple {
    pub head: EntityRef,
    pub relation: Relation,
    pub tail: EntityRef,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Test,
}

impl Split {
    pub fn name(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Test => "test",
        }
    }
}

/// A distinct normalized query string and its in-vocabulary word ids.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Query {
    /// Lowercased tokens joined by single spaces, before vocabulary filtering.
    pub text: String,
    pub words: Vec<usize>,
}

impl Query {
    /// True when every token fell below the vocabulary threshold.
    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct PurchaseRecord {
    pub user: usize,
    pub query: usize,
    pub item: usize,
    pub split: Split,
}

/// Knowledge domains a user is associated with through train purchases.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Domain {
    Item,
    Brand,
    Category,
}

impl Domain {
    pub const ALL: [Domain; 3] = [Domain::Item, Domain::Brand, Domain::Category];

    pub fn entity_type(self) -> EntityType {
        match self {
            Domain::Item => EntityType::Item,
            Domain::Brand => EntityType::Brand,
            Domain::Category => EntityType::Category,
        }
    }

    /// Relation that links a purchased item (or the user, for items) to the domain entity.
    pub fn relation(self) -> Relation {
        match self {
            Domain::Item => Relation::SearchPurchase,
            Domain::Brand => Relation::Brand,
            Domain::Category => Relation::Category,
        }
    }

    pub fn name(self) -> &'static str {
        self.entity_type().name()
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

/// Dense first-seen-order id assignment for one entity type.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Registry {
    names: IndexSet<String>,
}

impl Registry {
    pub fn intern(&mut self, name: &str) -> usize {
        match self.names.get_index_of(name) {
            Some(id) => id,
            None => self.names.insert_full(name.to_owned()).0,
        }
    }

    pub fn get(&self, name: &str) -> Option<usize> {
        self.names.get_index_of(name)
    }

    pub fn name(&self, id: usize) -> &str {
        &self.names[id]
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &str> {
        self.names.iter().map(String::as_str)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Corpus {
    registries: [Registry; 5],
    word_freq: Vec<u64>,
    triples: Vec<Triple>,
    duplicate_triples: usize,
    queries: Vec<Query>,
    purchases: Vec<PurchaseRecord>,
    explicit_split: bool,
    index: DerivedIndex,
}

#[derive(Clone, Debug, Default, PartialEq)]
struct DerivedIndex {
    /// Per user, per domain: associated entity ids, least recent first.
    domains: Vec<[Vec<usize>; 3]>,
    /// Per knowledge relation, per head item: tails in first-seen order.
    forward: Vec<Vec<Vec<usize>>>,
    triple_set: HashSet<(Relation, usize, usize)>,
    /// Occurrence counts per entity type across triples and purchases.
    entity_freq: [Vec<u64>; 5],
}

impl Corpus {
    pub(crate) fn from_parts(
        registries: [Registry; 5],
        word_freq: Vec<u64>,
        triples: Vec<Triple>,
        duplicate_triples: usize,
        queries: Vec<Query>,
        purchases: Vec<PurchaseRecord>,
        explicit_split: bool,
    ) -> Self {
        let mut corpus = Corpus {
            registries,
            word_freq,
            triples,
            duplicate_triples,
            queries,
            purchases,
            explicit_split,
            index: DerivedIndex::default(),
        };
        corpus.index = DerivedIndex::build(&corpus);
        corpus
    }

    pub(crate) fn with_splits(&self, splits: impl Fn(&PurchaseRecord) -> Split) -> Corpus {
        let purchases = self
            .purchases
            .iter()
            .map(|p| PurchaseRecord {
                split: splits(p),
                ..*p
            })
            .collect();
        Corpus::from_parts(
            self.registries.clone(),
            self.word_freq.clone(),
            self.triples.clone(),
            self.duplicate_triples,
            self.queries.clone(),
            purchases,
            true,
        )
    }

    pub fn registry(&self, kind: EntityType) -> &Registry {
        &self.registries[kind.index()]
    }

    pub fn count(&self, kind: EntityType) -> usize {
        self.registry(kind).len()
    }

    pub fn entity_name(&self, entity: EntityRef) -> &str {
        self.registry(entity.kind).name(entity.id)
    }

    pub fn resolves(&self, entity: EntityRef) -> bool {
        entity.id < self.count(entity.kind)
    }

    pub fn word_frequency(&self, word: usize) -> u64 {
        self.word_freq[word]
    }

    pub fn triples(&self) -> &[Triple] {
        &self.triples
    }

    /// Number of duplicate triple rows dropped during parsing.
    pub fn duplicate_triples(&self) -> usize {
        self.duplicate_triples
    }

    pub fn queries(&self) -> &[Query] {
        &self.queries
    }

    pub fn query(&self, id: usize) -> &Query {
        &self.queries[id]
    }

    pub fn purchases(&self) -> &[PurchaseRecord] {
        &self.purchases
    }

    pub fn train_purchases(&self) -> impl Iterator<Item = &PurchaseRecord> {
        self.purchases.iter().filter(|p| p.split == Split::Train)
    }

    pub fn test_purchases(&self) -> impl Iterator<Item = &PurchaseRecord> {
        self.purchases.iter().filter(|p| p.split == Split::Test)
    }

    /// Whether splits came from the input (or from [`split_corpus`]).
    pub fn has_split(&self) -> bool {
        self.explicit_split
    }

    /// Entities of `domain` associated with `user` through train purchases,
    /// least recent first.
    pub fn user_domain(&self, user: usize, domain: Domain) -> &[usize] {
        &self.index.domains[user][domain.index()]
    }

    /// Tails reachable from `head` through one knowledge relation.
    pub fn tails(&self, relation: Relation, head: usize) -> &[usize] {
        match relation.knowledge_index() {
            Some(r) => self.index.forward[r]
                .get(head)
                .map(Vec::as_slice)
                .unwrap_or(&[]),
            None => &[],
        }
    }

    pub fn has_triple(&self, relation: Relation, head: usize, tail: usize) -> bool {
        self.index.triple_set.contains(&(relation, head, tail))
    }

    /// Occurrence counts used for the frequency-based noise distribution.
    pub fn entity_frequencies(&self, kind: EntityType) -> &[u64] {
        &self.index.entity_freq[kind.index()]
    }

    /// Relevance judgments of a split: (user, query) → purchased items,
    /// ordered by first appearance of the pair.
    pub fn judged_pairs(&self, split: Split) -> Vec<((usize, usize), Vec<usize>)> {
        let mut order: Vec<(usize, usize)> = Vec::new();
        let mut items: HashMap<(usize, usize), Vec<usize>> = HashMap::new();
        for p in self.purchases.iter().filter(|p| p.split == split) {
            let key = (p.user, p.query);
            let entry = items.entry(key).or_insert_with(|| {
                order.push(key);
                Vec::new()
            });
            if !entry.contains(&p.item) {
                entry.push(p.item);
            }
        }
        order
            .into_iter()
            .map(|k| {
                let v = items.remove(&k).unwrap_or_default();
                (k, v)
            })
            .collect()
    }

    /// Stable query key used by run and qrels files.
    pub fn query_key(&self, user: usize, query: usize) -> String {
        format!("{}:q{}", self.registry(EntityType::User).name(user), query)
    }

    /// Inverse of [`Corpus::query_key`].
    pub fn parse_query_key(&self, key: &str) -> Option<(usize, usize)> {
        let (user, q) = key.rsplit_once(":q")?;
        let user = self.registry(EntityType::User).get(user)?;
        let query: usize = q.parse().ok()?;
        (query < self.queries.len()).then_some((user, query))
    }

    /// Serializes the triples in the input TSV format.
    pub fn emit_triples(&self) -> String {
        let mut out = String::new();
        for t in &self.triples {
            let _ = writeln!(
                out,
                "{}\t{}\t{}\t{}\t{}",
                t.head.kind.name(),
                self.entity_name(t.head),
                t.relation.name(),
                t.tail.kind.name(),
                self.entity_name(t.tail)
            );
        }
        out
    }

    /// Serializes the purchases in the input TSV format, split column included
    /// when the corpus carries a split.
    pub fn emit_purchases(&self) -> String {
        let mut out = String::new();
        for p in &self.purchases {
            let _ = write!(
                out,
                "{}\t{}\t{}",
                self.registry(EntityType::User).name(p.user),
                self.queries[p.query].text,
                self.registry(EntityType::Item).name(p.item)
            );
            if self.explicit_split {
                let _ = write!(out, "\t{}", p.split.name());
            }
            out.push('\n');
        }
        out
    }
}

impl DerivedIndex {
    fn build(corpus: &Corpus) -> Self {
        let n_users = corpus.count(EntityType::User);
        let n_items = corpus.count(EntityType::Item);

        let mut forward = vec![vec![Vec::new(); n_items]; Relation::KNOWLEDGE.len()];
        let mut triple_set = HashSet::with_capacity(corpus.triples.len());
        let mut entity_freq: [Vec<u64>; 5] =
            EntityType::ALL.map(|t| vec![0u64; corpus.count(t)]);

        for t in &corpus.triples {
            if let Some(r) = t.relation.knowledge_index() {
                forward[r][t.head.id].push(t.tail.id);
            }
            triple_set.insert((t.relation, t.head.id, t.tail.id));
            entity_freq[t.head.kind.index()][t.head.id] += 1;
            entity_freq[t.tail.kind.index()][t.tail.id] += 1;
        }
        for p in &corpus.purchases {
            entity_freq[EntityType::User.index()][p.user] += 1;
            entity_freq[EntityType::Item.index()][p.item] += 1;
        }
        entity_freq[EntityType::Word.index()] = corpus.word_freq.clone();

        let brand = Relation::Brand.knowledge_index().unwrap_or_default();
        let category = Relation::Category.knowledge_index().unwrap_or_default();
        let mut domains: Vec<[IndexSet<usize>; 3]> = (0..n_users)
            .map(|_| [IndexSet::new(), IndexSet::new(), IndexSet::new()])
            .collect();
        fn touch(set: &mut IndexSet<usize>, id: usize) {
            set.shift_remove(&id);
            set.insert(id);
        }
        for p in corpus.purchases.iter().filter(|p| p.split == Split::Train) {
            let d = &mut domains[p.user];
            touch(&mut d[Domain::Item.index()], p.item);
            for &b in &forward[brand][p.item] {
                touch(&mut d[Domain::Brand.index()], b);
            }
            for &c in &forward[category][p.item] {
                touch(&mut d[Domain::Category.index()], c);
            }
        }
        let domains = domains
            .into_iter()
            .map(|d| d.map(|set| set.into_iter().collect()))
            .collect();

        DerivedIndex {
            domains,
            forward,
            triple_set,
            entity_freq,
        }
    }
}
