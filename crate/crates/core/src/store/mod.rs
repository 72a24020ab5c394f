//! Learnable parameters and optimizer state.
//!
//! Every parameter lives in a [`Table`] of `rows × cols` 64-bit floats with a
//! matching Adagrad accumulator. Embedding tables have one row per entity;
//! dense parameters (projection matrices, biases, attention weights) are
//! single-row tables holding the flattened tensor.

mod checkpoint;
mod optim;

pub use optim::{adagrad_step, clip_gradients, decay_schedule, Gradients, ADAGRAD_EPSILON};

use std::collections::BTreeMap;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, Domain, EntityType, Relation};
use crate::error::{Error, Result};
use crate::rng;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelKind {
    /// Vanilla model with a free user embedding.
    Drem,
    /// User vector produced by the hierarchical gated attention network.
    DremHgn,
}

impl ModelKind {
    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Drem => "drem",
            ModelKind::DremHgn => "drem-hgn",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "drem" => Some(ModelKind::Drem),
            "drem-hgn" | "drem_hgn" => Some(ModelKind::DremHgn),
            _ => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum TableId {
    Word,
    User,
    Item,
    Brand,
    Category,
    /// One row per knowledge relation, in [`Relation::KNOWLEDGE`] order.
    Relation,
    /// Query projection `W`, α×α row-major.
    QueryProjection,
    QueryBias,
    /// Per-domain attention tensor `W^f`, α×β×α.
    DomainAttnProj(Domain),
    /// Per-domain attention bias, α×β.
    DomainAttnBias(Domain),
    /// Per-domain head weights `W^h`, β.
    DomainAttnHead(Domain),
    UserAttnProj,
    UserAttnBias,
    UserAttnHead,
}

impl TableId {
    pub fn for_entity(kind: EntityType) -> TableId {
        match kind {
            EntityType::User => TableId::User,
            EntityType::Item => TableId::Item,
            EntityType::Word => TableId::Word,
            EntityType::Brand => TableId::Brand,
            EntityType::Category => TableId::Category,
        }
    }

    /// Fixed table order for a model kind; checkpoints follow this order.
    pub fn layout(kind: ModelKind) -> Vec<TableId> {
        let mut ids = vec![TableId::Word];
        if kind == ModelKind::Drem {
            ids.push(TableId::User);
        }
        ids.extend([
            TableId::Item,
            TableId::Brand,
            TableId::Category,
            TableId::Relation,
            TableId::QueryProjection,
            TableId::QueryBias,
        ]);
        if kind == ModelKind::DremHgn {
            for d in Domain::ALL {
                ids.extend([
                    TableId::DomainAttnProj(d),
                    TableId::DomainAttnBias(d),
                    TableId::DomainAttnHead(d),
                ]);
            }
            ids.extend([TableId::UserAttnProj, TableId::UserAttnBias, TableId::UserAttnHead]);
        }
        ids
    }
}

/// Registry sizes the store was built for.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RegistrySizes {
    pub words: usize,
    pub users: usize,
    pub items: usize,
    pub brands: usize,
    pub categories: usize,
}

impl RegistrySizes {
    pub fn of(corpus: &Corpus) -> Self {
        Self {
            words: corpus.count(EntityType::Word),
            users: corpus.count(EntityType::User),
            items: corpus.count(EntityType::Item),
            brands: corpus.count(EntityType::Brand),
            categories: corpus.count(EntityType::Category),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct StoreSpec {
    pub kind: ModelKind,
    pub dim: usize,
    pub heads: usize,
    pub sizes: RegistrySizes,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    pub rows: usize,
    pub cols: usize,
    pub values: Vec<f64>,
    pub accum: Vec<f64>,
}

impl Table {
    fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            values: vec![0.0; rows * cols],
            accum: vec![0.0; rows * cols],
        }
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.values[r * self.cols..(r + 1) * self.cols]
    }

    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.values[r * self.cols..(r + 1) * self.cols]
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddingStore {
    spec: StoreSpec,
    tables: BTreeMap<TableId, Table>,
}

impl EmbeddingStore {
    /// Allocates and randomly initializes every table of `spec.kind`.
    ///
    /// Embedding rows are uniform in `[-0.5/α, 0.5/α]`. Projection matrices
    /// and attention head weights are uniform in `±1/√fan_in`. Biases start
    /// at zero, as do all accumulators.
    pub fn init(spec: StoreSpec, seed: u64) -> Result<Self> {
        if spec.dim == 0 || spec.heads == 0 {
            return Err(Error::InvalidArgument(format!(
                "dim and heads must be positive, got {} and {}",
                spec.dim, spec.heads
            )));
        }
        let s = spec.sizes;
        let mut required = vec![
            ("words", s.words),
            ("items", s.items),
            ("brands", s.brands),
            ("categories", s.categories),
        ];
        if spec.kind == ModelKind::Drem {
            required.push(("users", s.users));
        }
        if let Some((name, _)) = required.iter().find(|(_, n)| *n == 0) {
            return Err(Error::InvalidArgument(format!("registry `{name}` is empty")));
        }

        let mut rng = rng::fork(seed, "init");
        let (a, b) = (spec.dim, spec.heads);
        let embed = 0.5 / a as f64;
        let mut tables = BTreeMap::new();
        for id in TableId::layout(spec.kind) {
            let (rows, cols, range) = match id {
                TableId::Word => (s.words, a, embed),
                TableId::User => (s.users, a, embed),
                TableId::Item => (s.items, a, embed),
                TableId::Brand => (s.brands, a, embed),
                TableId::Category => (s.categories, a, embed),
                TableId::Relation => (Relation::KNOWLEDGE.len(), a, embed),
                TableId::QueryProjection => (1, a * a, 1.0 / (a as f64).sqrt()),
                TableId::QueryBias => (1, a, 0.0),
                TableId::DomainAttnProj(_) | TableId::UserAttnProj => {
                    (1, a * b * a, 1.0 / (a as f64).sqrt())
                }
                TableId::DomainAttnBias(_) | TableId::UserAttnBias => (1, a * b, 0.0),
                TableId::DomainAttnHead(_) | TableId::UserAttnHead => {
                    (1, b, 1.0 / (b as f64).sqrt())
                }
            };
            let mut t = Table::zeros(rows, cols);
            if range > 0.0 {
                for v in &mut t.values {
                    *v = rng.gen_range(-range..=range);
                }
            }
            tables.insert(id, t);
        }
        Ok(Self { spec, tables })
    }

    pub fn spec(&self) -> StoreSpec {
        self.spec
    }

    pub fn kind(&self) -> ModelKind {
        self.spec.kind
    }

    pub fn dim(&self) -> usize {
        self.spec.dim
    }

    pub fn heads(&self) -> usize {
        self.spec.heads
    }

    pub fn has_table(&self, id: TableId) -> bool {
        self.tables.contains_key(&id)
    }

    /// # Panics
    /// If the table does not exist for this model kind.
    pub fn table(&self, id: TableId) -> &Table {
        self.tables
            .get(&id)
            .unwrap_or_else(|| panic!("table {id:?} absent for {}", self.spec.kind.name()))
    }

    pub fn table_mut(&mut self, id: TableId) -> &mut Table {
        let kind = self.spec.kind;
        self.tables
            .get_mut(&id)
            .unwrap_or_else(|| panic!("table {id:?} absent for {}", kind.name()))
    }

    pub fn tables(&self) -> impl Iterator<Item = (TableId, &Table)> {
        self.tables.iter().map(|(&id, t)| (id, t))
    }

    pub fn row(&self, id: TableId, r: usize) -> &[f64] {
        self.table(id).row(r)
    }

    pub fn row_mut(&mut self, id: TableId, r: usize) -> &mut [f64] {
        self.table_mut(id).row_mut(r)
    }

    pub fn entity(&self, kind: EntityType, id: usize) -> &[f64] {
        self.row(TableId::for_entity(kind), id)
    }

    pub fn relation(&self, relation: Relation) -> &[f64] {
        let r = relation
            .knowledge_index()
            .expect("search_purchase has no static vector");
        self.row(TableId::Relation, r)
    }

    /// Applies one Adagrad update per gradient row.
    pub fn apply_adagrad(&mut self, grads: &Gradients, learning_rate: f64) -> Result<()> {
        for ((id, r), g) in grads.iter() {
            let t = self.table_mut(id);
            let cols = t.cols;
            let range = r * cols..(r + 1) * cols;
            adagrad_step(
                &mut t.values[range.clone()],
                &mut t.accum[range],
                g,
                learning_rate,
            )?;
        }
        Ok(())
    }

    pub fn all_finite(&self) -> bool {
        self.tables
            .values()
            .all(|t| t.values.iter().chain(&t.accum).all(|v| v.is_finite()))
    }

    /// Errors unless the store was built for this corpus's registries.
    pub fn check_compatible(&self, corpus: &Corpus) -> Result<()> {
        let found = RegistrySizes::of(corpus);
        if found != self.spec.sizes {
            return Err(Error::Checkpoint(format!(
                "registry sizes {:?} do not match corpus {:?}",
                self.spec.sizes, found
            )));
        }
        Ok(())
    }
}
