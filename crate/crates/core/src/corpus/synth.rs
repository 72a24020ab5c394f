//! Desk-scale synthetic corpora with a known brand-affinity structure.
//!
//! Every item belongs to one brand and one category. Every user is loyal to
//! one brand, every query names one category, and a search session buys every
//! item in the (user brand, query category) cell. The ideal ranking of any
//! (user, query) pair is therefore computable from the ground truth alone.

use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;

#[derive(Clone, Debug, PartialEq)]
pub struct SynthSpec {
    pub users: usize,
    pub items: usize,
    pub brands: usize,
    pub categories: usize,
    pub queries: usize,
    pub sessions_per_user: usize,
    pub test_fraction: f64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            users: 200,
            items: 100,
            brands: 10,
            categories: 5,
            queries: 20,
            sessions_per_user: 5,
            test_fraction: 0.3,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum GroundTruthLine {
    User { user: String, brand: String },
    Query { query: String, category: String },
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct GroundTruth {
    pub user_brand: Vec<(String, String)>,
    pub query_category: Vec<(String, String)>,
    /// (item, brand, category) for every generated item.
    pub items: Vec<(String, String, String)>,
}

impl GroundTruth {
    pub fn to_jsonl(&self) -> Result<String> {
        let mut out = String::new();
        for (user, brand) in &self.user_brand {
            let line = GroundTruthLine::User {
                user: user.clone(),
                brand: brand.clone(),
            };
            out.push_str(&serde_json::to_string(&line)?);
            out.push('\n');
        }
        for (query, category) in &self.query_category {
            let line = GroundTruthLine::Query {
                query: query.clone(),
                category: category.clone(),
            };
            out.push_str(&serde_json::to_string(&line)?);
            out.push('\n');
        }
        Ok(out)
    }

    pub fn brand_of_user(&self, user: &str) -> Option<&str> {
        self.user_brand
            .iter()
            .find(|(u, _)| u == user)
            .map(|(_, b)| b.as_str())
    }

    pub fn category_of_query(&self, query: &str) -> Option<&str> {
        self.query_category
            .iter()
            .find(|(q, _)| q == query)
            .map(|(_, c)| c.as_str())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SynthCorpus {
    pub triples: String,
    pub purchases: String,
    pub truth: GroundTruth,
}

impl SynthCorpus {
    /// Writes `triples.tsv`, `purchases.tsv` and `truth.jsonl` into `dir`.
    pub fn write_to(&self, dir: &std::path::Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let write = |name: &str, body: &str| {
            let path = dir.join(name);
            std::fs::write(&path, body).map_err(|e| Error::io(path, e))
        };
        write("triples.tsv", &self.triples)?;
        write("purchases.tsv", &self.purchases)?;
        write("truth.jsonl", &self.truth.to_jsonl()?)
    }
}

pub fn generate_synthetic(spec: &SynthSpec, seed: u64) -> Result<SynthCorpus> {
    for (name, n) in [
        ("users", spec.users),
        ("items", spec.items),
        ("brands", spec.brands),
        ("categories", spec.categories),
        ("queries", spec.queries),
    ] {
        if n < 2 {
            return Err(Error::InvalidArgument(format!(
                "synthetic corpus needs at least 2 {name}, got {n}"
            )));
        }
    }
    if spec.sessions_per_user == 0 || !(0.0..1.0).contains(&spec.test_fraction) {
        return Err(Error::InvalidArgument(
            "sessions_per_user must be positive and test_fraction in [0, 1)".into(),
        ));
    }
    let mut rng = rng::fork(seed, "synth");

    let brand_of = |item: usize| item % spec.brands;
    let category_of = |item: usize| (item / spec.brands) % spec.categories;
    let mut cells = vec![vec![Vec::new(); spec.categories]; spec.brands];
    for item in 0..spec.items {
        cells[brand_of(item)][category_of(item)].push(item);
    }

    // Query q names category q % categories; splits are stratified by
    // category so every category keeps at least one train query.
    let query_category = |q: usize| q % spec.categories;
    let query_text = |q: usize| format!("category{} style{}", query_category(q), q / spec.categories);
    let mut is_test = vec![false; spec.queries];
    for c in 0..spec.categories {
        let mut members: Vec<usize> = (0..spec.queries).filter(|&q| query_category(q) == c).collect();
        if members.len() < 2 {
            continue;
        }
        members.shuffle(&mut rng);
        let n_test = ((spec.test_fraction * members.len() as f64).round() as usize)
            .min(members.len() - 1);
        for &q in &members[..n_test] {
            is_test[q] = true;
        }
    }

    let mut triples = String::new();
    for item in 0..spec.items {
        let (b, c) = (brand_of(item), category_of(item));
        let _ = writeln!(triples, "item\ti{item}\tbrand\tbrand\tb{b}");
        let _ = writeln!(triples, "item\ti{item}\tcategory\tcategory\tc{c}");
        for &twin in cells[b][c].iter().filter(|&&o| o != item) {
            let _ = writeln!(triples, "item\ti{item}\talso_bought\titem\ti{twin}");
        }
        let same_category: Vec<usize> = (0..spec.items)
            .filter(|&o| category_of(o) == c && brand_of(o) != b)
            .collect();
        if let Some(&o) = same_category.choose(&mut rng) {
            let _ = writeln!(triples, "item\ti{item}\talso_viewed\titem\ti{o}");
        }
        let same_brand: Vec<usize> = (0..spec.items)
            .filter(|&o| brand_of(o) == b && category_of(o) != c)
            .collect();
        if let Some(&o) = same_brand.choose(&mut rng) {
            let _ = writeln!(triples, "item\ti{item}\tbought_together\titem\ti{o}");
        }
    }

    let mut purchases = String::new();
    let mut user_brand = Vec::with_capacity(spec.users);
    for user in 0..spec.users {
        let b = user % spec.brands;
        user_brand.push((format!("u{user}"), format!("b{b}")));
        let valid: Vec<usize> = (0..spec.queries)
            .filter(|&q| !cells[b][query_category(q)].is_empty())
            .collect();
        let valid_train: Vec<usize> = valid.iter().copied().filter(|&q| !is_test[q]).collect();
        if valid_train.is_empty() {
            return Err(Error::InvalidArgument(format!(
                "brand b{b} has no items under any train query category"
            )));
        }
        for session in 0..spec.sessions_per_user {
            let q = if session == 0 {
                valid_train[rng.gen_range(0..valid_train.len())]
            } else {
                valid[rng.gen_range(0..valid.len())]
            };
            let split = if is_test[q] { "test" } else { "train" };
            for &item in &cells[b][query_category(q)] {
                let _ = writeln!(purchases, "u{user}\t{}\ti{item}\t{split}", query_text(q));
            }
        }
    }

    let truth = GroundTruth {
        user_brand,
        query_category: (0..spec.queries)
            .map(|q| (query_text(q), format!("c{}", query_category(q))))
            .collect(),
        items: (0..spec.items)
            .map(|i| (format!("i{i}"), format!("b{}", brand_of(i)), format!("c{}", category_of(i))))
            .collect(),
    };
    Ok(SynthCorpus {
        triples,
        purchases,
        truth,
    })
}
