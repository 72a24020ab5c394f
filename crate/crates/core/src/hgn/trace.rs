use serde_json::{json, Map, Value};

use crate::corpus::{Corpus, Domain};

#[derive(Clone, Debug, PartialEq)]
pub struct DomainTrace {
    /// Attended entity ids of the domain's entity type.
    pub entities: Vec<usize>,
    pub weights: Vec<f64>,
    pub zero_weight: f64,
}

/// Attention weights of one (user, query) at both levels of the network.
#[derive(Clone, Debug, PartialEq)]
pub struct AttentionTrace {
    pub domains: [DomainTrace; 3],
    /// Top-level weight of each domain, in [`Domain::ALL`] order.
    pub domain_weights: [f64; 3],
    /// Top-level weight of the zero vector.
    pub zero_weight: f64,
}

impl AttentionTrace {
    pub fn domain(&self, d: Domain) -> &DomainTrace {
        &self.domains[d.index()]
    }

    pub fn domain_weight(&self, d: Domain) -> f64 {
        self.domain_weights[d.index()]
    }

    /// Largest deviation from unit mass over all softmaxes in the trace.
    pub fn normalization_error(&self) -> f64 {
        let top = self.domain_weights.iter().sum::<f64>() + self.zero_weight;
        self.domains
            .iter()
            .map(|d| (d.weights.iter().sum::<f64>() + d.zero_weight - 1.0).abs())
            .fold((top - 1.0).abs(), f64::max)
    }

    pub fn all_nonnegative(&self) -> bool {
        self.zero_weight >= 0.0
            && self.domain_weights.iter().all(|&w| w >= 0.0)
            && self
                .domains
                .iter()
                .all(|d| d.zero_weight >= 0.0 && d.weights.iter().all(|&w| w >= 0.0))
    }

    /// Attended entities of `d` sorted by weight, highest first; ties by id.
    pub fn ranked_entities(&self, d: Domain) -> Vec<(usize, f64)> {
        let t = self.domain(d);
        let mut out: Vec<(usize, f64)> = t.entities.iter().copied().zip(t.weights.iter().copied()).collect();
        out.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        out
    }

    /// JSON-lines record of the trace.
    pub fn to_json(&self, corpus: &Corpus, user: usize, query: usize) -> Value {
        let mut domain_weights = Map::new();
        let mut entities = Map::new();
        let mut domain_zero = Map::new();
        for d in Domain::ALL {
            domain_weights.insert(d.name().into(), json!(self.domain_weight(d)));
            let t = self.domain(d);
            let list: Vec<Value> = t
                .entities
                .iter()
                .zip(&t.weights)
                .map(|(&e, &w)| json!({"id": corpus.registry(d.entity_type()).name(e), "w": w}))
                .collect();
            entities.insert(d.name().into(), Value::Array(list));
            domain_zero.insert(d.name().into(), json!(t.zero_weight));
        }
        domain_weights.insert("zero".into(), json!(self.zero_weight));
        json!({
            "user": corpus.registry(crate::corpus::EntityType::User).name(user),
            "query": corpus.query(query).text,
            "domain_weights": domain_weights,
            "entities": entities,
            "domain_zero": domain_zero,
        })
    }
}
