use serde::Serialize;
use serde_json::{json, Value};

use super::paths::{enumerate_paths, top_paths, PathEnds, RelationPath, soft_match_scores};
use super::templates::{Slots, TemplateId, TemplateSet};
use crate::corpus::{Corpus, Domain, EntityRef, EntityType};
use crate::hgn::DEFAULT_HISTORY_CAP;
use crate::model::{purchase_intent, ModelKind};
use crate::store::EmbeddingStore;
use crate::{Error, Result};

pub const MAX_GROUP_SIZE: usize = 3;
pub const MAX_ENTITIES: usize = 3;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Source {
    Path,
    AttentionDomain,
    AttentionPopularity,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum GroupKind {
    #[serde(rename = "MAE")]
    Mae,
    #[serde(rename = "MIE")]
    Mie,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Explanation {
    pub source: Source,
    /// Knowledge domain of an attention explanation, or the domain of a
    /// path's meeting type when it has one.
    pub domain: Option<Domain>,
    pub path: Option<RelationPath>,
    pub entities: Vec<EntityRef>,
    /// `M(e|u,i)` per entity for paths, attention weight for domains.
    pub entity_scores: Vec<f64>,
    pub weight_percent: Option<u32>,
    /// Best `M` for paths, top-level attention weight otherwise.
    pub score: f64,
    pub text: String,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExplanationGroup {
    pub kind: GroupKind,
    pub user: usize,
    pub query: usize,
    pub item: usize,
    pub explanations: Vec<Explanation>,
}

impl ExplanationGroup {
    pub fn to_json(&self, corpus: &Corpus) -> Value {
        let rels = |r: &[crate::corpus::Relation]| r.iter().map(|r| r.name()).collect::<Vec<_>>();
        let list: Vec<Value> = self
            .explanations
            .iter()
            .map(|e| {
                json!({
                    "source": e.source,
                    "domain": e.domain.map(Domain::name),
                    "user_relations": e.path.as_ref().map(|p| rels(&p.user)),
                    "item_relations": e.path.as_ref().map(|p| rels(&p.item)),
                    "meeting_type": e.path.as_ref().map(|p| p.meeting.name()),
                    "entities": e.entities.iter().map(|&r| corpus.entity_name(r)).collect::<Vec<_>>(),
                    "entity_scores": e.entity_scores,
                    "weight_percent": e.weight_percent,
                    "score": e.score,
                    "text": e.text,
                })
            })
            .collect();
        json!({"kind": self.kind, "explanations": list})
    }
}

/// One output line: both groups for a (user, query, item).
pub fn explanation_record(
    corpus: &Corpus,
    user: usize,
    query: usize,
    item: usize,
    mae: Option<&ExplanationGroup>,
    mie: Option<&ExplanationGroup>,
) -> Value {
    json!({
        "query_key": corpus.query_key(user, query),
        "user": corpus.registry(EntityType::User).name(user),
        "query": corpus.query(query).text,
        "item": corpus.registry(EntityType::Item).name(item),
        "mae": mae.map(|g| g.to_json(corpus)),
        "mie": mie.map(|g| g.to_json(corpus)),
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExplainConfig {
    pub gamma: f64,
    pub max_path_len: usize,
    pub topk: usize,
    pub history_cap: usize,
    /// Minimum `M` a path must beat; `None` uses the chance level
    /// `−2 ln |Ω_e|` of the path's meeting type.
    pub score_floor: Option<f64>,
}

impl Default for ExplainConfig {
    fn default() -> Self {
        ExplainConfig {
            gamma: 1.0,
            max_path_len: 2,
            topk: MAX_GROUP_SIZE,
            history_cap: DEFAULT_HISTORY_CAP,
            score_floor: None,
        }
    }
}

fn domain_of(t: EntityType) -> Option<Domain> {
    Domain::ALL.into_iter().find(|d| d.entity_type() == t)
}

fn entity_list(corpus: &Corpus, entities: &[EntityRef]) -> String {
    entities.iter().map(|&e| corpus.entity_name(e)).collect::<Vec<_>>().join(", ")
}

/// Builds both explanation kinds against one corpus and template set.
pub struct Explainer<'a> {
    corpus: &'a Corpus,
    templates: TemplateSet,
    config: ExplainConfig,
    paths: Vec<RelationPath>,
}

impl<'a> Explainer<'a> {
    pub fn new(corpus: &'a Corpus, templates: TemplateSet, config: ExplainConfig) -> Result<Self> {
        if !config.gamma.is_finite() {
            return Err(Error::InvalidArgument("gamma must be finite".into()));
        }
        if config.topk == 0 || config.topk > MAX_GROUP_SIZE {
            return Err(Error::InvalidArgument(format!("explanation topk must be in 1..={MAX_GROUP_SIZE}")));
        }
        let paths = enumerate_paths(config.max_path_len)?;
        Ok(Explainer {
            corpus,
            templates,
            config,
            paths,
        })
    }

    pub fn config(&self) -> &ExplainConfig {
        &self.config
    }

    pub fn templates(&self) -> &TemplateSet {
        &self.templates
    }

    /// Post-hoc group: the best soft-matched knowledge paths. A path is kept
    /// only if its best meeting entity beats the score floor (by default the
    /// chance level of a uniform match on both sides); when none does the
    /// group holds the single direct-match explanation.
    pub fn mae(&self, store: &EmbeddingStore, user: usize, query: usize, item: usize) -> Result<ExplanationGroup> {
        let c = self.corpus;
        let intent = purchase_intent(user, query, c, store, self.config.history_cap).combined();
        let knowledge: Vec<RelationPath> = self.paths.iter().filter(|p| !p.is_direct()).cloned().collect();
        let ranked = top_paths(&knowledge, &intent, item, store, self.config.gamma, knowledge.len().max(1))?;
        let query_text = c.query(query).text.as_str();
        let mut explanations: Vec<Explanation> = ranked
            .into_iter()
            .filter(|p| {
                let floor = self
                    .config
                    .score_floor
                    .unwrap_or_else(|| -2.0 * (c.count(p.path.meeting) as f64).ln());
                p.score > floor
            })
            .take(self.config.topk)
            .map(|p| {
                let entities: Vec<EntityRef> = p.entities.iter().map(|&(e, _)| EntityRef::new(p.path.meeting, e)).collect();
                let domain = domain_of(p.path.meeting).filter(|d| *d != Domain::Item);
                let text = match domain {
                    Some(d) => self.templates.render(
                        TemplateId::Domain,
                        &Slots {
                            domain: Some(&self.templates.domain_phrase(d)),
                            entities: Some(entity_list(c, &entities)),
                            ..Slots::default()
                        },
                    ),
                    None => {
                        let phrase = p.path.user[1..]
                            .iter()
                            .chain(&p.path.item)
                            .map(|&r| self.templates.relation_phrase(r))
                            .collect::<Vec<_>>()
                            .join(" and ");
                        self.templates.render(
                            TemplateId::Path,
                            &Slots {
                                relation_phrase: Some(phrase),
                                query: Some(query_text),
                                entities: Some(entity_list(c, &entities)),
                                ..Slots::default()
                            },
                        )
                    }
                };
                Explanation {
                    source: Source::Path,
                    domain,
                    entities,
                    entity_scores: p.entities.iter().map(|&(_, m)| m).collect(),
                    weight_percent: None,
                    score: p.score,
                    text,
                    path: Some(p.path),
                }
            })
            .collect();
        if explanations.is_empty() {
            let direct = self.paths.iter().find(|p| p.is_direct()).expect("direct path enumerated").clone();
            let ends = PathEnds::new(&direct, &intent, item, store);
            let score = soft_match_scores(&direct, &ends, store, self.config.gamma)?[item];
            explanations.push(Explanation {
                source: Source::Path,
                domain: None,
                entities: Vec::new(),
                entity_scores: Vec::new(),
                weight_percent: None,
                score,
                text: self.templates.render(
                    TemplateId::Direct,
                    &Slots {
                        query: Some(query_text),
                        ..Slots::default()
                    },
                ),
                path: Some(direct),
            });
        }
        Ok(ExplanationGroup {
            kind: GroupKind::Mae,
            user,
            query,
            item,
            explanations,
        })
    }

    /// Intrinsic group from the attention trace: the three heaviest of the
    /// nonempty domains and the popularity gate, with rounded percents.
    pub fn mie(&self, store: &EmbeddingStore, user: usize, query: usize, item: usize) -> Result<ExplanationGroup> {
        if store.kind() != ModelKind::DremHgn {
            return Err(Error::InvalidArgument("intrinsic explanations need a drem-hgn model".into()));
        }
        let intent = purchase_intent(user, query, self.corpus, store, self.config.history_cap);
        let trace = intent.trace.expect("gated model yields a trace");
        let mut candidates: Vec<(f64, usize, Option<Domain>)> = Domain::ALL
            .into_iter()
            .filter(|&d| !trace.domain(d).entities.is_empty())
            .map(|d| (trace.domain_weight(d), d.index(), Some(d)))
            .collect();
        candidates.push((trace.zero_weight, Domain::ALL.len(), None));
        candidates.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));

        let explanations = candidates
            .into_iter()
            .take(self.config.topk)
            .map(|(w, _, d)| {
                let percent = (100.0 * w).round() as u32;
                match d {
                    Some(d) => {
                        let top: Vec<(usize, f64)> = trace.ranked_entities(d).into_iter().take(MAX_ENTITIES).collect();
                        let entities: Vec<EntityRef> = top.iter().map(|&(e, _)| EntityRef::new(d.entity_type(), e)).collect();
                        let text = self.templates.render(
                            TemplateId::Domain,
                            &Slots {
                                percent: Some(percent),
                                domain: Some(&self.templates.domain_phrase(d)),
                                entities: Some(entity_list(self.corpus, &entities)),
                                ..Slots::default()
                            },
                        );
                        Explanation {
                            source: Source::AttentionDomain,
                            domain: Some(d),
                            path: None,
                            entities,
                            entity_scores: top.iter().map(|&(_, w)| w).collect(),
                            weight_percent: Some(percent),
                            score: w,
                            text,
                        }
                    }
                    None => Explanation {
                        source: Source::AttentionPopularity,
                        domain: None,
                        path: None,
                        entities: Vec::new(),
                        entity_scores: Vec::new(),
                        weight_percent: Some(percent),
                        score: w,
                        text: self.templates.render(
                            TemplateId::Popularity,
                            &Slots {
                                percent: Some(percent),
                                ..Slots::default()
                            },
                        ),
                    },
                }
            })
            .collect();
        Ok(ExplanationGroup {
            kind: GroupKind::Mie,
            user,
            query,
            item,
            explanations,
        })
    }
}
