//! Search explanations.
//!
//! Post-hoc explanations soft-match relation walks from the user-query pair
//! and from the item against every entity of a shared type. Intrinsic
//! explanations read the attention trace of the gated user encoder. Both
//! are rendered from one template set.

mod group;
mod paths;
mod templates;

pub use group::{
    explanation_record, ExplainConfig, Explainer, Explanation, ExplanationGroup, GroupKind, Source, MAX_ENTITIES,
    MAX_GROUP_SIZE,
};
pub use paths::{
    enumerate_paths, observed_meetings, soft_match, soft_match_scores, top_paths, InferencePath, PathEnds,
    RelationPath,
};
pub use templates::{Slots, TemplateId, TemplateSet, DEFAULT_TEMPLATES};
