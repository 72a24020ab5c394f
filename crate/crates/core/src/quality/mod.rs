//! Explanation-quality prediction.
//!
//! Explanation groups are turned into fixed-layout feature vectors, paired
//! in both orders with crowd preference labels, and fed to a boosted-tree
//! classifier evaluated by grouped k-fold cross validation. Annotation
//! agreement utilities live in [`stats`](self) as well.

mod cv;
mod dataset;
mod features;
mod gbdt;
mod stats;

pub use cv::{assign_folds, cross_validate, default_grid, CvCounts, CvReport};
pub use dataset::{
    aggregate_labels, build_pair_dataset, parse_feature_csv, parse_labels, parse_manifest, write_feature_csv,
    Annotation, Aspect, Case, GroupRole, Label, Manifest, Preference, PreferencePair,
};
pub use features::{
    build_group_vector, entropy, feature_exist_confidence, feature_existence, feature_existence_rate, group_layout,
    log_purchase_prob, AssociationIndex, GroupContext, AGGREGATES, ENTITY_FEATURES, GROUP_FEATURES,
    GROUP_VECTOR_LEN,
};
pub use gbdt::{best_split, gbdt_predict, gbdt_train, GbdtModel, GbdtParams, Node, SplitChoice, Tree};
pub use stats::{fleiss_kappa, majority_vote, pearson};
