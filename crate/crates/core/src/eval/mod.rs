//! Top-K retrieval and ranking evaluation.

mod metrics;
mod run;
mod significance;

pub use metrics::{average_precision, evaluate_run, ndcg_at_k, reciprocal_rank, MetricReport, QueryMetrics};
pub use run::{
    parse_qrels, parse_run, qrels_from_corpus, retrieve_run, retrieve_topk, write_qrels, write_run, Qrels,
    RankedList,
};
pub use significance::{fisher_randomization_test, DEFAULT_ITERATIONS};

/// NDCG cutoffs reported when none are configured.
pub const DEFAULT_CUTOFFS: [usize; 2] = [10, 50];

/// Retrieval depth used when none is configured.
pub const DEFAULT_TOPK: usize = 100;
