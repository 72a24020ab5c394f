//! Hierarchical gated network.
//!
//! Each knowledge domain of a user (purchased items, their brands, their
//! categories) is pooled with zero attention conditioned on the query; the
//! three domain vectors are pooled again by a second zero-attention layer.
//! The zero candidate lets the network abstain: when it takes all the mass
//! the user vector vanishes and retrieval falls back to the query alone.

mod attention;
mod network;
mod trace;
mod zam;

pub use attention::{attention_logit, AttentionParams, QueryGate};
pub use network::{user_vector, HgnForward, DEFAULT_HISTORY_CAP};
pub use trace::{AttentionTrace, DomainTrace};
pub use zam::{zam_pool, ZamOutput};
