//! Latent knowledge-graph product search.
//!
//! The crate covers the full pipeline: corpus ingestion ([`corpus`]), the
//! parameter store and optimizer ([`store`]), the translation-based retrieval
//! model and its training loop ([`model`]), the hierarchical gated attention
//! network that builds query-conditioned user vectors ([`hgn`]), ranking
//! evaluation ([`eval`]), search explanations ([`explain`]) and the
//! explanation-quality prediction pipeline ([`quality`]).

pub mod config;
pub mod corpus;
pub mod error;
pub mod eval;
pub mod explain;
pub mod hgn;
pub mod model;
pub mod quality;
pub mod rng;
pub mod store;
pub(crate) mod vecmath;

pub use error::{Error, Result};
