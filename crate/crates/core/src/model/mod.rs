//! Translation-based retrieval model.
//!
//! A query is encoded as `q = tanh(W·mean(words) + b)` and acts as the
//! dynamic search&purchase relation: the purchase intent of user `u` is
//! `u + q`, and items are scored by `(u + q)·i`. Static knowledge relations
//! are modeled the same way, `(h + r)·t`. Both terms are trained jointly with
//! negative sampling.

mod config;
mod noise;
mod objective;
mod scoring;
mod train;

pub use config::ModelConfig;
pub use noise::{sample_negatives, NoiseDistribution, NoiseKind, FREQUENCY_POWER};
pub use objective::{loss_and_grad, Example, SampledExample};
pub use scoring::{encode_query, purchase_intent, purchase_logit, triple_logit, Intent};
pub use train::{train, EpochLog, Trainer, TrainingLog};

pub use crate::store::ModelKind;
