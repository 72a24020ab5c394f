use rand::Rng as _;

use crate::corpus::EntityType;
use crate::rng::Rng;

/// Exponent applied to entity frequencies in the noise distribution.
pub const FREQUENCY_POWER: f64 = 0.75;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NoiseKind {
    UniformItem,
    FrequencyEntity,
}

/// Cumulative sampling table over the entities of one type.
#[derive(Clone, Debug, PartialEq)]
pub struct NoiseDistribution {
    pub kind: NoiseKind,
    pub entity_type: EntityType,
    cumulative: Vec<f64>,
}

impl NoiseDistribution {
    pub fn uniform_items(count: usize) -> Self {
        Self::from_weights(NoiseKind::UniformItem, EntityType::Item, vec![1.0; count])
    }

    /// Draws proportional to `freq^0.75`; all-zero frequencies fall back to uniform.
    pub fn frequency(entity_type: EntityType, freqs: &[u64]) -> Self {
        let mut weights: Vec<f64> = freqs.iter().map(|&f| (f as f64).powf(FREQUENCY_POWER)).collect();
        if weights.iter().all(|&w| w == 0.0) {
            weights.fill(1.0);
        }
        Self::from_weights(NoiseKind::FrequencyEntity, entity_type, weights)
    }

    fn from_weights(kind: NoiseKind, entity_type: EntityType, weights: Vec<f64>) -> Self {
        let total: f64 = weights.iter().sum();
        let mut acc = 0.0;
        let mut cumulative: Vec<f64> = weights
            .iter()
            .map(|w| {
                acc += w / total;
                acc
            })
            .collect();
        if let Some(last) = cumulative.last_mut() {
            *last = 1.0;
        }
        Self {
            kind,
            entity_type,
            cumulative,
        }
    }

    pub fn len(&self) -> usize {
        self.cumulative.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cumulative.is_empty()
    }

    pub fn probability(&self, id: usize) -> f64 {
        let prev = if id == 0 { 0.0 } else { self.cumulative[id - 1] };
        self.cumulative[id] - prev
    }

    /// # Panics
    /// If the distribution is empty.
    pub fn sample(&self, rng: &mut Rng) -> usize {
        let u: f64 = rng.gen();
        self.cumulative
            .partition_point(|&c| c <= u)
            .min(self.cumulative.len() - 1)
    }
}

/// `k` i.i.d. draws from `dist`.
pub fn sample_negatives(dist: &NoiseDistribution, k: usize, rng: &mut Rng) -> Vec<usize> {
    (0..k).map(|_| dist.sample(rng)).collect()
}
