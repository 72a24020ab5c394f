use std::fmt::Write as _;
use std::time::Instant;

use rand::seq::SliceRandom;
use rayon::prelude::*;

use super::noise::{sample_negatives, NoiseDistribution};
use super::objective::{accumulate, Example, SampledExample};
use super::ModelConfig;
use crate::corpus::{Corpus, EntityType};
use crate::error::{Error, Result};
use crate::rng::{self, Rng};
use crate::store::{clip_gradients, decay_schedule, EmbeddingStore, Gradients, RegistrySizes, StoreSpec};

#[derive(Clone, Debug, PartialEq)]
pub struct EpochLog {
    pub epoch: usize,
    pub mean_loss: f64,
    pub lr: f64,
    pub wall_seconds: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrainingLog {
    pub deterministic: bool,
    pub epochs: Vec<EpochLog>,
}

impl TrainingLog {
    /// CSV `epoch,mean_loss,lr,wall_seconds`, preceded by a `# mode=` comment.
    pub fn to_csv(&self) -> String {
        let mode = if self.deterministic { "deterministic" } else { "parallel" };
        let mut out = format!("# mode={mode}\nepoch,mean_loss,lr,wall_seconds\n");
        for e in &self.epochs {
            let _ = writeln!(out, "{},{},{},{:.3}", e.epoch, e.mean_loss, e.lr, e.wall_seconds);
        }
        out
    }
}

struct Noise {
    items: NoiseDistribution,
    tails: [Option<NoiseDistribution>; 5],
}

impl Noise {
    fn new(corpus: &Corpus) -> Self {
        let mut tails: [Option<NoiseDistribution>; 5] = Default::default();
        for kind in [EntityType::Item, EntityType::Brand, EntityType::Category] {
            if corpus.count(kind) > 0 {
                tails[kind.index()] = Some(NoiseDistribution::frequency(kind, corpus.entity_frequencies(kind)));
            }
        }
        Self {
            items: NoiseDistribution::uniform_items(corpus.count(EntityType::Item)),
            tails,
        }
    }

    fn sample(&self, example: Example, k: usize, rng: &mut Rng) -> SampledExample {
        let dist = match example {
            Example::Purchase { .. } => &self.items,
            Example::Triple(t) => self.tails[t.tail.kind.index()]
                .as_ref()
                .expect("tail registry is nonempty when a triple exists"),
        };
        SampledExample {
            example,
            negatives: sample_negatives(dist, k, rng),
        }
    }
}

/// Owns the parameters during training. The store only ever holds the last
/// finite state: an update is applied after its gradient passed the checks.
pub struct Trainer<'a> {
    corpus: &'a Corpus,
    config: ModelConfig,
    store: EmbeddingStore,
    examples: Vec<Example>,
    noise: Noise,
}

impl<'a> Trainer<'a> {
    pub fn new(corpus: &'a Corpus, config: ModelConfig) -> Result<Self> {
        config.validate()?;
        let mut examples: Vec<Example> = corpus
            .train_purchases()
            .map(|p| Example::Purchase {
                user: p.user,
                query: p.query,
                item: p.item,
            })
            .collect();
        if examples.is_empty() {
            return Err(Error::InvalidArgument("corpus has no train purchases".into()));
        }
        examples.extend(corpus.triples().iter().map(|&t| Example::Triple(t)));
        let store = EmbeddingStore::init(
            StoreSpec {
                kind: config.kind,
                dim: config.dim,
                heads: config.heads,
                sizes: RegistrySizes::of(corpus),
            },
            config.seed,
        )?;
        Ok(Self {
            corpus,
            noise: Noise::new(corpus),
            config,
            store,
            examples,
        })
    }

    pub fn store(&self) -> &EmbeddingStore {
        &self.store
    }

    pub fn into_store(self) -> EmbeddingStore {
        self.store
    }

    fn batch_gradient(&self, batch: &[SampledExample]) -> (f64, Gradients) {
        if self.config.deterministic {
            return accumulate(batch, self.corpus, &self.store, &self.config);
        }
        let shard = batch.len().div_ceil(rayon::current_num_threads()).max(1);
        batch
            .par_chunks(shard)
            .map(|chunk| accumulate(chunk, self.corpus, &self.store, &self.config))
            .collect::<Vec<_>>()
            .into_iter()
            .fold((0.0, Gradients::new()), |(l, mut g), (cl, cg)| {
                g.merge(cg);
                (l + cl, g)
            })
    }

    /// Runs every epoch; on divergence the store keeps the last good state.
    pub fn run(&mut self) -> Result<TrainingLog> {
        let mut rng = rng::fork(self.config.seed, "train");
        let batches_per_epoch = self.examples.len().div_ceil(self.config.batch_size);
        let total = (batches_per_epoch * self.config.epochs) as f64;
        let mut log = TrainingLog {
            deterministic: self.config.deterministic,
            epochs: Vec::new(),
        };
        let mut step = 0usize;
        let mut order = self.examples.clone();
        for epoch in 1..=self.config.epochs {
            let start = Instant::now();
            order.shuffle(&mut rng);
            let (mut loss_sum, mut lr) = (0.0, self.config.initial_lr);
            for (b, chunk) in order.chunks(self.config.batch_size).enumerate() {
                let batch: Vec<SampledExample> = chunk
                    .iter()
                    .map(|&ex| self.noise.sample(ex, self.config.negatives, &mut rng))
                    .collect();
                lr = decay_schedule(self.config.initial_lr, step as f64 / total);
                let (loss, mut grads) = self.batch_gradient(&batch);
                let diverged = || Error::Diverged { epoch, batch: b };
                if !loss.is_finite() {
                    return Err(diverged());
                }
                grads.scale(1.0 / batch.len() as f64);
                clip_gradients(&mut grads, self.config.clip_norm).map_err(|_| diverged())?;
                self.store.apply_adagrad(&grads, lr)?;
                loss_sum += loss;
                step += 1;
            }
            log.epochs.push(EpochLog {
                epoch,
                mean_loss: loss_sum / order.len() as f64,
                lr,
                wall_seconds: start.elapsed().as_secs_f64(),
            });
        }
        Ok(log)
    }
}

/// Trains a model from scratch on the train split of `corpus`.
pub fn train(corpus: &Corpus, config: &ModelConfig) -> Result<(EmbeddingStore, TrainingLog)> {
    let mut trainer = Trainer::new(corpus, config.clone())?;
    let log = trainer.run()?;
    Ok((trainer.into_store(), log))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{generate_synthetic, SynthSpec};
    use crate::store::ModelKind;

    fn small_corpus() -> Corpus {
        let spec = SynthSpec {
            users: 20,
            items: 12,
            brands: 3,
            categories: 2,
            queries: 6,
            sessions_per_user: 3,
            test_fraction: 0.3,
        };
        let s = generate_synthetic(&spec, 4).unwrap();
        Corpus::from_strs(&s.triples, &s.purchases, 1).unwrap()
    }

    fn config(kind: ModelKind) -> ModelConfig {
        ModelConfig {
            kind,
            dim: 8,
            epochs: 5,
            batch_size: 16,
            seed: 3,
            ..ModelConfig::default()
        }
    }

    #[test]
    fn loss_decreases_for_both_models() {
        let c = small_corpus();
        for kind in [ModelKind::Drem, ModelKind::DremHgn] {
            let (store, log) = train(&c, &config(kind)).unwrap();
            assert!(store.all_finite());
            let losses: Vec<f64> = log.epochs.iter().map(|e| e.mean_loss).collect();
            assert!(losses.iter().all(|l| l.is_finite()));
            assert!(losses.last() < losses.first(), "{kind:?}: {losses:?}");
        }
    }

    #[test]
    fn deterministic_runs_are_identical() {
        let c = small_corpus();
        let a = train(&c, &config(ModelKind::DremHgn)).unwrap().0;
        let b = train(&c, &config(ModelKind::DremHgn)).unwrap().0;
        assert_eq!(a.to_bytes(), b.to_bytes());
    }

    #[test]
    fn parallel_mode_trains() {
        let c = small_corpus();
        let cfg = ModelConfig {
            deterministic: false,
            ..config(ModelKind::Drem)
        };
        let (store, log) = train(&c, &cfg).unwrap();
        assert!(store.all_finite());
        assert!(log.to_csv().starts_with("# mode=parallel\nepoch,mean_loss,lr,wall_seconds\n"));
    }

    #[test]
    fn needs_train_purchases() {
        let c = Corpus::from_strs("", "u\tq\ti\ttest\n", 1).unwrap();
        assert!(Trainer::new(&c, config(ModelKind::Drem)).is_err());
    }
}
