use super::attention::{AttentionParams, QueryGate};
use super::trace::{AttentionTrace, DomainTrace};
use super::zam::{zam_pool, ZamOutput};
use crate::corpus::{Corpus, Domain};
use crate::store::{EmbeddingStore, Gradients, TableId};
use crate::vecmath::{axpy, dot};

/// Most recent associated entities attended per domain.
pub const DEFAULT_HISTORY_CAP: usize = 64;

#[derive(Clone, Debug)]
struct Pool {
    gate: QueryGate,
    inputs: Vec<Vec<f64>>,
    out: ZamOutput,
}

impl Pool {
    fn run(query: &[f64], params: &AttentionParams<'_>, inputs: Vec<Vec<f64>>) -> Self {
        let gate = QueryGate::new(query, params);
        let refs: Vec<&[f64]> = inputs.iter().map(Vec::as_slice).collect();
        let out = zam_pool(&refs, params.dim, |x| gate.logit(x));
        Self { gate, inputs, out }
    }

    /// Backpropagates `grad_out` through the pooling. Accumulates parameter
    /// gradients into `grads`, query gradient into `grad_query`, and returns
    /// the gradient of every input vector.
    fn backward(
        &self,
        grad_out: &[f64],
        query: &[f64],
        params: &AttentionParams<'_>,
        tables: [TableId; 3],
        grads: &mut Gradients,
        grad_query: &mut [f64],
    ) -> Vec<Vec<f64>> {
        let (a, b) = (params.dim, params.heads);
        let w = &self.out.weights;
        let grad_w: Vec<f64> = self.inputs.iter().map(|x| dot(grad_out, x)).collect();
        // The zero candidate has zero weight-gradient.
        let mean: f64 = w.iter().zip(&grad_w).map(|(w, g)| w * g).sum();
        let grad_logit: Vec<f64> = w.iter().zip(&grad_w).map(|(w, g)| w * (g - mean)).collect();

        let mut grad_v = vec![0.0; a];
        let grad_inputs = self
            .inputs
            .iter()
            .enumerate()
            .map(|(j, x)| {
                axpy(&mut grad_v, grad_logit[j], x);
                let mut gx: Vec<f64> = grad_out.iter().map(|g| w[j] * g).collect();
                axpy(&mut gx, grad_logit[j], &self.gate.v);
                gx
            })
            .collect();

        // v = M·W^h, M = tanh(Z), Z = W^f·q + b.
        let [proj_id, bias_id, head_id] = tables;
        let m = &self.gate.m;
        {
            let gh = grads.row_mut(head_id, 0, b);
            for p in 0..a {
                for h in 0..b {
                    gh[h] += grad_v[p] * m[p * b + h];
                }
            }
        }
        let grad_z: Vec<f64> = (0..a * b)
            .map(|ph| {
                let (p, h) = (ph / b, ph % b);
                grad_v[p] * params.head[h] * (1.0 - m[ph] * m[ph])
            })
            .collect();
        crate::vecmath::add_assign(grads.row_mut(bias_id, 0, a * b), &grad_z);
        let gp = grads.row_mut(proj_id, 0, a * b * a);
        for (ph, &gz) in grad_z.iter().enumerate() {
            if gz == 0.0 {
                continue;
            }
            axpy(&mut gp[ph * a..(ph + 1) * a], gz, query);
            axpy(grad_query, gz, &params.proj[ph * a..(ph + 1) * a]);
        }
        grad_inputs
    }
}

/// Cached forward pass of the network for one (user, query).
#[derive(Clone, Debug)]
pub struct HgnForward {
    entity_ids: [Vec<usize>; 3],
    domains: Vec<Pool>,
    top: Pool,
}

impl HgnForward {
    pub fn run(
        user: usize,
        query: &[f64],
        corpus: &Corpus,
        store: &EmbeddingStore,
        history_cap: usize,
    ) -> Self {
        Self::run_excluding(user, query, corpus, store, history_cap, None)
    }

    /// Like [`HgnForward::run`] but with `held_out` removed from the item
    /// domain, so a training purchase cannot attend to its own target.
    pub fn run_excluding(
        user: usize,
        query: &[f64],
        corpus: &Corpus,
        store: &EmbeddingStore,
        history_cap: usize,
        held_out: Option<usize>,
    ) -> Self {
        let mut entity_ids: [Vec<usize>; 3] = Default::default();
        let mut domains = Vec::with_capacity(3);
        for d in Domain::ALL {
            let all: Vec<usize> = match (d, held_out) {
                (Domain::Item, Some(h)) => corpus.user_domain(user, d).iter().copied().filter(|&e| e != h).collect(),
                _ => corpus.user_domain(user, d).to_vec(),
            };
            let ids = all[all.len().saturating_sub(history_cap)..].to_vec();
            let inputs = ids
                .iter()
                .map(|&e| store.entity(d.entity_type(), e).to_vec())
                .collect();
            domains.push(Pool::run(query, &AttentionParams::domain(store, d), inputs));
            entity_ids[d.index()] = ids;
        }
        let domain_vectors = domains.iter().map(|p| p.out.pooled.clone()).collect();
        let top = Pool::run(query, &AttentionParams::user(store), domain_vectors);
        Self {
            entity_ids,
            domains,
            top,
        }
    }

    pub fn user_vector(&self) -> &[f64] {
        &self.top.out.pooled
    }

    pub fn trace(&self) -> AttentionTrace {
        let domains = Domain::ALL.map(|d| {
            let pool = &self.domains[d.index()];
            DomainTrace {
                entities: self.entity_ids[d.index()].clone(),
                weights: pool.out.weights.clone(),
                zero_weight: pool.out.zero_weight,
            }
        });
        let mut domain_weights = [0.0; 3];
        domain_weights.copy_from_slice(&self.top.out.weights);
        AttentionTrace {
            domains,
            domain_weights,
            zero_weight: self.top.out.zero_weight,
        }
    }

    /// Backpropagates the gradient of the user vector into every attention
    /// parameter and attended entity embedding, returning the query gradient.
    pub fn backward(
        &self,
        grad_user: &[f64],
        query: &[f64],
        store: &EmbeddingStore,
        grads: &mut Gradients,
    ) -> Vec<f64> {
        let mut grad_query = vec![0.0; query.len()];
        let grad_domains = self.top.backward(
            grad_user,
            query,
            &AttentionParams::user(store),
            [TableId::UserAttnProj, TableId::UserAttnBias, TableId::UserAttnHead],
            grads,
            &mut grad_query,
        );
        for d in Domain::ALL {
            let pool = &self.domains[d.index()];
            if pool.inputs.is_empty() {
                continue;
            }
            let grad_entities = pool.backward(
                &grad_domains[d.index()],
                query,
                &AttentionParams::domain(store, d),
                [
                    TableId::DomainAttnProj(d),
                    TableId::DomainAttnBias(d),
                    TableId::DomainAttnHead(d),
                ],
                grads,
                &mut grad_query,
            );
            let table = TableId::for_entity(d.entity_type());
            for (&e, g) in self.entity_ids[d.index()].iter().zip(grad_entities) {
                crate::vecmath::add_assign(grads.row_mut(table, e, g.len()), &g);
            }
        }
        grad_query
    }
}

/// Query-conditioned user vector and its attention trace.
pub fn user_vector(
    user: usize,
    query: &[f64],
    corpus: &Corpus,
    store: &EmbeddingStore,
    history_cap: usize,
) -> (Vec<f64>, AttentionTrace) {
    let fwd = HgnForward::run(user, query, corpus, store, history_cap);
    (fwd.user_vector().to_vec(), fwd.trace())
}
