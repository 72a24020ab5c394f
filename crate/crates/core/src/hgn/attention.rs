use crate::store::{EmbeddingStore, TableId};
use crate::corpus::Domain;

/// Borrowed attention parameters: `W^f` (α×β×α), bias (α×β), `W^h` (β).
#[derive(Clone, Copy, Debug)]
pub struct AttentionParams<'a> {
    pub proj: &'a [f64],
    pub bias: &'a [f64],
    pub head: &'a [f64],
    pub dim: usize,
    pub heads: usize,
}

impl<'a> AttentionParams<'a> {
    pub fn domain(store: &'a EmbeddingStore, domain: Domain) -> Self {
        Self {
            proj: store.row(TableId::DomainAttnProj(domain), 0),
            bias: store.row(TableId::DomainAttnBias(domain), 0),
            head: store.row(TableId::DomainAttnHead(domain), 0),
            dim: store.dim(),
            heads: store.heads(),
        }
    }

    pub fn user(store: &'a EmbeddingStore) -> Self {
        Self {
            proj: store.row(TableId::UserAttnProj, 0),
            bias: store.row(TableId::UserAttnBias, 0),
            head: store.row(TableId::UserAttnHead, 0),
            dim: store.dim(),
            heads: store.heads(),
        }
    }
}

/// Query-conditioned part of the attention function.
///
/// `M = tanh(W^f·q + b)` is an α×β array; the logit of a candidate `x` is
/// `(xᵀ·M)·W^h`, which equals `x·v` with `v = M·W^h`.
#[derive(Clone, Debug, PartialEq)]
pub struct QueryGate {
    /// α×β, row-major over (p, h).
    pub m: Vec<f64>,
    /// α.
    pub v: Vec<f64>,
}

impl QueryGate {
    pub fn new(query: &[f64], params: &AttentionParams<'_>) -> Self {
        let (a, b) = (params.dim, params.heads);
        let mut m = vec![0.0; a * b];
        for (ph, out) in m.iter_mut().enumerate() {
            let w = &params.proj[ph * a..(ph + 1) * a];
            *out = (crate::vecmath::dot(w, query) + params.bias[ph]).tanh();
        }
        let v = (0..a)
            .map(|p| (0..b).map(|h| m[p * b + h] * params.head[h]).sum())
            .collect();
        Self { m, v }
    }

    pub fn logit(&self, x: &[f64]) -> f64 {
        crate::vecmath::dot(x, &self.v)
    }
}

/// Attention score of candidate `x` for query `q`.
pub fn attention_logit(query: &[f64], x: &[f64], params: &AttentionParams<'_>) -> f64 {
    QueryGate::new(query, params).logit(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params<'a>(proj: &'a [f64], bias: &'a [f64], head: &'a [f64], dim: usize, heads: usize) -> AttentionParams<'a> {
        AttentionParams { proj, bias, head, dim, heads }
    }

    #[test]
    fn zero_projection_gives_zero_logit() {
        let (a, b) = (3, 2);
        let proj = vec![0.0; a * b * a];
        let bias = vec![0.0; a * b];
        let head = vec![0.7, -0.2];
        let p = params(&proj, &bias, &head, a, b);
        assert_eq!(attention_logit(&[0.3, -1.0, 2.0], &[5.0, 1.0, -4.0], &p), 0.0);
    }

    #[test]
    fn saturated_single_head_sums_coordinates() {
        let a = 3;
        let proj = vec![0.0; a * a];
        let bias = vec![50.0; a];
        let head = [1.0];
        let p = params(&proj, &bias, &head, a, 1);
        let x = [0.5, -1.5, 2.25];
        assert!((attention_logit(&[1.0, 1.0, 1.0], &x, &p) - 1.25).abs() < 1e-12);
    }

    #[test]
    fn matches_explicit_tensor_contraction() {
        // Independent loop-nest evaluation of (xᵀ·tanh(W^f·q + b))·W^h.
        let (a, b) = (4, 2);
        let proj: Vec<f64> = (0..a * b * a).map(|i| ((i * 37 % 23) as f64 - 11.0) / 13.0).collect();
        let bias: Vec<f64> = (0..a * b).map(|i| (i as f64 - 3.5) / 7.0).collect();
        let head = vec![0.9, -1.3];
        let q = [0.2, -0.7, 1.1, 0.4];
        let x = [-0.5, 0.8, 0.3, -1.2];
        let mut oracle = 0.0;
        for h in 0..b {
            let mut head_val = 0.0;
            for p in 0..a {
                let mut z = bias[p * b + h];
                for r in 0..a {
                    z += proj[(p * b + h) * a + r] * q[r];
                }
                head_val += x[p] * z.tanh();
            }
            oracle += head_val * head[h];
        }
        let got = attention_logit(&q, &x, &params(&proj, &bias, &head, a, b));
        assert!((got - oracle).abs() < 1e-12);
    }
}
