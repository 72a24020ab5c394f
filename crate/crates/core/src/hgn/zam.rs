use crate::vecmath::softmax;

/// Zero-attention pooling result.
#[derive(Clone, Debug, PartialEq)]
pub struct ZamOutput {
    pub pooled: Vec<f64>,
    /// One weight per input, in input order.
    pub weights: Vec<f64>,
    /// Mass assigned to the zero vector.
    pub zero_weight: f64,
}

/// Softmax-pools `inputs` against an extra all-zero candidate.
///
/// `logit` scores a candidate vector; the zero candidate is scored as
/// `logit(0)` and contributes nothing to the pooled vector.
pub fn zam_pool(inputs: &[&[f64]], dim: usize, logit: impl Fn(&[f64]) -> f64) -> ZamOutput {
    let zero = vec![0.0; dim];
    let mut logits: Vec<f64> = inputs.iter().map(|x| logit(x)).collect();
    logits.push(logit(&zero));
    let mut weights = softmax(&logits);
    let zero_weight = weights.pop().unwrap_or(1.0);
    let mut pooled = zero;
    for (x, &w) in inputs.iter().zip(&weights) {
        crate::vecmath::axpy(&mut pooled, w, x);
    }
    ZamOutput {
        pooled,
        weights,
        zero_weight,
    }
}
