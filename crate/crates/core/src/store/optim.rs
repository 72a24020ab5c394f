use std::collections::BTreeMap;

use super::TableId;
use crate::error::{Error, Result};

pub const ADAGRAD_EPSILON: f64 = 1e-10;

/// Sparse batch gradient keyed by (table, row).
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Gradients {
    rows: BTreeMap<(TableId, usize), Vec<f64>>,
}

impl Gradients {
    pub fn new() -> Self {
        Self::default()
    }

    /// Zero-initialized on first touch.
    pub fn row_mut(&mut self, id: TableId, row: usize, len: usize) -> &mut [f64] {
        self.rows
            .entry((id, row))
            .or_insert_with(|| vec![0.0; len])
    }

    pub fn get(&self, id: TableId, row: usize) -> Option<&[f64]> {
        self.rows.get(&(id, row)).map(Vec::as_slice)
    }

    pub fn iter(&self) -> impl Iterator<Item = ((TableId, usize), &[f64])> {
        self.rows.iter().map(|(&k, v)| (k, v.as_slice()))
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn norm(&self) -> f64 {
        self.rows
            .values()
            .flatten()
            .map(|g| g * g)
            .sum::<f64>()
            .sqrt()
    }

    pub fn scale(&mut self, factor: f64) {
        for v in self.rows.values_mut().flatten() {
            *v *= factor;
        }
    }

    /// Adds `other` row by row.
    pub fn merge(&mut self, other: Gradients) {
        for (key, g) in other.rows {
            match self.rows.get_mut(&key) {
                Some(dst) => crate::vecmath::add_assign(dst, &g),
                None => {
                    self.rows.insert(key, g);
                }
            }
        }
    }
}

/// Rescales the whole batch gradient so its global L2 norm is at most `max_norm`.
pub fn clip_gradients(grads: &mut Gradients, max_norm: f64) -> Result<()> {
    if !(max_norm > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "clip norm must be positive, got {max_norm}"
        )));
    }
    if grads.rows.values().flatten().any(|g| g.is_nan()) {
        return Err(Error::NonFinite("NaN in batch gradient".into()));
    }
    let norm = grads.norm();
    if norm > max_norm {
        grads.scale(max_norm / norm);
    }
    Ok(())
}

/// `accum += g²; param -= lr · g / (√accum + ε)`, coordinatewise.
pub fn adagrad_step(
    params: &mut [f64],
    accum: &mut [f64],
    grad: &[f64],
    learning_rate: f64,
) -> Result<()> {
    if params.len() != grad.len() || accum.len() != grad.len() {
        return Err(Error::ShapeMismatch {
            expected: params.len(),
            actual: grad.len(),
        });
    }
    if learning_rate < 0.0 {
        return Err(Error::InvalidArgument(format!(
            "learning rate must be nonnegative, got {learning_rate}"
        )));
    }
    for ((p, a), &g) in params.iter_mut().zip(accum.iter_mut()).zip(grad) {
        if g == 0.0 {
            continue;
        }
        *a += g * g;
        *p -= learning_rate * g / (a.sqrt() + ADAGRAD_EPSILON);
    }
    Ok(())
}

/// Linear decay from `initial_lr` to zero, floored at `1e-4 · initial_lr`.
pub fn decay_schedule(initial_lr: f64, progress: f64) -> f64 {
    let progress = progress.clamp(0.0, 1.0);
    (initial_lr * (1.0 - progress)).max(1e-4 * initial_lr)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn one_row(values: &[f64]) -> Gradients {
        let mut g = Gradients::new();
        g.row_mut(TableId::Item, 0, values.len()).copy_from_slice(values);
        g
    }

    #[test]
    fn clip_boundary_and_scaling() {
        let mut g = one_row(&[3.0, 4.0]);
        clip_gradients(&mut g, 5.0).unwrap();
        assert_eq!(g.get(TableId::Item, 0).unwrap(), [3.0, 4.0]);

        let mut g = one_row(&[6.0, 8.0]);
        clip_gradients(&mut g, 5.0).unwrap();
        assert_eq!(g.get(TableId::Item, 0).unwrap(), [3.0, 4.0]);

        let mut g = one_row(&[0.0, 0.0]);
        clip_gradients(&mut g, 5.0).unwrap();
        assert_eq!(g.get(TableId::Item, 0).unwrap(), [0.0, 0.0]);
    }

    #[test]
    fn clip_uses_global_norm_across_rows() {
        let mut g = one_row(&[6.0]);
        g.row_mut(TableId::Brand, 2, 1)[0] = 8.0;
        clip_gradients(&mut g, 5.0).unwrap();
        assert_eq!(g.get(TableId::Item, 0).unwrap(), [3.0]);
        assert_eq!(g.get(TableId::Brand, 2).unwrap(), [4.0]);
    }

    #[test]
    fn clip_rejects_nan() {
        let mut g = one_row(&[f64::NAN, 1.0]);
        assert!(matches!(clip_gradients(&mut g, 5.0), Err(Error::NonFinite(_))));
        assert!(clip_gradients(&mut one_row(&[1.0]), 0.0).is_err());
    }

    #[test]
    fn adagrad_single_step() {
        let (mut p, mut a) = ([1.0], [0.0]);
        adagrad_step(&mut p, &mut a, &[2.0], 0.5).unwrap();
        assert_eq!(a[0], 4.0);
        assert!((p[0] - (1.0 - 0.5 * 2.0 / (2.0 + 1e-10))).abs() < 1e-15);
        assert!((p[0] - 0.5).abs() < 1e-9);
    }

    #[test]
    fn adagrad_zero_gradient_is_noop() {
        let (mut p, mut a) = ([1.5], [2.0]);
        adagrad_step(&mut p, &mut a, &[0.0], 0.5).unwrap();
        assert_eq!((p[0], a[0]), (1.5, 2.0));
    }

    #[test]
    fn adagrad_two_steps() {
        // Independent recurrence: after step 1 accum=1, p=-1/(1+ε);
        // after step 2 accum=2, p -= 1/(√2+ε).
        let (mut p, mut a) = ([0.0], [0.0]);
        adagrad_step(&mut p, &mut a, &[1.0], 1.0).unwrap();
        adagrad_step(&mut p, &mut a, &[1.0], 1.0).unwrap();
        let expected = -1.0 / (1.0 + 1e-10) - 1.0 / (2f64.sqrt() + 1e-10);
        assert!((p[0] - expected).abs() < 1e-15);
        assert!((p[0] + 1.7071).abs() < 1e-4);
    }

    #[test]
    fn adagrad_shape_mismatch() {
        let (mut p, mut a) = ([0.0, 0.0], [0.0, 0.0]);
        assert!(matches!(
            adagrad_step(&mut p, &mut a, &[1.0], 1.0),
            Err(Error::ShapeMismatch { .. })
        ));
    }

    #[test]
    fn decay_examples() {
        assert_eq!(decay_schedule(0.5, 0.0), 0.5);
        assert!((decay_schedule(0.5, 1.0) - 5e-5).abs() < 1e-18);
        assert_eq!(decay_schedule(0.5, 0.5), 0.25);
    }

    proptest! {
        #[test]
        fn clipped_norm_is_bounded(values in prop::collection::vec(-1e3f64..1e3, 1..40), max in 1e-3f64..50.0) {
            let mut g = one_row(&values);
            clip_gradients(&mut g, max).unwrap();
            prop_assert!(g.norm() <= max + 1e-12);
        }

        #[test]
        fn accumulators_are_monotone(grads in prop::collection::vec(-10f64..10.0, 1..20), lr in 0f64..2.0) {
            let (mut p, mut a) = ([0.3], [0.0]);
            let mut prev = 0.0;
            for g in grads {
                adagrad_step(&mut p, &mut a, &[g], lr).unwrap();
                prop_assert!(a[0] >= prev);
                prev = a[0];
            }
        }

        #[test]
        fn zero_learning_rate_is_identity(grads in prop::collection::vec(-10f64..10.0, 3), start in prop::collection::vec(-1f64..1.0, 3)) {
            let mut p = start.clone();
            let mut a = vec![0.0; 3];
            adagrad_step(&mut p, &mut a, &grads, 0.0).unwrap();
            prop_assert_eq!(p, start);
        }
    }
}
