use std::collections::HashSet;

use rand::seq::SliceRandom;

use super::{Corpus, Split};
use crate::error::{Error, Result};
use crate::rng;

/// Assigns train/test splits by distinct query string.
///
/// `round(test_fraction · n)` query strings (clamped so both sides are
/// nonempty) become test queries; every purchase inherits the split of its
/// query. Only valid for corpora whose input carried no split column.
pub fn split_corpus(corpus: &Corpus, test_fraction: f64, seed: u64) -> Result<Corpus> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "test fraction must lie in (0, 1), got {test_fraction}"
        )));
    }
    if corpus.has_split() {
        return Err(Error::InvalidArgument(
            "corpus already carries an explicit split".into(),
        ));
    }
    let n = corpus.queries().len();
    if n < 2 {
        return Err(Error::InvalidArgument(format!(
            "splitting needs at least 2 distinct queries, found {n}"
        )));
    }
    let n_test = ((test_fraction * n as f64).round() as usize).clamp(1, n - 1);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng::fork(seed, "split"));
    let test: HashSet<usize> = order[..n_test].iter().copied().collect();
    Ok(corpus.with_splits(|p| {
        if test.contains(&p.query) {
            Split::Test
        } else {
            Split::Train
        }
    }))
}
