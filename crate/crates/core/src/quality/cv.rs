use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rayon::prelude::*;

use super::dataset::{Aspect, Preference, PreferencePair};
use super::gbdt::{gbdt_predict, gbdt_train, GbdtParams};
use crate::rng::fork;
use crate::{Error, Result};

/// Cross-validated outcome counts for one aspect.
#[derive(Clone, Debug, PartialEq)]
pub struct CvCounts {
    pub aspect: Aspect,
    pub total: usize,
    pub correct: usize,
    /// Equal/none truth, predicted a strict preference.
    pub type1: usize,
    /// Strict truth, predicted wrongly.
    pub type2: usize,
    pub params: GbdtParams,
}

impl CvCounts {
    pub fn accuracy(&self) -> f64 {
        if self.total == 0 {
            0.0
        } else {
            self.correct as f64 / self.total as f64
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CvReport {
    pub rows: Vec<CvCounts>,
}

impl CvReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("aspect,total,correct,type1,type2\n");
        for r in &self.rows {
            let _ = writeln!(out, "{},{},{},{},{}", r.aspect.name(), r.total, r.correct, r.type1, r.type2);
        }
        out
    }
}

/// Corners of the tuning ranges: depth 5–20, leaves 10–30, minimum leaf
/// data 10–50, learning rate 0.1–0.5.
pub fn default_grid() -> Vec<GbdtParams> {
    let mut grid = Vec::new();
    for max_depth in [5, 20] {
        for max_leaves in [10, 30] {
            for min_leaf in [10, 50] {
                for learning_rate in [0.1, 0.5] {
                    grid.push(GbdtParams {
                        n_trees: 50,
                        learning_rate,
                        max_depth,
                        max_leaves,
                        min_leaf,
                    });
                }
            }
        }
    }
    grid
}

/// Shuffled round-robin fold per case id.
pub fn assign_folds(case_ids: &BTreeSet<String>, folds: usize, seed: u64) -> Result<BTreeMap<String, usize>> {
    if folds < 2 {
        return Err(Error::InvalidArgument("cross validation needs at least 2 folds".into()));
    }
    if folds > case_ids.len() {
        return Err(Error::InvalidArgument(format!(
            "{folds} folds exceed {} cases",
            case_ids.len()
        )));
    }
    let mut ids: Vec<&String> = case_ids.iter().collect();
    ids.shuffle(&mut fork(seed, "folds"));
    Ok(ids.into_iter().enumerate().map(|(i, id)| (id.clone(), i % folds)).collect())
}

fn target(label: Preference) -> bool {
    label == Preference::First
}

fn score(label: Preference, predicted_first: bool, counts: &mut CvCounts) {
    counts.total += 1;
    let correct = match label {
        Preference::First => predicted_first,
        _ => !predicted_first,
    };
    if correct {
        counts.correct += 1;
    } else if label.is_strict() {
        counts.type2 += 1;
    } else {
        counts.type1 += 1;
    }
}

fn run_folds(pairs: &[&PreferencePair], fold_of: &BTreeMap<String, usize>, folds: usize, params: &GbdtParams, aspect: Aspect) -> Result<CvCounts> {
    let mut counts = CvCounts {
        aspect,
        total: 0,
        correct: 0,
        type1: 0,
        type2: 0,
        params: *params,
    };
    for k in 0..folds {
        let (test, train): (Vec<&PreferencePair>, Vec<&PreferencePair>) =
            pairs.iter().partition(|p| fold_of[&p.case_id] == k);
        let x: Vec<Vec<f64>> = train.iter().map(|p| p.features.clone()).collect();
        let y: Vec<bool> = train.iter().map(|p| target(p.label)).collect();
        let model = match gbdt_train(&x, &y, params) {
            Ok(m) => Some(m),
            Err(Error::Degenerate(_)) => None,
            Err(e) => return Err(e),
        };
        let constant = y.first().copied().unwrap_or(false);
        for p in test {
            let first = model.as_ref().map_or(constant, |m| gbdt_predict(m, &p.features) >= 0.5);
            score(p.label, first, &mut counts);
        }
    }
    Ok(counts)
}

/// Per aspect: k-fold cross validation for every grid point; the grid point
/// with the most correct predictions is reported (earliest on ties).
/// Both orders of a case always share a fold.
pub fn cross_validate(pairs: &[PreferencePair], folds: usize, grid: &[GbdtParams], seed: u64) -> Result<CvReport> {
    if grid.is_empty() {
        return Err(Error::InvalidArgument("empty hyperparameter grid".into()));
    }
    let mut rows = Vec::new();
    for aspect in Aspect::ALL {
        let subset: Vec<&PreferencePair> = pairs.iter().filter(|p| p.aspect == aspect).collect();
        if subset.is_empty() {
            continue;
        }
        let ids: BTreeSet<String> = subset.iter().map(|p| p.case_id.clone()).collect();
        let fold_of = assign_folds(&ids, folds, seed)?;
        let results: Vec<CvCounts> = grid
            .par_iter()
            .map(|params| run_folds(&subset, &fold_of, folds, params, aspect))
            .collect::<Result<_>>()?;
        let best = results
            .into_iter()
            .reduce(|best, r| if r.correct > best.correct { r } else { best })
            .expect("grid nonempty");
        rows.push(best);
    }
    Ok(CvReport { rows })
}
