use crate::{Error, Result};

use super::dataset::Label;

/// Modal label of three annotations; with no repeated label the case counts
/// as `equal`.
pub fn majority_vote(annotations: &[Label]) -> Result<Label> {
    if annotations.len() != 3 {
        return Err(Error::InvalidArgument(format!(
            "majority vote needs exactly 3 annotations, got {}",
            annotations.len()
        )));
    }
    let [a, b, c] = [annotations[0], annotations[1], annotations[2]];
    Ok(if a == b || a == c {
        a
    } else if b == c {
        b
    } else {
        Label::Equal
    })
}

/// Fleiss' kappa for `ratings[case][rater]` with categories `0..categories`.
/// Every case must have the same number of raters (at least two).
pub fn fleiss_kappa(ratings: &[Vec<usize>], categories: usize) -> Result<f64> {
    let raters = ratings.first().map_or(0, Vec::len);
    if ratings.is_empty() || raters < 2 {
        return Err(Error::InvalidArgument("fleiss kappa needs cases with at least 2 raters".into()));
    }
    let mut totals = vec![0usize; categories];
    let mut agreement = 0.0;
    for row in ratings {
        if row.len() != raters {
            return Err(Error::InvalidArgument("every case needs the same rater count".into()));
        }
        let mut counts = vec![0usize; categories];
        for &c in row {
            if c >= categories {
                return Err(Error::InvalidArgument(format!("category {c} out of range")));
            }
            counts[c] += 1;
            totals[c] += 1;
        }
        let pairs: usize = counts.iter().map(|n| n * n).sum::<usize>() - raters;
        agreement += pairs as f64 / (raters * (raters - 1)) as f64;
    }
    let n = ratings.len() as f64;
    let p_bar = agreement / n;
    let p_e: f64 = totals
        .iter()
        .map(|&t| {
            let p = t as f64 / (n * raters as f64);
            p * p
        })
        .sum();
    if (1.0 - p_e).abs() < 1e-15 {
        return Err(Error::Degenerate("all ratings fall in one category; kappa undefined".into()));
    }
    Ok((p_bar - p_e) / (1.0 - p_e))
}

/// Sample Pearson correlation.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() || x.len() < 2 {
        return Err(Error::InvalidArgument("pearson needs two equal-length series of length ≥ 2".into()));
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::Degenerate("pearson undefined for a constant series".into()));
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use Label::*;

    #[test]
    fn votes() {
        assert_eq!(majority_vote(&[A, A, B]).unwrap(), A);
        assert_eq!(majority_vote(&[A, B, Equal]).unwrap(), Equal);
        assert_eq!(majority_vote(&[B, B, B]).unwrap(), B);
        assert_eq!(majority_vote(&[None, A, None]).unwrap(), None);
        assert!(majority_vote(&[A, B]).is_err());
    }

    #[test]
    fn kappa_cases() {
        let perfect = vec![vec![0, 0, 0], vec![1, 1, 1], vec![0, 0, 0]];
        assert!((fleiss_kappa(&perfect, 2).unwrap() - 1.0).abs() < 1e-12);
        assert!(fleiss_kappa(&[vec![1, 1, 1], vec![1, 1, 1]], 2).is_err());
        // Textbook-style fixture: two cases split 2-1, two unanimous.
        let k = fleiss_kappa(&[vec![0, 0, 1], vec![1, 1, 0], vec![0, 0, 0], vec![1, 1, 1]], 2).unwrap();
        // P̄ = (1/3 + 1/3 + 1 + 1)/4 = 2/3, p = (1/2, 1/2), Pe = 1/2.
        assert!((k - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn pearson_cases() {
        let x = [1.0, 2.0, 4.0, 7.0];
        let y: Vec<f64> = x.iter().map(|v| 2.0 * v + 1.0).collect();
        assert!((pearson(&x, &y).unwrap() - 1.0).abs() < 1e-12);
        let z: Vec<f64> = x.iter().map(|v| -v).collect();
        assert!((pearson(&x, &z).unwrap() + 1.0).abs() < 1e-12);
        assert!(pearson(&x, &[1.0; 4]).is_err());
    }
}
