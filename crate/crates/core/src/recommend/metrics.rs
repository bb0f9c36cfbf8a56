use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Precision, recall and F1 of one user, as fractions in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UserScore {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

/// Averages over users, in percent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub n: usize,
    pub users: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

pub fn user_score(recs: &[usize], truth: &BTreeSet<usize>) -> UserScore {
    if recs.is_empty() || truth.is_empty() {
        return UserScore { precision: 0.0, recall: 0.0, f1: 0.0 };
    }
    let hits = recs.iter().collect::<BTreeSet<_>>().into_iter().filter(|d| truth.contains(d)).count() as f64;
    let precision = hits / recs.len() as f64;
    let recall = hits / truth.len() as f64;
    let f1 = if precision + recall > 0.0 { 2.0 * precision * recall / (precision + recall) } else { 0.0 };
    UserScore { precision, recall, f1 }
}

/// Score the first `n` items of each user's list against their truth set.
pub fn evaluate(recs: &[Vec<usize>], truth: &[BTreeSet<usize>], n: usize) -> Result<Metrics> {
    if recs.len() != truth.len() {
        return Err(Error::DimensionMismatch(format!("{} recommendation lists for {} users", recs.len(), truth.len())));
    }
    if n == 0 {
        return Err(Error::InvalidParameter("N must be at least 1".into()));
    }
    if recs.is_empty() {
        return Err(Error::EmptyData("no users to evaluate".into()));
    }
    if truth.iter().any(BTreeSet::is_empty) {
        return Err(Error::InvalidParameter("every evaluated user needs a nonempty truth set".into()));
    }
    let mut sum = (0.0, 0.0, 0.0);
    for (r, t) in recs.iter().zip(truth) {
        let s = user_score(&r[..r.len().min(n)], t);
        sum.0 += s.precision;
        sum.1 += s.recall;
        sum.2 += s.f1;
    }
    let m = recs.len() as f64;
    Ok(Metrics { n, users: recs.len(), precision: 100.0 * sum.0 / m, recall: 100.0 * sum.1 / m, f1: 100.0 * sum.2 / m })
}
