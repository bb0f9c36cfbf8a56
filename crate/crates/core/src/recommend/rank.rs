use std::collections::BTreeSet;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sequence::Event;

use super::ingest::RecDataset;

/// `score_d = sum_i a[d][d_i] * exp(-w (t - t_i))` over the history.
/// An empty history yields all-zero scores.
pub fn score_items(a_hat: &DMatrix<f64>, w: f64, history: &[Event], t: f64) -> Result<Vec<f64>> {
    check_inputs(a_hat, w, history)?;
    if let Some(e) = history.iter().find(|e| e.t > t) {
        return Err(Error::InvalidParameter(format!("history event at {} is after query time {t}", e.t)));
    }
    Ok(weighted_columns(a_hat, history.iter().map(|e| (e.dim, (-w * (t - e.t)).exp()))))
}

/// Scores rescaled by the positive factor `exp(w (t - t_last))`, i.e. measured
/// from the most recent history event. The ranking equals that of
/// [`score_items`] at any later query time, and it does not underflow when the
/// history is far in the past.
pub fn ranking_scores(a_hat: &DMatrix<f64>, w: f64, history: &[Event]) -> Result<Vec<f64>> {
    check_inputs(a_hat, w, history)?;
    let last = history.iter().map(|e| e.t).fold(f64::NEG_INFINITY, f64::max);
    Ok(weighted_columns(a_hat, history.iter().map(|e| (e.dim, (-w * (last - e.t)).exp()))))
}

fn check_inputs(a_hat: &DMatrix<f64>, w: f64, history: &[Event]) -> Result<()> {
    if !a_hat.is_square() {
        return Err(Error::DimensionMismatch("infectivity matrix must be square".into()));
    }
    if !(w.is_finite() && w >= 0.0) {
        return Err(Error::InvalidParameter(format!("decay must be finite and nonnegative, got {w}")));
    }
    if let Some(e) = history.iter().find(|e| e.dim >= a_hat.nrows()) {
        return Err(Error::DimensionMismatch(format!("history item {} outside 0..{}", e.dim, a_hat.nrows())));
    }
    Ok(())
}

fn weighted_columns(a_hat: &DMatrix<f64>, terms: impl Iterator<Item = (usize, f64)>) -> Vec<f64> {
    let mut scores = vec![0.0; a_hat.nrows()];
    for (col, k) in terms {
        for (s, a) in scores.iter_mut().zip(a_hat.column(col).iter()) {
            *s += a * k;
        }
    }
    scores
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TopN {
    pub items: Vec<usize>,
    /// Fewer than `N` candidates were available.
    pub short: bool,
}

/// Best `n` items by descending score; ties go to the more popular item, then
/// the smaller item index. Items in `exclude` are skipped.
pub fn recommend_topn(scores: &[f64], n: usize, exclude: &BTreeSet<usize>, popularity: &[usize]) -> Result<TopN> {
    if n == 0 {
        return Err(Error::InvalidParameter("N must be at least 1".into()));
    }
    if popularity.len() != scores.len() {
        return Err(Error::DimensionMismatch(format!("{} scores but {} popularity counts", scores.len(), popularity.len())));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::Numerical("NaN score".into()));
    }
    let mut candidates: Vec<usize> = (0..scores.len()).filter(|d| !exclude.contains(d)).collect();
    candidates.sort_by(|&a, &b| {
        scores[b].total_cmp(&scores[a]).then(popularity[b].cmp(&popularity[a])).then(a.cmp(&b))
    });
    let short = candidates.len() < n;
    candidates.truncate(n);
    Ok(TopN { items: candidates, short })
}

/// Same list for every user: items by training purchase count, then index.
pub fn most_popular_baseline(data: &RecDataset, n: usize) -> Result<TopN> {
    let pop = data.popularity();
    let scores: Vec<f64> = pop.iter().map(|&c| c as f64).collect();
    recommend_topn(&scores, n, &BTreeSet::new(), &pop)
}
