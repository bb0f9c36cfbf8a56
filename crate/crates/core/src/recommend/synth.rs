//! Synthetic purchase logs driven by a clustered Hawkes model.

use std::io::Write;

use nalgebra::DMatrix;
use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::HawkesModel;
use crate::rng::substream;
use crate::simulate::branching_with_rng;

use super::ingest::{FilterParams, RatingEvent, Window};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthSpec {
    pub users: usize,
    pub items: usize,
    /// Items are split into this many equally sized clusters.
    pub clusters: usize,
    /// First day of the log (days since the unix epoch).
    pub start_day: i64,
    pub train_days: i64,
    pub test_days: i64,
    /// Expected exogenous purchases per user over the training period.
    pub purchases_per_user: f64,
    /// Share of a user's exogenous rate spent on their preferred cluster.
    pub preference: f64,
    /// Spectral radius of the branching matrix.
    pub branching: f64,
    /// Decay per day of the generating kernel.
    pub decay: f64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            users: 2000,
            items: 60,
            clusters: 6,
            // 2014-01-01: training covers January to March, testing April to July.
            start_day: 16_071,
            train_days: 90,
            test_days: 122,
            purchases_per_user: 1.5,
            preference: 0.8,
            branching: 0.5,
            decay: 0.05,
        }
    }
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidParameter(m.into()));
        if self.users == 0 || self.items == 0 || self.clusters == 0 {
            return bad("users, items and clusters must be positive");
        }
        if !self.items.is_multiple_of(self.clusters) {
            return bad("items must be a multiple of clusters");
        }
        if self.train_days <= 0 || self.test_days <= 0 {
            return bad("train_days and test_days must be positive");
        }
        if !(0.0..=1.0).contains(&self.preference) {
            return bad("preference must be in [0, 1]");
        }
        if !(0.0..1.0).contains(&self.branching) {
            return bad("branching must be in [0, 1)");
        }
        if !(self.decay > 0.0 && self.purchases_per_user > 0.0) {
            return bad("decay and purchases_per_user must be positive");
        }
        Ok(())
    }

    /// Filter windows matching the generated periods.
    pub fn filter_params(&self, min_item_ratings: usize) -> FilterParams {
        let split = self.start_day + self.train_days;
        FilterParams {
            min_item_ratings,
            train: Window::new(Some(self.start_day), Some(split)),
            test: Window::new(Some(split), Some(split + self.test_days)),
            ..Default::default()
        }
    }

    /// Block-diagonal infectivity: items excite their own cluster uniformly.
    pub fn infectivity(&self) -> DMatrix<f64> {
        let size = self.items / self.clusters;
        let level = self.branching * self.decay / size as f64;
        DMatrix::from_fn(self.items, self.items, |i, j| if i / size == j / size { level } else { 0.0 })
    }
}

/// Generate a rating log, ordered by user and then time.
pub fn generate_ratings(spec: &SynthSpec, seed: u64) -> Result<Vec<RatingEvent>> {
    spec.validate()?;
    let a = spec.infectivity();
    let size = spec.items / spec.clusters;
    let horizon = (spec.train_days + spec.test_days) as f64;
    // Zipf-like item appeal so that popularity carries some signal.
    let appeal: Vec<f64> = (0..spec.items).map(|d| 1.0 / (1.0 + (d % size) as f64).sqrt()).collect();
    let exo_rate = spec.purchases_per_user * (1.0 - spec.branching) / spec.train_days as f64;

    let per_user: Vec<Vec<RatingEvent>> = (0..spec.users)
        .into_par_iter()
        .map(|u| -> Result<Vec<RatingEvent>> {
            let mut rng = substream(seed, &[u as u64]);
            let home = rng.random_range(0..spec.clusters);
            let weights: Vec<f64> = (0..spec.items)
                .map(|d| {
                    let share = if d / size == home { spec.preference / size as f64 } else { 0.0 };
                    appeal[d] * (share + (1.0 - spec.preference) / spec.items as f64)
                })
                .collect();
            let total: f64 = weights.iter().sum();
            let mu: Vec<f64> = weights.iter().map(|x| exo_rate * x / total).collect();
            let model = HawkesModel::new(mu, a.clone(), spec.decay)?;
            let seq = branching_with_rng(&model, horizon, &mut rng)?;
            Ok(seq
                .events()
                .iter()
                .map(|e| {
                    let r: f64 = rng.random();
                    let rating = if r < 0.5 {
                        5
                    } else if r < 0.85 {
                        4
                    } else {
                        rng.random_range(1..=3)
                    };
                    RatingEvent {
                        user: format!("u{u:05}"),
                        item: format!("i{:04}", e.dim),
                        day: spec.start_day + e.t.floor() as i64,
                        rating,
                    }
                })
                .collect())
        })
        .collect::<Result<_>>()?;
    Ok(per_user.into_iter().flatten().collect())
}

/// Write `user,item,rating,timestamp` rows with unix-second timestamps.
pub fn write_ratings<W: Write>(events: &[RatingEvent], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["user", "item", "rating", "timestamp"])?;
    for e in events {
        w.write_record([e.user.clone(), e.item.clone(), e.rating.to_string(), (e.day * 86_400).to_string()])?;
    }
    w.flush()?;
    Ok(())
}
