use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::design::{build_multi, build_super};
use crate::error::{Error, Result};
use crate::estimators::{fit_ls, Diagnostics, LsOptions};
use crate::sequence::EventSequence;

use super::ingest::{IngestStats, RecDataset};
use super::metrics::{evaluate, Metrics};
use super::rank::{most_popular_baseline, ranking_scores, recommend_topn, TopN};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Recommender {
    SuperpositionHp,
    MultiSourceMhp,
    MostPopular,
}

impl Recommender {
    pub const ALL: [Recommender; 3] = [Recommender::SuperpositionHp, Recommender::MultiSourceMhp, Recommender::MostPopular];

    pub fn name(self) -> &'static str {
        match self {
            Recommender::SuperpositionHp => "superposition_hp",
            Recommender::MultiSourceMhp => "multi_source_mhp",
            Recommender::MostPopular => "most_popular",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RecConfig {
    /// Kernel decay per day.
    pub decay: f64,
    /// Users per superposed group; users are split into `ceil(M / group_size)` groups.
    pub group_size: usize,
    pub ns: Vec<usize>,
    /// Drop items already in a user's training history from their list.
    pub exclude_bought: bool,
}

impl Default for RecConfig {
    fn default() -> Self {
        Self { decay: 1.0, group_size: 20, ns: vec![5, 10, 20], exclude_bought: true }
    }
}

impl RecConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.decay.is_finite() && self.decay > 0.0) {
            return Err(Error::InvalidParameter("decay must be positive".into()));
        }
        if self.group_size == 0 {
            return Err(Error::InvalidParameter("group_size must be positive".into()));
        }
        if self.ns.is_empty() || self.ns.contains(&0) {
            return Err(Error::InvalidParameter("N values must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserRecs {
    pub user: String,
    pub truth: Vec<String>,
    /// Lists of length `max(ns)`; shorter cutoffs are prefixes.
    pub lists: BTreeMap<Recommender, Vec<String>>,
    pub cold: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RecReport {
    pub config: RecConfig,
    pub stats: IngestStats,
    pub groups: usize,
    /// `metrics[N][recommender]`.
    pub metrics: BTreeMap<usize, BTreeMap<Recommender, Metrics>>,
    pub users: Vec<UserRecs>,
    pub fit_diagnostics: BTreeMap<Recommender, Diagnostics>,
}

impl RecReport {
    pub fn f1(&self, n: usize, r: Recommender) -> Option<f64> {
        self.metrics.get(&n)?.get(&r).map(|m| m.f1)
    }

    /// One JSON object per user.
    pub fn write_recs_jsonl<W: Write>(&self, mut out: W) -> Result<()> {
        for u in &self.users {
            serde_json::to_writer(&mut out, u)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn metrics_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.metrics)?)
    }
}

/// Split users into `ceil(M / group_size)` contiguous groups of near-equal size.
pub fn user_groups(seqs: &[EventSequence], group_size: usize) -> Vec<Vec<EventSequence>> {
    let m = seqs.len();
    let g = m.div_ceil(group_size.max(1)).max(1);
    (0..g).map(|k| seqs[k * m / g..(k + 1) * m / g].to_vec()).collect()
}

/// Learn `A` with the superposition and multi-source strategies (least
/// squares), rank items for every user, and score all recommenders.
pub fn run_recommendation(data: &RecDataset, config: &RecConfig) -> Result<RecReport> {
    config.validate()?;
    let seqs = data.train_sequences();
    let groups = user_groups(&seqs, config.group_size);
    let opts = LsOptions::default();
    let super_fit = fit_ls(&build_super(&groups, config.decay)?, &opts)?;
    let mhp_fit = fit_ls(&build_multi(&seqs, config.decay)?, &opts)?;
    let n_max = *config.ns.iter().max().expect("validated");
    let popularity = data.popularity();
    let popular = most_popular_baseline(data, n_max)?;
    if popular.short {
        log::warn!("only {} items available for top-{n_max} lists", popular.items.len());
    }
    let fitted: [(Recommender, DMatrix<f64>); 2] =
        [(Recommender::SuperpositionHp, super_fit.infectivity()), (Recommender::MultiSourceMhp, mhp_fit.infectivity())];

    let per_user: Vec<(BTreeMap<Recommender, TopN>, bool)> = data
        .users
        .par_iter()
        .map(|u| -> Result<_> {
            let history = u.train.events();
            let cold = history.is_empty();
            let exclude: BTreeSet<usize> =
                if config.exclude_bought { history.iter().map(|e| e.dim).collect() } else { BTreeSet::new() };
            let mut lists = BTreeMap::new();
            for (r, a) in &fitted {
                let top = if cold {
                    popular.clone()
                } else {
                    recommend_topn(&ranking_scores(a, config.decay, history)?, n_max, &exclude, &popularity)?
                };
                lists.insert(*r, top);
            }
            lists.insert(Recommender::MostPopular, popular.clone());
            Ok((lists, cold))
        })
        .collect::<Result<_>>()?;

    let truth: Vec<BTreeSet<usize>> = data.users.iter().map(|u| u.truth.clone()).collect();
    let mut metrics = BTreeMap::new();
    for &n in &config.ns {
        let mut row = BTreeMap::new();
        for r in Recommender::ALL {
            let recs: Vec<Vec<usize>> = per_user.iter().map(|(l, _)| l[&r].items.clone()).collect();
            row.insert(r, evaluate(&recs, &truth, n)?);
        }
        metrics.insert(n, row);
    }
    let name = |d: &usize| data.items[*d].clone();
    let users = data
        .users
        .iter()
        .zip(&per_user)
        .map(|(u, (lists, cold))| UserRecs {
            user: u.user.clone(),
            truth: u.truth.iter().map(name).collect(),
            lists: lists.iter().map(|(r, t)| (*r, t.items.iter().map(name).collect())).collect(),
            cold: *cold,
        })
        .collect();
    let fit_diagnostics = BTreeMap::from([
        (Recommender::SuperpositionHp, super_fit.diagnostics),
        (Recommender::MultiSourceMhp, mhp_fit.diagnostics),
    ]);
    Ok(RecReport { config: config.clone(), stats: data.stats.clone(), groups: groups.len(), metrics, users, fit_diagnostics })
}
