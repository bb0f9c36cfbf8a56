//! Samplers for Hawkes processes with exponential kernels.
//!
//! Two independent mechanisms are provided. [`simulate_branching`] uses the
//! cluster representation: immigrants arrive as homogeneous Poisson
//! processes and every event spawns Poisson-many children per dimension at
//! exponential delays. [`simulate_thinning`] is Ogata's thinning against the
//! current total intensity, which bounds the future intensity until the
//! next event because the kernel is decreasing.

use nalgebra::DMatrix;
use rand::Rng as _;
use rand_distr::{Distribution, Exp, Poisson};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{spectral_norm, HawkesModel};
use crate::rng::{substream, Rng};
use crate::sequence::{Event, EventSequence};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Sampler {
    #[default]
    Branching,
    Thinning,
}

impl std::str::FromStr for Sampler {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "branching" => Ok(Sampler::Branching),
            "thinning" => Ok(Sampler::Thinning),
            other => Err(Error::InvalidParameter(format!("unknown sampler '{other}'"))),
        }
    }
}

fn check(model: &HawkesModel, horizon: f64) -> Result<()> {
    if !(horizon.is_finite() && horizon > 0.0) {
        return Err(Error::InvalidParameter(format!("horizon must be positive, got {horizon}")));
    }
    let v = model.validate();
    if !v.stationary {
        return Err(Error::NonStationary { radius: v.spectral_radius });
    }
    Ok(())
}

fn poisson(rng: &mut Rng, mean: f64) -> u64 {
    if mean <= 0.0 {
        return 0;
    }
    // Poisson::new only fails for non-positive or non-finite means.
    Poisson::new(mean).map(|p| p.sample(rng) as u64).unwrap_or(0)
}

/// Sample one sequence by the cluster (branching) construction.
pub fn simulate_branching(model: &HawkesModel, horizon: f64, seed: u64) -> Result<EventSequence> {
    branching_with_rng(model, horizon, &mut substream(seed, &[]))
}

pub fn branching_with_rng(model: &HawkesModel, horizon: f64, rng: &mut Rng) -> Result<EventSequence> {
    check(model, horizon)?;
    let dim = model.dim();
    let w = model.decay();
    let a = model.infectivity();
    let delay = Exp::new(w).map_err(|e| Error::InvalidParameter(e.to_string()))?;

    let mut events = Vec::new();
    for (d, &mu) in model.mu().iter().enumerate() {
        for _ in 0..poisson(rng, mu * horizon) {
            let u: f64 = rng.random();
            events.push(Event::new(horizon * (1.0 - u), d));
        }
    }
    let mut frontier = 0;
    while frontier < events.len() {
        let parent = events[frontier];
        frontier += 1;
        for d in 0..dim {
            for _ in 0..poisson(rng, a[(d, parent.dim)] / w) {
                let t = parent.t + delay.sample(rng);
                // Descendants of a late child are later still.
                if t <= horizon {
                    events.push(Event::new(t, d));
                }
            }
        }
    }
    EventSequence::new(events, dim, horizon, None)
}

/// Sample one sequence by Ogata thinning.
pub fn simulate_thinning(model: &HawkesModel, horizon: f64, seed: u64) -> Result<EventSequence> {
    thinning_with_rng(model, horizon, &mut substream(seed, &[]))
}

pub fn thinning_with_rng(model: &HawkesModel, horizon: f64, rng: &mut Rng) -> Result<EventSequence> {
    check(model, horizon)?;
    let dim = model.dim();
    let w = model.decay();
    let a = model.infectivity();
    let mu = model.mu();

    let mut excitation = vec![0.0; dim];
    let mut events = Vec::new();
    let mut t = 0.0;
    loop {
        let bound: f64 = mu.iter().zip(&excitation).map(|(m, s)| m + s).sum();
        if bound <= 0.0 {
            break;
        }
        let u: f64 = rng.random();
        let step = -(1.0 - u).ln() / bound;
        t += step;
        if t > horizon {
            break;
        }
        let k = (-w * step).exp();
        excitation.iter_mut().for_each(|s| *s *= k);
        let rates: Vec<f64> = mu.iter().zip(&excitation).map(|(m, s)| m + s).collect();
        let total: f64 = rates.iter().sum();
        let v: f64 = rng.random::<f64>() * bound;
        if v >= total {
            continue;
        }
        let mut acc = 0.0;
        let mut chosen = dim - 1;
        for (d, r) in rates.iter().enumerate() {
            acc += r;
            if v < acc {
                chosen = d;
                break;
            }
        }
        events.push(Event::new(t, chosen));
        for (d, s) in excitation.iter_mut().enumerate() {
            *s += a[(d, chosen)];
        }
    }
    EventSequence::new(events, dim, horizon, None)
}

pub fn simulate_with(sampler: Sampler, model: &HawkesModel, horizon: f64, rng: &mut Rng) -> Result<EventSequence> {
    match sampler {
        Sampler::Branching => branching_with_rng(model, horizon, rng),
        Sampler::Thinning => thinning_with_rng(model, horizon, rng),
    }
}

/// `count` independent sequences from one model, each on its own substream
/// `(seed, stream, n)`.
pub fn simulate_many(
    model: &HawkesModel,
    horizon: f64,
    count: usize,
    sampler: Sampler,
    seed: u64,
    stream: u64,
) -> Result<Vec<EventSequence>> {
    (0..count)
        .into_par_iter()
        .map(|n| simulate_with(sampler, model, horizon, &mut substream(seed, &[stream, n as u64])))
        .collect()
}

/// Parameters of the synthetic benchmark: `models` Hawkes processes sharing
/// one random infectivity matrix, each with a single active exogenous rate.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SuiteSpec {
    pub models: usize,
    pub dim: usize,
    pub seqs_per_model: usize,
    pub horizon: f64,
    /// Rough events-per-sequence the configuration aims at. Informational
    /// only: sequences are never trimmed or padded.
    pub target_events: Option<f64>,
    pub spectral_norm: f64,
    pub decay: f64,
    pub sampler: Sampler,
}

impl SuiteSpec {
    pub fn new(models: usize, dim: usize, seqs_per_model: usize, horizon: f64) -> Self {
        Self {
            models,
            dim,
            seqs_per_model,
            horizon,
            target_events: Some(50.0),
            spectral_norm: 0.5,
            decay: 1.0,
            sampler: Sampler::Branching,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticSuite {
    pub infectivity: DMatrix<f64>,
    pub models: Vec<HawkesModel>,
    /// Sequences of model `k` are tagged with source id `k` and stored
    /// contiguously, model by model.
    pub sequences: Vec<EventSequence>,
    pub mean_events: f64,
}

impl SyntheticSuite {
    pub fn sequences_of(&self, model: usize) -> impl Iterator<Item = &EventSequence> {
        self.sequences.iter().filter(move |s| s.source_id() == Some(model as u64))
    }
}

/// Random nonnegative matrix with i.i.d. uniform entries rescaled to the
/// requested spectral norm.
pub fn random_infectivity(dim: usize, norm: f64, rng: &mut Rng) -> DMatrix<f64> {
    let raw = DMatrix::from_fn(dim, dim, |_, _| rng.random::<f64>());
    let n = spectral_norm(&raw);
    if n == 0.0 {
        return raw;
    }
    raw * (norm / n)
}

pub fn make_synthetic_suite(spec: &SuiteSpec, seed: u64) -> Result<SyntheticSuite> {
    if spec.models == 0 || spec.dim == 0 {
        return Err(Error::InvalidParameter("suite needs at least one model and one dimension".into()));
    }
    let infectivity = random_infectivity(spec.dim, spec.spectral_norm, &mut substream(seed, &[0]));
    let models = (0..spec.models)
        .map(|k| {
            let mut rng = substream(seed, &[1, k as u64]);
            let mut mu = vec![0.0; spec.dim];
            let pos = rng.random_range(0..spec.dim);
            mu[pos] = rng.random::<f64>();
            HawkesModel::new(mu, infectivity.clone(), spec.decay)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut sequences = Vec::with_capacity(spec.models * spec.seqs_per_model);
    for (k, m) in models.iter().enumerate() {
        let seqs = simulate_many(m, spec.horizon, spec.seqs_per_model, spec.sampler, seed, 2 + k as u64)?;
        sequences.extend(seqs.into_iter().map(|s| s.with_source(Some(k as u64))));
    }
    let mean_events = if sequences.is_empty() {
        0.0
    } else {
        sequences.iter().map(|s| s.len()).sum::<usize>() as f64 / sequences.len() as f64
    };
    if let Some(target) = spec.target_events {
        log::debug!("synthetic suite: {mean_events:.1} events per sequence (target about {target})");
    }
    Ok(SyntheticSuite { infectivity, models, sequences, mean_events })
}
