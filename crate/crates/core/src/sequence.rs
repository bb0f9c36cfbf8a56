//! Event sequences on a finite horizon and their superposition.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One event: a timestamp and a 0-based dimension index.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub t: f64,
    pub dim: usize,
}

impl Event {
    pub fn new(t: f64, dim: usize) -> Self {
        Self { t, dim }
    }
}

/// Time-ordered events on `(0, horizon]`.
///
/// Construction canonicalizes the input: events at `t = 0` move to
/// `1e-9 * horizon`, events are sorted by `(t, dim)` and equal timestamps are
/// pushed apart by one ulp so that timestamps are strictly increasing.
#[derive(Debug, Clone, PartialEq)]
pub struct EventSequence {
    events: Vec<Event>,
    dim: usize,
    horizon: f64,
    source_id: Option<u64>,
}

impl EventSequence {
    pub fn new(events: Vec<Event>, dim: usize, horizon: f64, source_id: Option<u64>) -> Result<Self> {
        let keyed = events.into_iter().map(|e| (e, 0u64)).collect();
        Self::from_keyed(keyed, dim, horizon, source_id)
    }

    pub fn empty(dim: usize, horizon: f64, source_id: Option<u64>) -> Result<Self> {
        Self::new(Vec::new(), dim, horizon, source_id)
    }

    // `keyed` carries a secondary sort key between timestamp and dimension.
    fn from_keyed(mut keyed: Vec<(Event, u64)>, dim: usize, horizon: f64, source_id: Option<u64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidParameter("sequence dimension must be positive".into()));
        }
        if !(horizon.is_finite() && horizon > 0.0) {
            return Err(Error::InvalidParameter(format!("horizon must be positive, got {horizon}")));
        }
        let eps = 1e-9 * horizon;
        for (e, _) in keyed.iter_mut() {
            if e.dim >= dim {
                return Err(Error::InvalidEvent(format!("dimension {} outside 1..={dim}", e.dim + 1)));
            }
            if !e.t.is_finite() || e.t < 0.0 || e.t > horizon {
                return Err(Error::InvalidEvent(format!("timestamp {} outside [0, {horizon}]", e.t)));
            }
            if e.t == 0.0 {
                e.t = eps;
            }
        }
        keyed.sort_by(|(a, ka), (b, kb)| {
            a.t.total_cmp(&b.t).then(ka.cmp(kb)).then(a.dim.cmp(&b.dim))
        });
        let mut events: Vec<Event> = keyed.into_iter().map(|(e, _)| e).collect();
        break_ties(&mut events, horizon);
        Ok(Self { events, dim, horizon, source_id })
    }

    pub fn events(&self) -> &[Event] {
        &self.events
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn source_id(&self) -> Option<u64> {
        self.source_id
    }

    pub fn with_source(mut self, source_id: Option<u64>) -> Self {
        self.source_id = source_id;
        self
    }

    /// Number of events per dimension.
    pub fn counts(&self) -> Vec<usize> {
        let mut c = vec![0; self.dim];
        for e in &self.events {
            c[e.dim] += 1;
        }
        c
    }

    /// Events with `t <= cutoff`, on the shorter horizon `cutoff`.
    pub fn truncate(&self, cutoff: f64) -> Result<Self> {
        let kept = self.events.iter().copied().filter(|e| e.t <= cutoff).collect();
        Self::new(kept, self.dim, cutoff, self.source_id)
    }
}

// Enforce strict ordering by nudging ties forward; anything pushed past the
// horizon is walked back below the next event.
fn break_ties(events: &mut [Event], horizon: f64) {
    for i in 1..events.len() {
        if events[i].t <= events[i - 1].t {
            events[i].t = events[i - 1].t.next_up();
        }
    }
    if let Some(last) = events.last_mut() {
        if last.t > horizon {
            last.t = horizon;
            for i in (0..events.len() - 1).rev() {
                if events[i].t >= events[i + 1].t {
                    events[i].t = events[i + 1].t.next_down();
                } else {
                    break;
                }
            }
        }
    }
}

/// Merge sequences into one. Ties are ordered by `(t, source_id, dim)`,
/// where untagged inputs use their position in `sequences` as source id.
pub fn superpose(sequences: &[EventSequence]) -> Result<EventSequence> {
    let first = sequences
        .first()
        .ok_or_else(|| Error::EmptyData("nothing to superpose".into()))?;
    let (dim, horizon) = (first.dim, first.horizon);
    let total: usize = sequences.iter().map(|s| s.len()).sum();
    let mut keyed = Vec::with_capacity(total);
    for (k, s) in sequences.iter().enumerate() {
        if s.dim != dim {
            return Err(Error::DimensionMismatch(format!(
                "cannot superpose sequences of dimension {dim} and {}",
                s.dim
            )));
        }
        if (s.horizon - horizon).abs() > 1e-12 * horizon.abs().max(1.0) {
            return Err(Error::InvalidParameter(format!(
                "cannot superpose sequences with horizons {horizon} and {}",
                s.horizon
            )));
        }
        let key = s.source_id.unwrap_or(k as u64);
        keyed.extend(s.events.iter().map(|e| (*e, key)));
    }
    if sequences.len() == 1 {
        return Ok(first.clone().with_source(None));
    }
    EventSequence::from_keyed(keyed, dim, horizon, None)
}
