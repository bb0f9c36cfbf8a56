use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::io::Read;

use chrono::{DateTime, NaiveDate};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sequence::{Event, EventSequence};

/// Offset between purchases that share a day, applied in input order.
const SAME_DAY_STEP: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatingEvent {
    pub user: String,
    pub item: String,
    /// Whole days since the unix epoch.
    pub day: i64,
    pub rating: u8,
}

impl RatingEvent {
    pub fn new(user: impl Into<String>, item: impl Into<String>, day: i64, rating: u8) -> Result<Self> {
        if !(1..=5).contains(&rating) {
            return Err(Error::InvalidEvent(format!("rating {rating} outside 1..=5")));
        }
        Ok(Self { user: user.into(), item: item.into(), day, rating })
    }
}

/// Half-open day interval `[start, end)`; a missing bound is unbounded.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
pub struct Window {
    pub start: Option<i64>,
    pub end: Option<i64>,
}

impl Window {
    pub fn new(start: Option<i64>, end: Option<i64>) -> Self {
        Self { start, end }
    }

    pub fn contains(&self, day: i64) -> bool {
        self.start.is_none_or(|s| day >= s) && self.end.is_none_or(|e| day < e)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FilterParams {
    /// Items need at least this many ratings over the whole input.
    pub min_item_ratings: usize,
    pub min_train_events: usize,
    pub max_train_events: usize,
    /// Every training rating of a kept user must reach this value.
    pub min_rating: u8,
    pub train: Window,
    pub test: Window,
}

impl Default for FilterParams {
    fn default() -> Self {
        let day = |y, m, d| days_from_date(NaiveDate::from_ymd_opt(y, m, d).expect("valid date"));
        Self {
            min_item_ratings: 40,
            min_train_events: 1,
            max_train_events: 3,
            min_rating: 4,
            train: Window::new(Some(day(2014, 1, 1)), Some(day(2014, 4, 1))),
            test: Window::new(Some(day(2014, 4, 1)), Some(day(2014, 8, 1))),
        }
    }
}

impl FilterParams {
    pub fn validate(&self) -> Result<()> {
        if self.max_train_events < self.min_train_events {
            return Err(Error::InvalidParameter("max_train_events below min_train_events".into()));
        }
        if !(1..=5).contains(&self.min_rating) {
            return Err(Error::InvalidParameter("min_rating must be in 1..=5".into()));
        }
        let train_end = self.train.end.ok_or_else(|| Error::InvalidParameter("train window needs an end day".into()))?;
        if let Some(s) = self.train.start {
            if s >= train_end {
                return Err(Error::InvalidParameter("train window is empty".into()));
            }
        }
        if self.test.start.is_none_or(|s| s < train_end) {
            return Err(Error::InvalidParameter("test window must start at or after the train window end".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct IngestStats {
    pub rows: usize,
    pub malformed: usize,
    pub items_kept: usize,
    pub users_seen: usize,
    pub users_kept: usize,
    pub train_events: usize,
    pub test_events: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct UserRecord {
    pub user: String,
    /// Training purchases, tagged with the user's position as source id.
    pub train: EventSequence,
    /// Distinct items bought in the test window.
    pub truth: BTreeSet<usize>,
}

#[derive(Debug, Clone)]
pub struct RecDataset {
    /// `items[d]` is the item id of dimension `d`.
    pub items: Vec<String>,
    pub users: Vec<UserRecord>,
    /// Day that maps to time 0 of every training sequence.
    pub origin_day: i64,
    /// Training horizon; scores are queried at this time.
    pub split_time: f64,
    pub stats: IngestStats,
}

impl RecDataset {
    pub fn dim(&self) -> usize {
        self.items.len()
    }

    pub fn train_sequences(&self) -> Vec<EventSequence> {
        self.users.iter().map(|u| u.train.clone()).collect()
    }

    /// Training purchase counts per item.
    pub fn popularity(&self) -> Vec<usize> {
        let mut counts = vec![0; self.dim()];
        for u in &self.users {
            for (c, n) in counts.iter_mut().zip(u.train.counts()) {
                *c += n;
            }
        }
        counts
    }
}

pub fn days_from_date(d: NaiveDate) -> i64 {
    d.signed_duration_since(NaiveDate::from_ymd_opt(1970, 1, 1).expect("epoch")).num_days()
}

/// Unix seconds (integer or float) or an ISO date / RFC 3339 timestamp.
pub fn parse_day(raw: &str) -> Option<i64> {
    let raw = raw.trim();
    if let Ok(secs) = raw.parse::<f64>() {
        return secs.is_finite().then(|| (secs / 86_400.0).floor() as i64);
    }
    if let Ok(d) = NaiveDate::parse_from_str(raw, "%Y-%m-%d") {
        return Some(days_from_date(d));
    }
    DateTime::parse_from_rfc3339(raw).ok().map(|dt| dt.timestamp().div_euclid(86_400))
}

fn parse_rating(raw: &str) -> Option<u8> {
    let v: f64 = raw.trim().parse().ok()?;
    (v.fract() == 0.0 && (1.0..=5.0).contains(&v)).then_some(v as u8)
}

fn is_header(rec: &csv::StringRecord) -> bool {
    let names = ["user", "item", "rating", "timestamp"];
    rec.len() == 4 && rec.iter().zip(names).all(|(f, n)| f.trim().eq_ignore_ascii_case(n))
}

/// Parse `user,item,rating,timestamp` rows; an optional header is skipped.
/// Returns the parsed events and the number of malformed rows.
pub fn read_ratings<R: Read>(input: R) -> Result<(Vec<RatingEvent>, usize)> {
    let mut reader = csv::ReaderBuilder::new().has_headers(false).flexible(true).from_reader(input);
    let mut events = Vec::new();
    let mut malformed = 0;
    for (i, rec) in reader.records().enumerate() {
        let rec = match rec {
            Ok(r) => r,
            Err(e) if e.is_io_error() => return Err(e.into()),
            Err(_) => {
                malformed += 1;
                continue;
            }
        };
        if i == 0 && is_header(&rec) {
            continue;
        }
        let parsed = (rec.len() == 4)
            .then(|| {
                let (user, item) = (rec[0].trim(), rec[1].trim());
                if user.is_empty() || item.is_empty() {
                    return None;
                }
                Some(RatingEvent { user: user.into(), item: item.into(), rating: parse_rating(&rec[2])?, day: parse_day(&rec[3])? })
            })
            .flatten();
        match parsed {
            Some(ev) => events.push(ev),
            None => malformed += 1,
        }
    }
    if malformed > 0 {
        log::warn!("skipped {malformed} malformed rating rows");
    }
    Ok((events, malformed))
}

pub fn ingest_and_filter<R: Read>(input: R, params: &FilterParams) -> Result<RecDataset> {
    let (events, malformed) = read_ratings(input)?;
    let mut ds = filter_events(&events, params)?;
    ds.stats.rows = events.len() + malformed;
    ds.stats.malformed = malformed;
    Ok(ds)
}

/// Apply the item, user and window filters to parsed events (kept in input order).
pub fn filter_events(events: &[RatingEvent], params: &FilterParams) -> Result<RecDataset> {
    params.validate()?;
    let mut item_counts: HashMap<&str, usize> = HashMap::new();
    for e in events {
        *item_counts.entry(&e.item).or_default() += 1;
    }
    let popular = |item: &str| item_counts[item] >= params.min_item_ratings;

    // Per user, in order of first appearance: training and test events.
    let mut order: Vec<&str> = Vec::new();
    let mut per_user: HashMap<&str, (Vec<&RatingEvent>, Vec<&RatingEvent>)> = HashMap::new();
    for e in events {
        let entry = per_user.entry(&e.user).or_insert_with(|| {
            order.push(&e.user);
            Default::default()
        });
        if !popular(&e.item) {
            continue;
        }
        if params.train.contains(e.day) {
            entry.0.push(e);
        } else if params.test.contains(e.day) {
            entry.1.push(e);
        }
    }
    let kept: Vec<(&str, &Vec<&RatingEvent>, &Vec<&RatingEvent>)> = order
        .iter()
        .map(|u| {
            let (train, test) = &per_user[u];
            (*u, train, test)
        })
        .filter(|(_, train, test)| {
            (params.min_train_events..=params.max_train_events).contains(&train.len())
                && train.iter().all(|e| e.rating >= params.min_rating)
                && !test.is_empty()
        })
        .collect();
    if kept.is_empty() {
        return Err(Error::EmptyData("no users survive the filters".into()));
    }

    let vocab: BTreeSet<&str> = kept.iter().flat_map(|(_, tr, te)| tr.iter().chain(te.iter()).map(|e| e.item.as_str())).collect();
    let items: Vec<String> = vocab.iter().map(|s| s.to_string()).collect();
    let index: HashMap<&str, usize> = vocab.iter().enumerate().map(|(d, s)| (*s, d)).collect();

    let train_end = params.train.end.expect("validated");
    let first_day = kept.iter().flat_map(|(_, tr, _)| tr.iter().map(|e| e.day)).min().unwrap_or(train_end - 1);
    let origin_day = params.train.start.unwrap_or(first_day).min(first_day) - 1;
    let split_time = (train_end - origin_day) as f64;

    let mut stats = IngestStats { items_kept: items.len(), users_seen: order.len(), users_kept: kept.len(), ..Default::default() };
    let mut users = Vec::with_capacity(kept.len());
    for (m, (user, train, test)) in kept.into_iter().enumerate() {
        let mut same_day: BTreeMap<i64, usize> = BTreeMap::new();
        let seq_events: Vec<Event> = train
            .iter()
            .map(|e| {
                let k = same_day.entry(e.day).or_default();
                let t = (e.day - origin_day) as f64 + *k as f64 * SAME_DAY_STEP;
                *k += 1;
                Event::new(t, index[e.item.as_str()])
            })
            .collect();
        stats.train_events += seq_events.len();
        stats.test_events += test.len();
        users.push(UserRecord {
            user: user.to_string(),
            train: EventSequence::new(seq_events, items.len(), split_time, Some(m as u64))?,
            truth: test.iter().map(|e| index[e.item.as_str()]).collect(),
        });
    }
    Ok(RecDataset { items, users, origin_day, split_time, stats })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params() -> FilterParams {
        FilterParams {
            min_item_ratings: 2,
            train: Window::new(None, Some(100)),
            test: Window::new(Some(100), Some(200)),
            ..Default::default()
        }
    }

    fn ev(u: &str, i: &str, day: i64, r: u8) -> RatingEvent {
        RatingEvent::new(u, i, day, r).unwrap()
    }

    #[test]
    fn timestamps_are_auto_detected() {
        assert_eq!(parse_day("86400"), Some(1));
        assert_eq!(parse_day("1396310400"), Some(16161));
        assert_eq!(parse_day("2014-04-01"), Some(16161));
        assert_eq!(parse_day("2014-04-01T23:00:00Z"), Some(16161));
        assert_eq!(parse_day("yesterday"), None);
    }

    #[test]
    fn default_windows_split_on_april_2014() {
        let p = FilterParams::default();
        assert!(p.train.contains(16160) && !p.train.contains(16161));
        assert!(p.test.contains(16161));
        p.validate().unwrap();
    }

    #[test]
    fn malformed_rows_are_counted() {
        let csv = "user,item,rating,timestamp\nu1,a,5,86400\nu1,a,seven,86400\nu2,b,4\nu3,c,6,10\n,c,4,10\nu4,d,4.0,2014-01-02\n";
        let (events, bad) = read_ratings(csv.as_bytes()).unwrap();
        assert_eq!(events.len(), 2);
        assert_eq!(bad, 4);
        assert_eq!(events[1].rating, 4);
    }

    #[test]
    fn item_threshold_is_inclusive() {
        let mut events = Vec::new();
        for k in 0..38 {
            events.push(ev(&format!("x{k}"), "rare", 150, 5));
        }
        for k in 0..40 {
            events.push(ev(&format!("y{k}"), "common", 150, 5));
        }
        events.push(ev("u", "rare", 10, 5));
        events.push(ev("u", "common", 150, 5));
        events.push(ev("v", "common", 10, 5));
        events.push(ev("v", "common", 150, 5));
        let ds = filter_events(&events, &FilterParams { min_item_ratings: 40, ..params() }).unwrap();
        assert_eq!(ds.items, vec!["common"]);
        let users: Vec<&str> = ds.users.iter().map(|u| u.user.as_str()).collect();
        assert_eq!(users, vec!["v"]);
    }

    #[test]
    fn user_filters() {
        let mut events = vec![
            // Four training events: too many.
            ev("many", "a", 1, 5),
            ev("many", "a", 2, 5),
            ev("many", "b", 3, 5),
            ev("many", "b", 4, 5),
            ev("many", "a", 150, 5),
            // Low training rating.
            ev("low", "a", 1, 3),
            ev("low", "b", 150, 5),
            // No test event.
            ev("notest", "a", 1, 5),
            // Kept; a low test rating is fine.
            ev("ok", "b", 5, 4),
            ev("ok", "a", 120, 1),
        ];
        events.push(ev("ok", "a", 250, 5));
        let ds = filter_events(&events, &params()).unwrap();
        assert_eq!(ds.users.len(), 1);
        let u = &ds.users[0];
        assert_eq!(u.user, "ok");
        assert_eq!(ds.items, vec!["a", "b"]);
        assert_eq!(u.train.events()[0].dim, 1);
        assert_eq!(u.truth, BTreeSet::from([0]));
        assert_eq!(ds.stats.users_seen, 4);
    }

    #[test]
    fn same_day_events_keep_input_order() {
        let events = vec![
            ev("u", "b", 10, 5),
            ev("u", "a", 10, 5),
            ev("u", "c", 12, 5),
            ev("u", "a", 150, 5),
            ev("w", "b", 150, 5),
            ev("w", "c", 150, 5),
        ];
        let ds = filter_events(&events, &FilterParams { min_item_ratings: 1, ..params() }).unwrap();
        let u = &ds.users[0];
        let dims: Vec<usize> = u.train.events().iter().map(|e| e.dim).collect();
        assert_eq!(dims, vec![1, 0, 2]);
        assert_eq!(ds.origin_day, 9);
        assert_eq!(ds.split_time, 91.0);
        assert_eq!(u.train.events()[0].t, 1.0);
    }

    #[test]
    fn empty_result_is_an_error() {
        let events = vec![ev("u", "a", 150, 5)];
        assert!(matches!(filter_events(&events, &params()), Err(Error::EmptyData(_))));
    }
}
