//! Cold-start top-N recommendation from a learned infectivity matrix.
//!
//! Ratings are ingested and filtered into per-user purchase sequences
//! ([`ingest`]), items are ranked by the excitation of each user's history
//! ([`rank`]), and ranked lists are scored with precision, recall and F1 at
//! N ([`metrics`]). [`pipeline`] ties the steps together and [`synth`]
//! produces Hawkes-driven purchase logs for testing.

pub mod ingest;
pub mod metrics;
pub mod pipeline;
pub mod rank;
pub mod synth;

pub use ingest::{ingest_and_filter, FilterParams, RatingEvent, RecDataset, UserRecord, Window};
pub use metrics::{evaluate, Metrics};
pub use pipeline::{run_recommendation, RecConfig, RecReport, Recommender};
pub use rank::{most_popular_baseline, ranking_scores, recommend_topn, score_items, TopN};
pub use synth::{generate_ratings, write_ratings, SynthSpec};
