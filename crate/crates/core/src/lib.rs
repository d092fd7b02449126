//! Fairness-aware evaluation of 1:1 face-verification benchmarks.
//!
//! The pipeline runs from raw annotator votes ([`annotation`]) through an
//! attribute schema and labelled dataset ([`schema`]), balanced pair
//! generation ([`pairgen`]), per-subgroup accuracy, discrimination and Bias
//! ([`metrics`]), to leaderboards ([`ranking`]) and diagnostics
//! ([`analysis`]). [`synth`] builds seeded synthetic datasets and scores and
//! [`io`] reads and writes the CSV exchange formats.

pub mod analysis;
pub mod annotation;
pub mod io;
pub mod metrics;
pub mod pairgen;
pub mod ranking;
pub mod schema;
pub mod synth;
