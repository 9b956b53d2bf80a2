//! Event-stream analytics for emergency shelter access records.
//!
//! The pipeline turns raw timestamped access events into per-client stay
//! timelines, segments those timelines into episodes, evaluates windowed
//! stay/episode threshold tests (including the published GoC, GoA and RAPID
//! definitions), quantifies the impact of housing referrals, searches the
//! window/threshold design space, and validates population structure with
//! k-means clustering and Hotelling's T² tests.

pub mod cluster;
pub mod detect;
pub mod error;
pub mod impact;
pub mod ingest;
pub mod report;
pub mod search;
pub mod stats;
pub mod synth;
pub mod timeline;

pub use error::{Error, Result};
