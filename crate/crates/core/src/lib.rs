//! Hourly patient-flow metrics and waiting-room occupancy forecasting for
//! emergency departments.
//!
//! The pipeline runs raw event tables through [`ingestion`], turns them into
//! hourly series with [`flowmetrics`], builds model-ready tables in
//! [`featurebuild`], fits direct h-step forecasters in [`forecast`] and scores
//! them with [`evaluation`]. [`synthgen`] produces seeded synthetic worlds with
//! a known ground-truth census.

pub mod error;
pub mod evaluation;
pub mod featurebuild;
pub mod flowmetrics;
pub mod forecast;
pub mod ingestion;
pub mod pipeline;
pub mod rng;
pub mod synthgen;
pub mod time;

#[cfg(test)]
mod testutil;

pub use error::{Error, Result};
pub use time::Timestamp;
