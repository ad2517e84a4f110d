//! Calibration and Monte Carlo simulation of one-factor mean-reverting and
//! two-factor spot-prompt models for energy prices.

pub mod error;
pub mod joint;
pub mod mrcal;
pub mod optimize;
mod serde_keys;
pub mod simulate;
pub mod spotprompt;
pub mod stats;
pub mod timeseries;

pub use error::{Error, Result};
pub use mrcal::{FactorPoint, FactorSeries, MRParams, MrOptions};
pub use timeseries::{Granularity, LevelGranularity, PriceSeries, StepSeries, Transform};
