//! Frequency-multiplexed Hong-Ou-Mandel interference between weak coherent
//! pulses stored in atomic frequency comb memories, and the heralding rates
//! of a multiplexed quantum repeater link built on it.

pub mod afc_mapping;
pub mod analysis;
pub mod cli;
pub mod coincidence_mc;
pub mod error;
pub mod format;
pub mod hom_analytic;
pub mod model;
pub mod repeater_rates;
pub mod rng;

pub use error::{Error, Result};
