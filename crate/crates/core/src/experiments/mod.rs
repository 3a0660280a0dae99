//! Experiment drivers: manufactured-solution convergence studies, the energy
//! test, the lid-driven cavity and the channel over a step.

pub mod cavity;
pub mod channel;
pub mod config;
pub mod convergence;
pub mod energy;
pub mod mms;
pub mod output;
