//! Secrecy-rate analysis of a massive MIMO downlink built from imperfect
//! hardware: Wiener phase noise on every oscillator, additive distortion at
//! both link ends, and amplified receiver noise.
//!
//! * [`core_model`] validates a system description and builds the pilot schedule.
//! * [`closed_form`] evaluates the analytical rate, leakage and eavesdropper bounds.
//! * [`channel_sim`] estimates the same quantities by Monte Carlo simulation.
//! * [`design_opt`] sweeps the free design parameters over the closed-form evaluator.
//!
//! Monte Carlo trials and sweep points run on rayon when the `parallel`
//! feature is on (the default); results are identical either way.

pub mod channel_sim;
pub mod closed_form;
pub mod core_model;
pub mod design_opt;
pub mod exec;

pub use closed_form::EveBound;
pub use core_model::{Config, ConfigError, Scenario};
pub use exec::Backend;
