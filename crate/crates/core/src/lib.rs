//! Adversarial adaptive 1-D CNN for bearing fault diagnosis across working
//! conditions.
//!
//! A source feature extractor is trained on labeled spectra, then a target
//! extractor (sharing a prefix of its parameter groups with the source) is
//! tuned against a domain discriminator until target features become
//! indistinguishable from source features.

pub mod data;
pub mod error;
pub mod eval;
pub mod model;
pub mod nn;
pub mod rng;
pub mod signal;
pub mod train;

pub use error::{Error, Result};
