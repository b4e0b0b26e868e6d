//! Voicing detection from laryngograph-referenced labels.
//!
//! The crate covers the whole pipeline: DSP primitives ([`dsp`]), the NCCF
//! voicing tracker ([`rapt`]), reference-label generation and comparison
//! ([`labels`]), corpus manifests and folds ([`corpus`]), the DC-CRN
//! detector ([`model`]) and its training/evaluation loop ([`train`]).

pub mod dsp;
pub mod error;
pub mod par;

pub use error::{Error, Result};
pub mod labels;
pub mod rapt;
pub mod corpus;
pub mod model;
pub mod train;
