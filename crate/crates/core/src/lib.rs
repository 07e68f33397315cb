//! Vehicle sound classification from three short-time features per frame:
//! energy, zero-cross rate and center-clipped autocorrelation pitch.
//!
//! The pipeline normalizes and low-pass filters a recording, frames it, keeps
//! periodic frames (optionally only the high-energy, low zero-cross ones), and
//! labels the recording by a majority vote over per-frame classifications.

// Negated float comparisons below deliberately reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod audio_io;
pub mod classify;
pub mod config;
pub mod dsp;
pub mod error;
pub mod eval;
pub mod features;
pub mod model;
pub mod synth;

pub use error::{Error, ErrorKind, Result};
