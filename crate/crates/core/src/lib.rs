//! Membership-inference attacks against self-supervised speech encoders.
//!
//! The engine works on frame-level feature dumps. A basic attack scores each
//! utterance (or speaker) by the dispersion (or similarity) of its
//! representations and thresholds the score. An improved attack ranks the
//! pool by basic score, takes the extremes as pseudo-labels and trains a
//! small attention-pooling network on them.

pub mod attack;
pub mod error;
pub mod eval;
pub mod pipeline;
pub mod pseudo_label;
pub mod scoring;
pub mod seeds;
pub mod store;
pub mod synth;

pub use error::{Error, Result};
pub use scoring::{Level, Metric, ScoreTable};
pub use store::{Dataset, Frames, Manifest, Membership};
