//! Forgetting-quality coreset selection for automatic modulation recognition.
//!
//! The pipeline runs in five stages, each with its own module and file format:
//!
//! 1. [`dataset`] synthesizes labeled I/Q frames over an SNR grid.
//! 2. [`dynamics`] trains a reference classifier on the full training split and
//!    records per-sample correctness and loss at the end of every epoch.
//! 3. [`scoring`] turns those trajectories into forgetting, persistent-error and
//!    quality scores, plus the auxiliary metrics used by baseline selectors.
//! 4. [`selection`] draws class-balanced coresets, either by the three-tier
//!    proportional sampler or one of eight baselines.
//! 5. [`eval`] retrains on each coreset and reports test accuracy over a grid of
//!    methods, rates and repeats.

pub mod config;
pub mod dataset;
pub mod digest;
pub mod dynamics;
pub mod error;
pub mod eval;
pub mod jsonl;
pub mod nn;
pub mod rng;
pub mod scoring;
pub mod selection;

pub use error::{Error, Result};
