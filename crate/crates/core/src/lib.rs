//! Multimodal fake-news short-video detection.
//!
//! The crate covers the whole experimental pipeline: the dataset schema and
//! loaders ([`data`], [`cache`], [`synthetic`]), feature preparation
//! ([`encoders`]), the co-attention fusion classifier ([`model`]), the
//! single-modality baselines ([`baselines`]), event-level evaluation
//! ([`eval`]) and the exploratory analyses ([`analysis`]).

// Dense numeric kernels read most clearly with explicit row/column indices.
#![allow(clippy::needless_range_loop)]

pub mod analysis;
pub mod autograd;
pub mod baselines;
pub mod cache;
pub mod data;
pub mod encoders;
pub mod error;
pub mod eval;
pub mod model;
pub mod nn;
pub mod synthetic;
pub mod tensor;
pub mod text;

pub use error::{Error, Result};
