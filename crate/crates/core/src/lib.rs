//! Attribute value extraction from product titles.
//!
//! Titles are tagged B/I/O with sequence models (averaged perceptron,
//! linear-chain CRF, second-order HMM) or matched by simple baselines, and
//! extracted values are mapped to canonical forms by a normalization table
//! that grows through analyst review.

#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

pub mod artifact;
pub mod baselines;
pub mod corpus;
pub mod crf;
pub mod decode;
pub mod error;
pub mod eval;
pub mod features;
pub mod hmm;
pub mod normalize;
pub mod optimize;
pub mod perceptron;
pub mod pipeline;
pub mod synth;
pub mod weak_supervision;

pub use error::{Error, Result};
