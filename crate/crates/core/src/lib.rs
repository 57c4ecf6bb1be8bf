//! Demographic inference on a following graph: label propagation and its
//! variants, propagation-derived features, neighbor-sentence embeddings and
//! shallow classifiers, with a planted-partition harness for experiments.

pub mod embed;
pub mod error;
pub mod experiment;
pub mod graph;
pub mod labelprop;
pub mod labels;
pub mod lpfeatures;
pub mod model;
pub mod synth;

pub use error::{Error, Result};
