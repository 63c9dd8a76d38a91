//! Training-free truthfulness detection for multiple-choice questions.
//!
//! A GLU transformer's MLP key activations are treated as probes. Each
//! probe votes for the candidate answer where it is largest (or smallest),
//! probes are ranked by how often that vote is correct on a small labeled
//! budget, and the top fraction votes on new items.

pub mod analysis;
pub mod capture;
pub mod cli;
pub mod data;
pub mod ensemble;
pub mod error;
pub mod hexfloat;
pub mod model;
pub mod probe;
pub mod records;
pub mod select;
pub mod synth;
pub mod tokenizer;

pub use error::{Error, Result};
pub use probe::{ProbeId, ProbeKind};
