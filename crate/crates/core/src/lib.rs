//! Desk-scale credit risk pipeline over LNB bureau records.
//!
//! The crate covers the full path from raw fixed-width bureau text to a
//! trained default-risk model: parsing and segmentation ([`bureau`]),
//! plain-English credit stories ([`story`]), a domain tokenizer ([`lexicon`]),
//! temporal aggregates ([`temporal`]), target construction and splits
//! ([`labeling`]), a seeded synthetic corpus generator with a Bayes oracle
//! ([`synthgen`]), the trainable segment-encoder model ([`model`]), ranking
//! and stability metrics plus the version ladder ([`metrics`]), and dataset
//! orchestration ([`dataset`]). The `lnb` binary wires these into the
//! `generate`, `parse`, `story`, `featurize`, `train`, `evaluate` and
//! `ablate` commands.

pub mod bureau;
pub mod dataset;
pub mod labeling;
pub mod lexicon;
pub mod metrics;
pub mod model;
pub mod seeds;
pub mod story;
pub mod synthgen;
pub mod temporal;
