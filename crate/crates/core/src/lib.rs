//! Allocation-only kernel for trait-conditioned decoding and its evaluation.
//!
//! Everything in this crate is a pure computation over in-memory values:
//! logit composition and sampling, the two-phase steered generation loop,
//! Big Five trait labeling, dataset record construction and export, questionnaire
//! scoring, correlation and corpus statistics, and a ridge-regression trait
//! scorer. File formats, HTTP transports and the CLI live in the `traitsteer`
//! crate.
#![no_std]

extern crate alloc;

pub mod analysis;
pub mod dataset;
pub mod logits;
pub mod ngram;
pub mod personality;
pub mod psychometrics;
pub mod scorer;
pub mod steering;
pub mod text;

mod special;

pub use logits::{combine_logits, sample_token, softmax, LogitVector, ProbVector, SamplerConfig, SamplingMode, VocabSpec};
pub use personality::{Level, Trait, TraitSpec};
pub use steering::{generate_base, generate_steered, GenerationResult, LogitSource, SteeringPolicy};
