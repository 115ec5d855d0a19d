//! Georeferencing of free-text specimen locality descriptions.
//!
//! The crate covers the whole offline side of the pipeline: record ingestion
//! and splitting ([`dataset`]), prompt rendering and response parsing
//! ([`prompt`]), chat-completion clients ([`llm`]), the gazetteer-matching
//! baseline ([`gazetteer`]), scoring ([`eval`]), and locality text analyses
//! ([`analysis`]).

pub mod analysis;
pub mod dataset;
pub mod eval;
pub mod gazetteer;
pub mod geo;
pub mod llm;
pub mod net;
pub mod prediction;
pub mod prompt;
pub mod rng;
