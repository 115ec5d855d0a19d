//! Gazetteer-matching baseline.
//!
//! Place names are pulled from a locality with a [`PlaceNameRecognizer`],
//! every name is looked up in a [`Gazetteer`] scoped to the record's state and
//! country, all returned candidates are pooled and clustered with
//! [`dbscan`], and the prediction is the centroid of the largest cluster.

mod baseline;
mod cache;
mod dbscan;
mod local;
mod ner;
mod web;

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geo::GeoPoint;

pub use baseline::{
    georeference_by_gazetteer, run_baseline, BaselineOutcome, BaselineParams, ClusterResult,
};
pub use cache::CachedGazetteer;
pub use dbscan::{dbscan, DbscanParams, NOISE};
pub use local::LocalGazetteer;
pub use ner::{DictionaryMatcher, RemoteNer};
pub use web::{GeoNamesClient, NominatimClient};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GazetteerError {
    #[error("gazetteer unavailable: {0}")]
    Unavailable(String),
    #[error("gazetteer quota exceeded: {0}")]
    QuotaExceeded(String),
    #[error("NER backend unavailable: {0}")]
    NerBackendUnavailable(String),
    #[error("invalid gazetteer file: {0}")]
    InvalidFile(String),
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
}

/// A recognized place name with its character (not byte) span.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlaceEntity {
    pub text: String,
    pub start: usize,
    pub end: usize,
}

impl PlaceEntity {
    /// Builds an entity from a char span of `source`, or `None` if the span
    /// is empty or out of bounds.
    pub fn from_span(source: &str, start: usize, end: usize) -> Option<Self> {
        if start >= end {
            return None;
        }
        let text: String = source.chars().skip(start).take(end - start).collect();
        (text.chars().count() == end - start).then_some(Self { text, start, end })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GazetteerSource {
    GeoNamesWeb,
    NominatimWeb,
    LocalFile,
}

impl fmt::Display for GazetteerSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::GeoNamesWeb => "geonames",
            Self::NominatimWeb => "nominatim",
            Self::LocalFile => "local",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GazetteerCandidate {
    pub name: String,
    pub point: GeoPoint,
    pub source: GazetteerSource,
    /// Position in the provider's result order, 0 = best.
    pub rank: usize,
}

pub trait PlaceNameRecognizer: Send + Sync {
    /// Entities in order of appearance.
    fn extract(&self, locality: &str) -> Result<Vec<PlaceEntity>, GazetteerError>;
}

pub trait Gazetteer: Send + Sync {
    fn source(&self) -> GazetteerSource;

    /// Up to `max_rows` candidates for `name` in `country`, restricted to
    /// `state` when non-empty and the provider supports it.
    fn lookup(
        &self,
        name: &str,
        state: &str,
        country: &str,
        max_rows: usize,
    ) -> Result<Vec<GazetteerCandidate>, GazetteerError>;
}

pub fn extract_place_names(
    locality: &str,
    ner: &dyn PlaceNameRecognizer,
) -> Result<Vec<PlaceEntity>, GazetteerError> {
    ner.extract(locality)
}

pub fn lookup_candidates(
    entity: &PlaceEntity,
    state: &str,
    country: &str,
    gazetteer: &dyn Gazetteer,
    max_rows: usize,
) -> Result<Vec<GazetteerCandidate>, GazetteerError> {
    if entity.text.trim().is_empty() {
        return Ok(Vec::new());
    }
    gazetteer.lookup(entity.text.trim(), state, country, max_rows)
}

/// Lowercased, whitespace-collapsed key used by name indexes.
pub fn fold_name(name: &str) -> String {
    name.split_whitespace()
        .map(str::to_lowercase)
        .collect::<Vec<_>>()
        .join(" ")
}
