//! Scoring of predictions against ground truth.

mod report;
mod spearman;

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::OccurrenceRecord;
use crate::geo::{haversine_distance, DistanceKm, GeoPoint};
use crate::prediction::Prediction;

pub use report::{
    format_distance, format_percent, format_radius, render_report, write_report, ReportFormat,
};
pub use spearman::{average_ranks, spearman, spearman_with, CorrelationResult, PValueMethod};

/// Radii reported by default, in the order they appear in reports.
pub const DEFAULT_RADII_KM: [f64; 2] = [10.0, 1.0];
/// Lower edges of the description-length bins after the first.
pub const DEFAULT_LENGTH_BOUNDARIES: [usize; 4] = [30, 60, 90, 120];

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("no ground truth for record `{0}`")]
    MissingTruth(String),
    #[error("radii must be positive and finite")]
    BadRadii,
    #[error("length boundaries must be positive and strictly increasing")]
    BadBoundaries,
    #[error("need at least 3 paired values, got {0}")]
    TooFewPoints(usize),
    #[error("x and y differ in length ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("all values are tied in one input")]
    ZeroVariance,
    #[error("input contains a non-finite value")]
    NotFinite,
    #[error("exact permutation test is limited to n <= {max}, got {n}")]
    TooManyForExact { n: usize, max: usize },
    #[error("nothing to report")]
    EmptyReport,
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Great-circle distance between a prediction and its ground truth.
pub fn simple_accuracy_error(pred: GeoPoint, truth: GeoPoint) -> DistanceKm {
    haversine_distance(pred, truth)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadiusAccuracy {
    pub radius_km: f64,
    /// Share of all records (failures included) within the radius.
    pub fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationSummary {
    pub label: String,
    pub n_total: usize,
    /// Records with no predicted coordinates.
    pub n_failed: usize,
    pub accuracy_at: Vec<RadiusAccuracy>,
    /// Over successful predictions only; `None` when there are none.
    pub median_sae_km: Option<f64>,
    pub mean_sae_km: Option<f64>,
}

impl EvaluationSummary {
    pub fn accuracy(&self, radius_km: f64) -> Option<f64> {
        self.accuracy_at
            .iter()
            .find(|a| a.radius_km == radius_km)
            .map(|a| a.fraction)
    }
}

fn check_radii(radii: &[f64]) -> Result<(), EvalError> {
    if radii.iter().all(|r| r.is_finite() && *r > 0.0) {
        Ok(())
    } else {
        Err(EvalError::BadRadii)
    }
}

/// Ground truth keyed by record id.
pub fn truths_from_records(records: &[OccurrenceRecord]) -> HashMap<String, GeoPoint> {
    records.iter().map(|r| (r.id.clone(), r.truth)).collect()
}

/// Per-record errors: `Some(sae)` for predictions with coordinates, `None`
/// for failures.
pub fn errors_km(
    predictions: &[Prediction],
    truths: &HashMap<String, GeoPoint>,
) -> Result<Vec<Option<f64>>, EvalError> {
    predictions
        .iter()
        .map(|p| {
            let truth = truths
                .get(&p.record_id)
                .ok_or_else(|| EvalError::MissingTruth(p.record_id.clone()))?;
            Ok(p.point().map(|q| simple_accuracy_error(q, *truth).km()))
        })
        .collect()
}

/// Summary statistics from per-record errors (`None` = failed prediction).
pub fn summarize_errors(
    label: &str,
    errors: &[Option<f64>],
    radii: &[f64],
) -> Result<EvaluationSummary, EvalError> {
    check_radii(radii)?;
    let mut ok: Vec<f64> = errors.iter().flatten().copied().collect();
    // sorting first makes every statistic independent of input order
    ok.sort_by(f64::total_cmp);
    let n_total = errors.len();
    let accuracy_at = radii
        .iter()
        .map(|&r| RadiusAccuracy {
            radius_km: r,
            fraction: if n_total == 0 {
                0.0
            } else {
                ok.partition_point(|&e| e <= r) as f64 / n_total as f64
            },
        })
        .collect();
    let median = match ok.len() {
        0 => None,
        n if n % 2 == 1 => Some(ok[n / 2]),
        n => Some((ok[n / 2 - 1] + ok[n / 2]) / 2.0),
    };
    let mean = (!ok.is_empty()).then(|| ok.iter().sum::<f64>() / ok.len() as f64);
    Ok(EvaluationSummary {
        label: label.to_string(),
        n_total,
        n_failed: n_total - ok.len(),
        accuracy_at,
        median_sae_km: median,
        mean_sae_km: mean,
    })
}

/// Accuracy within each radius over all predictions, with failures counted
/// as misses, plus median and mean error over the successful ones.
pub fn summarize(
    label: &str,
    predictions: &[Prediction],
    truths: &HashMap<String, GeoPoint>,
    radii: &[f64],
) -> Result<EvaluationSummary, EvalError> {
    summarize_errors(label, &errors_km(predictions, truths)?, radii)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LengthBin {
    /// Inclusive lower bound, in characters.
    pub lower: usize,
    /// Exclusive upper bound; `None` for the open last bin.
    pub upper: Option<usize>,
    pub summary: EvaluationSummary,
}

impl LengthBin {
    pub fn contains(&self, length: usize) -> bool {
        length >= self.lower && self.upper.map_or(true, |u| length < u)
    }
}

pub fn length_bin_label(lower: usize, upper: Option<usize>) -> String {
    match (lower, upper) {
        (0, Some(u)) => format!("Less than {u}"),
        (l, Some(u)) => format!("{l} - {u}"),
        (l, None) => format!("More than {l}"),
    }
}

/// Locality length in Unicode scalar values.
pub fn locality_length(locality: &str) -> usize {
    locality.chars().count()
}

/// Splits predictions by the character length of their record's locality
/// into `[0, b0), [b0, b1), ..., [bk, inf)` and summarizes each bin.
pub fn summarize_by_length(
    predictions: &[Prediction],
    records: &[OccurrenceRecord],
    boundaries: &[usize],
    radii: &[f64],
) -> Result<Vec<LengthBin>, EvalError> {
    if boundaries.first() == Some(&0) || boundaries.windows(2).any(|w| w[0] >= w[1]) {
        return Err(EvalError::BadBoundaries);
    }
    let by_id: HashMap<&str, &OccurrenceRecord> =
        records.iter().map(|r| (r.id.as_str(), r)).collect();
    let mut edges = vec![0];
    edges.extend_from_slice(boundaries);
    let mut grouped: Vec<Vec<Option<f64>>> = vec![Vec::new(); edges.len()];
    for p in predictions {
        let record = by_id
            .get(p.record_id.as_str())
            .ok_or_else(|| EvalError::MissingTruth(p.record_id.clone()))?;
        let len = locality_length(&record.locality);
        let bin = edges.partition_point(|&e| e <= len) - 1;
        grouped[bin].push(
            p.point()
                .map(|q| simple_accuracy_error(q, record.truth).km()),
        );
    }
    edges
        .iter()
        .enumerate()
        .map(|(i, &lower)| {
            let upper = edges.get(i + 1).copied();
            Ok(LengthBin {
                lower,
                upper,
                summary: summarize_errors(&length_bin_label(lower, upper), &grouped[i], radii)?,
            })
        })
        .collect()
}

/// Spearman correlation between locality length and error, over records
/// with a prediction.
pub fn length_error_correlation(
    predictions: &[Prediction],
    records: &[OccurrenceRecord],
    method: PValueMethod,
) -> Result<CorrelationResult, EvalError> {
    let by_id: HashMap<&str, &OccurrenceRecord> =
        records.iter().map(|r| (r.id.as_str(), r)).collect();
    let mut lengths = Vec::new();
    let mut errors = Vec::new();
    for p in predictions {
        let record = by_id
            .get(p.record_id.as_str())
            .ok_or_else(|| EvalError::MissingTruth(p.record_id.clone()))?;
        if let Some(q) = p.point() {
            lengths.push(locality_length(&record.locality) as f64);
            errors.push(simple_accuracy_error(q, record.truth).km());
        }
    }
    spearman_with(&lengths, &errors, method)
}
