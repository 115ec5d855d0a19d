//! Per-record method outputs and their JSON-lines log.

use std::io::{BufRead, BufReader, Read, Write};

use serde::{Deserialize, Serialize};

use crate::geo::GeoPoint;
use crate::prompt::{ParseFailure, ParsedCoordinates, PromptPattern};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Method {
    Llm {
        pattern: PromptPattern,
        model: String,
    },
    GazetteerBaseline {
        source: String,
    },
}

impl Method {
    /// Human-readable slice label used in reports.
    pub fn label(&self) -> String {
        match self {
            Method::Llm { pattern, model } => format!("{model} / {pattern}"),
            Method::GazetteerBaseline { source } => format!("gazetteer-baseline / {source}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub record_id: String,
    pub method: Method,
    pub parsed: ParsedCoordinates,
    pub latency_ms: u64,
    pub attempts: u32,
    /// Set when no response was obtained at all (transport or render error).
    pub error: Option<String>,
}

impl Prediction {
    pub fn point(&self) -> Option<GeoPoint> {
        self.parsed.point()
    }

    pub fn status(&self) -> String {
        match (&self.error, &self.parsed.result) {
            (Some(_), _) => "request_failed".into(),
            (None, Ok(_)) => "ok".into(),
            (None, Err(f)) => f.to_string(),
        }
    }
}

/// One line of the prediction log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogEntry {
    pub record_id: String,
    pub method: String,
    pub pattern: Option<String>,
    pub model: Option<String>,
    pub raw_response: String,
    pub lat: Option<f64>,
    pub lon: Option<f64>,
    pub status: String,
    pub latency_ms: u64,
    pub attempts: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl From<&Prediction> for LogEntry {
    fn from(p: &Prediction) -> Self {
        let (method, pattern, model) = match &p.method {
            Method::Llm { pattern, model } => {
                ("llm", Some(pattern.name().to_string()), Some(model.clone()))
            }
            Method::GazetteerBaseline { source } => {
                ("gazetteer-baseline", None, Some(source.clone()))
            }
        };
        let point = p.point();
        Self {
            record_id: p.record_id.clone(),
            method: method.into(),
            pattern,
            model,
            raw_response: p.parsed.raw.clone(),
            lat: point.map(|q| q.lat()),
            lon: point.map(|q| q.lon()),
            status: p.status(),
            latency_ms: p.latency_ms,
            attempts: p.attempts,
            error: p.error.clone(),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum LogError {
    #[error("prediction log line {line}: {message}")]
    Invalid { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl LogEntry {
    pub fn into_prediction(self) -> Result<Prediction, String> {
        let method = match self.method.as_str() {
            "llm" => Method::Llm {
                pattern: self
                    .pattern
                    .as_deref()
                    .unwrap_or_default()
                    .parse()
                    .map_err(|e| format!("{e}"))?,
                model: self.model.unwrap_or_default(),
            },
            "gazetteer-baseline" => Method::GazetteerBaseline {
                source: self.model.unwrap_or_default(),
            },
            other => return Err(format!("unknown method `{other}`")),
        };
        let result = match (self.status.as_str(), self.lat, self.lon) {
            ("ok", Some(lat), Some(lon)) => Ok(GeoPoint::new(lat, lon).map_err(|e| e.to_string())?),
            ("ok", _, _) => return Err("status ok without coordinates".into()),
            ("out_of_range", ..) => Err(ParseFailure::OutOfRange),
            ("ambiguous", ..) => Err(ParseFailure::Ambiguous),
            ("no_coordinates" | "request_failed", ..) => Err(ParseFailure::NoCoordinates),
            (other, ..) => return Err(format!("unknown status `{other}`")),
        };
        Ok(Prediction {
            record_id: self.record_id,
            method,
            parsed: ParsedCoordinates {
                result,
                raw: self.raw_response,
            },
            latency_ms: self.latency_ms,
            attempts: self.attempts,
            error: self
                .error
                .or_else(|| (self.status == "request_failed").then(String::new)),
        })
    }
}

pub fn write_log<W: Write>(mut out: W, predictions: &[Prediction]) -> std::io::Result<()> {
    for p in predictions {
        serde_json::to_writer(&mut out, &LogEntry::from(p))?;
        out.write_all(b"\n")?;
    }
    out.flush()
}

pub fn read_log<R: Read>(input: R) -> Result<Vec<Prediction>, LogError> {
    let mut out = Vec::new();
    for (i, line) in BufReader::new(input).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let invalid = |message: String| LogError::Invalid {
            line: i + 1,
            message,
        };
        let entry: LogEntry = serde_json::from_str(&line).map_err(|e| invalid(e.to_string()))?;
        out.push(entry.into_prediction().map_err(invalid)?);
    }
    Ok(out)
}
