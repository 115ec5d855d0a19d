//! Occurrence-record ingestion, deduplication, and deterministic partitioning.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::io::{BufRead, BufReader, Read, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geo::{GeoError, GeoPoint};
use crate::rng::{derive_seed, SeededShuffler};

/// One specimen record. Serializes to the canonical JSON-lines shape
/// `{id, locality, lat, lon, country_code, state_province, source_dataset}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "CanonicalRecord", into = "CanonicalRecord")]
pub struct OccurrenceRecord {
    pub id: String,
    pub locality: String,
    pub truth: GeoPoint,
    pub country_code: String,
    pub state_province: String,
    pub source_dataset: String,
}

#[derive(Serialize, Deserialize)]
struct CanonicalRecord {
    id: String,
    locality: String,
    lat: f64,
    lon: f64,
    country_code: String,
    #[serde(default)]
    state_province: String,
    #[serde(default)]
    source_dataset: String,
}

impl TryFrom<CanonicalRecord> for OccurrenceRecord {
    type Error = String;

    fn try_from(c: CanonicalRecord) -> Result<Self, Self::Error> {
        if c.locality.trim().is_empty() {
            return Err(format!("record {}: empty locality", c.id));
        }
        let truth = GeoPoint::new(c.lat, c.lon).map_err(|e| format!("record {}: {e}", c.id))?;
        Ok(Self {
            id: c.id,
            locality: c.locality,
            truth,
            country_code: c.country_code,
            state_province: c.state_province,
            source_dataset: c.source_dataset,
        })
    }
}

impl From<OccurrenceRecord> for CanonicalRecord {
    fn from(r: OccurrenceRecord) -> Self {
        Self {
            id: r.id,
            locality: r.locality,
            lat: r.truth.lat(),
            lon: r.truth.lon(),
            country_code: r.country_code,
            state_province: r.state_province,
            source_dataset: r.source_dataset,
        }
    }
}

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("input has no header line")]
    HeaderMissing,
    #[error("column `{0}` not found in header")]
    UnknownColumn(String),
    #[error("ratios {0:?} must be non-negative and sum to 1")]
    BadRatios([f64; 3]),
    #[error("fraction {0} outside [0, 1]")]
    BadFraction(f64),
    #[error("k = {k} is invalid for {n} records (need 2 <= k <= n)")]
    BadK { k: usize, n: usize },
    #[error("duplicate record id `{0}`")]
    DuplicateId(String),
    #[error("line {line}: {message}")]
    Json { line: usize, message: String },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Header names for each extracted field.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct ColumnMap {
    pub locality: String,
    pub latitude: String,
    pub longitude: String,
    pub country_code: String,
    pub state_province: String,
    /// Used when present in the header; otherwise the data-row index is the id.
    pub id: String,
}

impl Default for ColumnMap {
    fn default() -> Self {
        Self {
            locality: "locality".into(),
            latitude: "decimalLatitude".into(),
            longitude: "decimalLongitude".into(),
            country_code: "countryCode".into(),
            state_province: "stateProvince".into(),
            id: "gbifID".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum RowErrorKind {
    MissingCoordinate,
    BadNumber(String),
    OutOfRange(String),
    NotFinite,
    EmptyLocality,
    FieldCount { expected: usize, found: usize },
    DuplicateId(String),
    Malformed(String),
}

impl fmt::Display for RowErrorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::MissingCoordinate => f.write_str("missing coordinate"),
            Self::BadNumber(v) => write!(f, "unparseable coordinate `{v}`"),
            Self::OutOfRange(msg) => write!(f, "{msg}"),
            Self::NotFinite => f.write_str("coordinate not finite"),
            Self::EmptyLocality => f.write_str("empty locality"),
            Self::FieldCount { expected, found } => {
                write!(f, "expected {expected} fields, found {found}")
            }
            Self::DuplicateId(id) => write!(f, "duplicate id `{id}`"),
            Self::Malformed(msg) => write!(f, "malformed row: {msg}"),
        }
    }
}

/// A rejected input row. `row` is the 1-based line number in the file.
#[derive(Debug, Clone, PartialEq)]
pub struct RowError {
    pub row: u64,
    pub kind: RowErrorKind,
}

#[derive(Debug, Default)]
pub struct ParseOutcome {
    pub records: Vec<OccurrenceRecord>,
    pub errors: Vec<RowError>,
}

fn column_index(header: &csv::StringRecord, name: &str) -> Option<usize> {
    header.iter().position(|h| h.trim() == name)
}

fn parse_coordinate(raw: &str) -> Result<f64, RowErrorKind> {
    let raw = raw.trim();
    if raw.is_empty() {
        return Err(RowErrorKind::MissingCoordinate);
    }
    raw.parse::<f64>()
        .map_err(|_| RowErrorKind::BadNumber(raw.to_string()))
}

/// Parses a Darwin-Core style delimited file. The delimiter is a tab when the
/// header line contains one, otherwise a comma. Bad rows are collected, not
/// fatal.
pub fn parse_occurrences<R: Read>(
    input: R,
    columns: &ColumnMap,
    source_dataset: &str,
) -> Result<ParseOutcome, DatasetError> {
    let mut reader = BufReader::new(input);
    let mut header_line = String::new();
    if reader.read_line(&mut header_line)? == 0 || header_line.trim().is_empty() {
        return Err(DatasetError::HeaderMissing);
    }
    let header_line = header_line.trim_start_matches('\u{feff}');
    let tab = header_line.contains('\t');

    let mut builder = csv::ReaderBuilder::new();
    builder.has_headers(false).flexible(true);
    if tab {
        // GBIF tab exports are unquoted and may contain stray quote marks
        builder.delimiter(b'\t').quoting(false);
    }
    let header = builder
        .from_reader(header_line.as_bytes())
        .records()
        .next()
        .ok_or(DatasetError::HeaderMissing)??;

    let required = |name: &String| {
        column_index(&header, name).ok_or_else(|| DatasetError::UnknownColumn(name.clone()))
    };
    let locality_col = required(&columns.locality)?;
    let lat_col = required(&columns.latitude)?;
    let lon_col = required(&columns.longitude)?;
    let country_col = required(&columns.country_code)?;
    let state_col = required(&columns.state_province)?;
    let id_col = column_index(&header, &columns.id);

    let mut outcome = ParseOutcome::default();
    let mut seen_ids = HashSet::new();
    let mut data_reader = builder.from_reader(reader);
    let mut raw = csv::StringRecord::new();
    let mut data_index = 0u64;
    loop {
        let row = data_index + 2;
        match data_reader.read_record(&mut raw) {
            Ok(false) => break,
            Ok(true) => {}
            Err(e) => {
                // csv reports invalid UTF-8 per record; keep going
                data_index += 1;
                outcome.errors.push(RowError {
                    row,
                    kind: RowErrorKind::Malformed(e.to_string()),
                });
                continue;
            }
        }
        data_index += 1;
        if raw.len() == 1 && raw.get(0).is_some_and(|f| f.trim().is_empty()) {
            continue;
        }
        if raw.len() != header.len() {
            outcome.errors.push(RowError {
                row,
                kind: RowErrorKind::FieldCount {
                    expected: header.len(),
                    found: raw.len(),
                },
            });
            continue;
        }
        let field = |i: usize| raw.get(i).unwrap_or("");
        let parsed = (|| {
            let locality = field(locality_col).trim();
            if locality.is_empty() {
                return Err(RowErrorKind::EmptyLocality);
            }
            let lat = parse_coordinate(field(lat_col))?;
            let lon = parse_coordinate(field(lon_col))?;
            let truth = GeoPoint::new(lat, lon).map_err(|e| match e {
                GeoError::NotFinite { .. } => RowErrorKind::NotFinite,
                other => RowErrorKind::OutOfRange(other.to_string()),
            })?;
            let id = match id_col {
                Some(i) if !field(i).trim().is_empty() => field(i).trim().to_string(),
                _ => data_index.to_string(),
            };
            Ok(OccurrenceRecord {
                id,
                locality: locality.to_string(),
                truth,
                country_code: field(country_col).trim().to_uppercase(),
                state_province: field(state_col).trim().to_string(),
                source_dataset: source_dataset.to_string(),
            })
        })();
        match parsed {
            Ok(record) => {
                if seen_ids.insert(record.id.clone()) {
                    outcome.records.push(record);
                } else {
                    outcome.errors.push(RowError {
                        row,
                        kind: RowErrorKind::DuplicateId(record.id),
                    });
                }
            }
            Err(kind) => outcome.errors.push(RowError { row, kind }),
        }
    }
    Ok(outcome)
}

/// Case-folded, whitespace-collapsed form used for duplicate detection.
pub fn normalize_locality(text: &str) -> String {
    text.split_whitespace()
        .map(str::to_lowercase)
        .collect::<Vec<_>>()
        .join(" ")
}

/// Drops records whose normalized locality was already seen, keeping the
/// first occurrence and the relative order of survivors.
///
/// Records lacking coordinates never reach this point: they are rejected as
/// [`RowErrorKind::MissingCoordinate`] during parsing, and [`OccurrenceRecord`]
/// cannot hold an invalid point.
pub fn preprocess(records: Vec<OccurrenceRecord>) -> Vec<OccurrenceRecord> {
    let mut seen = HashSet::new();
    records
        .into_iter()
        .filter(|r| seen.insert(normalize_locality(&r.locality)))
        .collect()
}

/// `floor(n * fraction)`, tolerant of the binary representation error in
/// fractions such as 0.7 or 0.85.
pub fn floor_count(n: usize, fraction: f64) -> usize {
    let exact = n as f64 * fraction;
    ((exact + 1e-9 * exact.max(1.0)).floor() as usize).min(n)
}

#[derive(Debug, Clone)]
pub struct DatasetSplit {
    pub train: Vec<OccurrenceRecord>,
    pub validation: Vec<OccurrenceRecord>,
    pub test: Vec<OccurrenceRecord>,
    pub seed: u64,
    pub ratios: [f64; 3],
}

/// Shuffles with `seed`, then cuts at `floor(n·r_train)` and
/// `floor(n·(r_train + r_val))`.
pub fn split(
    records: &[OccurrenceRecord],
    ratios: [f64; 3],
    seed: u64,
) -> Result<DatasetSplit, DatasetError> {
    if ratios.iter().any(|r| !r.is_finite() || *r < 0.0)
        || (ratios.iter().sum::<f64>() - 1.0).abs() > 1e-9
    {
        return Err(DatasetError::BadRatios(ratios));
    }
    let mut shuffled = records.to_vec();
    SeededShuffler::new(seed).shuffle(&mut shuffled);
    let n = shuffled.len();
    let cut_train = floor_count(n, ratios[0]);
    let cut_val = floor_count(n, ratios[0] + ratios[1]).max(cut_train);
    let test = shuffled.split_off(cut_val);
    let validation = shuffled.split_off(cut_train);
    Ok(DatasetSplit {
        train: shuffled,
        validation,
        test,
        seed,
        ratios,
    })
}

/// One input to [`mix_training_sets`].
#[derive(Debug, Clone, Copy)]
pub struct MixSource<'a> {
    pub records: &'a [OccurrenceRecord],
    pub fraction: f64,
}

/// Takes a seeded sample of `floor(fraction·n)` records from each source,
/// concatenates them, and shuffles the result.
pub fn mix_training_sets(
    sources: &[MixSource<'_>],
    seed: u64,
) -> Result<Vec<OccurrenceRecord>, DatasetError> {
    if let Some(bad) = sources.iter().find(|s| !(0.0..=1.0).contains(&s.fraction)) {
        return Err(DatasetError::BadFraction(bad.fraction));
    }
    let mut mixed = Vec::new();
    for (i, source) in sources.iter().enumerate() {
        let take = floor_count(source.records.len(), source.fraction);
        let mut sample = source.records.to_vec();
        SeededShuffler::new(derive_seed(seed, i as u64)).shuffle(&mut sample);
        sample.truncate(take);
        mixed.extend(sample);
    }
    SeededShuffler::new(seed).shuffle(&mut mixed);
    Ok(mixed)
}

#[derive(Debug, Clone)]
pub struct Fold {
    pub train: Vec<OccurrenceRecord>,
    pub test: Vec<OccurrenceRecord>,
}

/// Seeded k-fold partition. The first `n mod k` folds get one extra record.
pub fn kfold(records: &[OccurrenceRecord], k: usize, seed: u64) -> Result<Vec<Fold>, DatasetError> {
    let n = records.len();
    if k < 2 || n < k {
        return Err(DatasetError::BadK { k, n });
    }
    let mut order: Vec<usize> = (0..n).collect();
    SeededShuffler::new(seed).shuffle(&mut order);

    let base = n / k;
    let extra = n % k;
    let mut folds = Vec::with_capacity(k);
    let mut start = 0;
    for f in 0..k {
        let len = base + usize::from(f < extra);
        let in_test: HashSet<usize> = order[start..start + len].iter().copied().collect();
        let test = order[start..start + len]
            .iter()
            .map(|&i| records[i].clone())
            .collect();
        let train = order
            .iter()
            .filter(|i| !in_test.contains(i))
            .map(|&i| records[i].clone())
            .collect();
        folds.push(Fold { train, test });
        start += len;
    }
    Ok(folds)
}

/// Reads canonical JSON-lines records, rejecting duplicate ids.
pub fn read_records<R: Read>(input: R) -> Result<Vec<OccurrenceRecord>, DatasetError> {
    let mut records = Vec::new();
    let mut ids = HashSet::new();
    for (i, line) in BufReader::new(input).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let record: OccurrenceRecord =
            serde_json::from_str(&line).map_err(|e| DatasetError::Json {
                line: i + 1,
                message: e.to_string(),
            })?;
        if !ids.insert(record.id.clone()) {
            return Err(DatasetError::DuplicateId(record.id));
        }
        records.push(record);
    }
    Ok(records)
}

pub fn write_records<W: Write>(mut out: W, records: &[OccurrenceRecord]) -> std::io::Result<()> {
    for record in records {
        serde_json::to_writer(&mut out, record)?;
        out.write_all(b"\n")?;
    }
    out.flush()
}

/// Id → record lookup.
pub fn index_by_id(records: &[OccurrenceRecord]) -> HashMap<&str, &OccurrenceRecord> {
    records.iter().map(|r| (r.id.as_str(), r)).collect()
}
