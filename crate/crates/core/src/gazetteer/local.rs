use std::collections::HashMap;
use std::io::Read;

use serde::Deserialize;

use super::{fold_name, Gazetteer, GazetteerCandidate, GazetteerError, GazetteerSource};
use crate::geo::GeoPoint;

#[derive(Debug, Clone, Deserialize)]
struct Row {
    name: String,
    lat: f64,
    lon: f64,
    country_code: String,
    #[serde(default)]
    admin1: String,
    #[serde(default)]
    #[allow(dead_code)]
    feature_class: String,
}

#[derive(Debug, Clone)]
struct Entry {
    name: String,
    point: GeoPoint,
    country_code: String,
    admin1: String,
}

/// In-memory gazetteer loaded from `name,lat,lon,country_code,admin1,feature_class`
/// CSV. Candidates come back in file order.
#[derive(Debug, Clone, Default)]
pub struct LocalGazetteer {
    entries: Vec<Entry>,
    by_name: HashMap<String, Vec<usize>>,
}

impl LocalGazetteer {
    pub fn from_reader<R: Read>(input: R) -> Result<Self, GazetteerError> {
        let mut reader = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_reader(input);
        let mut gazetteer = Self::default();
        for (i, row) in reader.deserialize::<Row>().enumerate() {
            let row = row.map_err(|e| GazetteerError::InvalidFile(e.to_string()))?;
            let point = GeoPoint::new(row.lat, row.lon)
                .map_err(|e| GazetteerError::InvalidFile(format!("row {}: {e}", i + 2)))?;
            gazetteer.push(&row.name, point, &row.country_code, &row.admin1);
        }
        Ok(gazetteer)
    }

    pub fn push(&mut self, name: &str, point: GeoPoint, country_code: &str, admin1: &str) {
        self.by_name
            .entry(fold_name(name))
            .or_default()
            .push(self.entries.len());
        self.entries.push(Entry {
            name: name.trim().to_string(),
            point,
            country_code: country_code.trim().to_string(),
            admin1: admin1.trim().to_string(),
        });
    }

    /// Distinct place names, for building a dictionary matcher.
    pub fn names(&self) -> impl Iterator<Item = &str> {
        let mut seen = std::collections::HashSet::new();
        self.entries
            .iter()
            .map(|e| e.name.as_str())
            .filter(move |n| seen.insert(fold_name(n)))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

impl Gazetteer for LocalGazetteer {
    fn source(&self) -> GazetteerSource {
        GazetteerSource::LocalFile
    }

    fn lookup(
        &self,
        name: &str,
        state: &str,
        country: &str,
        max_rows: usize,
    ) -> Result<Vec<GazetteerCandidate>, GazetteerError> {
        let Some(indexes) = self.by_name.get(&fold_name(name)) else {
            return Ok(Vec::new());
        };
        let state = fold_name(state);
        Ok(indexes
            .iter()
            .map(|&i| &self.entries[i])
            .filter(|e| country.is_empty() || e.country_code.eq_ignore_ascii_case(country))
            .filter(|e| state.is_empty() || fold_name(&e.admin1) == state)
            .take(max_rows)
            .enumerate()
            .map(|(rank, e)| GazetteerCandidate {
                name: e.name.clone(),
                point: e.point,
                source: GazetteerSource::LocalFile,
                rank,
            })
            .collect())
    }
}
