use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::{
    dbscan, lookup_candidates, DbscanParams, Gazetteer, GazetteerCandidate, GazetteerError,
    PlaceEntity, PlaceNameRecognizer, NOISE,
};
use crate::dataset::OccurrenceRecord;
use crate::geo::{centroid, spans_antimeridian, GeoPoint};
use crate::prediction::{Method, Prediction};
use crate::prompt::{ParseFailure, ParsedCoordinates};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BaselineParams {
    pub dbscan: DbscanParams,
    /// Candidates requested per place name.
    pub max_rows: usize,
}

impl Default for BaselineParams {
    fn default() -> Self {
        Self {
            dbscan: DbscanParams::default(),
            max_rows: 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClusterResult {
    pub labels: Vec<i32>,
    pub chosen_cluster: Option<i32>,
    pub centroid: Option<GeoPoint>,
}

impl ClusterResult {
    /// Clusters `points` and picks the cluster with the most points, the
    /// lowest label on a tie.
    pub fn compute(points: &[GeoPoint], params: &DbscanParams) -> Result<Self, GazetteerError> {
        let labels = dbscan(points, params)?;
        let clusters = labels
            .iter()
            .copied()
            .max()
            .map_or(0, |m| (m + 1).max(0) as usize);
        let mut sizes = vec![0usize; clusters];
        for &l in labels.iter().filter(|&&l| l != NOISE) {
            sizes[l as usize] += 1;
        }
        let chosen = sizes
            .iter()
            .enumerate()
            .fold(
                None,
                |best: Option<(usize, usize)>, (label, &size)| match best {
                    Some((_, s)) if s >= size => best,
                    _ => Some((label, size)),
                },
            )
            .map(|(label, _)| label as i32);
        let centroid = match chosen {
            Some(c) => {
                let members: Vec<GeoPoint> = points
                    .iter()
                    .zip(&labels)
                    .filter(|(_, &l)| l == c)
                    .map(|(p, _)| *p)
                    .collect();
                Some(centroid(&members).expect("a chosen cluster is non-empty"))
            }
            None => None,
        };
        Ok(Self {
            labels,
            chosen_cluster: chosen,
            centroid,
        })
    }

    pub fn members<'a>(&'a self, points: &'a [GeoPoint]) -> impl Iterator<Item = GeoPoint> + 'a {
        points
            .iter()
            .zip(&self.labels)
            .filter(move |(_, &l)| Some(l) == self.chosen_cluster)
            .map(|(p, _)| *p)
    }
}

/// Everything the baseline saw for one record, for diagnostics.
#[derive(Debug, Clone)]
pub struct BaselineOutcome {
    pub prediction: Prediction,
    pub entities: Vec<PlaceEntity>,
    /// Pooled candidates of all entities, with the index of the entity each
    /// came from.
    pub candidates: Vec<(usize, GazetteerCandidate)>,
    pub cluster: Option<ClusterResult>,
    pub used_fallback: bool,
    /// The chosen cluster straddles the antimeridian, so its arithmetic
    /// centroid is not a meaningful location.
    pub spans_antimeridian: bool,
}

fn summary(entities: &[PlaceEntity], n_candidates: usize, note: &str) -> String {
    let names: Vec<&str> = entities.iter().map(|e| e.text.as_str()).collect();
    format!(
        "entities=[{}] candidates={n_candidates} {note}",
        names.join("|")
    )
}

/// Runs the gazetteer-matching pipeline on one record: place names are
/// extracted, looked up within the record's state and country, pooled,
/// clustered, and the centroid of the largest cluster is returned.
///
/// If every candidate is noise, the best-ranked candidate of the first
/// entity that has any is used instead. Lookup or NER errors produce a
/// failed prediction rather than an error.
pub fn georeference_by_gazetteer(
    record: &OccurrenceRecord,
    ner: &dyn PlaceNameRecognizer,
    gazetteer: &dyn Gazetteer,
    params: &BaselineParams,
) -> BaselineOutcome {
    let started = Instant::now();
    let method = Method::GazetteerBaseline {
        source: gazetteer.source().to_string(),
    };
    let mut outcome = BaselineOutcome {
        prediction: Prediction {
            record_id: record.id.clone(),
            method,
            parsed: ParsedCoordinates::failure(ParseFailure::NoCoordinates, ""),
            latency_ms: 0,
            attempts: 0,
            error: None,
        },
        entities: Vec::new(),
        candidates: Vec::new(),
        cluster: None,
        used_fallback: false,
        spans_antimeridian: false,
    };
    let result = resolve(record, ner, gazetteer, params, &mut outcome);
    outcome.prediction.latency_ms = started.elapsed().as_millis() as u64;
    match result {
        Ok((point, note)) => {
            let raw = summary(&outcome.entities, outcome.candidates.len(), &note);
            outcome.prediction.parsed = match point {
                Some(p) => ParsedCoordinates { result: Ok(p), raw },
                None => ParsedCoordinates::failure(ParseFailure::NoCoordinates, raw),
            };
        }
        Err(e) => {
            let raw = summary(&outcome.entities, outcome.candidates.len(), "error");
            outcome.prediction.parsed =
                ParsedCoordinates::failure(ParseFailure::NoCoordinates, raw);
            outcome.prediction.error = Some(e.to_string());
        }
    }
    outcome
}

fn resolve(
    record: &OccurrenceRecord,
    ner: &dyn PlaceNameRecognizer,
    gazetteer: &dyn Gazetteer,
    params: &BaselineParams,
    outcome: &mut BaselineOutcome,
) -> Result<(Option<GeoPoint>, String), GazetteerError> {
    params.dbscan.validate()?;
    if record.locality.trim().is_empty() {
        return Ok((None, "empty locality".into()));
    }
    outcome.entities = ner.extract(&record.locality)?;
    if outcome.entities.is_empty() {
        return Ok((None, "no place names".into()));
    }
    for (i, entity) in outcome.entities.iter().enumerate() {
        outcome.prediction.attempts += 1;
        let found = lookup_candidates(
            entity,
            &record.state_province,
            &record.country_code,
            gazetteer,
            params.max_rows,
        )?;
        outcome.candidates.extend(found.into_iter().map(|c| (i, c)));
    }
    if outcome.candidates.is_empty() {
        return Ok((None, "no candidates".into()));
    }
    let points: Vec<GeoPoint> = outcome.candidates.iter().map(|(_, c)| c.point).collect();
    let cluster = ClusterResult::compute(&points, &params.dbscan)?;
    let chosen = cluster.chosen_cluster;
    let centre = cluster.centroid;
    if chosen.is_some() {
        let members: Vec<GeoPoint> = cluster.members(&points).collect();
        outcome.spans_antimeridian = spans_antimeridian(&members);
    }
    outcome.cluster = Some(cluster);
    match (chosen, centre) {
        (Some(label), Some(point)) => {
            let size = outcome
                .cluster
                .as_ref()
                .map_or(0, |c| c.labels.iter().filter(|&&l| l == label).count());
            Ok((Some(point), format!("cluster={label} size={size}")))
        }
        _ => {
            // candidates are grouped by entity in entity order, and each
            // entity's list is in provider order
            let (entity, best) = outcome
                .candidates
                .iter()
                .min_by_key(|(e, c)| (*e, c.rank))
                .expect("candidates are non-empty");
            outcome.used_fallback = true;
            Ok((
                Some(best.point),
                format!("fallback entity={entity} rank={}", best.rank),
            ))
        }
    }
}

/// Runs the baseline over `records` with up to `parallelism` records in
/// flight. Outcomes are returned in input order.
pub fn run_baseline(
    records: &[OccurrenceRecord],
    ner: &dyn PlaceNameRecognizer,
    gazetteer: &dyn Gazetteer,
    params: &BaselineParams,
    parallelism: usize,
) -> Vec<BaselineOutcome> {
    let next = AtomicUsize::new(0);
    let results: Mutex<Vec<Option<BaselineOutcome>>> = Mutex::new(vec![None; records.len()]);
    let workers = parallelism.max(1).min(records.len().max(1));
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                let Some(record) = records.get(i) else { break };
                let outcome = georeference_by_gazetteer(record, ner, gazetteer, params);
                results.lock().unwrap_or_else(|e| e.into_inner())[i] = Some(outcome);
            });
        }
    });
    results
        .into_inner()
        .unwrap_or_else(|e| e.into_inner())
        .into_iter()
        .map(|o| o.expect("every record is processed"))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gazetteer::{DictionaryMatcher, LocalGazetteer};
    use crate::geo::haversine_distance;

    const FIXTURE: &str = "name,lat,lon,country_code,admin1,feature_class\n\
        Lake Wanaka,-44.45,169.13,NZ,Otago,H\n\
        Makarora,-44.232,169.23,NZ,Otago,P\n\
        Pipson Creek,-44.2,169.25,NZ,Otago,H\n\
        Wellington,-41.0,174.4,NZ,Wellington,P\n\
        Karori,-41.1,174.5,NZ,Wellington,P\n\
        Kelburn,-40.9,174.6,NZ,Wellington,P\n\
        Gisborne,-38.66,178.02,NZ,Wellington,P\n\
        Springfield,-43.3333,171.9333,NZ,Canterbury,P\n\
        Springfield,-43.30,171.95,NZ,Canterbury,L\n\
        Ohau,-44.23,169.85,NZ,Canterbury,H\n";

    fn setup() -> (DictionaryMatcher, LocalGazetteer) {
        let g = LocalGazetteer::from_reader(FIXTURE.as_bytes()).unwrap();
        (DictionaryMatcher::new(g.names(), 3), g)
    }

    fn record(locality: &str, state: &str) -> OccurrenceRecord {
        OccurrenceRecord {
            id: "r1".into(),
            locality: locality.into(),
            truth: GeoPoint::new(-44.0, 169.0).unwrap(),
            country_code: "NZ".into(),
            state_province: state.into(),
            source_dataset: "fixture".into(),
        }
    }

    #[test]
    fn wanaka_example_uses_densest_cluster() {
        let (ner, g) = setup();
        let rec = record(
            "10 km N of Lake Wanaka, 1 km N of Makarora. near Pipson Creek",
            "Otago",
        );
        let out = georeference_by_gazetteer(&rec, &ner, &g, &BaselineParams::default());
        assert_eq!(out.entities.len(), 3);
        assert_eq!(out.candidates.len(), 3);
        let cluster = out.cluster.as_ref().unwrap();
        assert_eq!(cluster.labels, vec![NOISE, 0, 0]);
        assert!(!out.used_fallback);
        let expected = GeoPoint::new((-44.232 + -44.2) / 2.0, (169.23 + 169.25) / 2.0).unwrap();
        let got = out.prediction.point().unwrap();
        assert!(haversine_distance(got, expected).km() < 1e-9);
        assert_eq!(out.prediction.status(), "ok");
        assert_eq!(out.prediction.attempts, 3);
    }

    #[test]
    fn three_point_cluster_beats_outlier() {
        let (ner, g) = setup();
        let rec = record("Wellington, Karori, Kelburn and Gisborne", "Wellington");
        let out = georeference_by_gazetteer(&rec, &ner, &g, &BaselineParams::default());
        let got = out.prediction.point().unwrap();
        assert!((got.lat() - -41.0).abs() < 1e-12);
        assert!((got.lon() - 174.5).abs() < 1e-12);
        assert_eq!(out.cluster.unwrap().labels, vec![0, 0, 0, NOISE]);
    }

    #[test]
    fn single_candidate_falls_back() {
        let (ner, g) = setup();
        let out = georeference_by_gazetteer(
            &record("Ohau, shore", "Canterbury"),
            &ner,
            &g,
            &BaselineParams::default(),
        );
        assert!(out.used_fallback);
        assert_eq!(
            out.prediction.point(),
            Some(GeoPoint::new(-44.23, 169.85).unwrap())
        );
    }

    #[test]
    fn no_entities_is_a_failure() {
        let (ner, g) = setup();
        let out = georeference_by_gazetteer(
            &record("on stone, damp gully", ""),
            &ner,
            &g,
            &BaselineParams::default(),
        );
        assert_eq!(
            out.prediction.parsed.result,
            Err(ParseFailure::NoCoordinates)
        );
        assert_eq!(out.prediction.status(), "no_coordinates");
        assert!(out.entities.is_empty());
    }

    #[test]
    fn state_filter_can_empty_the_pool() {
        let (ner, g) = setup();
        let out = georeference_by_gazetteer(
            &record("near Makarora", "Canterbury"),
            &ner,
            &g,
            &BaselineParams::default(),
        );
        assert_eq!(out.entities.len(), 1);
        assert!(out.candidates.is_empty());
        assert_eq!(out.prediction.status(), "no_coordinates");
    }

    #[test]
    fn ambiguous_pair_clusters() {
        let (ner, g) = setup();
        let out = georeference_by_gazetteer(
            &record("Springfield", "Canterbury"),
            &ner,
            &g,
            &BaselineParams::default(),
        );
        assert_eq!(out.candidates.len(), 2);
        assert!(!out.used_fallback);
        let p = out.prediction.point().unwrap();
        assert!((p.lat() - (-43.3333 + -43.30) / 2.0).abs() < 1e-12);
    }

    struct Down;
    impl Gazetteer for Down {
        fn source(&self) -> crate::gazetteer::GazetteerSource {
            crate::gazetteer::GazetteerSource::GeoNamesWeb
        }
        fn lookup(
            &self,
            _: &str,
            _: &str,
            _: &str,
            _: usize,
        ) -> Result<Vec<GazetteerCandidate>, GazetteerError> {
            Err(GazetteerError::QuotaExceeded("daily limit".into()))
        }
    }

    #[test]
    fn lookup_errors_become_failed_predictions() {
        let (ner, _) = setup();
        let out = georeference_by_gazetteer(
            &record("Makarora", "Otago"),
            &ner,
            &Down,
            &BaselineParams::default(),
        );
        assert_eq!(out.prediction.status(), "request_failed");
        assert!(out.prediction.error.as_deref().unwrap().contains("quota"));
    }

    #[test]
    fn tie_goes_to_lowest_label() {
        let pts = [
            GeoPoint::new(10.0, 10.0).unwrap(),
            GeoPoint::new(10.01, 10.0).unwrap(),
            GeoPoint::new(20.0, 20.0).unwrap(),
            GeoPoint::new(20.01, 20.0).unwrap(),
        ];
        let c = ClusterResult::compute(&pts, &DbscanParams::default()).unwrap();
        assert_eq!(c.chosen_cluster, Some(0));
        assert!((c.centroid.unwrap().lat() - 10.005).abs() < 1e-12);
    }

    #[test]
    fn parallel_run_keeps_order() {
        let (ner, g) = setup();
        let recs: Vec<OccurrenceRecord> = (0..40)
            .map(|i| {
                let mut r = record(
                    if i % 2 == 0 {
                        "Makarora, Pipson Creek"
                    } else {
                        "gully"
                    },
                    "Otago",
                );
                r.id = format!("r{i}");
                r
            })
            .collect();
        let out = run_baseline(&recs, &ner, &g, &BaselineParams::default(), 4);
        assert_eq!(out.len(), 40);
        for (i, o) in out.iter().enumerate() {
            assert_eq!(o.prediction.record_id, format!("r{i}"));
            assert_eq!(o.prediction.point().is_some(), i % 2 == 0);
        }
    }
}
