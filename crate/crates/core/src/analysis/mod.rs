//! Text analyses of locality descriptions: spatial-indicator counts,
//! place-name counts, and removal of quantitative distances.

mod lexicon;

use std::io::Write;
use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::dataset::OccurrenceRecord;
use crate::eval::locality_length;
use crate::gazetteer::{GazetteerError, PlaceNameRecognizer};

pub use lexicon::{Category, IndicatorLexicon, LexiconError};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IndicatorCounts {
    pub directional: usize,
    /// Quantitative distances plus qualitative proximity terms.
    pub distance: usize,
    pub topological: usize,
    pub place_names: usize,
}

impl IndicatorCounts {
    pub fn spatial_total(&self) -> usize {
        self.directional + self.distance + self.topological
    }
}

/// A matched indicator, in byte offsets of the input.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IndicatorMatch {
    pub kind: IndicatorKind,
    pub range: Range<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IndicatorKind {
    QuantitativeDistance,
    Proximity,
    Directional,
    Topological,
}

fn overlaps(a: &Range<usize>, b: &Range<usize>) -> bool {
    a.start < b.end && b.start < a.end
}

/// Quantity+unit matches that are not elevations.
fn distance_matches(text: &str, lex: &IndicatorLexicon, with_direction: bool) -> Vec<Range<usize>> {
    let re = if with_direction {
        &lex.distance
    } else {
        &lex.quantity_unit
    };
    re.find_iter(text)
        .map(|m| m.range())
        .filter(|r| {
            !lex.altitude_before.is_match(&text[..r.start])
                && !lex.altitude_after.is_match(&text[r.end..])
        })
        .collect()
}

/// All indicators in `locality`. Quantitative distances (with any direction
/// that follows them) are found first; the remaining text is then matched
/// against the proximity, directional, and topological terms, keeping the
/// longest match wherever two overlap.
pub fn find_indicators(locality: &str, lex: &IndicatorLexicon) -> Vec<IndicatorMatch> {
    let mut taken: Vec<IndicatorMatch> = distance_matches(locality, lex, true)
        .into_iter()
        .map(|range| IndicatorMatch {
            kind: IndicatorKind::QuantitativeDistance,
            range,
        })
        .collect();
    let mut candidates: Vec<(Category, Range<usize>)> = Vec::new();
    for (cat, re) in &lex.phrases {
        for m in re.find_iter(locality) {
            let r = m.range();
            if !taken.iter().any(|t| overlaps(&t.range, &r)) {
                candidates.push((*cat, r));
            }
        }
    }
    candidates.sort_by(|(ca, a), (cb, b)| {
        let (la, lb) = (
            locality[a.clone()].chars().count(),
            locality[b.clone()].chars().count(),
        );
        lb.cmp(&la).then(a.start.cmp(&b.start)).then(ca.cmp(cb))
    });
    for (cat, range) in candidates {
        if taken.iter().any(|t| overlaps(&t.range, &range)) {
            continue;
        }
        let kind = match cat {
            Category::Proximity => IndicatorKind::Proximity,
            Category::Directional => IndicatorKind::Directional,
            Category::Topological => IndicatorKind::Topological,
        };
        taken.push(IndicatorMatch { kind, range });
    }
    taken.sort_by_key(|m| m.range.start);
    taken
}

/// Counts directional, distance, and topological indicators. Place names
/// are left at zero; see [`count_place_names`].
pub fn classify_spatial_indicators(locality: &str, lex: &IndicatorLexicon) -> IndicatorCounts {
    let mut counts = IndicatorCounts::default();
    for m in find_indicators(locality, lex) {
        match m.kind {
            IndicatorKind::QuantitativeDistance | IndicatorKind::Proximity => counts.distance += 1,
            IndicatorKind::Directional => counts.directional += 1,
            IndicatorKind::Topological => counts.topological += 1,
        }
    }
    counts
}

/// Number of place-name mentions; repeated names count once per mention.
pub fn count_place_names(
    locality: &str,
    ner: &dyn PlaceNameRecognizer,
) -> Result<usize, GazetteerError> {
    Ok(ner.extract(locality)?.len())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StrippedLocality {
    pub text: String,
    /// Removed quantity+unit substrings, in order of removal.
    pub removed: Vec<String>,
}

fn remove_quantities(text: &str, lex: &IndicatorLexicon) -> Option<(String, Vec<String>)> {
    let mut ranges = distance_matches(text, lex, false);
    if ranges.is_empty() {
        return None;
    }
    for r in &mut ranges {
        // an abbreviation point right before a direction goes too: "1 mi. N of"
        let rest = &text[r.end..];
        if rest.starts_with('.') && lex.direction_ahead.is_match(&rest[1..]) {
            r.end += 1;
        }
    }
    let mut out = String::with_capacity(text.len());
    let mut removed = Vec::new();
    let mut at = 0;
    for r in ranges {
        out.push_str(&text[at..r.start]);
        out.push(' ');
        removed.push(text[r.clone()].trim().to_string());
        at = r.end;
    }
    out.push_str(&text[at..]);
    Some((tidy(&out), removed))
}

/// Collapses whitespace and repairs punctuation left behind by removals.
fn tidy(text: &str) -> String {
    let mut s = text.split_whitespace().collect::<Vec<_>>().join(" ");
    loop {
        let before = s.clone();
        s = s
            .replace("( ", "(")
            .replace(" )", ")")
            .replace("()", "")
            .replace("[]", "");
        for p in [",", ";", ".", ":", ")"] {
            s = s.replace(&format!(" {p}"), p);
        }
        s = s.replace(",,", ",").replace(", ,", ",");
        s = s.split_whitespace().collect::<Vec<_>>().join(" ");
        if s == before {
            break;
        }
    }
    s.trim_start_matches([',', ';', ':', '.', ' '])
        .trim_end_matches([',', ';', ':', ' '])
        .to_string()
}

/// Deletes quantitative distance values (and a leading approximator such as
/// "ca.") but keeps the direction and everything else: "6 km SSE of
/// Westport" becomes "SSE of Westport". Qualitative terms such as "near"
/// are kept. Text without a quantitative distance is returned unchanged.
pub fn strip_distance_values(locality: &str, lex: &IndicatorLexicon) -> StrippedLocality {
    let mut text = locality.to_string();
    let mut removed = Vec::new();
    // repeat until nothing matches so the result is a fixed point
    while let Some((next, mut gone)) = remove_quantities(&text, lex) {
        removed.append(&mut gone);
        if next == text {
            break;
        }
        text = next;
    }
    StrippedLocality { text, removed }
}

/// One line of the analysis CSV.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnalysisRow {
    pub id: String,
    pub length_chars: usize,
    pub n_place_names: usize,
    pub n_directional: usize,
    pub n_distance: usize,
    pub n_topological: usize,
}

pub fn analyze_record(
    record: &OccurrenceRecord,
    lex: &IndicatorLexicon,
    ner: &dyn PlaceNameRecognizer,
) -> Result<AnalysisRow, GazetteerError> {
    let counts = classify_spatial_indicators(&record.locality, lex);
    Ok(AnalysisRow {
        id: record.id.clone(),
        length_chars: locality_length(&record.locality),
        n_place_names: count_place_names(&record.locality, ner)?,
        n_directional: counts.directional,
        n_distance: counts.distance,
        n_topological: counts.topological,
    })
}

pub fn write_analysis_csv<W: Write>(out: W, rows: &[AnalysisRow]) -> Result<(), csv::Error> {
    let mut writer = csv::Writer::from_writer(out);
    for row in rows {
        writer.serialize(row)?;
    }
    writer.flush()?;
    Ok(())
}

/// A record whose locality was changed by [`strip_distance_values`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PerturbationDiff {
    pub id: String,
    pub original: String,
    pub perturbed: String,
    pub removed: Vec<String>,
}

/// Strips distance values from every record. Records whose locality would
/// become empty are kept unchanged.
pub fn perturb_records(
    records: &[OccurrenceRecord],
    lex: &IndicatorLexicon,
) -> (Vec<OccurrenceRecord>, Vec<PerturbationDiff>) {
    let mut out = Vec::with_capacity(records.len());
    let mut diffs = Vec::new();
    for record in records {
        let stripped = strip_distance_values(&record.locality, lex);
        let mut changed = record.clone();
        if !stripped.removed.is_empty() && !stripped.text.trim().is_empty() {
            diffs.push(PerturbationDiff {
                id: record.id.clone(),
                original: record.locality.clone(),
                perturbed: stripped.text.clone(),
                removed: stripped.removed,
            });
            changed.locality = stripped.text;
        }
        out.push(changed);
    }
    (out, diffs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gazetteer::DictionaryMatcher;
    use proptest::prelude::*;

    fn lex() -> IndicatorLexicon {
        IndicatorLexicon::builtin()
    }

    fn strip(s: &str) -> String {
        strip_distance_values(s, &lex()).text
    }

    #[test]
    fn wanaka_sentence_has_three_distance_indicators() {
        let text = "10 km north of Lake Wanaka, 1 km north of Makarora, near Pipson Creek";
        let c = classify_spatial_indicators(text, &lex());
        assert_eq!(c.distance, 3);
        assert_eq!(c.spatial_total(), 3);
        let kinds: Vec<IndicatorKind> = find_indicators(text, &lex())
            .iter()
            .map(|m| m.kind)
            .collect();
        assert_eq!(
            kinds,
            [
                IndicatorKind::QuantitativeDistance,
                IndicatorKind::QuantitativeDistance,
                IndicatorKind::Proximity
            ]
        );
        let ner = DictionaryMatcher::new(["Lake Wanaka", "Makarora", "Pipson Creek"], 3);
        assert_eq!(count_place_names(text, &ner).unwrap(), 3);
    }

    #[test]
    fn on_stone_is_topological() {
        let c = classify_spatial_indicators("on stone", &lex());
        assert_eq!((c.topological, c.directional, c.distance), (1, 0, 0));
    }

    #[test]
    fn longest_match_and_directional() {
        let c =
            classify_spatial_indicators("north side of the lake, at the base of cliffs", &lex());
        assert_eq!((c.directional, c.topological, c.distance), (1, 1, 0));
        let c = classify_spatial_indicators("SSE of Westport, north-facing slope", &lex());
        assert_eq!(c.directional, 2);
        let c =
            classify_spatial_indicators("Cerro X, 5 km al N de Tepic, cerca de la presa", &lex());
        assert_eq!((c.distance, c.directional), (2, 0));
    }

    #[test]
    fn elevations_are_not_distances() {
        let c = classify_spatial_indicators("Mt Arthur, alt. 1500 m, on rock", &lex());
        assert_eq!(c.distance, 0);
        assert_eq!(
            strip("Mt Arthur, 1500 m a.s.l."),
            "Mt Arthur, 1500 m a.s.l."
        );
    }

    #[test]
    fn strip_examples() {
        assert_eq!(strip("30 miles S of Auckland City"), "S of Auckland City");
        assert_eq!(strip("6 km SSE of Westport"), "SSE of Westport");
        let near = strip_distance_values("near Gulf Harbour", &lex());
        assert_eq!(near.text, "near Gulf Harbour");
        assert!(near.removed.is_empty());
        assert_eq!(
            strip("Otira Gorge, ca. 2.5 km N of Arthur's Pass"),
            "Otira Gorge, N of Arthur's Pass"
        );
        assert_eq!(strip("Road end (5 km) by stream"), "Road end by stream");
        assert_eq!(strip("1 mi. N of Clinton"), "N of Clinton");
        assert_eq!(
            strip("3-4 km E of Ohakune, 200 m from road"),
            "E of Ohakune, from road"
        );
        assert_eq!(strip("a 12 km al NE de Tepic"), "a al NE de Tepic");
        let twice = strip_distance_values("5 5 km km N of X", &lex());
        assert_eq!(twice.text, "N of X");
        assert_eq!(twice.removed.len(), 2);
    }

    #[test]
    fn strip_keeps_whitespace_when_nothing_removed() {
        let text = "near  Gulf   Harbour ";
        assert_eq!(strip(text), text);
    }

    #[test]
    fn analysis_csv_header() {
        let rec = OccurrenceRecord {
            id: "7".into(),
            locality: "2 km N of Makarora, on rock".into(),
            truth: crate::geo::GeoPoint::new(-44.0, 169.0).unwrap(),
            country_code: "NZ".into(),
            state_province: "Otago".into(),
            source_dataset: String::new(),
        };
        let ner = DictionaryMatcher::new(["Makarora"], 3);
        let row = analyze_record(&rec, &lex(), &ner).unwrap();
        let mut buf = Vec::new();
        write_analysis_csv(&mut buf, &[row]).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "id,length_chars,n_place_names,n_directional,n_distance,n_topological\n7,27,1,0,1,1\n"
        );
        let (perturbed, diffs) = perturb_records(&[rec], &lex());
        assert_eq!(perturbed[0].locality, "N of Makarora, on rock");
        assert_eq!(diffs[0].removed, ["2 km"]);
    }

    #[test]
    fn duplicate_mentions_count_twice() {
        let ner = DictionaryMatcher::new(["Makarora"], 3);
        assert_eq!(
            count_place_names("Makarora, 2 km S of Makarora", &ner).unwrap(),
            2
        );
        assert_eq!(count_place_names("damp gully", &ner).unwrap(), 0);
    }

    fn locality() -> impl Strategy<Value = String> {
        let piece = prop_oneof![
            Just("10 km".to_string()),
            Just("ca. 3 mi".to_string()),
            Just("N of".to_string()),
            Just("near".to_string()),
            Just("on".to_string()),
            Just("Makarora".to_string()),
            Just("(5 km)".to_string()),
            Just(",".to_string()),
            Just("along the river".to_string()),
            Just("2.5".to_string()),
            Just("km".to_string()),
            Just("SSE".to_string()),
        ];
        prop::collection::vec(piece, 1..10).prop_map(|v| v.join(" "))
    }

    proptest! {
        #[test]
        fn strip_is_idempotent(text in locality()) {
            let once = strip(&text);
            prop_assert_eq!(strip(&once), once);
        }

        #[test]
        fn case_does_not_change_counts(text in locality()) {
            let l = lex();
            prop_assert_eq!(
                classify_spatial_indicators(&text, &l),
                classify_spatial_indicators(&text.to_uppercase(), &l)
            );
            prop_assert_eq!(
                classify_spatial_indicators(&text, &l),
                classify_spatial_indicators(&text.to_lowercase(), &l)
            );
        }

        #[test]
        fn stripping_never_adds_indicators(text in locality()) {
            let l = lex();
            let before = classify_spatial_indicators(&text, &l).spatial_total();
            let after = classify_spatial_indicators(&strip(&text), &l).spatial_total();
            prop_assert!(after <= before);
        }

        #[test]
        fn strip_keeps_place_names(text in locality()) {
            let ner = DictionaryMatcher::new(["Makarora"], 3);
            let before = count_place_names(&text, &ner).unwrap();
            prop_assert_eq!(count_place_names(&strip(&text), &ner).unwrap(), before);
        }
    }
}
