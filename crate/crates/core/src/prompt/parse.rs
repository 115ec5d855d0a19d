//! Extraction of a decimal-degree pair from free-text model output.
//!
//! Accepted shapes, highest priority first; within a shape the last
//! occurrence in the text wins:
//!
//! 1. `Coordinates: <lat>, <lon>`
//! 2. `Latitude: <x>` and `Longitude: <y>` labels, in either order
//! 3. a parenthesized pair `(<lat>, <lon>)`, or a bare comma-separated pair
//!    of decimals whose first value could be a latitude and second a
//!    longitude
//!
//! Hemisphere letters after a value (`41.2° S`) set its sign. Degree-minute-
//! second notation is masked out before matching and never parsed.

use std::fmt;
use std::sync::OnceLock;

use regex::{Captures, Regex};
use serde::{Deserialize, Serialize};

use crate::geo::GeoPoint;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParseFailure {
    NoCoordinates,
    OutOfRange,
    Ambiguous,
}

impl fmt::Display for ParseFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::NoCoordinates => "no_coordinates",
            Self::OutOfRange => "out_of_range",
            Self::Ambiguous => "ambiguous",
        })
    }
}

/// A parsed point or the reason there is none, plus the original response.
#[derive(Debug, Clone, PartialEq)]
pub struct ParsedCoordinates {
    pub result: Result<GeoPoint, ParseFailure>,
    pub raw: String,
}

impl ParsedCoordinates {
    pub fn failure(reason: ParseFailure, raw: impl Into<String>) -> Self {
        Self {
            result: Err(reason),
            raw: raw.into(),
        }
    }

    pub fn point(&self) -> Option<GeoPoint> {
        self.result.ok()
    }
}

const NUM: &str = r"([-+\u{2212}\u{2013}]?\d{1,3}(?:\.\d+)?)";
const DEC: &str = r"([-+\u{2212}\u{2013}]?\d{1,3}\.\d+)";
const HEMI_NS: &str = r"(?:\s*°)?(?:\s*([NSns])\b)?";
const HEMI_EW: &str = r"(?:\s*°)?(?:\s*([EWew])\b)?";
const HEMI_ANY: &str = r"(?:\s*°)?(?:\s*([NSEWnsew])\b)?";

struct Patterns {
    dms: Regex,
    labeled_pair: Regex,
    latitude: Regex,
    longitude: Regex,
    paren_pair: Regex,
    bare_pair: Regex,
}

fn patterns() -> &'static Patterns {
    static P: OnceLock<Patterns> = OnceLock::new();
    P.get_or_init(|| Patterns {
        dms: Regex::new(
            r#"\d{1,3}\s*°\s*\d{1,2}(?:\.\d+)?\s*['′’](?:\s*\d{1,2}(?:\.\d+)?\s*(?:"|″|''|”))?(?:\s*[NSEWnsew]\b)?"#,
        )
        .unwrap(),
        labeled_pair: Regex::new(&format!(
            r"(?i:coordinates?)\**\s*[:=]?\**\s*\(?\s*{NUM}{HEMI_ANY}\s*[,;]\s*{NUM}{HEMI_ANY}"
        ))
        .unwrap(),
        latitude: Regex::new(&format!(r"(?i:\blat(?:itude)?\b)\**\s*[:=]?\**\s*{NUM}{HEMI_NS}"))
            .unwrap(),
        longitude: Regex::new(&format!(
            r"(?i:\b(?:lon|lng|long|longitude)\b)\**\s*[:=]?\**\s*{NUM}{HEMI_EW}"
        ))
        .unwrap(),
        paren_pair: Regex::new(&format!(r"\(\s*{NUM}{HEMI_ANY}\s*,\s*{NUM}{HEMI_ANY}\s*\)"))
            .unwrap(),
        bare_pair: Regex::new(&format!(r"{DEC}{HEMI_ANY}\s*,\s*{DEC}{HEMI_ANY}")).unwrap(),
    })
}

/// A signed value with the hemisphere letter that followed it, if any.
#[derive(Debug, Clone, Copy)]
struct Reading {
    value: f64,
    hemisphere: Option<char>,
}

impl Reading {
    fn from_caps(caps: &Captures<'_>, num: usize, hemi: usize) -> Option<Self> {
        let text = caps
            .get(num)?
            .as_str()
            .replace(['\u{2212}', '\u{2013}'], "-");
        let value: f64 = text.parse().ok()?;
        let hemisphere = caps
            .get(hemi)
            .and_then(|m| m.as_str().chars().next())
            .map(|c| c.to_ascii_uppercase());
        let value = match hemisphere {
            Some('S' | 'W') => -value.abs(),
            _ => value,
        };
        Some(Self { value, hemisphere })
    }

    fn is_east_west(&self) -> bool {
        matches!(self.hemisphere, Some('E' | 'W'))
    }

    fn is_north_south(&self) -> bool {
        matches!(self.hemisphere, Some('N' | 'S'))
    }
}

/// Orders a pair into (lat, lon), swapping when the hemisphere letters say
/// the longitude came first.
fn orient(first: Reading, second: Reading) -> (f64, f64) {
    if first.is_east_west()
        && !second.is_east_west()
        && (second.is_north_south() || second.hemisphere.is_none())
    {
        (second.value, first.value)
    } else {
        (first.value, second.value)
    }
}

fn validated(lat: f64, lon: f64, raw: &str) -> ParsedCoordinates {
    match GeoPoint::new(lat, lon) {
        Ok(point) => ParsedCoordinates {
            result: Ok(point),
            raw: raw.to_string(),
        },
        Err(_) => ParsedCoordinates::failure(ParseFailure::OutOfRange, raw),
    }
}

fn pair_from(caps: &Captures<'_>) -> Option<(f64, f64)> {
    let first = Reading::from_caps(caps, 1, 2)?;
    let second = Reading::from_caps(caps, 3, 4)?;
    Some(orient(first, second))
}

fn mask_dms(text: &str, dms: &Regex) -> String {
    // same-length replacement keeps byte offsets meaningful
    dms.replace_all(text, |c: &Captures<'_>| " ".repeat(c[0].len()))
        .into_owned()
}

/// Never fails; the failure reason is part of the returned value.
pub fn parse_coordinates(response: &str) -> ParsedCoordinates {
    let p = patterns();
    let text = mask_dms(response, &p.dms);

    if let Some((lat, lon)) = p
        .labeled_pair
        .captures_iter(&text)
        .filter_map(|c| pair_from(&c))
        .last()
    {
        return validated(lat, lon, response);
    }

    let lat = p
        .latitude
        .captures_iter(&text)
        .filter_map(|c| Reading::from_caps(&c, 1, 2))
        .last();
    let lon = p
        .longitude
        .captures_iter(&text)
        .filter_map(|c| Reading::from_caps(&c, 1, 2))
        .last();
    match (lat, lon) {
        (Some(lat), Some(lon)) => return validated(lat.value, lon.value, response),
        (Some(_), None) | (None, Some(_)) => {
            return ParsedCoordinates::failure(ParseFailure::Ambiguous, response)
        }
        (None, None) => {}
    }

    let parenthesized = p
        .paren_pair
        .captures_iter(&text)
        .filter_map(|c| Some((c.get(0)?.start(), pair_from(&c)?)));
    let bare = p
        .bare_pair
        .captures_iter(&text)
        .filter_map(|c| Some((c.get(0)?.start(), pair_from(&c)?)))
        .filter(|(_, (lat, lon))| lat.abs() <= 90.0 && lon.abs() <= 180.0);
    match parenthesized.chain(bare).max_by_key(|(start, _)| *start) {
        Some((_, (lat, lon))) => validated(lat, lon, response),
        None => ParsedCoordinates::failure(ParseFailure::NoCoordinates, response),
    }
}
