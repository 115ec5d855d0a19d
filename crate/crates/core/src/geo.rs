//! Validated coordinates and great-circle geometry.
//!
//! All angles are decimal degrees, all distances kilometers. Distances are
//! computed on a sphere of radius [`EARTH_RADIUS_KM`].

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// IUGG mean Earth radius in kilometers.
pub const EARTH_RADIUS_KM: f64 = 6371.0088;

/// Largest possible great-circle distance (half the circumference).
pub const MAX_DISTANCE_KM: f64 = std::f64::consts::PI * EARTH_RADIUS_KM;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    Latitude,
    Longitude,
}

impl fmt::Display for Axis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Axis::Latitude => f.write_str("latitude"),
            Axis::Longitude => f.write_str("longitude"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeoError {
    #[error("{axis} {value} out of range")]
    OutOfRange { axis: Axis, value: f64 },
    #[error("{axis} is not finite")]
    NotFinite { axis: Axis },
    #[error("cannot average an empty point set")]
    EmptyInput,
}

/// A latitude/longitude pair that has passed range and finiteness checks.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GeoPoint {
    lat: f64,
    lon: f64,
}

impl GeoPoint {
    /// Validates without clamping or wrapping.
    pub fn new(lat: f64, lon: f64) -> Result<Self, GeoError> {
        if !lat.is_finite() {
            return Err(GeoError::NotFinite {
                axis: Axis::Latitude,
            });
        }
        if !lon.is_finite() {
            return Err(GeoError::NotFinite {
                axis: Axis::Longitude,
            });
        }
        if !(-90.0..=90.0).contains(&lat) {
            return Err(GeoError::OutOfRange {
                axis: Axis::Latitude,
                value: lat,
            });
        }
        if !(-180.0..=180.0).contains(&lon) {
            return Err(GeoError::OutOfRange {
                axis: Axis::Longitude,
                value: lon,
            });
        }
        Ok(Self { lat, lon })
    }

    pub fn lat(&self) -> f64 {
        self.lat
    }

    pub fn lon(&self) -> f64 {
        self.lon
    }
}

impl<'de> Deserialize<'de> for GeoPoint {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Raw {
            lat: f64,
            lon: f64,
        }
        let raw = Raw::deserialize(deserializer)?;
        GeoPoint::new(raw.lat, raw.lon).map_err(serde::de::Error::custom)
    }
}

impl fmt::Display for GeoPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.lat, self.lon)
    }
}

/// Free-function form of [`GeoPoint::new`].
pub fn validate_point(lat: f64, lon: f64) -> Result<GeoPoint, GeoError> {
    GeoPoint::new(lat, lon)
}

/// Non-negative great-circle distance in kilometers.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(transparent)]
pub struct DistanceKm(f64);

impl DistanceKm {
    /// Returns `None` for negative, non-finite, or beyond-antipodal values.
    pub fn new(km: f64) -> Option<Self> {
        // a hair of slack so results of `haversine_distance` always fit
        (km.is_finite() && km >= 0.0 && km <= MAX_DISTANCE_KM * (1.0 + 1e-12)).then_some(Self(km))
    }

    pub fn km(self) -> f64 {
        self.0
    }
}

impl fmt::Display for DistanceKm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:.2}km", self.0)
    }
}

/// Haversine distance, atan2 form.
pub fn haversine_distance(a: GeoPoint, b: GeoPoint) -> DistanceKm {
    let phi1 = a.lat.to_radians();
    let phi2 = b.lat.to_radians();
    let dphi = phi2 - phi1;
    let dlambda = (b.lon - a.lon).to_radians();

    let h = (dphi / 2.0).sin().powi(2) + phi1.cos() * phi2.cos() * (dlambda / 2.0).sin().powi(2);
    let h = h.clamp(0.0, 1.0);
    let c = 2.0 * h.sqrt().atan2((1.0 - h).sqrt());
    DistanceKm((EARTH_RADIUS_KM * c).min(MAX_DISTANCE_KM))
}

/// Arithmetic mean of latitudes and of longitudes.
///
/// Longitudes are averaged naively, so a set straddling the antimeridian
/// averages to somewhere near 0°; see [`spans_antimeridian`].
pub fn centroid(points: &[GeoPoint]) -> Result<GeoPoint, GeoError> {
    if points.is_empty() {
        return Err(GeoError::EmptyInput);
    }
    let n = points.len() as f64;
    let lat = points.iter().map(|p| p.lat).sum::<f64>() / n;
    let lon = points.iter().map(|p| p.lon).sum::<f64>() / n;
    // mean of in-range values stays in range up to rounding
    GeoPoint::new(lat.clamp(-90.0, 90.0), lon.clamp(-180.0, 180.0))
}

/// True when the longitudes of `points` spread over more than 180°, the case
/// where the naive centroid lands on the wrong side of the globe.
pub fn spans_antimeridian(points: &[GeoPoint]) -> bool {
    let (min, max) = points
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| {
            (lo.min(p.lon), hi.max(p.lon))
        });
    max - min > 180.0
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn p(lat: f64, lon: f64) -> GeoPoint {
        GeoPoint::new(lat, lon).unwrap()
    }

    #[test]
    fn validation() {
        assert!(validate_point(-41.2866, 174.7756).is_ok());
        assert_eq!(
            validate_point(95.0, 10.0),
            Err(GeoError::OutOfRange {
                axis: Axis::Latitude,
                value: 95.0
            })
        );
        assert_eq!(
            validate_point(0.0, f64::NAN),
            Err(GeoError::NotFinite {
                axis: Axis::Longitude
            })
        );
        assert!(matches!(
            validate_point(0.0, -180.5),
            Err(GeoError::OutOfRange {
                axis: Axis::Longitude,
                ..
            })
        ));
        assert!(validate_point(90.0, -180.0).is_ok());
        assert!(validate_point(f64::INFINITY, 0.0).is_err());
    }

    #[test]
    fn deserialize_rejects_bad_points() {
        assert!(serde_json::from_str::<GeoPoint>(r#"{"lat":91,"lon":0}"#).is_err());
        let ok: GeoPoint = serde_json::from_str(r#"{"lat":-41.5,"lon":174}"#).unwrap();
        assert_eq!(ok, p(-41.5, 174.0));
    }

    #[test]
    fn known_distances() {
        assert_eq!(haversine_distance(p(1.0, 2.0), p(1.0, 2.0)).km(), 0.0);
        let antipodal = haversine_distance(p(0.0, 0.0), p(0.0, 180.0)).km();
        assert!((antipodal - 20015.114442035923).abs() < 1e-6);
        // independent asin-form evaluation: 493.4960263490579 km
        let wlg_akl = haversine_distance(p(-41.2866, 174.7756), p(-36.8485, 174.7633)).km();
        assert!((wlg_akl - 493.4960263490579).abs() / 493.4960263490579 < 1e-3);
        assert!((wlg_akl - 493.4960263490579).abs() < 1e-9);
    }

    #[test]
    fn centroid_examples() {
        assert_eq!(centroid(&[p(0.0, 0.0)]).unwrap(), p(0.0, 0.0));
        assert_eq!(
            centroid(&[p(10.0, 20.0), p(30.0, 40.0)]).unwrap(),
            p(20.0, 30.0)
        );
        let c = centroid(&[p(-41.0, 174.0), p(-42.0, 175.0), p(-43.0, 176.0)]).unwrap();
        assert!((c.lat() + 42.0).abs() < 1e-12 && (c.lon() - 175.0).abs() < 1e-12);
        assert_eq!(centroid(&[]), Err(GeoError::EmptyInput));
    }

    #[test]
    fn antimeridian_flag() {
        assert!(spans_antimeridian(&[p(-44.0, 179.5), p(-44.0, -179.5)]));
        assert!(!spans_antimeridian(&[p(-44.0, 170.0), p(-44.0, 176.5)]));
    }

    fn point() -> impl Strategy<Value = GeoPoint> {
        (-90.0f64..=90.0, -180.0f64..=180.0).prop_map(|(a, b)| p(a, b))
    }

    proptest! {
        #[test]
        fn symmetric_and_bounded(a in point(), b in point()) {
            let ab = haversine_distance(a, b).km();
            prop_assert_eq!(ab, haversine_distance(b, a).km());
            prop_assert!((0.0..=MAX_DISTANCE_KM).contains(&ab));
        }

        #[test]
        fn triangle_inequality(a in point(), b in point(), c in point()) {
            let ac = haversine_distance(a, c).km();
            let abc = haversine_distance(a, b).km() + haversine_distance(b, c).km();
            prop_assert!(ac <= abc + 1e-6);
        }

        #[test]
        fn zero_iff_identical(a in point(), b in point()) {
            prop_assert_eq!(haversine_distance(a, a).km(), 0.0);
            if a != b {
                prop_assert!(haversine_distance(a, b).km() > 0.0 || (a.lat().abs() == 90.0 && a.lat() == b.lat()));
            }
        }

        #[test]
        fn centroid_within_bounds(pts in prop::collection::vec(point(), 1..20)) {
            let c = centroid(&pts).unwrap();
            let (lo, hi) = pts.iter().fold((f64::MAX, f64::MIN), |(l, h), q| (l.min(q.lat()), h.max(q.lat())));
            prop_assert!(c.lat() >= lo - 1e-9 && c.lat() <= hi + 1e-9);
            let (lo, hi) = pts.iter().fold((f64::MAX, f64::MIN), |(l, h), q| (l.min(q.lon()), h.max(q.lon())));
            prop_assert!(c.lon() >= lo - 1e-9 && c.lon() <= hi + 1e-9);
        }
    }
}
