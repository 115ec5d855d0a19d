//! GeoNames and Nominatim search clients.

use std::time::Duration;

use reqwest::blocking::Client;
use reqwest::StatusCode;
use serde::Deserialize;

use super::{Gazetteer, GazetteerCandidate, GazetteerError, GazetteerSource};
use crate::geo::GeoPoint;
use crate::net::RateLimiter;

fn http_client(timeout: Duration, user_agent: Option<&str>) -> Result<Client, GazetteerError> {
    let mut builder = Client::builder().timeout(timeout);
    if let Some(ua) = user_agent {
        builder = builder.user_agent(ua.to_string());
    }
    builder
        .build()
        .map_err(|e| GazetteerError::Unavailable(e.to_string()))
}

fn coordinate(v: &serde_json::Value) -> Option<f64> {
    match v {
        serde_json::Value::String(s) => s.trim().parse().ok(),
        other => other.as_f64(),
    }
}

/// `GET /searchJSON` on a GeoNames server.
pub struct GeoNamesClient {
    client: Client,
    base_url: String,
    username: String,
}

#[derive(Deserialize)]
struct GeoNamesResponse {
    #[serde(default)]
    geonames: Vec<GeoNamesItem>,
    status: Option<GeoNamesStatus>,
}

#[derive(Deserialize)]
struct GeoNamesItem {
    #[serde(default)]
    name: String,
    lat: serde_json::Value,
    lng: serde_json::Value,
}

#[derive(Deserialize)]
struct GeoNamesStatus {
    #[serde(default)]
    message: String,
    #[serde(default)]
    value: i64,
}

impl GeoNamesClient {
    pub fn new(base_url: &str, username: &str, timeout: Duration) -> Result<Self, GazetteerError> {
        Ok(Self {
            client: http_client(timeout, None)?,
            base_url: base_url.trim_end_matches('/').to_string(),
            username: username.to_string(),
        })
    }
}

impl Gazetteer for GeoNamesClient {
    fn source(&self) -> GazetteerSource {
        GazetteerSource::GeoNamesWeb
    }

    fn lookup(
        &self,
        name: &str,
        state: &str,
        country: &str,
        max_rows: usize,
    ) -> Result<Vec<GazetteerCandidate>, GazetteerError> {
        let max_rows = max_rows.to_string();
        let mut query = vec![
            ("q", name),
            ("maxRows", max_rows.as_str()),
            ("username", self.username.as_str()),
        ];
        if !country.is_empty() {
            query.push(("country", country));
        }
        if !state.is_empty() {
            query.push(("adminName1", state));
        }
        let response = self
            .client
            .get(format!("{}/searchJSON", self.base_url))
            .query(&query)
            .send()
            .map_err(|e| GazetteerError::Unavailable(e.to_string()))?;
        match response.status() {
            StatusCode::TOO_MANY_REQUESTS => {
                return Err(GazetteerError::QuotaExceeded("HTTP 429".into()))
            }
            s if !s.is_success() => return Err(GazetteerError::Unavailable(format!("HTTP {s}"))),
            _ => {}
        }
        let body: GeoNamesResponse = response
            .json()
            .map_err(|e| GazetteerError::Unavailable(format!("bad response: {e}")))?;
        if let Some(status) = body.status {
            // 18, 19, 20: daily, hourly, weekly credit limits
            return Err(if matches!(status.value, 18..=20) {
                GazetteerError::QuotaExceeded(status.message)
            } else {
                GazetteerError::Unavailable(status.message)
            });
        }
        Ok(body
            .geonames
            .iter()
            .filter_map(|item| {
                let point = GeoPoint::new(coordinate(&item.lat)?, coordinate(&item.lng)?).ok()?;
                Some((item.name.clone(), point))
            })
            .enumerate()
            .map(|(rank, (name, point))| GazetteerCandidate {
                name,
                point,
                source: GazetteerSource::GeoNamesWeb,
                rank,
            })
            .collect())
    }
}

/// `GET /search` on a Nominatim server, at most one request per second.
///
/// Nominatim has no administrative-area filter, so `state` is not sent.
pub struct NominatimClient {
    client: Client,
    base_url: String,
    limiter: RateLimiter,
}

#[derive(Deserialize)]
struct NominatimItem {
    lat: serde_json::Value,
    lon: serde_json::Value,
    #[serde(default)]
    name: String,
    #[serde(default)]
    display_name: String,
}

impl NominatimClient {
    /// `requests_per_second` is capped at 1.
    pub fn new(
        base_url: &str,
        user_agent: &str,
        requests_per_second: f64,
        timeout: Duration,
    ) -> Result<Self, GazetteerError> {
        if user_agent.trim().is_empty() {
            return Err(GazetteerError::InvalidParams(
                "Nominatim requires a User-Agent".into(),
            ));
        }
        let limiter = RateLimiter::per_second(requests_per_second.min(1.0))
            .ok_or_else(|| GazetteerError::InvalidParams("rate must be > 0".into()))?;
        Ok(Self {
            client: http_client(timeout, Some(user_agent))?,
            base_url: base_url.trim_end_matches('/').to_string(),
            limiter,
        })
    }
}

impl Gazetteer for NominatimClient {
    fn source(&self) -> GazetteerSource {
        GazetteerSource::NominatimWeb
    }

    fn lookup(
        &self,
        name: &str,
        _state: &str,
        country: &str,
        max_rows: usize,
    ) -> Result<Vec<GazetteerCandidate>, GazetteerError> {
        self.limiter.acquire();
        let limit = max_rows.to_string();
        let country = country.to_lowercase();
        let mut query = vec![("q", name), ("format", "jsonv2"), ("limit", limit.as_str())];
        if !country.is_empty() {
            query.push(("countrycodes", country.as_str()));
        }
        let response = self
            .client
            .get(format!("{}/search", self.base_url))
            .query(&query)
            .send()
            .map_err(|e| GazetteerError::Unavailable(e.to_string()))?;
        match response.status() {
            StatusCode::TOO_MANY_REQUESTS => {
                return Err(GazetteerError::QuotaExceeded("HTTP 429".into()))
            }
            s if !s.is_success() => return Err(GazetteerError::Unavailable(format!("HTTP {s}"))),
            _ => {}
        }
        let items: Vec<NominatimItem> = response
            .json()
            .map_err(|e| GazetteerError::Unavailable(format!("bad response: {e}")))?;
        Ok(items
            .iter()
            .filter_map(|item| {
                let point = GeoPoint::new(coordinate(&item.lat)?, coordinate(&item.lon)?).ok()?;
                let label = if item.name.is_empty() {
                    &item.display_name
                } else {
                    &item.name
                };
                Some((label.clone(), point))
            })
            .take(max_rows)
            .enumerate()
            .map(|(rank, (name, point))| GazetteerCandidate {
                name,
                point,
                source: GazetteerSource::NominatimWeb,
                rank,
            })
            .collect())
    }
}
