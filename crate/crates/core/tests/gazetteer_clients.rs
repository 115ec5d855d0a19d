mod common;

use std::time::{Duration, Instant};

use common::{serve, Reply};
use georef_core::gazetteer::{
    Gazetteer, GazetteerError, GazetteerSource, GeoNamesClient, NominatimClient,
    PlaceNameRecognizer, RemoteNer,
};

const TIMEOUT: Duration = Duration::from_secs(5);

#[test]
fn geonames_query_and_parse() {
    let body = r#"{"totalResultsCount":2,"geonames":[
        {"name":"Springfield","lat":"-43.3333","lng":"171.9333","countryCode":"NZ"},
        {"name":"Springfield","lat":"-43.30","lng":"171.95","countryCode":"NZ"}]}"#;
    let server = serve(vec![Reply::json(body)]);
    let client = GeoNamesClient::new(&server.base_url, "demo", TIMEOUT).unwrap();
    let found = client.lookup("Springfield", "Canterbury", "NZ", 5).unwrap();
    assert_eq!(found.len(), 2);
    assert_eq!(found[0].point.lat(), -43.3333);
    assert_eq!(found[1].rank, 1);
    assert_eq!(found[0].source, GazetteerSource::GeoNamesWeb);

    let req = &server.requests.lock().unwrap()[0];
    assert!(req.request_line.starts_with("GET /searchJSON?"));
    for part in [
        "q=Springfield",
        "maxRows=5",
        "username=demo",
        "country=NZ",
        "adminName1=Canterbury",
    ] {
        assert!(
            req.request_line.contains(part),
            "{} lacks {part}",
            req.request_line
        );
    }
}

#[test]
fn geonames_quota_and_outage() {
    let quota =
        r#"{"status":{"message":"the daily limit of 20000 credits has been exceeded","value":18}}"#;
    let server = serve(vec![
        Reply::json(quota),
        Reply::Status(429, "{}".into()),
        Reply::Status(503, "down".into()),
    ]);
    let client = GeoNamesClient::new(&server.base_url, "demo", TIMEOUT).unwrap();
    assert!(matches!(
        client.lookup("X", "", "NZ", 5),
        Err(GazetteerError::QuotaExceeded(_))
    ));
    assert!(matches!(
        client.lookup("X", "", "NZ", 5),
        Err(GazetteerError::QuotaExceeded(_))
    ));
    assert!(matches!(
        client.lookup("X", "", "NZ", 5),
        Err(GazetteerError::Unavailable(_))
    ));
}

#[test]
fn geonames_unknown_name_is_empty() {
    let server = serve(vec![Reply::json(
        r#"{"totalResultsCount":0,"geonames":[]}"#,
    )]);
    let client = GeoNamesClient::new(&server.base_url, "demo", TIMEOUT).unwrap();
    assert!(client.lookup("Nowhere", "", "NZ", 5).unwrap().is_empty());
}

#[test]
fn nominatim_sends_user_agent_and_is_rate_limited() {
    let body =
        r#"[{"lat":"-44.232","lon":"169.23","name":"Makarora","display_name":"Makarora, Otago"}]"#;
    let server = serve(vec![Reply::json(body), Reply::json("[]")]);
    let client = NominatimClient::new(&server.base_url, "georef-test/0.1", 50.0, TIMEOUT).unwrap();
    let started = Instant::now();
    let found = client.lookup("Makarora", "Otago", "NZ", 3).unwrap();
    assert_eq!(found.len(), 1);
    assert_eq!(found[0].name, "Makarora");
    assert!(client.lookup("Nowhere", "", "NZ", 3).unwrap().is_empty());
    // the requested 50/s is capped to 1/s
    assert!(started.elapsed() >= Duration::from_millis(950));

    let reqs = server.requests.lock().unwrap();
    assert_eq!(reqs[0].header("user-agent"), Some("georef-test/0.1"));
    let line = &reqs[0].request_line;
    assert!(line.starts_with("GET /search?"));
    for part in ["q=Makarora", "format=jsonv2", "limit=3", "countrycodes=nz"] {
        assert!(line.contains(part), "{line} lacks {part}");
    }
    assert!(!line.contains("Otago"));
}

#[test]
fn nominatim_requires_user_agent() {
    assert!(NominatimClient::new("http://127.0.0.1:9", " ", 1.0, TIMEOUT).is_err());
}

#[test]
fn remote_ner_spans() {
    let server = serve(vec![
        Reply::json(
            r#"{"entities":[{"start":34,"end":42},{"start":11,"end":22},{"start":50,"end":99}]}"#,
        ),
        Reply::Status(500, "boom".into()),
    ]);
    let ner = RemoteNer::new(format!("{}/ner", server.base_url), TIMEOUT).unwrap();
    let text = "10 km N of Lake Wanaka, 1 km N of Makarora";
    let found = ner.extract(text).unwrap();
    let names: Vec<&str> = found.iter().map(|e| e.text.as_str()).collect();
    assert_eq!(names, ["Lake Wanaka", "Makarora"]);
    assert!(server.requests.lock().unwrap()[0]
        .body
        .contains("Lake Wanaka"));
    assert!(matches!(
        ner.extract(text),
        Err(GazetteerError::NerBackendUnavailable(_))
    ));
}
