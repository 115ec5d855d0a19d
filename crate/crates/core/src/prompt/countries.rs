use std::collections::HashMap;
use std::sync::OnceLock;

static TABLE: &str = include_str!("../../assets/country_names.tsv");

fn table() -> &'static HashMap<&'static str, &'static str> {
    static MAP: OnceLock<HashMap<&'static str, &'static str>> = OnceLock::new();
    MAP.get_or_init(|| {
        TABLE
            .lines()
            .filter(|l| !l.starts_with('#'))
            .filter_map(|l| l.split_once('\t'))
            .collect()
    })
}

/// English short name for an ISO 3166-1 alpha-2 code (case-insensitive).
pub fn country_name(code: &str) -> Option<&'static str> {
    table().get(code.to_ascii_uppercase().as_str()).copied()
}
