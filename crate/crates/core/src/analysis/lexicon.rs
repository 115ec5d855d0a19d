use std::collections::{BTreeSet, HashMap};
use std::sync::OnceLock;

use regex::Regex;
use thiserror::Error;

const BUILTIN: &str = include_str!("../../assets/lexicon.txt");

#[derive(Debug, Error)]
pub enum LexiconError {
    #[error("lexicon line {line}: term outside any [section]")]
    NoSection { line: usize },
    #[error("lexicon line {line}: unknown section [{name}]")]
    UnknownSection { line: usize, name: String },
    #[error("term `{term}` appears in both [{a}] and [{b}]")]
    Overlap { term: String, a: String, b: String },
    #[error("lexicon section [{0}] is empty")]
    EmptySection(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Category {
    /// Counted as a distance indicator.
    Proximity,
    Directional,
    Topological,
}

const SECTIONS: [&str; 8] = [
    "directional",
    "topological",
    "proximity",
    "compass",
    "units",
    "approximators",
    "altitude",
    "altitude_suffix",
];

/// Term lists for spatial-indicator matching, with their compiled patterns.
#[derive(Debug, Clone)]
pub struct IndicatorLexicon {
    terms: HashMap<&'static str, Vec<String>>,
    pub(super) phrases: Vec<(Category, Regex)>,
    /// Quantity, unit, and optional trailing direction.
    pub(super) distance: Regex,
    /// Quantity and unit only.
    pub(super) quantity_unit: Regex,
    pub(super) direction_ahead: Regex,
    pub(super) altitude_before: Regex,
    pub(super) altitude_after: Regex,
}

fn normalize(term: &str) -> String {
    term.split_whitespace()
        .map(str::to_lowercase)
        .collect::<Vec<_>>()
        .join(" ")
}

/// Regex source for one term: words joined by `\s+`, word boundaries only
/// where the term starts or ends with a word character.
fn term_pattern(term: &str) -> String {
    let (prefix, body) = match term.strip_prefix('*') {
        Some(rest) => (r"\w+", rest),
        None => ("", term),
    };
    let words: Vec<String> = body.split_whitespace().map(regex::escape).collect();
    let mut out = String::new();
    let starts_word = prefix.is_empty() && body.chars().next().is_some_and(char::is_alphanumeric);
    if starts_word || !prefix.is_empty() {
        out.push_str(r"\b");
    }
    out.push_str(prefix);
    out.push_str(&words.join(r"\s+"));
    if body.chars().last().is_some_and(char::is_alphanumeric) {
        out.push_str(r"\b");
    }
    out
}

fn alternation(terms: &[String]) -> String {
    let mut sorted: Vec<&String> = terms.iter().collect();
    // longest first so that the regex prefers `kms` over `km`
    sorted.sort_by(|a, b| b.chars().count().cmp(&a.chars().count()).then(a.cmp(b)));
    let parts: Vec<String> = sorted.iter().map(|t| term_pattern(t)).collect();
    format!("(?:{})", parts.join("|"))
}

fn compile(source: &str) -> Regex {
    Regex::new(&format!("(?i){source}")).expect("lexicon terms are escaped")
}

const QUANTITY: &str = r"(?:\b\d+\s+\d+\s*/\s*\d+|\b\d+\s*/\s*\d+|\b\d+(?:[.,]\d+)?(?:\s*(?:-|–|to|a)\s*\d+(?:[.,]\d+)?)?|[½¼¾])";

impl IndicatorLexicon {
    /// The shipped English and Spanish lexicon.
    pub fn builtin() -> Self {
        static CELL: OnceLock<IndicatorLexicon> = OnceLock::new();
        CELL.get_or_init(|| Self::parse(BUILTIN).expect("shipped lexicon is valid"))
            .clone()
    }

    /// Parses the sectioned lexicon format.
    pub fn parse(text: &str) -> Result<Self, LexiconError> {
        let mut terms: HashMap<&'static str, Vec<String>> = HashMap::new();
        Self::merge_into(&mut terms, text)?;
        Self::from_terms(terms)
    }

    /// A copy of this lexicon with the terms of `text` added.
    pub fn extended(&self, text: &str) -> Result<Self, LexiconError> {
        let mut terms = self.terms.clone();
        Self::merge_into(&mut terms, text)?;
        Self::from_terms(terms)
    }

    pub fn terms(&self, section: &str) -> &[String] {
        self.terms.get(section).map_or(&[], Vec::as_slice)
    }

    fn merge_into(
        terms: &mut HashMap<&'static str, Vec<String>>,
        text: &str,
    ) -> Result<(), LexiconError> {
        let mut section: Option<&'static str> = None;
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
                let name = name.trim();
                section = Some(
                    SECTIONS
                        .iter()
                        .copied()
                        .find(|s| *s == name)
                        .ok_or_else(|| LexiconError::UnknownSection {
                            line: i + 1,
                            name: name.to_string(),
                        })?,
                );
                continue;
            }
            let section = section.ok_or(LexiconError::NoSection { line: i + 1 })?;
            let term = normalize(line);
            let list = terms.entry(section).or_default();
            if !list.contains(&term) {
                list.push(term);
            }
        }
        Ok(())
    }

    fn from_terms(terms: HashMap<&'static str, Vec<String>>) -> Result<Self, LexiconError> {
        for required in ["compass", "units"] {
            if terms.get(required).map_or(true, Vec::is_empty) {
                return Err(LexiconError::EmptySection(required.into()));
            }
        }
        let get = |s: &str| terms.get(s).cloned().unwrap_or_default();
        let compass = get("compass");

        let mut directional = get("directional");
        for c in &compass {
            for suffix in [" of", ". of", " de", " del"] {
                let phrase = format!("{c}{suffix}");
                if !directional.contains(&phrase) {
                    directional.push(phrase);
                }
            }
        }
        let categories = [
            (Category::Proximity, "proximity", get("proximity")),
            (Category::Directional, "directional", directional),
            (Category::Topological, "topological", get("topological")),
        ];
        let mut seen: HashMap<String, &str> = HashMap::new();
        for (_, name, list) in &categories {
            for term in list.iter().collect::<BTreeSet<_>>() {
                if let Some(other) = seen.insert(term.clone(), name) {
                    return Err(LexiconError::Overlap {
                        term: term.clone(),
                        a: other.to_string(),
                        b: name.to_string(),
                    });
                }
            }
        }
        let phrases = categories
            .iter()
            .flat_map(|(cat, _, list)| list.iter().map(move |t| (*cat, compile(&term_pattern(t)))))
            .collect();

        let units = alternation(&get("units"));
        let direction = alternation(&compass);
        let approx = get("approximators");
        let approx_prefix = if approx.is_empty() {
            String::new()
        } else {
            format!(r"(?:{}\s*)?", alternation(&approx))
        };
        let quantity_unit = format!(r"{approx_prefix}{QUANTITY}\s*{units}");
        let distance =
            format!(r"{quantity_unit}(?:\.?\s*(?:al\s+)?{direction}\.?(?:\s+(?:of|de|del)\b)?)?");
        let altitude = get("altitude");
        let altitude_before = if altitude.is_empty() {
            "$^".to_string()
        } else {
            format!(r"{}\s*(?:c\.|ca\.?)?\s*$", alternation(&altitude))
        };
        let suffix = get("altitude_suffix");
        let altitude_after = if suffix.is_empty() {
            "$^".to_string()
        } else {
            format!(r"^\s*{}", alternation(&suffix))
        };
        Ok(Self {
            phrases,
            distance: compile(&distance),
            quantity_unit: compile(&quantity_unit),
            direction_ahead: compile(&format!(r"^\s*(?:al\s+)?{direction}")),
            altitude_before: compile(&altitude_before),
            altitude_after: compile(&altitude_after),
            terms,
        })
    }
}

impl Default for IndicatorLexicon {
    fn default() -> Self {
        Self::builtin()
    }
}
