use std::collections::HashSet;
use std::time::Duration;

use reqwest::blocking::Client;
use serde::{Deserialize, Serialize};

use super::{GazetteerError, PlaceEntity, PlaceNameRecognizer};

#[derive(Debug, Clone, Copy)]
struct Token {
    start: usize,
    end: usize,
}

fn is_word_char(c: char) -> bool {
    c.is_alphanumeric()
}

/// Word tokens of `chars`: alphanumeric runs, allowing a single internal `-`
/// or apostrophe between word characters.
fn tokenize(chars: &[char]) -> Vec<Token> {
    let mut tokens = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        if !is_word_char(chars[i]) {
            i += 1;
            continue;
        }
        let start = i;
        while i < chars.len() {
            if is_word_char(chars[i]) {
                i += 1;
            } else if matches!(chars[i], '-' | '\'' | '’')
                && i + 1 < chars.len()
                && is_word_char(chars[i + 1])
            {
                i += 2;
            } else {
                break;
            }
        }
        tokens.push(Token { start, end: i });
    }
    tokens
}

fn lower(chars: &[char]) -> String {
    chars.iter().flat_map(|c| c.to_lowercase()).collect()
}

/// Whether two adjacent tokens may belong to one multi-word name: only
/// whitespace between them, or `". "` after a short abbreviation such as
/// `Mt.` or `St.`.
fn joinable(chars: &[char], left: Token, right: Token) -> bool {
    let gap = &chars[left.end..right.start];
    if gap.is_empty() {
        return false;
    }
    if gap.iter().all(|c| c.is_whitespace()) {
        return true;
    }
    gap[0] == '.'
        && gap.len() > 1
        && gap[1..].iter().all(|c| c.is_whitespace())
        && left.end - left.start <= 3
}

/// Longest-match, case-insensitive lookup of known names in running text.
#[derive(Debug, Clone)]
pub struct DictionaryMatcher {
    names: HashSet<String>,
    max_tokens: usize,
}

impl DictionaryMatcher {
    /// Names shorter than `min_chars` characters or made only of digits are
    /// skipped; they match too much ordinary text.
    pub fn new<I, S>(names: I, min_chars: usize) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut set = HashSet::new();
        let mut max_tokens = 0;
        for name in names {
            let chars: Vec<char> = name.as_ref().chars().collect();
            let tokens = tokenize(&chars);
            if tokens.is_empty() {
                continue;
            }
            let key = tokens
                .iter()
                .map(|t| lower(&chars[t.start..t.end]))
                .collect::<Vec<_>>()
                .join(" ");
            if key.chars().count() < min_chars || key.chars().all(|c| c.is_numeric() || c == ' ') {
                continue;
            }
            max_tokens = max_tokens.max(tokens.len());
            set.insert(key);
        }
        Self {
            names: set,
            max_tokens,
        }
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }
}

impl PlaceNameRecognizer for DictionaryMatcher {
    fn extract(&self, locality: &str) -> Result<Vec<PlaceEntity>, GazetteerError> {
        let chars: Vec<char> = locality.chars().collect();
        let tokens = tokenize(&chars);
        let words: Vec<String> = tokens
            .iter()
            .map(|t| lower(&chars[t.start..t.end]))
            .collect();
        let mut entities = Vec::new();
        let mut i = 0;
        while i < tokens.len() {
            // extend the candidate run while tokens stay joinable
            let mut run = 1;
            while run < self.max_tokens
                && i + run < tokens.len()
                && joinable(&chars, tokens[i + run - 1], tokens[i + run])
            {
                run += 1;
            }
            let found = (1..=run)
                .rev()
                .find(|&k| self.names.contains(&words[i..i + k].join(" ")));
            match found {
                Some(k) => {
                    let (start, end) = (tokens[i].start, tokens[i + k - 1].end);
                    entities.push(PlaceEntity {
                        text: chars[start..end].iter().collect(),
                        start,
                        end,
                    });
                    i += k;
                }
                None => i += 1,
            }
        }
        Ok(entities)
    }
}

/// NER over HTTP: `POST <url>` with `{"text": ...}`, answered by
/// `{"entities": [{"start": s, "end": e}, ...]}` in character offsets.
pub struct RemoteNer {
    client: Client,
    url: String,
}

#[derive(Serialize)]
struct NerRequest<'a> {
    text: &'a str,
}

#[derive(Deserialize)]
struct NerResponse {
    entities: Vec<NerSpan>,
}

#[derive(Deserialize)]
struct NerSpan {
    start: usize,
    end: usize,
}

impl RemoteNer {
    pub fn new(url: impl Into<String>, timeout: Duration) -> Result<Self, GazetteerError> {
        let client = Client::builder()
            .timeout(timeout)
            .build()
            .map_err(|e| GazetteerError::NerBackendUnavailable(e.to_string()))?;
        Ok(Self {
            client,
            url: url.into(),
        })
    }
}

impl PlaceNameRecognizer for RemoteNer {
    fn extract(&self, locality: &str) -> Result<Vec<PlaceEntity>, GazetteerError> {
        let unavailable = |e: String| GazetteerError::NerBackendUnavailable(e);
        let response = self
            .client
            .post(&self.url)
            .json(&NerRequest { text: locality })
            .send()
            .map_err(|e| unavailable(e.to_string()))?;
        if !response.status().is_success() {
            return Err(unavailable(format!("HTTP {}", response.status())));
        }
        let body: NerResponse = response.json().map_err(|e| unavailable(e.to_string()))?;
        let mut entities: Vec<PlaceEntity> = body
            .entities
            .iter()
            .filter_map(|s| PlaceEntity::from_span(locality, s.start, s.end))
            .collect();
        entities.sort_by_key(|e| (e.start, e.end));
        Ok(entities)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn texts(m: &DictionaryMatcher, s: &str) -> Vec<String> {
        m.extract(s).unwrap().into_iter().map(|e| e.text).collect()
    }

    #[test]
    fn finds_names_in_order() {
        let m = DictionaryMatcher::new(["Lake Wanaka", "Makarora", "Pipson Creek", "Wanaka"], 3);
        assert_eq!(
            texts(
                &m,
                "10 km N of Lake Wanaka, 1 km N of Makarora. near Pipson Creek"
            ),
            ["Lake Wanaka", "Makarora", "Pipson Creek"]
        );
        assert!(texts(&m, "on stone, damp gully").is_empty());
    }

    #[test]
    fn prefers_longest_match() {
        let m = DictionaryMatcher::new(["Plymouth", "New Plymouth"], 3);
        let found = m.extract("5 km S of new plymouth").unwrap();
        assert_eq!(found.len(), 1);
        assert_eq!(found[0].text, "new plymouth");
        assert_eq!((found[0].start, found[0].end), (10, 22));
        assert_eq!(texts(&m, "Plymouth Road"), ["Plymouth"]);
    }

    #[test]
    fn respects_word_boundaries_and_punctuation() {
        let m = DictionaryMatcher::new(["Nelson", "Mt Cook", "Otira Gorge"], 3);
        assert!(texts(&m, "Nelsonia Street").is_empty());
        assert_eq!(texts(&m, "below Mt. Cook village"), ["Mt. Cook"]);
        // a comma breaks a multi-word name
        assert!(texts(&m, "Otira, Gorge Road").is_empty());
    }

    #[test]
    fn short_and_numeric_names_ignored() {
        let m = DictionaryMatcher::new(["N", "12", "Ohau"], 3);
        assert_eq!(m.len(), 1);
        assert_eq!(texts(&m, "2 km N of Ohau"), ["Ohau"]);
    }

    #[test]
    fn spans_survive_multibyte_text() {
        let m = DictionaryMatcher::new(["Río Lerma"], 3);
        let found = m.extract("orilla del río lerma, Jalisco").unwrap();
        assert_eq!(found[0].text, "río lerma");
        let check = PlaceEntity::from_span(
            "orilla del río lerma, Jalisco",
            found[0].start,
            found[0].end,
        );
        assert_eq!(check.as_ref(), Some(&found[0]));
    }
}
