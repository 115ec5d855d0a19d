use std::collections::HashMap;
use std::io::{BufRead, BufReader, Read};

use serde::Deserialize;

use super::{Completion, CompletionBackend, LlmError};

/// Offline backend answering from a prompt → response table.
#[derive(Debug, Clone, Default)]
pub struct MockBackend {
    model: String,
    canned: HashMap<String, String>,
    fallback: Option<String>,
}

#[derive(Deserialize)]
struct CannedLine {
    prompt: String,
    response: String,
}

impl MockBackend {
    pub fn new(model: impl Into<String>) -> Self {
        Self {
            model: model.into(),
            ..Self::default()
        }
    }

    pub fn with_response(mut self, prompt: impl Into<String>, response: impl Into<String>) -> Self {
        self.canned.insert(prompt.into(), response.into());
        self
    }

    /// Answer given for prompts missing from the table; without one such
    /// prompts fail with [`LlmError::NoCannedResponse`].
    pub fn with_fallback(mut self, response: impl Into<String>) -> Self {
        self.fallback = Some(response.into());
        self
    }

    /// Loads `{"prompt": ..., "response": ...}` JSON lines.
    pub fn load<R: Read>(model: impl Into<String>, input: R) -> Result<Self, LlmError> {
        let mut backend = Self::new(model);
        for (i, line) in BufReader::new(input).lines().enumerate() {
            let line = line.map_err(|e| LlmError::Config(e.to_string()))?;
            if line.trim().is_empty() {
                continue;
            }
            let canned: CannedLine = serde_json::from_str(&line)
                .map_err(|e| LlmError::Config(format!("mock responses line {}: {e}", i + 1)))?;
            backend.canned.insert(canned.prompt, canned.response);
        }
        Ok(backend)
    }

    pub fn len(&self) -> usize {
        self.canned.len()
    }

    pub fn is_empty(&self) -> bool {
        self.canned.is_empty()
    }
}

impl CompletionBackend for MockBackend {
    fn model_name(&self) -> &str {
        &self.model
    }

    fn complete(&self, prompt: &str) -> Result<Completion, LlmError> {
        self.canned
            .get(prompt)
            .or(self.fallback.as_ref())
            .map(|text| Completion {
                text: text.clone(),
                attempts: 1,
            })
            .ok_or(LlmError::NoCannedResponse)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lookup_and_fallback() {
        let m = MockBackend::new("mock").with_response("p", "Coordinates: 1.0, 2.0");
        assert_eq!(m.complete("p").unwrap().text, "Coordinates: 1.0, 2.0");
        assert_eq!(m.complete("q"), Err(LlmError::NoCannedResponse));
        let m = m.with_fallback("no idea");
        assert_eq!(m.complete("q").unwrap().text, "no idea");
    }

    #[test]
    fn loads_jsonl() {
        let text = "{\"prompt\":\"a\\nb\",\"response\":\"Coordinates: 1, 2\"}\n\n";
        let m = MockBackend::load("mock", text.as_bytes()).unwrap();
        assert_eq!(m.len(), 1);
        assert_eq!(m.complete("a\nb").unwrap().attempts, 1);
        assert!(MockBackend::load("mock", "not json".as_bytes()).is_err());
    }
}
