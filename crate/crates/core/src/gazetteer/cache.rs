use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::sync::Mutex;

use log::warn;
use serde::{Deserialize, Serialize};

use super::{fold_name, Gazetteer, GazetteerCandidate, GazetteerError, GazetteerSource};

#[derive(Debug, Clone, Serialize, Deserialize)]
struct CacheLine {
    source: GazetteerSource,
    name: String,
    country: String,
    state: String,
    max_rows: usize,
    candidates: Vec<GazetteerCandidate>,
}

type Key = (GazetteerSource, String, String, String);

/// Wraps a gazetteer with a JSON-lines lookup cache keyed by
/// (source, name, country, state). Errors are never cached.
pub struct CachedGazetteer<G> {
    inner: G,
    entries: Mutex<HashMap<Key, CacheLine>>,
    file: Mutex<File>,
}

impl<G: Gazetteer> CachedGazetteer<G> {
    pub fn open(inner: G, path: &Path) -> std::io::Result<Self> {
        let mut entries = HashMap::new();
        if path.exists() {
            for line in BufReader::new(File::open(path)?).lines() {
                let line = line?;
                if line.trim().is_empty() {
                    continue;
                }
                match serde_json::from_str::<CacheLine>(&line) {
                    Ok(entry) => {
                        entries.insert(
                            key(entry.source, &entry.name, &entry.state, &entry.country),
                            entry,
                        );
                    }
                    Err(e) => warn!("{}: skipping lookup-cache line: {e}", path.display()),
                }
            }
        }
        let file = OpenOptions::new().create(true).append(true).open(path)?;
        Ok(Self {
            inner,
            entries: Mutex::new(entries),
            file: Mutex::new(file),
        })
    }

    pub fn inner(&self) -> &G {
        &self.inner
    }
}

fn key(source: GazetteerSource, name: &str, state: &str, country: &str) -> Key {
    (
        source,
        fold_name(name),
        fold_name(country),
        fold_name(state),
    )
}

impl<G: Gazetteer> Gazetteer for CachedGazetteer<G> {
    fn source(&self) -> GazetteerSource {
        self.inner.source()
    }

    fn lookup(
        &self,
        name: &str,
        state: &str,
        country: &str,
        max_rows: usize,
    ) -> Result<Vec<GazetteerCandidate>, GazetteerError> {
        let k = key(self.source(), name, state, country);
        if let Some(hit) = self
            .entries
            .lock()
            .unwrap_or_else(|e| e.into_inner())
            .get(&k)
        {
            // a stored result is complete if it was not truncated or is large enough
            if hit.max_rows >= max_rows || hit.candidates.len() < hit.max_rows {
                return Ok(hit.candidates.iter().take(max_rows).cloned().collect());
            }
        }
        let candidates = self.inner.lookup(name, state, country, max_rows)?;
        let line = CacheLine {
            source: self.source(),
            name: name.to_string(),
            country: country.to_string(),
            state: state.to_string(),
            max_rows,
            candidates: candidates.clone(),
        };
        match serde_json::to_vec(&line) {
            Ok(mut bytes) => {
                bytes.push(b'\n');
                let mut file = self.file.lock().unwrap_or_else(|e| e.into_inner());
                if let Err(e) = file.write_all(&bytes).and_then(|_| file.flush()) {
                    warn!("could not append to lookup cache: {e}");
                }
            }
            Err(e) => warn!("could not encode lookup-cache line: {e}"),
        }
        self.entries
            .lock()
            .unwrap_or_else(|e| e.into_inner())
            .insert(k, line);
        Ok(candidates)
    }
}
