use std::io::Write;
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Instant;

use log::{info, warn};

use super::{cache_key, CacheEntry, CompletionBackend, LlmError, ResponseCache};
use crate::dataset::OccurrenceRecord;
use crate::prediction::{write_log, Method, Prediction};
use crate::prompt::{
    parse_coordinates, render_prompt, ParseFailure, ParsedCoordinates, PromptPattern, RegionContext,
};

pub struct BatchOptions<'a> {
    /// Maximum number of requests in flight.
    pub parallelism: usize,
    pub cache: Option<&'a ResponseCache>,
    /// Region used for every record instead of the record's own state and
    /// country.
    pub region_override: Option<RegionContext>,
}

impl Default for BatchOptions<'_> {
    fn default() -> Self {
        Self {
            parallelism: 4,
            cache: None,
            region_override: None,
        }
    }
}

struct Shared<'a> {
    next: AtomicUsize,
    abort: AtomicBool,
    any_success: AtomicBool,
    fatal: Mutex<Option<LlmError>>,
    results: Mutex<Vec<Option<Prediction>>>,
    records: &'a [OccurrenceRecord],
}

fn failed(record_id: &str, method: &Method, attempts: u32, error: String) -> Prediction {
    Prediction {
        record_id: record_id.to_string(),
        method: method.clone(),
        parsed: ParsedCoordinates::failure(ParseFailure::NoCoordinates, ""),
        latency_ms: 0,
        attempts,
        error: Some(error),
    }
}

fn predict_one(
    record: &OccurrenceRecord,
    pattern: PromptPattern,
    backend: &dyn CompletionBackend,
    options: &BatchOptions<'_>,
    method: &Method,
) -> Result<Prediction, LlmError> {
    let region = options
        .region_override
        .clone()
        .unwrap_or_else(|| RegionContext::for_record(record));
    let prompt = match render_prompt(pattern, record, &region) {
        Ok(p) => p.text,
        Err(e) => return Ok(failed(&record.id, method, 0, e.to_string())),
    };
    let key = cache_key(backend.model_name(), pattern, &prompt);
    if let Some(hit) = options.cache.and_then(|c| c.get(&key)) {
        return Ok(Prediction {
            record_id: record.id.clone(),
            method: method.clone(),
            parsed: parse_coordinates(&hit.response),
            latency_ms: hit.latency_ms,
            attempts: hit.attempts,
            error: None,
        });
    }
    let started = Instant::now();
    match backend.complete(&prompt) {
        Ok(done) => {
            let latency_ms = started.elapsed().as_millis() as u64;
            if let Some(cache) = options.cache {
                if let Err(e) = cache.insert(CacheEntry {
                    key,
                    model: backend.model_name().to_string(),
                    pattern,
                    response: done.text.clone(),
                    latency_ms,
                    attempts: done.attempts,
                }) {
                    warn!("could not append to response cache: {e}");
                }
            }
            Ok(Prediction {
                record_id: record.id.clone(),
                method: method.clone(),
                parsed: parse_coordinates(&done.text),
                latency_ms,
                attempts: done.attempts,
                error: None,
            })
        }
        Err(e) => Err(e),
    }
}

fn worker(
    shared: &Shared<'_>,
    pattern: PromptPattern,
    backend: &dyn CompletionBackend,
    options: &BatchOptions<'_>,
    method: &Method,
) {
    loop {
        if shared.abort.load(Ordering::SeqCst) {
            return;
        }
        let i = shared.next.fetch_add(1, Ordering::SeqCst);
        let Some(record) = shared.records.get(i) else {
            return;
        };
        let prediction = match predict_one(record, pattern, backend, options, method) {
            Ok(p) => {
                if p.error.is_none() {
                    shared.any_success.store(true, Ordering::SeqCst);
                }
                p
            }
            Err(e) => {
                let startup_unreachable = matches!(e, LlmError::Unreachable { .. })
                    && !shared.any_success.load(Ordering::SeqCst);
                if e.is_fatal() || startup_unreachable {
                    shared.abort.store(true, Ordering::SeqCst);
                    shared
                        .fatal
                        .lock()
                        .unwrap_or_else(|p| p.into_inner())
                        .get_or_insert(e);
                    return;
                }
                warn!("record {}: {e}", record.id);
                failed(&record.id, method, e.attempts(), e.to_string())
            }
        };
        shared.results.lock().unwrap_or_else(|p| p.into_inner())[i] = Some(prediction);
    }
}

/// One prediction per record, in input order.
///
/// Per-record problems become failure-valued predictions. The batch as a
/// whole fails only on authentication or configuration errors, or when the
/// endpoint is unreachable before any request has succeeded. When `log` is
/// given, every prediction is written to it before returning.
pub fn batch_predict(
    records: &[OccurrenceRecord],
    pattern: PromptPattern,
    backend: &dyn CompletionBackend,
    options: &BatchOptions<'_>,
    log: Option<&mut dyn Write>,
) -> Result<Vec<Prediction>, LlmError> {
    if options.parallelism == 0 {
        return Err(LlmError::Config("parallelism must be >= 1".into()));
    }
    let method = Method::Llm {
        pattern,
        model: backend.model_name().to_string(),
    };
    let shared = Shared {
        next: AtomicUsize::new(0),
        abort: AtomicBool::new(false),
        any_success: AtomicBool::new(false),
        fatal: Mutex::new(None),
        results: Mutex::new(vec![None; records.len()]),
        records,
    };
    let workers = options.parallelism.min(records.len()).max(1);
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| worker(&shared, pattern, backend, options, &method));
        }
    });
    if let Some(e) = shared.fatal.into_inner().unwrap_or_else(|p| p.into_inner()) {
        return Err(e);
    }
    let predictions: Vec<Prediction> = shared
        .results
        .into_inner()
        .unwrap_or_else(|p| p.into_inner())
        .into_iter()
        .map(|p| p.expect("every index is processed when no worker aborted"))
        .collect();
    let ok = predictions.iter().filter(|p| p.point().is_some()).count();
    info!("{} predictions, {ok} with coordinates", predictions.len());
    if let Some(out) = log {
        write_log(out, &predictions).map_err(|e| LlmError::Log(e.to_string()))?;
    }
    Ok(predictions)
}
