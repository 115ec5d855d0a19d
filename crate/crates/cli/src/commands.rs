use std::collections::HashMap;
use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::Serialize;

use georef_core::analysis::{
    analyze_record, perturb_records, write_analysis_csv, AnalysisRow, IndicatorLexicon,
};
use georef_core::dataset::{
    self, kfold, mix_training_sets, parse_occurrences, preprocess, read_records, split,
    write_records, DatasetError, MixSource, OccurrenceRecord,
};
use georef_core::eval::{
    length_error_correlation, render_report, summarize, summarize_by_length, truths_from_records,
    CorrelationResult, EvalError, EvaluationSummary, PValueMethod,
};
use georef_core::gazetteer::{
    run_baseline, BaselineParams, CachedGazetteer, DictionaryMatcher, Gazetteer, GazetteerError,
    GeoNamesClient, LocalGazetteer, NominatimClient, PlaceNameRecognizer, RemoteNer,
};
use georef_core::llm::{
    batch_predict, BatchOptions, CompletionBackend, HttpBackend, LlmError, MockBackend,
    ResponseCache,
};
use georef_core::prediction::{read_log, write_log, Prediction};
use georef_core::prompt::{export_finetune_dataset, ExportMode, PromptPattern, RegionContext};
use georef_core::rng::{derive_seed, SeededShuffler};

use crate::config::{BackendKind, GazetteerKind, NerKind, RunConfig};
use crate::error::CliError;

/// Seed stream for `predict --sample`, kept apart from split shuffles.
const SAMPLE_STREAM: u64 = 0x5a4d;

fn dataset_err(e: DatasetError) -> CliError {
    CliError::config(e.to_string())
}

fn open(path: &Path) -> Result<BufReader<File>, CliError> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| CliError::config(format!("{}: {e}", path.display())))
}

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent)?;
    }
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| CliError::config(format!("{}: {e}", path.display())))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut text =
        serde_json::to_string_pretty(value).map_err(|e| CliError::config(e.to_string()))?;
    text.push('\n');
    let mut out = create(path)?;
    out.write_all(text.as_bytes())?;
    out.flush()?;
    Ok(())
}

fn load_records(path: &Path) -> Result<Vec<OccurrenceRecord>, CliError> {
    read_records(open(path)?).map_err(|e| CliError::config(format!("{}: {e}", path.display())))
}

fn save_records(path: &Path, records: &[OccurrenceRecord]) -> Result<(), CliError> {
    let mut out = create(path)?;
    write_records(&mut out, records)?;
    out.flush()?;
    Ok(())
}

fn file_name(path: &Path) -> String {
    path.file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default()
}

/// Shared state for one subcommand invocation.
pub struct Context {
    pub config: RunConfig,
}

impl Context {
    pub fn new(config: RunConfig) -> Self {
        Self { config }
    }

    fn out(&self, name: &str) -> PathBuf {
        self.config.output_dir.join(name)
    }

    /// Stores the resolved configuration beside the outputs.
    pub fn save_config(&self, subcommand: &str) -> Result<(), CliError> {
        fs::create_dir_all(&self.config.output_dir)?;
        fs::write(
            self.out(&format!("{subcommand}.config.toml")),
            self.config.to_toml(),
        )?;
        Ok(())
    }

    /// `explicit`, else `dataset.records`, else the `ingest` output.
    fn records_path(&self, explicit: Option<PathBuf>) -> PathBuf {
        explicit
            .or_else(|| self.config.dataset.records.clone())
            .unwrap_or_else(|| self.out("records.jsonl"))
    }

    fn require_records(&self, path: &Path) -> Result<Vec<OccurrenceRecord>, CliError> {
        let records = load_records(path)?;
        if records.is_empty() {
            return Err(CliError::empty(format!(
                "{} holds no records",
                path.display()
            )));
        }
        Ok(records)
    }

    fn lexicon(&self) -> Result<IndicatorLexicon, CliError> {
        let builtin = IndicatorLexicon::builtin();
        match &self.config.analysis.lexicon {
            None => Ok(builtin),
            Some(path) => {
                let text = fs::read_to_string(path)
                    .map_err(|e| CliError::config(format!("{}: {e}", path.display())))?;
                builtin
                    .extended(&text)
                    .map_err(|e| CliError::config(format!("{}: {e}", path.display())))
            }
        }
    }

    fn local_gazetteer(&self) -> Result<LocalGazetteer, CliError> {
        let path = self
            .config
            .gazetteer
            .local_file
            .as_ref()
            .ok_or_else(|| CliError::config("gazetteer.local_file is not set"))?;
        LocalGazetteer::from_reader(open(path)?)
            .map_err(|e| CliError::config(format!("{}: {e}", path.display())))
    }

    fn recognizer(&self) -> Result<Box<dyn PlaceNameRecognizer>, CliError> {
        let g = &self.config.gazetteer;
        match g.ner {
            NerKind::Dictionary => {
                let local = self.local_gazetteer()?;
                Ok(Box::new(DictionaryMatcher::new(
                    local.names(),
                    g.min_name_chars,
                )))
            }
            NerKind::Remote => {
                let url = g
                    .ner_url
                    .clone()
                    .ok_or_else(|| CliError::config("gazetteer.ner_url is not set"))?;
                let ner = RemoteNer::new(url, Duration::from_secs_f64(g.timeout_secs))
                    .map_err(|e| CliError::config(e.to_string()))?;
                Ok(Box::new(ner))
            }
        }
    }
}

#[derive(Serialize)]
struct RowErrorLine {
    row: u64,
    error: String,
}

pub fn ingest(ctx: &Context, input: Option<PathBuf>) -> Result<(), CliError> {
    let cfg = &ctx.config;
    let input = input
        .or_else(|| cfg.dataset.input.clone())
        .ok_or_else(|| CliError::config("no input file: set dataset.input or pass --input"))?;
    let source = if cfg.dataset.source_dataset.is_empty() {
        file_name(&input)
    } else {
        cfg.dataset.source_dataset.clone()
    };
    let outcome =
        parse_occurrences(open(&input)?, &cfg.dataset.columns, &source).map_err(dataset_err)?;
    let parsed = outcome.records.len();
    let records = preprocess(outcome.records);
    let duplicates = parsed - records.len();
    let dropped = outcome.errors.len() + duplicates;
    eprintln!("{} records, {dropped} dropped", records.len());

    ctx.save_config("ingest")?;
    let mut errors = csv::Writer::from_writer(create(&ctx.out("ingest_errors.csv"))?);
    for e in &outcome.errors {
        errors
            .serialize(RowErrorLine {
                row: e.row,
                error: e.kind.to_string(),
            })
            .map_err(|e| CliError::config(e.to_string()))?;
    }
    errors.flush()?;
    if records.is_empty() {
        return Err(CliError::empty(format!(
            "no valid records in {}; nothing written",
            input.display()
        )));
    }
    save_records(&ctx.out("records.jsonl"), &records)?;
    log::info!("{duplicates} duplicate localities removed");
    Ok(())
}

#[derive(Serialize)]
struct SplitManifest {
    seed: u64,
    ratios: [f64; 3],
    input: String,
    train: usize,
    validation: usize,
    test: usize,
}

pub fn split_cmd(ctx: &Context, records: Option<PathBuf>) -> Result<(), CliError> {
    let cfg = &ctx.config;
    let path = ctx.records_path(records);
    let all = ctx.require_records(&path)?;
    let parts = split(&all, cfg.split.ratios, cfg.seed).map_err(dataset_err)?;
    ctx.save_config("split")?;
    save_records(&ctx.out("train.jsonl"), &parts.train)?;
    save_records(&ctx.out("validation.jsonl"), &parts.validation)?;
    save_records(&ctx.out("test.jsonl"), &parts.test)?;
    write_json(
        &ctx.out("split_manifest.json"),
        &SplitManifest {
            seed: parts.seed,
            ratios: parts.ratios,
            input: path.display().to_string(),
            train: parts.train.len(),
            validation: parts.validation.len(),
            test: parts.test.len(),
        },
    )?;
    eprintln!(
        "train {}, validation {}, test {}",
        parts.train.len(),
        parts.validation.len(),
        parts.test.len()
    );
    Ok(())
}

#[derive(Serialize)]
struct MixManifestSource {
    file: String,
    fraction: f64,
    available: usize,
    taken: usize,
}

#[derive(Serialize)]
struct MixManifest {
    seed: u64,
    sources: Vec<MixManifestSource>,
    total: usize,
}

pub fn mix(ctx: &Context) -> Result<(), CliError> {
    let cfg = &ctx.config;
    if cfg.mix.sources.is_empty() {
        return Err(CliError::config("mix.sources is empty"));
    }
    let loaded: Vec<Vec<OccurrenceRecord>> = cfg
        .mix
        .sources
        .iter()
        .map(|s| load_records(&s.file))
        .collect::<Result<_, _>>()?;
    let sources: Vec<MixSource<'_>> = loaded
        .iter()
        .zip(&cfg.mix.sources)
        .map(|(records, s)| MixSource {
            records,
            fraction: s.fraction,
        })
        .collect();
    let mixed = mix_training_sets(&sources, cfg.seed).map_err(dataset_err)?;
    if mixed.is_empty() {
        return Err(CliError::empty("mixed training set is empty"));
    }
    ctx.save_config("mix")?;
    save_records(&ctx.out("mixed_train.jsonl"), &mixed)?;
    let manifest = MixManifest {
        seed: cfg.seed,
        sources: cfg
            .mix
            .sources
            .iter()
            .zip(&loaded)
            .map(|(s, records)| MixManifestSource {
                file: s.file.display().to_string(),
                fraction: s.fraction,
                available: records.len(),
                taken: dataset::floor_count(records.len(), s.fraction),
            })
            .collect(),
        total: mixed.len(),
    };
    write_json(&ctx.out("mix_manifest.json"), &manifest)?;
    eprintln!("{} records mixed", mixed.len());
    Ok(())
}

#[derive(Serialize)]
struct FoldManifest {
    seed: u64,
    k: usize,
    fold: usize,
    train: usize,
    test: usize,
}

pub fn kfold_cmd(ctx: &Context, records: Option<PathBuf>) -> Result<(), CliError> {
    let cfg = &ctx.config;
    let all = ctx.require_records(&ctx.records_path(records))?;
    let folds = kfold(&all, cfg.kfold.k, cfg.seed).map_err(dataset_err)?;
    ctx.save_config("kfold")?;
    for (i, fold) in folds.iter().enumerate() {
        let dir = ctx.out("folds").join(format!("fold_{i}"));
        save_records(&dir.join("train.jsonl"), &fold.train)?;
        save_records(&dir.join("test.jsonl"), &fold.test)?;
        write_json(
            &dir.join("manifest.json"),
            &FoldManifest {
                seed: cfg.seed,
                k: cfg.kfold.k,
                fold: i,
                train: fold.train.len(),
                test: fold.test.len(),
            },
        )?;
    }
    eprintln!("{} folds written", folds.len());
    Ok(())
}

fn region_override(ctx: &Context) -> Option<RegionContext> {
    let p = &ctx.config.prompt;
    if p.region_state.is_none() && p.region_country.is_none() {
        return None;
    }
    Some(RegionContext {
        state: p.region_state.clone().unwrap_or_default(),
        country: p.region_country.clone().unwrap_or_default(),
    })
}

pub fn export_finetune(
    ctx: &Context,
    records: Option<PathBuf>,
    mode: ExportMode,
    output: Option<PathBuf>,
) -> Result<(), CliError> {
    let all = ctx.require_records(&ctx.records_path(records))?;
    let name = match mode {
        ExportMode::Train => "finetune_train.jsonl",
        ExportMode::Test => "finetune_test.jsonl",
    };
    let data_path = output.unwrap_or_else(|| ctx.out(name));
    if let Some(parent) = data_path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent)?;
    }
    let fixed = region_override(ctx);
    let manifest = export_finetune_dataset(
        &all,
        |r| {
            fixed
                .clone()
                .unwrap_or_else(|| RegionContext::for_record(r))
        },
        &data_path,
        mode,
        ctx.config.seed,
        &ctx.config.finetune,
    )
    .map_err(|e| CliError::config(e.to_string()))?;
    ctx.save_config("export-finetune")?;
    eprintln!(
        "{} examples written to {}",
        manifest.count,
        data_path.display()
    );
    Ok(())
}

/// A seeded sample of `n` records in their original order.
pub fn sample_records(records: &[OccurrenceRecord], n: usize, seed: u64) -> Vec<OccurrenceRecord> {
    if n >= records.len() {
        return records.to_vec();
    }
    let mut order: Vec<usize> = (0..records.len()).collect();
    SeededShuffler::new(derive_seed(seed, SAMPLE_STREAM)).shuffle(&mut order);
    order.truncate(n);
    order.sort_unstable();
    order.into_iter().map(|i| records[i].clone()).collect()
}

fn llm_err(e: LlmError) -> CliError {
    match e {
        LlmError::MissingApiKey(_) | LlmError::Config(_) | LlmError::Log(_) => {
            CliError::config(e.to_string())
        }
        _ => CliError::upstream(e.to_string()),
    }
}

fn backend(ctx: &Context) -> Result<Box<dyn CompletionBackend>, CliError> {
    let b = &ctx.config.backend;
    match b.kind {
        BackendKind::Http => Ok(Box::new(HttpBackend::new(&b.client()).map_err(llm_err)?)),
        BackendKind::Mock => {
            let mut mock = match &b.mock_responses {
                Some(path) => MockBackend::load(b.model.clone(), open(path)?).map_err(llm_err)?,
                None => MockBackend::new(b.model.clone()),
            };
            if let Some(fallback) = &b.mock_fallback {
                mock = mock.with_fallback(fallback.clone());
            }
            Ok(Box::new(mock))
        }
    }
}

fn write_predictions(
    ctx: &Context,
    path: &Path,
    predictions: &mut [Prediction],
) -> Result<(), CliError> {
    if !ctx.config.record_timing {
        for p in predictions.iter_mut() {
            p.latency_ms = 0;
        }
    }
    let mut out = create(path)?;
    write_log(&mut out, predictions)?;
    out.flush()?;
    Ok(())
}

fn report_counts(predictions: &[Prediction]) {
    let mut counts: Vec<(String, usize)> = Vec::new();
    for p in predictions {
        let status = p.status();
        match counts.iter_mut().find(|(s, _)| *s == status) {
            Some((_, n)) => *n += 1,
            None => counts.push((status, 1)),
        }
    }
    let parts: Vec<String> = counts.iter().map(|(s, n)| format!("{s} {n}")).collect();
    eprintln!("{} predictions: {}", predictions.len(), parts.join(", "));
}

pub fn predict(
    ctx: &Context,
    records: Option<PathBuf>,
    sample: Option<usize>,
    output: Option<PathBuf>,
) -> Result<(), CliError> {
    let cfg = &ctx.config;
    let mut all = ctx.require_records(&ctx.records_path(records))?;
    if let Some(n) = sample {
        all = sample_records(&all, n, cfg.seed);
    }
    let pattern: PromptPattern = cfg.prompt.pattern;
    let backend = backend(ctx)?;
    let cache = match &cfg.backend.cache {
        Some(path) => Some(
            ResponseCache::open(path)
                .map_err(|e| CliError::config(format!("{}: {e}", path.display())))?,
        ),
        None => None,
    };
    let options = BatchOptions {
        parallelism: cfg.backend.parallelism,
        cache: cache.as_ref(),
        region_override: region_override(ctx),
    };
    let mut predictions =
        batch_predict(&all, pattern, backend.as_ref(), &options, None).map_err(llm_err)?;
    ctx.save_config("predict")?;
    let path = output.unwrap_or_else(|| ctx.out(&format!("predictions_{}.jsonl", pattern.name())));
    write_predictions(ctx, &path, &mut predictions)?;
    report_counts(&predictions);
    Ok(())
}

fn gaz_err(e: GazetteerError) -> CliError {
    match e {
        GazetteerError::InvalidFile(_) | GazetteerError::InvalidParams(_) => {
            CliError::config(e.to_string())
        }
        _ => CliError::upstream(e.to_string()),
    }
}

fn run_with<G: Gazetteer>(
    ctx: &Context,
    records: &[OccurrenceRecord],
    ner: &dyn PlaceNameRecognizer,
    gazetteer: G,
) -> Result<Vec<Prediction>, CliError> {
    let g = &ctx.config.gazetteer;
    let params = BaselineParams {
        dbscan: ctx.config.dbscan,
        max_rows: g.max_rows,
    };
    let run = |gaz: &dyn Gazetteer| {
        run_baseline(records, ner, gaz, &params, g.parallelism)
            .into_iter()
            .map(|o| {
                if o.spans_antimeridian {
                    log::warn!(
                        "record {}: chosen cluster spans the antimeridian",
                        o.prediction.record_id
                    );
                }
                o.prediction
            })
            .collect()
    };
    Ok(match &g.cache {
        Some(path) => {
            let cached = CachedGazetteer::open(gazetteer, path)
                .map_err(|e| CliError::config(format!("{}: {e}", path.display())))?;
            run(&cached)
        }
        None => run(&gazetteer),
    })
}

pub fn baseline(
    ctx: &Context,
    records: Option<PathBuf>,
    output: Option<PathBuf>,
) -> Result<(), CliError> {
    let g = &ctx.config.gazetteer;
    let all = ctx.require_records(&ctx.records_path(records))?;
    let ner = ctx.recognizer()?;
    let timeout = Duration::from_secs_f64(g.timeout_secs);
    let mut predictions = match g.source {
        GazetteerKind::Local => run_with(ctx, &all, ner.as_ref(), ctx.local_gazetteer()?)?,
        GazetteerKind::Geonames => {
            let user = std::env::var(&g.geonames_username_env).map_err(|_| {
                CliError::config(format!(
                    "environment variable {} is not set",
                    g.geonames_username_env
                ))
            })?;
            let client = GeoNamesClient::new(&g.geonames_url, &user, timeout).map_err(gaz_err)?;
            run_with(ctx, &all, ner.as_ref(), client)?
        }
        GazetteerKind::Nominatim => {
            let client = NominatimClient::new(
                &g.nominatim_url,
                &g.user_agent,
                g.nominatim_rate_limit,
                timeout,
            )
            .map_err(gaz_err)?;
            run_with(ctx, &all, ner.as_ref(), client)?
        }
    };
    ctx.save_config("baseline")?;
    let path = output.unwrap_or_else(|| ctx.out("predictions_baseline.jsonl"));
    write_predictions(ctx, &path, &mut predictions)?;
    report_counts(&predictions);
    if predictions.iter().all(|p| p.error.is_some()) {
        let first = predictions[0].error.clone().unwrap_or_default();
        return Err(CliError::upstream(format!(
            "every lookup failed; first error: {first}"
        )));
    }
    Ok(())
}

fn eval_err(e: EvalError) -> CliError {
    match e {
        EvalError::EmptyReport | EvalError::TooFewPoints(..) | EvalError::ZeroVariance => {
            CliError::empty(e.to_string())
        }
        _ => CliError::config(e.to_string()),
    }
}

fn load_predictions(path: &Path) -> Result<Vec<Prediction>, CliError> {
    read_log(open(path)?).map_err(|e| CliError::config(format!("{}: {e}", path.display())))
}

fn write_reports(
    ctx: &Context,
    stem: &str,
    summaries: &[EvaluationSummary],
) -> Result<(), CliError> {
    for &format in &ctx.config.eval.formats {
        let text = render_report(summaries, format).map_err(eval_err)?;
        let path = ctx.out(&format!("{stem}.{}", format.extension()));
        let mut out = create(&path)?;
        out.write_all(text.as_bytes())?;
        out.flush()?;
    }
    Ok(())
}

#[derive(Serialize)]
struct CorrelationLine {
    slice: String,
    #[serde(flatten)]
    result: CorrelationResult,
}

/// Slice label for a log: the method label of its first prediction, or the
/// file stem for an empty log.
fn slice_label(path: &Path, predictions: &[Prediction]) -> String {
    predictions
        .first()
        .map(|p| p.method.label())
        .unwrap_or_else(|| {
            path.file_stem()
                .unwrap_or_default()
                .to_string_lossy()
                .into_owned()
        })
}

pub fn evaluate(
    ctx: &Context,
    predictions: &[PathBuf],
    records: Option<PathBuf>,
    by_length: bool,
) -> Result<(), CliError> {
    let cfg = &ctx.config;
    if predictions.is_empty() {
        return Err(CliError::config("no prediction logs given"));
    }
    let truth = load_records(&ctx.records_path(records))?;
    let truths = truths_from_records(&truth);
    let mut summaries = Vec::new();
    let mut by_length_rows = Vec::new();
    let mut correlations = Vec::new();
    let mut labels: HashMap<String, usize> = HashMap::new();
    for path in predictions {
        let preds = load_predictions(path)?;
        let mut label = slice_label(path, &preds);
        let seen = labels.entry(label.clone()).or_insert(0);
        *seen += 1;
        if *seen > 1 {
            label = format!("{label} ({})", file_name(path));
        }
        summaries.push(summarize(&label, &preds, &truths, &cfg.eval.radii).map_err(eval_err)?);
        if by_length {
            let bins =
                summarize_by_length(&preds, &truth, &cfg.eval.length_boundaries, &cfg.eval.radii)
                    .map_err(eval_err)?;
            by_length_rows.extend(bins.into_iter().map(|mut b| {
                b.summary.label = format!("{label} / {}", b.summary.label);
                b.summary
            }));
            match length_error_correlation(&preds, &truth, PValueMethod::TApprox) {
                Ok(result) => correlations.push(CorrelationLine {
                    slice: label.clone(),
                    result,
                }),
                Err(e) => log::warn!("{label}: no length correlation: {e}"),
            }
        }
    }
    if summaries.iter().all(|s| s.n_total == 0) {
        return Err(CliError::empty("every prediction log is empty"));
    }
    ctx.save_config("evaluate")?;
    write_reports(ctx, "report", &summaries)?;
    if by_length {
        write_reports(ctx, "report_by_length", &by_length_rows)?;
        write_json(&ctx.out("length_correlation.json"), &correlations)?;
    }
    for s in &summaries {
        let acc: Vec<String> = s
            .accuracy_at
            .iter()
            .map(|a| format!("acc@{}km {:.2}%", a.radius_km, a.fraction * 100.0))
            .collect();
        eprintln!("{}: n={} {}", s.label, s.n_total, acc.join(" "));
    }
    Ok(())
}

#[derive(Serialize)]
struct IndicatorCorrelation {
    indicator: String,
    n: usize,
    rho: Option<f64>,
    p_value: Option<f64>,
}

type Count = fn(&AnalysisRow) -> usize;

pub fn analyze(
    ctx: &Context,
    records: Option<PathBuf>,
    predictions: Option<PathBuf>,
) -> Result<(), CliError> {
    let all = ctx.require_records(&ctx.records_path(records))?;
    let lex = ctx.lexicon()?;
    let ner = ctx.recognizer()?;
    let rows = all
        .iter()
        .map(|r| analyze_record(r, &lex, ner.as_ref()))
        .collect::<Result<Vec<_>, _>>()
        .map_err(gaz_err)?;
    ctx.save_config("analyze")?;
    let mut out = create(&ctx.out("indicators.csv"))?;
    write_analysis_csv(&mut out, &rows).map_err(|e| CliError::config(e.to_string()))?;
    out.flush()?;

    if let Some(path) = predictions {
        let preds = load_predictions(&path)?;
        let truths = truths_from_records(&all);
        let errors: HashMap<&str, f64> = preds
            .iter()
            .filter_map(|p| {
                let truth = truths.get(&p.record_id)?;
                let point = p.point()?;
                Some((
                    p.record_id.as_str(),
                    georef_core::eval::simple_accuracy_error(point, *truth).km(),
                ))
            })
            .collect();
        let paired: Vec<_> = rows
            .iter()
            .filter_map(|r| Some((r, *errors.get(r.id.as_str())?)))
            .collect();
        let sae: Vec<f64> = paired.iter().map(|(_, e)| *e).collect();
        let columns: [(&str, Count); 5] = [
            ("length_chars", |r| r.length_chars),
            ("n_place_names", |r| r.n_place_names),
            ("n_directional", |r| r.n_directional),
            ("n_distance", |r| r.n_distance),
            ("n_topological", |r| r.n_topological),
        ];
        let result: Vec<IndicatorCorrelation> = columns
            .iter()
            .map(|(name, get)| {
                let xs: Vec<f64> = paired.iter().map(|(r, _)| get(r) as f64).collect();
                let c = georef_core::eval::spearman(&xs, &sae).ok();
                IndicatorCorrelation {
                    indicator: name.to_string(),
                    n: xs.len(),
                    rho: c.map(|c| c.rho),
                    p_value: c.map(|c| c.p_value),
                }
            })
            .collect();
        write_json(&ctx.out("indicator_correlation.json"), &result)?;
    }
    eprintln!("{} records analyzed", rows.len());
    Ok(())
}

pub fn perturb(ctx: &Context, records: Option<PathBuf>) -> Result<(), CliError> {
    let all = ctx.require_records(&ctx.records_path(records))?;
    let lex = ctx.lexicon()?;
    let (perturbed, diffs) = perturb_records(&all, &lex);
    ctx.save_config("perturb")?;
    save_records(&ctx.out("perturbed.jsonl"), &perturbed)?;
    let mut out = create(&ctx.out("perturb_diff.jsonl"))?;
    for d in &diffs {
        serde_json::to_writer(&mut out, d).map_err(|e| CliError::config(e.to_string()))?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    eprintln!("{} of {} localities changed", diffs.len(), all.len());
    Ok(())
}
