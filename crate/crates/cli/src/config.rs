//! Run configuration: a TOML file plus `--section.key value` overrides.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use georef_core::dataset::ColumnMap;
use georef_core::eval::{ReportFormat, DEFAULT_LENGTH_BOUNDARIES, DEFAULT_RADII_KM};
use georef_core::gazetteer::DbscanParams;
use georef_core::llm::BackendConfig;
use georef_core::prompt::{FinetuneExportConfig, PromptPattern};

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub output_dir: PathBuf,
    /// When false, latencies in prediction logs are written as 0 so reruns
    /// produce identical files.
    pub record_timing: bool,
    pub dataset: DatasetConfig,
    pub split: SplitConfig,
    pub mix: MixConfig,
    pub kfold: KfoldConfig,
    pub prompt: PromptConfig,
    pub finetune: FinetuneExportConfig,
    pub backend: BackendSection,
    pub gazetteer: GazetteerConfig,
    pub dbscan: DbscanParams,
    pub eval: EvalConfig,
    pub analysis: AnalysisConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 42,
            output_dir: PathBuf::from("out"),
            record_timing: true,
            dataset: DatasetConfig::default(),
            split: SplitConfig::default(),
            mix: MixConfig::default(),
            kfold: KfoldConfig::default(),
            prompt: PromptConfig::default(),
            finetune: FinetuneExportConfig::default(),
            backend: BackendSection::default(),
            gazetteer: GazetteerConfig::default(),
            dbscan: DbscanParams::default(),
            eval: EvalConfig::default(),
            analysis: AnalysisConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct DatasetConfig {
    /// Raw occurrence file for `ingest`.
    pub input: Option<PathBuf>,
    /// Canonical record file used by later steps.
    pub records: Option<PathBuf>,
    pub source_dataset: String,
    pub columns: ColumnMap,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitConfig {
    pub ratios: [f64; 3],
}

impl Default for SplitConfig {
    fn default() -> Self {
        Self {
            ratios: [0.7, 0.15, 0.15],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MixSourceConfig {
    pub file: PathBuf,
    pub fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct MixConfig {
    pub sources: Vec<MixSourceConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KfoldConfig {
    pub k: usize,
}

impl Default for KfoldConfig {
    fn default() -> Self {
        Self { k: 5 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PromptConfig {
    pub pattern: PromptPattern,
    /// Region used for every record instead of its own state and country.
    pub region_state: Option<String>,
    pub region_country: Option<String>,
}

impl Default for PromptConfig {
    fn default() -> Self {
        Self {
            pattern: PromptPattern::ContextControl,
            region_state: None,
            region_country: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BackendKind {
    Mock,
    Http,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BackendSection {
    pub kind: BackendKind,
    /// JSON lines of `{"prompt", "response"}` for the mock backend.
    pub mock_responses: Option<PathBuf>,
    pub mock_fallback: Option<String>,
    pub parallelism: usize,
    /// Response cache file; reruns against a filled cache make no requests.
    pub cache: Option<PathBuf>,
    pub base_url: String,
    pub model: String,
    /// Environment variable holding the API key.
    pub api_key_env: Option<String>,
    pub temperature: f64,
    pub max_tokens: u32,
    pub timeout_secs: f64,
    pub max_retries: u32,
    pub rate_limit: Option<f64>,
    pub backoff_base_ms: u64,
}

impl Default for BackendSection {
    fn default() -> Self {
        let client = BackendConfig::default();
        Self {
            kind: BackendKind::Mock,
            mock_responses: None,
            mock_fallback: None,
            parallelism: 4,
            cache: None,
            base_url: client.base_url,
            model: client.model,
            api_key_env: client.api_key_env,
            temperature: client.temperature,
            max_tokens: client.max_tokens,
            timeout_secs: client.timeout_secs,
            max_retries: client.max_retries,
            rate_limit: client.rate_limit,
            backoff_base_ms: client.backoff_base_ms,
        }
    }
}

impl BackendSection {
    pub fn client(&self) -> BackendConfig {
        BackendConfig {
            base_url: self.base_url.clone(),
            model: self.model.clone(),
            api_key_env: self.api_key_env.clone(),
            temperature: self.temperature,
            max_tokens: self.max_tokens,
            timeout_secs: self.timeout_secs,
            max_retries: self.max_retries,
            rate_limit: self.rate_limit,
            backoff_base_ms: self.backoff_base_ms,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GazetteerKind {
    Local,
    Geonames,
    Nominatim,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NerKind {
    Dictionary,
    Remote,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GazetteerConfig {
    pub source: GazetteerKind,
    /// CSV with `name,lat,lon,country_code,admin1,feature_class`. Also the
    /// dictionary for place-name matching.
    pub local_file: Option<PathBuf>,
    pub geonames_url: String,
    /// Environment variable holding the GeoNames user name.
    pub geonames_username_env: String,
    pub nominatim_url: String,
    pub user_agent: String,
    pub nominatim_rate_limit: f64,
    pub timeout_secs: f64,
    /// Lookup cache file.
    pub cache: Option<PathBuf>,
    pub ner: NerKind,
    pub ner_url: Option<String>,
    /// Dictionary names shorter than this are ignored.
    pub min_name_chars: usize,
    pub max_rows: usize,
    pub parallelism: usize,
}

impl Default for GazetteerConfig {
    fn default() -> Self {
        Self {
            source: GazetteerKind::Local,
            local_file: None,
            geonames_url: "http://api.geonames.org".into(),
            geonames_username_env: "GEONAMES_USERNAME".into(),
            nominatim_url: "https://nominatim.openstreetmap.org".into(),
            user_agent: concat!("georef/", env!("CARGO_PKG_VERSION")).into(),
            nominatim_rate_limit: 1.0,
            timeout_secs: 30.0,
            cache: None,
            ner: NerKind::Dictionary,
            ner_url: None,
            min_name_chars: 3,
            max_rows: 10,
            parallelism: 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    pub radii: Vec<f64>,
    pub length_boundaries: Vec<usize>,
    pub formats: Vec<ReportFormat>,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            radii: DEFAULT_RADII_KM.to_vec(),
            length_boundaries: DEFAULT_LENGTH_BOUNDARIES.to_vec(),
            formats: vec![
                ReportFormat::Csv,
                ReportFormat::Json,
                ReportFormat::Markdown,
            ],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct AnalysisConfig {
    /// Extra lexicon file merged into the built-in one.
    pub lexicon: Option<PathBuf>,
}

/// `(dotted.key, raw value)` pairs from the command line.
pub type Overrides = Vec<(String, String)>;

/// Pulls `--a.b value`, `--a.b=value`, `--seed value`, `--output_dir value`
/// and `--record_timing value` out of `args`, returning the rest for clap.
pub fn extract_overrides(args: Vec<String>) -> Result<(Vec<String>, Overrides), CliError> {
    const TOP_LEVEL: [&str; 3] = ["seed", "output_dir", "record_timing"];
    let mut rest = Vec::new();
    let mut overrides = Vec::new();
    let mut iter = args.into_iter();
    if let Some(program) = iter.next() {
        rest.push(program);
    }
    while let Some(arg) = iter.next() {
        let Some(flag) = arg.strip_prefix("--") else {
            rest.push(arg);
            continue;
        };
        let (key, inline) = match flag.split_once('=') {
            Some((k, v)) => (k.to_string(), Some(v.to_string())),
            None => (flag.to_string(), None),
        };
        if !(key.contains('.') || TOP_LEVEL.contains(&key.as_str())) {
            rest.push(arg);
            continue;
        }
        let value = match inline {
            Some(v) => v,
            None => iter
                .next()
                .ok_or_else(|| CliError::config(format!("--{key} needs a value")))?,
        };
        overrides.push((key, value));
    }
    Ok((rest, overrides))
}

/// Interprets an override value as a TOML literal when it parses as one
/// (numbers, booleans, arrays), otherwise as a plain string.
fn parse_value(raw: &str) -> toml::Value {
    let wrapped = format!("v = {raw}");
    match wrapped.parse::<toml::Table>() {
        Ok(mut t) => t
            .remove("v")
            .unwrap_or_else(|| toml::Value::String(raw.into())),
        Err(_) => toml::Value::String(raw.to_string()),
    }
}

fn apply_override(root: &mut toml::Table, key: &str, value: &str) -> Result<(), CliError> {
    let parts: Vec<&str> = key.split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(CliError::config(format!("bad override key `{key}`")));
    }
    let (last, path) = parts.split_last().expect("split yields one part");
    let mut table = root;
    for part in path {
        let entry = table
            .entry(part.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        table = entry
            .as_table_mut()
            .ok_or_else(|| CliError::config(format!("`{part}` in `{key}` is not a section")))?;
    }
    table.insert(last.to_string(), parse_value(value));
    Ok(())
}

impl RunConfig {
    /// Reads `path` (if any), applies overrides, and validates the result.
    pub fn load(path: Option<&Path>, overrides: &[(String, String)]) -> Result<Self, CliError> {
        let mut table = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| CliError::config(format!("reading {}: {e}", p.display())))?;
                text.parse::<toml::Table>()
                    .map_err(|e| CliError::config(format!("{}: {e}", p.display())))?
            }
            None => toml::Table::new(),
        };
        for (key, value) in overrides {
            apply_override(&mut table, key, value)?;
        }
        let config: RunConfig = toml::Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| CliError::config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    fn validate(&self) -> Result<(), CliError> {
        self.backend
            .client()
            .validate()
            .map_err(|e| CliError::config(e.to_string()))?;
        if self.backend.parallelism == 0 || self.gazetteer.parallelism == 0 {
            return Err(CliError::config("parallelism must be at least 1"));
        }
        self.dbscan
            .validate()
            .map_err(|e| CliError::config(e.to_string()))?;
        if self.eval.radii.is_empty()
            || self.eval.radii.iter().any(|r| !(r.is_finite() && *r > 0.0))
        {
            return Err(CliError::config("eval.radii must be positive numbers"));
        }
        if self.eval.formats.is_empty() {
            return Err(CliError::config("eval.formats is empty"));
        }
        Ok(())
    }

    /// The resolved configuration as TOML.
    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("configuration serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn args(list: &[&str]) -> Vec<String> {
        list.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn overrides_are_split_from_clap_args() {
        let (rest, over) = extract_overrides(args(&[
            "georef",
            "--config",
            "c.toml",
            "split",
            "--split.ratios",
            "[0.8, 0.1, 0.1]",
            "--seed=7",
            "--dbscan.eps_km",
            "10",
        ]))
        .unwrap();
        assert_eq!(rest, args(&["georef", "--config", "c.toml", "split"]));
        assert_eq!(over.len(), 3);
        let cfg = RunConfig::load(None, &over).unwrap();
        assert_eq!(cfg.seed, 7);
        assert_eq!(cfg.split.ratios, [0.8, 0.1, 0.1]);
        assert_eq!(cfg.dbscan.eps_km, 10.0);
    }

    #[test]
    fn string_and_enum_values() {
        let over = vec![
            ("backend.model".to_string(), "gpt-4o".to_string()),
            ("backend.kind".to_string(), "http".to_string()),
            ("prompt.pattern".to_string(), "persona".to_string()),
        ];
        let cfg = RunConfig::load(None, &over).unwrap();
        assert_eq!(cfg.backend.model, "gpt-4o");
        assert_eq!(cfg.backend.kind, BackendKind::Http);
        assert_eq!(cfg.prompt.pattern, PromptPattern::Persona);
    }

    #[test]
    fn unknown_keys_and_bad_values_are_config_errors() {
        let typo = vec![("dbscan.epsilon".to_string(), "3".to_string())];
        assert_eq!(RunConfig::load(None, &typo).unwrap_err().exit_code(), 2);
        let bad = vec![("dbscan.min_pts".to_string(), "0".to_string())];
        assert_eq!(RunConfig::load(None, &bad).unwrap_err().exit_code(), 2);
        assert!(extract_overrides(args(&["georef", "--seed"])).is_err());
    }

    #[test]
    fn resolved_config_round_trips() {
        let cfg = RunConfig::default();
        let text = cfg.to_toml();
        let back: RunConfig = toml::from_str(&text).unwrap();
        assert_eq!(back, cfg);
    }
}
