use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{render_prompt, PromptError, PromptPattern, RegionContext};
use crate::dataset::OccurrenceRecord;

/// Training hyperparameters carried as metadata next to an export. Nothing
/// in this crate trains a model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FinetuneExportConfig {
    pub learning_rate: f64,
    pub batch_size: u32,
    pub lora_rank: u32,
    pub lora_alpha: u32,
    pub epochs: u32,
}

impl Default for FinetuneExportConfig {
    fn default() -> Self {
        Self {
            learning_rate: 2e-4,
            batch_size: 32,
            lora_rank: 32,
            lora_alpha: 64,
            epochs: 3,
        }
    }
}

/// Training examples carry the answer line; test examples stop at the prompt.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExportMode {
    Train,
    Test,
}

/// Context Control prompt, plus `Coordinates: <lat>, <lon>` at six decimals
/// in [`ExportMode::Train`].
pub fn render_finetune_example(
    record: &OccurrenceRecord,
    region: &RegionContext,
    mode: ExportMode,
) -> Result<String, PromptError> {
    let prompt = render_prompt(PromptPattern::ContextControl, record, region)?;
    Ok(match mode {
        ExportMode::Test => prompt.text,
        ExportMode::Train => format!(
            "{}\nCoordinates: {:.6}, {:.6}",
            prompt.text,
            record.truth.lat(),
            record.truth.lon()
        ),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FinetuneLine {
    pub id: String,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExportManifest {
    pub count: usize,
    pub seed: u64,
    pub mode: ExportMode,
    pub pattern: PromptPattern,
    pub data_file: String,
    pub sha256: String,
    pub hyperparameters: FinetuneExportConfig,
}

impl ExportManifest {
    pub fn path_for(data_path: &Path) -> PathBuf {
        let mut name = data_path.file_name().unwrap_or_default().to_os_string();
        name.push(".manifest.json");
        data_path.with_file_name(name)
    }
}

/// Writes one `{id, text}` JSON object per line to `data_path` and a manifest
/// beside it (see [`ExportManifest::path_for`]).
pub fn export_finetune_dataset(
    records: &[OccurrenceRecord],
    region_for: impl Fn(&OccurrenceRecord) -> RegionContext,
    data_path: &Path,
    mode: ExportMode,
    seed: u64,
    hyperparameters: &FinetuneExportConfig,
) -> Result<ExportManifest, PromptError> {
    if records.is_empty() {
        return Err(PromptError::EmptyExport);
    }
    let mut body = Vec::new();
    for record in records {
        let line = FinetuneLine {
            id: record.id.clone(),
            text: render_finetune_example(record, &region_for(record), mode)?,
        };
        serde_json::to_writer(&mut body, &line).map_err(std::io::Error::from)?;
        body.push(b'\n');
    }
    fs::write(data_path, &body)?;

    let manifest = ExportManifest {
        count: records.len(),
        seed,
        mode,
        pattern: PromptPattern::ContextControl,
        data_file: data_path
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_default(),
        sha256: hex::encode(Sha256::digest(&body)),
        hyperparameters: hyperparameters.clone(),
    };
    let json = serde_json::to_string_pretty(&manifest).map_err(std::io::Error::from)?;
    fs::write(ExportManifest::path_for(data_path), json + "\n")?;
    Ok(manifest)
}
