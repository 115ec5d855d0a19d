//! Prompt patterns, fine-tuning export, and coordinate extraction from
//! model responses.
//!
//! Templates live in `assets/prompts/` and are compiled in. Placeholders:
//!
//! - `{locality}`: the locality text, verbatim
//! - `{locality_sentence}`: the locality with a terminal period added when it
//!   does not already end in sentence punctuation
//! - `{region}`: `"<state/province>, <country name>"`, or the country alone
//! - `{country}`: the country name

mod countries;
mod finetune;
mod parse;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::OccurrenceRecord;

pub use countries::country_name;
pub use finetune::{
    export_finetune_dataset, render_finetune_example, ExportManifest, ExportMode,
    FinetuneExportConfig, FinetuneLine,
};
pub use parse::{parse_coordinates, ParseFailure, ParsedCoordinates};

#[derive(Debug, Error)]
pub enum PromptError {
    #[error("pattern {0} needs a region but record `{1}` has neither state nor country")]
    MissingContext(PromptPattern, String),
    #[error("record `{0}` has an empty locality")]
    EmptyLocality(String),
    #[error("nothing to export")]
    EmptyExport,
    #[error("unknown prompt pattern `{0}`")]
    UnknownPattern(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PromptPattern {
    ZeroShot,
    ZeroShotCot,
    Cot,
    ContextControl,
    Persona,
    ContextControlVariant2,
    ContextControlPersonaVariant,
}

impl PromptPattern {
    pub const ALL: [PromptPattern; 7] = [
        Self::ZeroShot,
        Self::ZeroShotCot,
        Self::Cot,
        Self::ContextControl,
        Self::Persona,
        Self::ContextControlVariant2,
        Self::ContextControlPersonaVariant,
    ];

    pub fn template(self) -> &'static str {
        match self {
            Self::ZeroShot => include_str!("../../assets/prompts/zero_shot.txt"),
            Self::ZeroShotCot => include_str!("../../assets/prompts/zero_shot_cot.txt"),
            Self::Cot => include_str!("../../assets/prompts/chain_of_thought.txt"),
            Self::ContextControl => include_str!("../../assets/prompts/context_control.txt"),
            Self::Persona => include_str!("../../assets/prompts/persona.txt"),
            Self::ContextControlVariant2 => {
                include_str!("../../assets/prompts/context_control_v2.txt")
            }
            Self::ContextControlPersonaVariant => {
                include_str!("../../assets/prompts/context_control_persona.txt")
            }
        }
    }

    pub fn needs_region(self) -> bool {
        matches!(
            self,
            Self::ContextControl
                | Self::ContextControlVariant2
                | Self::ContextControlPersonaVariant
        )
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::ZeroShot => "zero-shot",
            Self::ZeroShotCot => "zero-shot-cot",
            Self::Cot => "cot",
            Self::ContextControl => "context-control",
            Self::Persona => "persona",
            Self::ContextControlVariant2 => "context-control-variant2",
            Self::ContextControlPersonaVariant => "context-control-persona-variant",
        }
    }
}

impl fmt::Display for PromptPattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PromptPattern {
    type Err = PromptError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|p| p.name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| PromptError::UnknownPattern(s.to_string()))
    }
}

/// Regional context substituted into context-bearing prompts.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct RegionContext {
    pub state: String,
    pub country: String,
}

impl RegionContext {
    /// Country name resolved from the record's ISO code; unknown codes are
    /// used as-is.
    pub fn for_record(record: &OccurrenceRecord) -> Self {
        let code = record.country_code.trim();
        Self {
            state: record.state_province.trim().to_string(),
            country: country_name(code).unwrap_or(code).to_string(),
        }
    }

    pub fn label(&self) -> String {
        match (self.state.is_empty(), self.country.is_empty()) {
            (false, false) => format!("{}, {}", self.state, self.country),
            (true, _) => self.country.clone(),
            (false, true) => self.state.clone(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.state.is_empty() && self.country.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RenderedPrompt {
    pub pattern: PromptPattern,
    pub text: String,
    pub record_id: String,
}

fn as_sentence(locality: &str) -> String {
    if locality.ends_with(['.', '!', '?']) {
        locality.to_string()
    } else {
        format!("{locality}.")
    }
}

pub fn render_prompt(
    pattern: PromptPattern,
    record: &OccurrenceRecord,
    region: &RegionContext,
) -> Result<RenderedPrompt, PromptError> {
    if record.locality.trim().is_empty() {
        return Err(PromptError::EmptyLocality(record.id.clone()));
    }
    if pattern.needs_region() && region.is_empty() {
        return Err(PromptError::MissingContext(pattern, record.id.clone()));
    }
    let country = if region.country.is_empty() {
        region.label()
    } else {
        region.country.clone()
    };
    // single pass so substituted text is never rescanned for placeholders
    let template = pattern.template();
    let mut text = String::with_capacity(template.len() + record.locality.len() + 64);
    let mut rest = template;
    while let Some(open) = rest.find('{') {
        text.push_str(&rest[..open]);
        let after = &rest[open..];
        let close = after.find('}').map(|c| c + 1).unwrap_or(after.len());
        match &after[..close] {
            "{locality}" => text.push_str(&record.locality),
            "{locality_sentence}" => text.push_str(&as_sentence(&record.locality)),
            "{region}" => text.push_str(&region.label()),
            "{country}" => text.push_str(&country),
            other => text.push_str(other),
        }
        rest = &after[close..];
    }
    text.push_str(rest);
    Ok(RenderedPrompt {
        pattern,
        text,
        record_id: record.id.clone(),
    })
}
