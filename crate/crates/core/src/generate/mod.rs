//! Respondent panel sources: a chat-completion LLM driven by the study prompt,
//! and a planted factor model with known parameters.

mod llm;
mod parse;
mod prompt;
mod synthetic;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use llm::{
    call_llm, generate_llm, replay_file, replay_transcript, Completion, LlmClient, LlmSettings, RequestContext,
    Transcript, TranscriptEntry, API_KEY_VAR,
};
pub use parse::{parse_table, ParseOutcome, Rejection};
pub use prompt::{render_prompt, PromptTemplate};
pub use synthetic::{
    generate_synthetic, generate_synthetic_sample, implied_phi, DemographicDraw, GroupBias, Lambda, PlantedModel,
    SyntheticSample,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Source {
    Llm,
    #[default]
    Synthetic,
}

impl fmt::Display for Source {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Source::Llm => "llm",
            Source::Synthetic => "synthetic",
        })
    }
}

impl FromStr for Source {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "llm" => Ok(Source::Llm),
            "synthetic" => Ok(Source::Synthetic),
            other => Err(Error::InvalidArgument(format!(
                "source `{other}` (expected llm or synthetic)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", default, deny_unknown_fields)]
pub struct GenerationConfig {
    pub source: Source,
    pub batches: usize,
    pub rows_per_batch: usize,
    /// Synthetic source only.
    pub seed: u64,
    pub llm: LlmSettings,
}

impl Default for GenerationConfig {
    fn default() -> Self {
        GenerationConfig {
            source: Source::Synthetic,
            batches: 20,
            rows_per_batch: 20,
            seed: 0,
            llm: LlmSettings::default(),
        }
    }
}

impl GenerationConfig {
    pub fn target_size(&self) -> usize {
        self.batches * self.rows_per_batch
    }

    pub fn check(&self) -> Result<()> {
        if self.batches == 0 || self.rows_per_batch == 0 {
            return Err(Error::InvalidArgument(
                "batches and rows per batch must be at least 1".into(),
            ));
        }
        Ok(())
    }
}
